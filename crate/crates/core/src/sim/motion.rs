//! Constant-velocity interpolation and the first-order position loop.

use super::interp::Segment;
use crate::geometry::Point3;
use crate::planner::toolpath::arc_point;

/// Commanded points of a segment at `dt` spacing in time: the start and
/// every sample strictly before the end time, then the exact end point.
pub fn interpolate_segment(seg: &Segment, dt: f64) -> Vec<Point3> {
    let len = seg.length();
    let v = seg.feed / 60.0;
    if len <= 1e-12 || v <= 0.0 {
        return vec![seg.end];
    }
    let duration = len / v;
    let n = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(n + 1);
    let sweep = seg.sweep();
    for k in 0..n {
        let t = (k as f64 * dt * v / len).min(1.0);
        out.push(match seg.center {
            Some(c) => arc_point(seg.start, seg.end, c, sweep, t),
            None => seg.start.lerp(seg.end, t),
        });
    }
    out.push(seg.end);
    out
}

/// Per-axis first-order lag `x' = kv (u - x)` driven by a command that is
/// linear between samples, integrated exactly over each step.
#[derive(Debug, Clone)]
pub struct Servo {
    beta: f64,
    ramp_gain: f64,
    actual: Option<Point3>,
    last_cmd: Option<Point3>,
}

impl Servo {
    pub fn new(kv: f64, dt: f64) -> Self {
        let beta = (-kv * dt).exp();
        Servo {
            beta,
            ramp_gain: 1.0 - (1.0 - beta) / (kv * dt),
            actual: None,
            last_cmd: None,
        }
    }

    pub fn actual(&self) -> Option<Point3> {
        self.actual
    }

    /// Advances one step to the new command and returns the new actual
    /// position. The first command initializes the loop at rest.
    pub fn step(&mut self, cmd: Point3) -> Point3 {
        let (Some(x), Some(u0)) = (self.actual, self.last_cmd) else {
            self.actual = Some(cmd);
            self.last_cmd = Some(cmd);
            return cmd;
        };
        let next = x * self.beta + u0 * (1.0 - self.beta) + (cmd - u0) * self.ramp_gain;
        self.actual = Some(next);
        self.last_cmd = Some(cmd);
        next
    }
}

/// Actual positions for a commanded sample sequence.
pub fn servo_track(commanded: &[Point3], kv: f64, dt: f64) -> Vec<Point3> {
    let mut s = Servo::new(kv, dt);
    commanded.iter().map(|&c| s.step(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::interp::SegmentKind;

    #[test]
    fn three_four_five_line() {
        let seg = Segment {
            block: 10,
            kind: SegmentKind::Linear,
            start: Point3::new(0.0, 0.0, 0.0),
            end: Point3::new(30.0, 40.0, 0.0),
            center: None,
            feed: 500.0,
        };
        let pts = interpolate_segment(&seg, 1e-3);
        assert_eq!(pts.len(), 6001);
        assert_eq!(*pts.last().unwrap(), seg.end);
    }

    #[test]
    fn stationary_command_has_no_error() {
        let p = Point3::new(1.0, 2.0, 3.0);
        for a in servo_track(&vec![p; 100], 30.0, 1e-3) {
            assert_eq!(a, p);
        }
    }
}
