//! Toolpaths: ordered rapid, linear, arc and dwell moves.

use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Cw,
    Ccw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Move {
    Rapid {
        to: Point3,
    },
    Linear {
        to: Point3,
        feed: f64,
    },
    /// Arc in the XY plane; z moves linearly with the angle (helix) when the
    /// end z differs from the start z.
    Arc {
        to: Point3,
        center: Point2,
        sense: Sense,
        feed: f64,
    },
    Dwell {
        seconds: f64,
    },
}

impl Move {
    pub fn target(&self) -> Option<Point3> {
        match *self {
            Move::Rapid { to } | Move::Linear { to, .. } | Move::Arc { to, .. } => Some(to),
            Move::Dwell { .. } => None,
        }
    }

    pub fn is_cutting(&self) -> bool {
        matches!(self, Move::Linear { .. } | Move::Arc { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Toolpath {
    pub moves: Vec<Move>,
}

/// Signed sweep angle in radians from `start` to `end` around `center`,
/// positive counter-clockwise. A coincident start and end is a full turn.
pub fn arc_sweep(start: Point2, end: Point2, center: Point2, sense: Sense) -> f64 {
    let a0 = (start.y - center.y).atan2(start.x - center.x);
    let a1 = (end.y - center.y).atan2(end.x - center.x);
    let tau = std::f64::consts::TAU;
    match sense {
        Sense::Ccw => {
            let mut s = (a1 - a0).rem_euclid(tau);
            if s <= 1e-12 {
                s = tau;
            }
            s
        }
        Sense::Cw => {
            let mut s = (a0 - a1).rem_euclid(tau);
            if s <= 1e-12 {
                s = tau;
            }
            -s
        }
    }
}

/// Point on an arc (or helix) at parameter `t` in [0, 1].
pub fn arc_point(start: Point3, end: Point3, center: Point2, sweep: f64, t: f64) -> Point3 {
    if t >= 1.0 {
        return end;
    }
    let r = start.xy().distance(center);
    let a0 = (start.y - center.y).atan2(start.x - center.x);
    let a = a0 + sweep * t;
    Point3::new(
        center.x + r * a.cos(),
        center.y + r * a.sin(),
        start.z + (end.z - start.z) * t,
    )
}

/// Length of an arc move, including any helical z component.
pub fn arc_length(start: Point3, end: Point3, center: Point2, sweep: f64) -> f64 {
    let r = start.xy().distance(center);
    let planar = r * sweep.abs();
    (planar * planar + (end.z - start.z).powi(2)).sqrt()
}

impl Toolpath {
    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn first_target(&self) -> Option<Point3> {
        self.moves.iter().find_map(Move::target)
    }

    pub fn last_target(&self) -> Option<Point3> {
        self.moves.iter().rev().find_map(Move::target)
    }

    /// Polyline of the cutting moves in execution order, arcs flattened to
    /// the given chord tolerance. Rapids are left out, so consecutive cutting
    /// runs are joined directly.
    pub fn cutting_polyline(&self, chord_tol: f64) -> Vec<Point3> {
        let mut out: Vec<Point3> = Vec::new();
        let mut pos: Option<Point3> = None;
        for m in &self.moves {
            match *m {
                Move::Rapid { to } => pos = Some(to),
                Move::Linear { to, .. } => {
                    if let Some(p) = pos {
                        push_distinct(&mut out, p);
                    }
                    push_distinct(&mut out, to);
                    pos = Some(to);
                }
                Move::Arc {
                    to, center, sense, ..
                } => {
                    let start = pos.unwrap_or(to);
                    push_distinct(&mut out, start);
                    let sweep = arc_sweep(start.xy(), to.xy(), center, sense);
                    let r = start.xy().distance(center);
                    let n = arc_segments(r, sweep, chord_tol);
                    for i in 1..=n {
                        push_distinct(&mut out, arc_point(start, to, center, sweep, i as f64 / n as f64));
                    }
                    pos = Some(to);
                }
                Move::Dwell { .. } => {}
            }
        }
        out
    }
}

/// Number of chords needed so that no chord deviates from the arc by more
/// than `tol`.
pub fn arc_segments(radius: f64, sweep: f64, tol: f64) -> usize {
    if radius <= tol {
        return 1;
    }
    let step = 2.0 * (1.0 - tol / radius).clamp(-1.0, 1.0).acos();
    ((sweep.abs() / step).ceil() as usize).max(1)
}

fn push_distinct(out: &mut Vec<Point3>, p: Point3) {
    if out.last().map_or(true, |q| q.distance(p) > 1e-12) {
        out.push(p);
    }
}

/// Accumulates moves while tracking the current position, dropping moves
/// that would not go anywhere.
#[derive(Debug, Clone, Default)]
pub struct PathBuilder {
    moves: Vec<Move>,
    pos: Option<Point3>,
}

impl PathBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn position(&self) -> Option<Point3> {
        self.pos
    }

    fn same(&self, to: Point3) -> bool {
        self.pos.is_some_and(|p| p.distance(to) <= 1e-9)
    }

    pub fn rapid(&mut self, to: Point3) -> &mut Self {
        if !self.same(to) {
            self.moves.push(Move::Rapid { to });
            self.pos = Some(to);
        }
        self
    }

    pub fn linear(&mut self, to: Point3, feed: f64) -> &mut Self {
        if !self.same(to) {
            self.moves.push(Move::Linear { to, feed });
            self.pos = Some(to);
        }
        self
    }

    pub fn arc(&mut self, to: Point3, center: Point2, sense: Sense, feed: f64) -> &mut Self {
        self.moves.push(Move::Arc {
            to,
            center,
            sense,
            feed,
        });
        self.pos = Some(to);
        self
    }

    pub fn dwell(&mut self, seconds: f64) -> &mut Self {
        self.moves.push(Move::Dwell { seconds });
        self
    }

    pub fn extend(&mut self, moves: &[Move]) -> &mut Self {
        for m in moves {
            match *m {
                Move::Rapid { to } => self.rapid(to),
                Move::Linear { to, feed } => self.linear(to, feed),
                Move::Arc {
                    to,
                    center,
                    sense,
                    feed,
                } => self.arc(to, center, sense, feed),
                Move::Dwell { seconds } => self.dwell(seconds),
            };
        }
        self
    }

    pub fn finish(self) -> Toolpath {
        Toolpath { moves: self.moves }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_circle_sweep() {
        let c = Point2::new(0.0, 0.0);
        let p = Point2::new(1.0, 0.0);
        assert!((arc_sweep(p, p, c, Sense::Ccw) - std::f64::consts::TAU).abs() < 1e-12);
        let q = Point2::new(0.0, 1.0);
        assert!((arc_sweep(p, q, c, Sense::Cw) + 1.5 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn builder_skips_null_moves() {
        let mut b = PathBuilder::new();
        let p = Point3::new(1.0, 2.0, 3.0);
        b.rapid(p).rapid(p).linear(p, 100.0);
        assert_eq!(b.finish().moves.len(), 1);
    }

    #[test]
    fn flattened_arc_stays_within_tolerance() {
        let mut b = PathBuilder::new();
        b.rapid(Point3::new(10.0, 0.0, 0.0)).arc(
            Point3::new(0.0, 10.0, 0.0),
            Point2::new(0.0, 0.0),
            Sense::Ccw,
            100.0,
        );
        let pts = b.finish().cutting_polyline(0.01);
        for w in pts.windows(2) {
            let mid = w[0].lerp(w[1], 0.5);
            assert!(10.0 - mid.xy().norm() <= 0.01 + 1e-12);
        }
        assert_eq!(*pts.last().unwrap(), Point3::new(0.0, 10.0, 0.0));
    }
}
