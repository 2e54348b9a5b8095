//! Parallel back-and-forth area clearing over convex regions.

use crate::geometry::{self, Point2};

/// Pass offsets across an extent `h`: every multiple of the stepover below
/// `h`, then a last pass at `h` itself.
pub fn pass_offsets(h: f64, stepover: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let y = i as f64 * stepover;
        if y >= h - geometry::EPS {
            break;
        }
        out.push(y);
        i += 1;
    }
    out.push(h.max(0.0));
    out
}

/// Chord of a convex polygon along the horizontal line at `y`.
fn chord(poly: &[Point2], y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (a, b) in geometry::edges(poly) {
        let (ya, yb) = (a.y, b.y);
        if (ya - y).abs() <= geometry::EPS {
            lo = lo.min(a.x);
            hi = hi.max(a.x);
        }
        if (ya < y && yb > y) || (ya > y && yb < y) {
            let x = a.x + (b.x - a.x) * (y - ya) / (yb - ya);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Pass segments filling a convex region. Passes run along the direction at
/// `angle_deg` from +X, spaced by `stepover` across it starting at the
/// region's low edge, and alternate direction.
pub fn zigzag_fill(region: &[Point2], stepover: f64, angle_deg: f64) -> Vec<(Point2, Point2)> {
    if region.len() < 3 || stepover <= 0.0 {
        return Vec::new();
    }
    let a = angle_deg.to_radians();
    let local: Vec<Point2> = region.iter().map(|p| p.rotated(-a)).collect();
    let (lo, hi) = geometry::bbox(&local);
    let mut out = Vec::new();
    for (i, off) in pass_offsets(hi.y - lo.y, stepover).into_iter().enumerate() {
        let y = (lo.y + off).min(hi.y);
        let Some((x0, x1)) = chord(&local, y) else {
            continue;
        };
        let (s, e) = if i % 2 == 0 { (x0, x1) } else { (x1, x0) };
        out.push((Point2::new(s, y).rotated(a), Point2::new(e, y).rotated(a)));
    }
    out
}
