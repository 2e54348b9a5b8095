//! Exact offsets of convex polygons and circles, and the laps traced along them.

use serde::{Deserialize, Serialize};

use super::toolpath::{Move, Sense};
use super::PlanError;
use crate::geometry::{self, Point2, Point3};
use crate::part_model::Contour;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Inward,
    Outward,
}

/// Result of offsetting a boundary. Outward offsets of polygons keep their
/// straight edges and get circular arcs around the convex corners, which is
/// the only shape at a constant distance from the original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetShape {
    Polygon(Vec<Point2>),
    Circle { center: Point2, radius: f64 },
    Rounded { core: Vec<Point2>, radius: f64 },
}

pub fn offset_contour(boundary: &Contour, distance: f64, side: Side) -> Result<OffsetShape, PlanError> {
    if distance < 0.0 {
        return Err(PlanError::InvalidInput(format!("negative offset {distance}")));
    }
    match (boundary, side) {
        (Contour::Circle { center, radius }, Side::Inward) => {
            if distance >= radius - geometry::EPS {
                return Err(PlanError::OffsetCollapse { distance, inradius: *radius });
            }
            Ok(OffsetShape::Circle { center: *center, radius: radius - distance })
        }
        (Contour::Circle { center, radius }, Side::Outward) => Ok(OffsetShape::Circle {
            center: *center,
            radius: radius + distance,
        }),
        (Contour::Polygon(p), _) if distance == 0.0 => Ok(OffsetShape::Polygon(p.clone())),
        (Contour::Polygon(p), Side::Inward) => {
            let inradius = geometry::inradius_convex(p);
            if distance >= inradius - geometry::EPS {
                return Err(PlanError::OffsetCollapse { distance, inradius });
            }
            let inner = geometry::inset_convex(p, distance);
            if inner.len() < 3 {
                return Err(PlanError::OffsetCollapse { distance, inradius });
            }
            Ok(OffsetShape::Polygon(inner))
        }
        (Contour::Polygon(p), Side::Outward) => Ok(OffsetShape::Rounded {
            core: p.clone(),
            radius: distance,
        }),
    }
}

/// One piece of a closed lap.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Line(Point2),
    Arc { to: Point2, center: Point2 },
}

impl OffsetShape {
    /// Start point and ccw pieces of the closed outline. Polygons start at
    /// their lexicographically smallest vertex, circles at angle zero.
    fn pieces(&self) -> (Point2, Vec<Piece>) {
        match self {
            OffsetShape::Polygon(p) => {
                let c = geometry::canonical_start(p);
                let mut pieces: Vec<Piece> = c[1..].iter().map(|&q| Piece::Line(q)).collect();
                pieces.push(Piece::Line(c[0]));
                (c[0], pieces)
            }
            OffsetShape::Circle { center, radius } => {
                let a = *center + Point2::new(*radius, 0.0);
                let b = *center - Point2::new(*radius, 0.0);
                (
                    a,
                    vec![
                        Piece::Arc { to: b, center: *center },
                        Piece::Arc { to: a, center: *center },
                    ],
                )
            }
            OffsetShape::Rounded { core, radius } => {
                let c = geometry::canonical_start(core);
                let n = c.len();
                let normal = |i: usize| geometry::outward_normal(c[i], c[(i + 1) % n]);
                let start = c[0] + normal(0) * *radius;
                let mut pieces = Vec::with_capacity(2 * n);
                for i in 0..n {
                    let j = (i + 1) % n;
                    pieces.push(Piece::Line(c[j] + normal(i) * *radius));
                    pieces.push(Piece::Arc {
                        to: c[j] + normal(j) * *radius,
                        center: c[j],
                    });
                }
                (start, pieces)
            }
        }
    }

    pub fn start(&self) -> Point2 {
        self.pieces().0
    }

    /// Moves tracing the closed outline once at height `z`, starting and
    /// ending at [`OffsetShape::start`].
    pub fn lap(&self, z: f64, feed: f64) -> Vec<Move> {
        let (_, pieces) = self.pieces();
        pieces
            .into_iter()
            .map(|p| match p {
                Piece::Line(q) => Move::Linear { to: q.with_z(z), feed },
                Piece::Arc { to, center } => Move::Arc {
                    to: to.with_z(z),
                    center,
                    sense: Sense::Ccw,
                    feed,
                },
            })
            .collect()
    }

    /// Points spread along the outline, for distance checks.
    pub fn sample(&self, per_piece: usize) -> Vec<Point2> {
        let (start, pieces) = self.pieces();
        let mut out = Vec::new();
        let mut pos = start;
        for piece in pieces {
            for k in 0..per_piece {
                let t = k as f64 / per_piece as f64;
                out.push(match piece {
                    Piece::Line(q) => pos + (q - pos) * t,
                    Piece::Arc { to, center } => {
                        let sweep = super::toolpath::arc_sweep(pos, to, center, Sense::Ccw);
                        // a zero-length corner arc reports a full turn
                        let sweep = if pos.distance(to) < 1e-12 { 0.0 } else { sweep };
                        super::toolpath::arc_point(pos.with_z(0.0), to.with_z(0.0), center, sweep, t).xy()
                    }
                });
            }
            pos = match piece {
                Piece::Line(q) => q,
                Piece::Arc { to, .. } => to,
            };
        }
        out
    }

    /// Distance from `p` to the outline.
    pub fn distance_to(&self, p: Point2) -> f64 {
        match self {
            OffsetShape::Polygon(poly) => geometry::distance_to_boundary(poly, p),
            OffsetShape::Circle { center, radius } => (p.distance(*center) - radius).abs(),
            OffsetShape::Rounded { core, radius } => {
                let d = geometry::distance_to_boundary(core, p);
                if geometry::contains(core, p) {
                    d + radius
                } else {
                    (d - radius).abs()
                }
            }
        }
    }
}

/// The lap that starts a cycle at height `z`: the entry point and moves.
pub fn lap_at(shape: &OffsetShape, z: f64, feed: f64) -> (Point3, Vec<Move>) {
    (shape.start().with_z(z), shape.lap(z, feed))
}
