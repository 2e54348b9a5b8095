//! Milling and point-cycle toolpaths.
//!
//! Every cycle starts with a rapid to the entry point on the clearance plane
//! and ends back on it. Rapids below the clearance plane occur only as
//! vertical moves inside a peck-drilling pattern.

use super::offset::{offset_contour, OffsetShape, Side};
use super::toolpath::{PathBuilder, Toolpath};
use super::zigzag::zigzag_fill;
use super::{CuttingParams, PlanError, PlannerConfig};
use crate::geometry::{self, Point2, Point3};
use crate::part_model::{Contour, Feature, FeatureGeometry, Stock, Tool};
use crate::recognition::OperationClass;

/// Cutting levels from just below `z_top` down to `floor`, at most `step`
/// apart, the last exactly at `floor`.
pub fn depth_levels(z_top: f64, floor: f64, step: f64) -> Vec<f64> {
    let depth = z_top - floor;
    if depth <= geometry::EPS || step <= 0.0 {
        return Vec::new();
    }
    let n = ((depth / step) - 1e-9).ceil().max(1.0) as usize;
    let mut out: Vec<f64> = (1..n).map(|i| z_top - i as f64 * step).collect();
    out.push(floor);
    out
}

/// Inscribed polygon used where a zigzag must stay inside a circle.
fn circle_polygon(center: Point2, radius: f64) -> Vec<Point2> {
    const N: usize = 256;
    (0..N)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / N as f64;
            center + Point2::new(radius * a.cos(), radius * a.sin())
        })
        .collect()
}

fn shape_polygon(s: &OffsetShape) -> Vec<Point2> {
    match s {
        OffsetShape::Polygon(p) => p.clone(),
        OffsetShape::Circle { center, radius } => circle_polygon(*center, *radius),
        OffsetShape::Rounded { .. } => unreachable!("zigzag regions are inward offsets"),
    }
}

fn mismatch(class: OperationClass, f: &Feature) -> PlanError {
    PlanError::ClassMismatch {
        class,
        feature: f.id.clone(),
    }
}

/// Largest distance from the stock footprint to a contour lying inside it.
fn stock_reach(stock: &Stock, boundary: &[Point2]) -> f64 {
    stock
        .footprint()
        .into_iter()
        .filter(|c| !geometry::contains(boundary, *c))
        .map(|c| geometry::distance_to_boundary(boundary, c))
        .fold(0.0, f64::max)
}

struct Ctx {
    clearance: f64,
    feed: f64,
    plunge: f64,
}

impl Ctx {
    /// Rapid over the entry point, then plunge at the reduced feed.
    fn enter(&self, b: &mut PathBuilder, at: Point3) {
        b.rapid(at.xy().with_z(self.clearance));
        b.linear(at, self.plunge);
    }

    fn leave(&self, b: &mut PathBuilder) {
        if let Some(p) = b.position() {
            b.rapid(p.xy().with_z(self.clearance));
        }
    }

    fn zigzag(&self, b: &mut PathBuilder, passes: &[(Point2, Point2)], z: f64) {
        let Some(first) = passes.first() else { return };
        self.enter(b, first.0.with_z(z));
        for (s, e) in passes {
            b.linear(s.with_z(z), self.feed);
            b.linear(e.with_z(z), self.feed);
        }
        self.leave(b);
    }

    fn lap(&self, b: &mut PathBuilder, shape: &OffsetShape, z: f64) {
        b.linear(shape.start().with_z(z), self.feed);
        b.extend(&shape.lap(z, self.feed));
    }
}

pub fn plan_milling_cycle(
    class: OperationClass,
    f: &Feature,
    tool: &Tool,
    params: &CuttingParams,
    stock: &Stock,
    cfg: &PlannerConfig,
) -> Result<Toolpath, PlanError> {
    use OperationClass::*;
    let z_top = stock.z_top();
    let ctx = Ctx {
        clearance: z_top + cfg.clearance,
        feed: params.feed,
        plunge: geometry::round_half_up(params.feed * cfg.plunge_feed).max(1.0),
    };
    let r = tool.radius();
    let d = tool.diameter;
    let floor = f.floor_z();
    let levels = depth_levels(z_top, floor, params.depth_of_cut);
    if levels.is_empty() {
        return Err(PlanError::NoMaterial(f.id.clone()));
    }
    let mut b = PathBuilder::new();

    match (class, &f.geometry) {
        (FaceRough, FeatureGeometry::Face(g)) => {
            let passes = zigzag_fill(&g.region, cfg.face_stepover * d, cfg.zigzag_angle);
            for &z in &levels {
                ctx.zigzag(&mut b, &passes, z);
            }
        }
        (ZPlaneMill, FeatureGeometry::Face(g)) => {
            let passes = zigzag_fill(&g.region, cfg.zplane_stepover * d, cfg.zigzag_angle);
            ctx.zigzag(&mut b, &passes, floor);
        }
        (ZPlaneMill, FeatureGeometry::Pocket(p)) => {
            let inner = offset_contour(&p.boundary, r, Side::Inward)?;
            let passes = zigzag_fill(&shape_polygon(&inner), cfg.zplane_stepover * d, cfg.zigzag_angle);
            ctx.zigzag(&mut b, &passes, floor);
        }
        (PocketMill, FeatureGeometry::Pocket(p)) => {
            let inradius = p.boundary.inradius();
            if r >= inradius - geometry::EPS {
                return Err(PlanError::ToolTooLarge(f.id.clone()));
            }
            let step = cfg.pocket_stepover * d;
            let mut dists = Vec::new();
            let mut dist = r;
            while dist < inradius - geometry::EPS {
                dists.push(dist);
                dist += step;
            }
            let last = *dists.last().unwrap_or(&r);
            let gap = inradius - last;
            if gap > 0.5 * step {
                dists.push(last + 0.5 * gap);
            }
            dists.reverse();
            dists.push(r);
            let shapes = dists
                .iter()
                .map(|&t| offset_contour(&p.boundary, t, Side::Inward))
                .collect::<Result<Vec<_>, _>>()?;
            let c = p.boundary.centroid();
            for &z in &levels {
                ctx.enter(&mut b, c.with_z(z));
                for s in &shapes {
                    ctx.lap(&mut b, s, z);
                }
                ctx.leave(&mut b);
            }
        }
        (EquidistantFinish, FeatureGeometry::Pocket(p)) => {
            let mut dists: Vec<f64> = cfg.equidistant_allowances.iter().map(|a| r + a).collect();
            dists.sort_by(|a, b| b.total_cmp(a));
            dists.push(r);
            let shapes = dists
                .iter()
                .map(|&t| offset_contour(&p.boundary, t, Side::Inward))
                .collect::<Result<Vec<_>, _>>()?;
            ctx.enter(&mut b, shapes[0].start().with_z(floor));
            for s in &shapes {
                ctx.lap(&mut b, s, floor);
            }
            ctx.leave(&mut b);
        }
        (ContourRough, FeatureGeometry::OuterContour(c)) => {
            let tan = c.draft_angle.unwrap_or(0.0).to_radians().tan();
            let reach = stock_reach(stock, &c.boundary);
            let step = cfg.contour_stepover * d;
            let boundary = Contour::Polygon(c.boundary.clone());
            for &z in &levels {
                let base = r + cfg.rough_allowance + tan * (z_top - z);
                let mut dists = vec![base];
                while dists.last().unwrap() + r < reach - geometry::EPS {
                    let next = dists.last().unwrap() + step;
                    dists.push(next);
                }
                dists.reverse();
                let shapes = dists
                    .iter()
                    .map(|&t| offset_contour(&boundary, t, Side::Outward))
                    .collect::<Result<Vec<_>, _>>()?;
                ctx.enter(&mut b, shapes[0].start().with_z(z));
                for s in &shapes {
                    ctx.lap(&mut b, s, z);
                }
                ctx.leave(&mut b);
            }
        }
        (ContourFinish, FeatureGeometry::OuterContour(c)) => {
            let s = offset_contour(&Contour::Polygon(c.boundary.clone()), r, Side::Outward)?;
            ctx.enter(&mut b, s.start().with_z(floor));
            ctx.lap(&mut b, &s, floor);
            ctx.leave(&mut b);
        }
        (ContourZFinish | Contour3DFinish, FeatureGeometry::OuterContour(c)) => {
            let (zs, tan) = if class == Contour3DFinish {
                let tan = c.draft_angle.unwrap_or(0.0).to_radians().tan();
                (depth_levels(z_top, floor, cfg.slice_step), tan)
            } else {
                (levels.clone(), 0.0)
            };
            let boundary = Contour::Polygon(c.boundary.clone());
            for (i, &z) in zs.iter().enumerate() {
                let s = offset_contour(&boundary, r + tan * (z_top - z), Side::Outward)?;
                if i == 0 {
                    ctx.enter(&mut b, s.start().with_z(z));
                } else {
                    b.linear(s.start().with_z(z), ctx.plunge);
                }
                ctx.lap(&mut b, &s, z);
            }
            ctx.leave(&mut b);
        }
        _ => return Err(mismatch(class, f)),
    }
    let path = b.finish();
    if !path.moves.iter().any(|m| m.is_cutting()) {
        return Err(PlanError::NoMaterial(f.id.clone()));
    }
    Ok(path)
}

pub fn plan_point_cycle(
    class: OperationClass,
    f: &Feature,
    tool: &Tool,
    params: &CuttingParams,
    stock: &Stock,
    cfg: &PlannerConfig,
) -> Result<Toolpath, PlanError> {
    use OperationClass::*;
    let h = f.as_hole().ok_or_else(|| mismatch(class, f))?;
    let z_top = stock.z_top();
    let clear = z_top + cfg.clearance;
    let at = |z: f64| h.center.with_z(z);
    let feed = params.feed;
    let through_target = if h.through {
        h.bottom_z - cfg.through_allowance * h.diameter
    } else {
        h.bottom_z
    };
    let mut b = PathBuilder::new();
    b.rapid(at(clear));
    match class {
        Center => {
            let depth = (cfg.center_depth * h.diameter).min(cfg.center_depth_max);
            b.linear(at(z_top - depth), feed).rapid(at(clear));
        }
        DrillNormal => {
            b.linear(at(through_target), feed).rapid(at(clear));
        }
        DrillDeep => {
            let q = cfg.peck * tool.diameter;
            let n = (((z_top - through_target) / q) - 1e-9).ceil().max(1.0) as usize;
            let mut prev = z_top;
            for i in 1..=n {
                let bottom = if i == n {
                    through_target
                } else {
                    z_top - i as f64 * q
                };
                if i > 1 {
                    b.rapid(at(prev + cfg.peck_reentry));
                }
                b.linear(at(bottom), feed).rapid(at(clear));
                prev = bottom;
            }
        }
        Ream => {
            b.linear(at(through_target), feed).linear(at(clear), feed);
        }
        Sink => {
            let cs = h.countersink.ok_or_else(|| mismatch(class, f))?;
            b.linear(at(z_top - cs.tip_depth()), feed)
                .dwell(cfg.sink_dwell)
                .rapid(at(clear));
        }
        Thread => {
            let pitch = h.pitch.ok_or_else(|| mismatch(class, f))?;
            let target = if h.through {
                through_target
            } else {
                h.bottom_z + cfg.thread_runout * pitch
            };
            if target >= z_top - geometry::EPS {
                return Err(PlanError::NoMaterial(f.id.clone()));
            }
            b.linear(at(target), feed)
                .dwell(cfg.thread_dwell)
                .linear(at(clear), feed);
        }
        _ => return Err(mismatch(class, f)),
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_end_at_floor() {
        assert_eq!(depth_levels(20.0, 10.0, 5.0), vec![15.0, 10.0]);
        assert_eq!(depth_levels(20.0, 12.0, 5.0), vec![15.0, 12.0]);
        assert_eq!(depth_levels(20.0, 17.0, 5.0), vec![17.0]);
        assert!(depth_levels(20.0, 20.0, 5.0).is_empty());
    }
}
