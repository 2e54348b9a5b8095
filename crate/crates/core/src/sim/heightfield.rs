//! Height-field stock model, the analytic expectation from features, and
//! their comparison.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{self, Point2, Point3};
use crate::part_model::{Contour, FeatureGeometry, Stock};
use crate::recognition::FeatureModel;

/// Grid of z heights over the stock footprint. Cell `(i, j)` has its center
/// at `origin + ((i + 0.5) cell, (j + 0.5) cell)`; row-major by `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub origin: Point2,
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    pub z_top: f64,
    pub z_min: f64,
    pub heights: Vec<f64>,
    /// Feature walls whose neighbourhood is left out of comparisons.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub walls: Vec<Wall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wall {
    Segment { a: Point2, b: Point2 },
    Circle { center: Point2, radius: f64 },
}

impl Wall {
    pub fn distance(&self, p: Point2) -> f64 {
        match self {
            Wall::Segment { a, b } => geometry::distance_to_segment(p, *a, *b),
            Wall::Circle { center, radius } => (p.distance(*center) - radius).abs(),
        }
    }
}

/// Walls of a contour, leaving out polygon edges that lie on the stock's
/// own sides since those are not machined.
fn contour_walls(c: &Contour, stock: &Stock, out: &mut Vec<Wall>) {
    match c {
        Contour::Circle { center, radius } => out.push(Wall::Circle {
            center: *center,
            radius: *radius,
        }),
        Contour::Polygon(poly) => {
            let (lo, hi) = (stock.origin.xy(), stock.origin.xy() + stock.size.xy());
            let on_side = |a: Point2, b: Point2| {
                let eq = |u: f64, v: f64| (u - v).abs() <= 1e-9;
                (eq(a.x, lo.x) && eq(b.x, lo.x))
                    || (eq(a.x, hi.x) && eq(b.x, hi.x))
                    || (eq(a.y, lo.y) && eq(b.y, lo.y))
                    || (eq(a.y, hi.y) && eq(b.y, hi.y))
            };
            for (a, b) in geometry::edges(poly) {
                if !on_side(a, b) {
                    out.push(Wall::Segment { a, b });
                }
            }
        }
    }
}

impl HeightField {
    pub fn new(stock: &Stock, cell: f64) -> Self {
        let nx = ((stock.size.x / cell) - 1e-9).ceil().max(1.0) as usize;
        let ny = ((stock.size.y / cell) - 1e-9).ceil().max(1.0) as usize;
        HeightField {
            origin: stock.origin.xy(),
            cell,
            nx,
            ny,
            z_top: stock.z_top(),
            z_min: stock.origin.z,
            heights: vec![stock.z_top(); nx * ny],
            walls: Vec::new(),
        }
    }

    pub fn center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.cell,
            self.origin.y + (j as f64 + 0.5) * self.cell,
        )
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.heights[j * self.nx + i]
    }

    /// Lowers every cell whose center lies within `radius` of `p` to `p.z`,
    /// never below the stock bottom.
    pub fn plunge(&mut self, p: Point3, radius: f64) {
        if p.z >= self.z_top {
            return;
        }
        let z = p.z.max(self.z_min);
        let r2 = radius * radius;
        let lo_i = (((p.x - radius - self.origin.x) / self.cell) - 0.5).ceil().max(0.0) as usize;
        let lo_j = (((p.y - radius - self.origin.y) / self.cell) - 0.5).ceil().max(0.0) as usize;
        let hi_i = (((p.x + radius - self.origin.x) / self.cell) - 0.5).floor();
        let hi_j = (((p.y + radius - self.origin.y) / self.cell) - 0.5).floor();
        if hi_i < 0.0 || hi_j < 0.0 {
            return;
        }
        let hi_i = (hi_i as usize).min(self.nx - 1);
        let hi_j = (hi_j as usize).min(self.ny - 1);
        for j in lo_j..=hi_j {
            let cy = self.origin.y + (j as f64 + 0.5) * self.cell - p.y;
            let row = j * self.nx;
            for i in lo_i..=hi_i {
                let cx = self.origin.x + (i as f64 + 0.5) * self.cell - p.x;
                if cx * cx + cy * cy <= r2 {
                    let h = &mut self.heights[row + i];
                    if z < *h {
                        *h = z;
                    }
                }
            }
        }
    }

    /// Plain-text export: a `nx ny cell x0 y0` header line, then one line of
    /// heights per row from low to high y.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {} {}\n",
            self.nx, self.ny, self.cell, self.origin.x, self.origin.y
        );
        for j in 0..self.ny {
            let row: Vec<String> = (0..self.nx).map(|i| format!("{:.3}", self.get(i, j))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Carves a trajectory of actual tool positions with a flat-bottomed tool.
pub fn carve_heightfield(hf: &mut HeightField, trajectory: &[Point3], radius: f64) {
    let mut last: Option<Point3> = None;
    for &p in trajectory {
        if last.is_some_and(|q| q.x == p.x && q.y == p.y && q.z <= p.z) {
            continue;
        }
        hf.plunge(p, radius);
        last = Some(p);
    }
}

fn feature_height(g: &FeatureGeometry, stock: &Stock, c: Point2) -> Option<f64> {
    match g {
        FeatureGeometry::Face(f) => geometry::contains(&f.region, c).then_some(f.target_z),
        FeatureGeometry::Pocket(p) => p.boundary.contains(c).then_some(p.floor_z),
        FeatureGeometry::Hole(h) => {
            let rho = c.distance(h.center);
            let mut z: Option<f64> = None;
            if rho <= 0.5 * h.diameter {
                z = Some(if h.through { stock.origin.z } else { h.bottom_z });
            }
            if let Some(cs) = h.countersink {
                let half = (0.5 * cs.angle).to_radians().tan();
                if rho <= 0.5 * cs.diameter {
                    let cone = stock.z_top() - (0.5 * cs.diameter - rho) / half;
                    z = Some(z.map_or(cone, |v| v.min(cone)));
                }
            }
            z
        }
        FeatureGeometry::OuterContour(oc) => {
            if geometry::contains(&oc.boundary, c) {
                return None;
            }
            let delta = geometry::distance_to_boundary(&oc.boundary, c);
            let tan = oc.draft_angle.unwrap_or(0.0).to_radians().tan();
            Some(if tan > 0.0 {
                (stock.z_top() - delta / tan).max(oc.floor_z)
            } else {
                oc.floor_z
            })
        }
    }
}

/// Height each cell should have after machining all features: the lowest
/// floor among the features covering its center.
pub fn expected_heightfield(fm: &FeatureModel, cell: f64) -> HeightField {
    let mut hf = HeightField::new(&fm.stock, cell);
    for j in 0..hf.ny {
        for i in 0..hf.nx {
            let c = hf.center(i, j);
            let mut h = hf.z_top;
            for f in &fm.features {
                if let Some(z) = feature_height(&f.geometry, &fm.stock, c) {
                    h = h.min(z);
                }
            }
            hf.heights[j * hf.nx + i] = h.max(hf.z_min);
        }
    }
    for f in &fm.features {
        let outline = match &f.geometry {
            FeatureGeometry::Face(g) => Contour::Polygon(g.region.clone()),
            FeatureGeometry::OuterContour(g) => Contour::Polygon(g.boundary.clone()),
            FeatureGeometry::Pocket(g) => g.boundary.clone(),
            FeatureGeometry::Hole(h) => Contour::Circle {
                center: h.center,
                radius: 0.5 * h.countersink.map_or(h.diameter, |c| c.diameter.max(h.diameter)),
            },
        };
        contour_walls(&outline, &fm.stock, &mut hf.walls);
    }
    hf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DeviationMetrics {
    pub max_dev: f64,
    pub mean_dev: f64,
    pub volume_error: f64,
    pub compared_cells: usize,
    pub excluded_cells: usize,
}

/// Compares two fields cell by cell, leaving out cells within `band` of any
/// wall recorded on `expected`.
pub fn compare_heightfields(
    simulated: &HeightField,
    expected: &HeightField,
    band: f64,
) -> Result<DeviationMetrics, SimError> {
    if simulated.nx != expected.nx
        || simulated.ny != expected.ny
        || (simulated.cell - expected.cell).abs() > 1e-12
        || simulated.origin.distance(expected.origin) > 1e-9
    {
        return Err(SimError::GridMismatch);
    }
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    let mut compared = 0usize;
    let mut excluded = 0usize;
    for j in 0..expected.ny {
        for i in 0..expected.nx {
            let c = expected.center(i, j);
            if expected.walls.iter().any(|w| w.distance(c) <= band) {
                excluded += 1;
                continue;
            }
            let d = (simulated.get(i, j) - expected.get(i, j)).abs();
            sum += d;
            max = max.max(d);
            compared += 1;
        }
    }
    Ok(DeviationMetrics {
        max_dev: max,
        mean_dev: if compared > 0 { sum / compared as f64 } else { 0.0 },
        volume_error: sum * expected.cell * expected.cell,
        compared_cells: compared,
        excluded_cells: excluded,
    })
}
