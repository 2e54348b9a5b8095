//! Fixed-length vectors for features (network input) and toolpaths
//! (network output), and the decoder back to a toolpath.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::geometry::{self, Point2, Point3};
use crate::part_model::{Contour, Feature, FeatureGeometry, Stock, Tool};
use crate::planner::{CuttingParams, PathBuilder, Toolpath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Encoding {
    /// Boundary points per feature.
    pub m: usize,
    /// Toolpath points per operation.
    pub k: usize,
    pub f_max: f64,
    pub s_max: f64,
    /// Chord tolerance for flattening arcs, mm.
    pub chord_tol: f64,
}

impl Default for Encoding {
    fn default() -> Self {
        Self {
            m: 16,
            k: 64,
            f_max: 5000.0,
            s_max: 20000.0,
            chord_tol: 0.01,
        }
    }
}

impl Encoding {
    pub fn input_dim(&self) -> usize {
        3 * self.m + 4
    }

    pub fn output_dim(&self) -> usize {
        3 * self.k + 2
    }
}

/// `m` points at equal arc-length spacing from the first to the last input
/// point, both kept exactly.
pub fn resample_polyline(points: &[Point3], m: usize) -> Result<Vec<Point3>, NeuralError> {
    let total: f64 = points.windows(2).map(|w| w[0].distance(w[1])).sum();
    if m < 2 || points.len() < 2 || total <= 0.0 {
        return Err(NeuralError::DegeneratePath);
    }
    let mut out = Vec::with_capacity(m);
    out.push(points[0]);
    let mut seg = 0;
    let mut walked = 0.0;
    for i in 1..m - 1 {
        let target = total * i as f64 / (m - 1) as f64;
        loop {
            let len = points[seg].distance(points[seg + 1]);
            if walked + len >= target || seg + 2 == points.len() {
                let t = if len > 0.0 { ((target - walked) / len).clamp(0.0, 1.0) } else { 0.0 };
                out.push(points[seg].lerp(points[seg + 1], t));
                break;
            }
            walked += len;
            seg += 1;
        }
    }
    out.push(points[points.len() - 1]);
    Ok(out)
}

/// `m` points evenly spaced around a closed ring, starting at its first
/// vertex.
fn resample_ring(ring: &[Point3], m: usize) -> Result<Vec<Point3>, NeuralError> {
    let mut closed = ring.to_vec();
    closed.push(ring[0]);
    let mut pts = resample_polyline(&closed, m + 1)?;
    pts.pop();
    Ok(pts)
}

/// Feature outline at the stock top: polygons walked counter-clockwise from
/// the lexicographically smallest vertex, circles from the +x direction.
pub fn boundary_points(f: &Feature, z: f64, m: usize) -> Result<Vec<Point3>, NeuralError> {
    let ring = |poly: &[Point2]| -> Result<Vec<Point3>, NeuralError> {
        let pts: Vec<Point3> = geometry::canonical_start(poly).iter().map(|p| p.with_z(z)).collect();
        resample_ring(&pts, m)
    };
    match f.outline() {
        Contour::Polygon(p) => ring(&p),
        Contour::Circle { center, radius } => {
            if radius <= 0.0 {
                return Err(NeuralError::DegeneratePath);
            }
            Ok((0..m)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / m as f64;
                    Point3::new(center.x + radius * a.cos(), center.y + radius * a.sin(), z)
                })
                .collect())
        }
    }
}

/// Input vector: normalized boundary points, then depth / stock height,
/// tool diameter / stock width, Ra / 25 and IT / 14.
pub fn encode_feature(f: &Feature, tool: &Tool, stock: &Stock, enc: &Encoding) -> Result<Vec<f64>, NeuralError> {
    let pts = boundary_points(f, stock.z_top(), enc.m)?;
    let mut v = Vec::with_capacity(enc.input_dim());
    for p in pts {
        v.extend(stock.normalize_point(p).to_array());
    }
    let depth = match &f.geometry {
        FeatureGeometry::Hole(h) => stock.z_top() - h.bottom_z,
        _ => f.depth(stock),
    };
    v.push(depth / stock.size.z);
    v.push(tool.diameter / stock.size.x);
    v.push(f.tech.ra / 25.0);
    v.push(f.tech.it as f64 / 14.0);
    Ok(v)
}

/// Cutting moves of a toolpath as `k` resampled points.
pub fn toolpath_points(t: &Toolpath, enc: &Encoding) -> Result<Vec<Point3>, NeuralError> {
    resample_polyline(&t.cutting_polyline(enc.chord_tol), enc.k)
}

/// Output vector: normalized toolpath points, then feed / F_max and
/// rpm / S_max.
pub fn encode_toolpath(
    t: &Toolpath,
    params: &CuttingParams,
    stock: &Stock,
    enc: &Encoding,
) -> Result<Vec<f64>, NeuralError> {
    let pts = toolpath_points(t, enc)?;
    let mut v = Vec::with_capacity(enc.output_dim());
    for p in pts {
        v.extend(stock.normalize_point(p).to_array());
    }
    v.push(params.feed / enc.f_max);
    v.push(params.spindle_rpm / enc.s_max);
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub points: Vec<Point3>,
    pub toolpath: Toolpath,
    pub feed: f64,
    pub rpm: f64,
}

/// Inverse of [`encode_toolpath`]. The first point becomes a rapid approach
/// on the clearance plane, the rest are fed linearly, and a final rapid
/// returns to the clearance plane. Feed and speed are clamped to their
/// ranges and rounded to whole numbers.
pub fn decode_toolpath(v: &[f64], stock: &Stock, clearance_z: f64, enc: &Encoding) -> Result<Decoded, NeuralError> {
    if v.len() != enc.output_dim() {
        return Err(NeuralError::DimensionMismatch {
            expected: enc.output_dim(),
            found: v.len(),
        });
    }
    let points: Vec<Point3> = v[..3 * enc.k]
        .chunks_exact(3)
        .map(|c| stock.denormalize_point(Point3::new(c[0], c[1], c[2])))
        .collect();
    let feed = geometry::round_half_up((v[3 * enc.k] * enc.f_max).clamp(1.0, enc.f_max));
    let rpm = geometry::round_half_up((v[3 * enc.k + 1] * enc.s_max).clamp(1.0, enc.s_max));
    let mut b = PathBuilder::new();
    b.rapid(points[0].xy().with_z(clearance_z));
    for p in &points[1..] {
        b.linear(*p, feed);
    }
    let last = points[points.len() - 1];
    b.rapid(last.xy().with_z(clearance_z));
    Ok(Decoded {
        points,
        toolpath: b.finish(),
        feed,
        rpm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::part_model::{HoleGeometry, TechAttrs, ToolKind};
    use crate::planner::Move;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn resample_segment_midpoint() {
        let r = resample_polyline(&[p(0.0, 0.0, 0.0), p(10.0, 0.0, 0.0)], 3).unwrap();
        assert_eq!(r, vec![p(0.0, 0.0, 0.0), p(5.0, 0.0, 0.0), p(10.0, 0.0, 0.0)]);
    }

    #[test]
    fn resample_square_perimeter() {
        let sq = [
            p(0.0, 0.0, 0.0),
            p(10.0, 0.0, 0.0),
            p(10.0, 10.0, 0.0),
            p(0.0, 10.0, 0.0),
            p(0.0, 0.0, 0.0),
        ];
        assert_eq!(resample_polyline(&sq, 5).unwrap(), sq.to_vec());
    }

    #[test]
    fn degenerate_path() {
        assert_eq!(
            resample_polyline(&[p(1.0, 1.0, 1.0); 4], 3),
            Err(NeuralError::DegeneratePath)
        );
    }

    #[test]
    fn hole_encoding_example() {
        let stock = Stock::new(p(0.0, 0.0, 0.0), p(100.0, 50.0, 20.0), "m");
        let f = Feature {
            id: "H1".into(),
            geometry: FeatureGeometry::Hole(HoleGeometry {
                center: Point2::new(50.0, 25.0),
                diameter: 10.0,
                bottom_z: 10.0,
                through: false,
                pitch: None,
                countersink: None,
            }),
            tech: TechAttrs { ra: 6.3, it: 12 },
        };
        let tool = Tool {
            id: 1,
            kind: ToolKind::Drill,
            diameter: 10.0,
            flutes: 2,
            max_depth: 50.0,
            pitch: None,
        };
        let v = encode_feature(&f, &tool, &stock, &Encoding::default()).unwrap();
        assert_eq!(v.len(), 52);
        assert_eq!(&v[..3], &[0.55, 0.5, 1.0]);
        assert_eq!(v[48], 0.5);
        assert_eq!(v[49], 0.1);
        assert!((v[50] - 0.252).abs() < 1e-15);
        assert!((v[51] - 12.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn corner_to_corner_line() {
        let stock = Stock::new(p(0.0, 0.0, 0.0), p(100.0, 50.0, 20.0), "m");
        let t = Toolpath {
            moves: vec![
                Move::Rapid { to: p(0.0, 0.0, 0.0) },
                Move::Linear {
                    to: p(100.0, 50.0, 20.0),
                    feed: 318.0,
                },
            ],
        };
        let params = CuttingParams {
            spindle_rpm: 3183.0,
            feed: 318.0,
            depth_of_cut: 5.0,
            direction: crate::planner::Sense::Cw,
            coolant: false,
        };
        let enc = Encoding { k: 2, ..Encoding::default() };
        let v = encode_toolpath(&t, &params, &stock, &enc).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0636, 0.15915]);
    }

    #[test]
    fn decode_clamps_and_zero_vector() {
        let stock = Stock::new(p(0.0, 0.0, 0.0), p(100.0, 50.0, 20.0), "m");
        let enc = Encoding::default();
        let mut v = vec![0.0; enc.output_dim()];
        v[3 * enc.k] = 1.2;
        let d = decode_toolpath(&v, &stock, 22.0, &enc).unwrap();
        assert_eq!(d.feed, 5000.0);
        assert_eq!(d.rpm, 1.0);
        assert!(d.points.iter().all(|q| *q == stock.origin));
    }
}
