//! Stock, features, tools and materials, plus the JSON part file.
//!
//! A part file holds a stock block and either an explicit feature list or a
//! boundary model (planar faces with loops). Loading is strict: unknown keys
//! are rejected and the model is validated before it is returned.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Point2, Point3};
use crate::recognition::BoundaryModel;

#[derive(Debug, Error)]
pub enum PartError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("syntax error at line {line}, column {column}: {message}")]
    SyntaxError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("validation error: {0}")]
    ValidationError(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stock {
    pub origin: Point3,
    pub size: Point3,
    pub material: String,
}

impl Stock {
    pub fn new(origin: Point3, size: Point3, material: impl Into<String>) -> Self {
        Self {
            origin,
            size,
            material: material.into(),
        }
    }

    pub fn z_top(&self) -> f64 {
        self.origin.z + self.size.z
    }

    /// Stock outline in XY, counter-clockwise from the origin corner.
    pub fn footprint(&self) -> Vec<Point2> {
        geometry::rectangle(
            self.origin.xy(),
            Point2::new(self.origin.x + self.size.x, self.origin.y + self.size.y),
        )
    }

    pub fn diagonal(&self) -> f64 {
        self.size.norm()
    }

    /// Maps a point into the unit cube spanned by the stock, axis by axis.
    pub fn normalize_point(&self, p: Point3) -> Point3 {
        Point3::new(
            (p.x - self.origin.x) / self.size.x,
            (p.y - self.origin.y) / self.size.y,
            (p.z - self.origin.z) / self.size.z,
        )
    }

    pub fn denormalize_point(&self, q: Point3) -> Point3 {
        Point3::new(
            self.origin.x + q.x * self.size.x,
            self.origin.y + q.y * self.size.y,
            self.origin.z + q.z * self.size.z,
        )
    }
}

/// Free-function form of [`Stock::normalize_point`].
pub fn normalize_point(p: Point3, stock: &Stock) -> Point3 {
    stock.normalize_point(p)
}

/// Free-function form of [`Stock::denormalize_point`].
pub fn denormalize_point(q: Point3, stock: &Stock) -> Point3 {
    stock.denormalize_point(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechAttrs {
    /// Surface roughness Ra in micrometres.
    pub ra: f64,
    /// ISO tolerance grade (IT5..IT14).
    pub it: u8,
}

impl Default for TechAttrs {
    fn default() -> Self {
        Self { ra: 3.2, it: 12 }
    }
}

/// A closed planar outline: convex polygon or circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Contour {
    Polygon(Vec<Point2>),
    Circle { center: Point2, radius: f64 },
}

impl Contour {
    pub fn centroid(&self) -> Point2 {
        match self {
            Contour::Polygon(p) => geometry::centroid(p),
            Contour::Circle { center, .. } => *center,
        }
    }

    /// Smallest distance across the outline.
    pub fn min_width(&self) -> f64 {
        match self {
            Contour::Polygon(p) => geometry::min_width_convex(p),
            Contour::Circle { radius, .. } => 2.0 * radius,
        }
    }

    pub fn inradius(&self) -> f64 {
        match self {
            Contour::Polygon(p) => geometry::inradius_convex(p),
            Contour::Circle { radius, .. } => *radius,
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        match self {
            Contour::Polygon(poly) => geometry::contains(poly, p),
            Contour::Circle { center, radius } => p.distance(*center) <= *radius + 1e-12,
        }
    }

    pub fn distance_to_boundary(&self, p: Point2) -> f64 {
        match self {
            Contour::Polygon(poly) => geometry::distance_to_boundary(poly, p),
            Contour::Circle { center, radius } => (p.distance(*center) - radius).abs(),
        }
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        match self {
            Contour::Polygon(p) => geometry::bbox(p),
            Contour::Circle { center, radius } => (
                Point2::new(center.x - radius, center.y - radius),
                Point2::new(center.x + radius, center.y + radius),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Countersink {
    /// Chamfer diameter at the top face.
    pub diameter: f64,
    /// Included angle of the countersink in degrees.
    #[serde(default = "default_countersink_angle")]
    pub angle: f64,
}

fn default_countersink_angle() -> f64 {
    90.0
}

impl Countersink {
    /// Tip depth below the top face of a pointed tool producing the chamfer.
    pub fn tip_depth(&self) -> f64 {
        0.5 * self.diameter / (0.5 * self.angle).to_radians().tan()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceGeometry {
    pub region: Vec<Point2>,
    pub target_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourGeometry {
    pub boundary: Vec<Point2>,
    pub floor_z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draft_angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PocketGeometry {
    pub boundary: Contour,
    pub floor_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleGeometry {
    pub center: Point2,
    pub diameter: f64,
    pub bottom_z: f64,
    #[serde(default)]
    pub through: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub countersink: Option<Countersink>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Face,
    OuterContour,
    Pocket,
    Hole,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureKind::Face => "face",
            FeatureKind::OuterContour => "outer_contour",
            FeatureKind::Pocket => "pocket",
            FeatureKind::Hole => "hole",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureGeometry {
    Face(FaceGeometry),
    OuterContour(ContourGeometry),
    Pocket(PocketGeometry),
    Hole(HoleGeometry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFeature", into = "RawFeature")]
pub struct Feature {
    pub id: String,
    pub geometry: FeatureGeometry,
    pub tech: TechAttrs,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeature {
    id: String,
    kind: FeatureKind,
    geometry: serde_json::Value,
    #[serde(default)]
    tech: TechAttrs,
}

impl TryFrom<RawFeature> for Feature {
    type Error = String;

    fn try_from(raw: RawFeature) -> Result<Self, String> {
        let ctx = |e: serde_json::Error| format!("feature {}: geometry: {e}", raw.id);
        let geometry = match raw.kind {
            FeatureKind::Face => {
                FeatureGeometry::Face(serde_json::from_value(raw.geometry.clone()).map_err(ctx)?)
            }
            FeatureKind::OuterContour => FeatureGeometry::OuterContour(
                serde_json::from_value(raw.geometry.clone()).map_err(ctx)?,
            ),
            FeatureKind::Pocket => {
                FeatureGeometry::Pocket(serde_json::from_value(raw.geometry.clone()).map_err(ctx)?)
            }
            FeatureKind::Hole => {
                FeatureGeometry::Hole(serde_json::from_value(raw.geometry.clone()).map_err(ctx)?)
            }
        };
        Ok(Feature {
            id: raw.id,
            geometry,
            tech: raw.tech,
        })
    }
}

impl From<Feature> for RawFeature {
    fn from(f: Feature) -> Self {
        let kind = f.kind();
        let geometry = match &f.geometry {
            FeatureGeometry::Face(g) => serde_json::to_value(g),
            FeatureGeometry::OuterContour(g) => serde_json::to_value(g),
            FeatureGeometry::Pocket(g) => serde_json::to_value(g),
            FeatureGeometry::Hole(g) => serde_json::to_value(g),
        }
        .expect("feature geometry serializes");
        RawFeature {
            id: f.id,
            kind,
            geometry,
            tech: f.tech,
        }
    }
}

impl Feature {
    pub fn kind(&self) -> FeatureKind {
        match self.geometry {
            FeatureGeometry::Face(_) => FeatureKind::Face,
            FeatureGeometry::OuterContour(_) => FeatureKind::OuterContour,
            FeatureGeometry::Pocket(_) => FeatureKind::Pocket,
            FeatureGeometry::Hole(_) => FeatureKind::Hole,
        }
    }

    /// Planar outline of the feature as seen from the top.
    pub fn outline(&self) -> Contour {
        match &self.geometry {
            FeatureGeometry::Face(g) => Contour::Polygon(g.region.clone()),
            FeatureGeometry::OuterContour(g) => Contour::Polygon(g.boundary.clone()),
            FeatureGeometry::Pocket(g) => g.boundary.clone(),
            FeatureGeometry::Hole(g) => Contour::Circle {
                center: g.center,
                radius: 0.5 * g.diameter,
            },
        }
    }

    /// Lowest z reached by the feature (floor, target or hole bottom).
    pub fn floor_z(&self) -> f64 {
        match &self.geometry {
            FeatureGeometry::Face(g) => g.target_z,
            FeatureGeometry::OuterContour(g) => g.floor_z,
            FeatureGeometry::Pocket(g) => g.floor_z,
            FeatureGeometry::Hole(g) => g.bottom_z,
        }
    }

    /// Depth below the stock top.
    pub fn depth(&self, stock: &Stock) -> f64 {
        stock.z_top() - self.floor_z()
    }

    pub fn centroid(&self) -> Point2 {
        self.outline().centroid()
    }

    pub fn as_hole(&self) -> Option<&HoleGeometry> {
        match &self.geometry {
            FeatureGeometry::Hole(h) => Some(h),
            _ => None,
        }
    }

    /// Canonical ordering: kind, then lexicographic centroid, then id.
    pub fn canonical_cmp(&self, other: &Feature) -> std::cmp::Ordering {
        self.kind()
            .cmp(&other.kind())
            .then_with(|| self.centroid().lex_cmp(&other.centroid()))
            .then_with(|| self.id.cmp(&other.id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    EndMill,
    Drill,
    CenterDrill,
    Reamer,
    Countersink,
    Tap,
}

impl ToolKind {
    pub const ALL: [ToolKind; 6] = [
        ToolKind::EndMill,
        ToolKind::Drill,
        ToolKind::CenterDrill,
        ToolKind::Reamer,
        ToolKind::Countersink,
        ToolKind::Tap,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tool {
    pub id: u32,
    pub kind: ToolKind,
    pub diameter: f64,
    pub flutes: u32,
    pub max_depth: f64,
    /// Thread pitch, taps only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<f64>,
}

impl Tool {
    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub id: String,
    /// Cutting speed v_c in m/min per tool kind.
    pub cutting_speed: BTreeMap<ToolKind, f64>,
    /// Feed per tooth f_z in mm per tool kind.
    pub feed_per_tooth: BTreeMap<ToolKind, f64>,
    #[serde(default)]
    pub coolant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PartGeometry {
    Features(Vec<Feature>),
    Boundary(BoundaryModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPart", into = "RawPart")]
pub struct PartModel {
    pub id: Option<String>,
    pub stock: Stock,
    pub geometry: PartGeometry,
    pub tools: Vec<Tool>,
    pub materials: Vec<Material>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPart {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    stock: Stock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<Feature>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boundary: Option<BoundaryModel>,
    #[serde(default)]
    tools: Vec<Tool>,
    #[serde(default)]
    materials: Vec<Material>,
}

impl TryFrom<RawPart> for PartModel {
    type Error = String;

    fn try_from(raw: RawPart) -> Result<Self, String> {
        let geometry = match (raw.features, raw.boundary) {
            (Some(_), Some(_)) => {
                return Err("part carries both `features` and `boundary`".to_string())
            }
            (Some(f), None) => PartGeometry::Features(f),
            (None, Some(b)) => PartGeometry::Boundary(b),
            (None, None) => return Err("part needs `features` or `boundary`".to_string()),
        };
        Ok(PartModel {
            id: raw.id,
            stock: raw.stock,
            geometry,
            tools: raw.tools,
            materials: raw.materials,
        })
    }
}

impl From<PartModel> for RawPart {
    fn from(p: PartModel) -> Self {
        let (features, boundary) = match p.geometry {
            PartGeometry::Features(f) => (Some(f), None),
            PartGeometry::Boundary(b) => (None, Some(b)),
        };
        RawPart {
            id: p.id,
            stock: p.stock,
            features,
            boundary,
            tools: p.tools,
            materials: p.materials,
        }
    }
}

impl PartModel {
    pub fn material(&self) -> Option<&Material> {
        self.materials.iter().find(|m| m.id == self.stock.material)
    }

    pub fn tool(&self, id: u32) -> Option<&Tool> {
        self.tools.iter().find(|t| t.id == id)
    }
}

/// A broken rule, named by its rule text, plus the offending item.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub rule: String,
    pub subject: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.rule, self.subject)
    }
}

fn push(out: &mut Vec<Violation>, rule: &str, subject: &str) {
    out.push(Violation {
        rule: rule.to_string(),
        subject: subject.to_string(),
    });
}

fn check_polygon(out: &mut Vec<Violation>, poly: &[Point2], subject: &str, convex: bool) {
    if !geometry::is_simple(poly) {
        push(out, "polygon simple", subject);
        return;
    }
    if geometry::signed_area(poly) <= 0.0 {
        push(out, "polygon counter-clockwise", subject);
        return;
    }
    if convex && !geometry::is_convex_ccw(poly) {
        push(out, "polygon convex", subject);
    }
}

fn within_footprint(stock: &Stock, outline: &Contour) -> bool {
    let fp = stock.footprint();
    match outline {
        Contour::Polygon(p) => p.iter().all(|&v| geometry::contains(&fp, v)),
        Contour::Circle { center, radius } => {
            geometry::contains(&fp, *center)
                && geometry::distance_to_boundary(&fp, *center) >= *radius - 1e-9
        }
    }
}

/// Checks stock and feature invariants; the result is sorted so it does not
/// depend on feature order.
pub fn validate_features(stock: &Stock, features: &[Feature]) -> Vec<Violation> {
    let mut out = Vec::new();
    let s = &stock.size;
    if !(s.x > 0.0 && s.y > 0.0 && s.z > 0.0) {
        push(&mut out, "stock size > 0", "stock");
        return out;
    }
    let z_top = stock.z_top();
    let mut ids = BTreeSet::new();
    let mut contours = 0;
    for f in features {
        let id = f.id.as_str();
        if !ids.insert(id) {
            push(&mut out, "unique feature ids", id);
        }
        if !(f.tech.ra > 0.0) {
            push(&mut out, "Ra > 0", id);
        }
        if !(5..=14).contains(&f.tech.it) {
            push(&mut out, "IT in 5..=14", id);
        }
        let floor = f.floor_z();
        if !(floor < z_top) {
            push(&mut out, "floor_z < z_top", id);
        }
        if floor < stock.origin.z - 1e-9 {
            push(&mut out, "floor_z >= origin.z", id);
        }
        let mut shape_ok = true;
        match &f.geometry {
            FeatureGeometry::Face(g) => {
                let before = out.len();
                check_polygon(&mut out, &g.region, id, true);
                shape_ok = out.len() == before;
            }
            FeatureGeometry::OuterContour(g) => {
                contours += 1;
                let before = out.len();
                check_polygon(&mut out, &g.boundary, id, true);
                shape_ok = out.len() == before;
                if let Some(a) = g.draft_angle {
                    if !(0.0..45.0).contains(&a) {
                        push(&mut out, "draft_angle in [0, 45)", id);
                    }
                }
            }
            FeatureGeometry::Pocket(g) => match &g.boundary {
                Contour::Polygon(p) => {
                    let before = out.len();
                    check_polygon(&mut out, p, id, true);
                    shape_ok = out.len() == before;
                }
                Contour::Circle { radius, .. } => {
                    if !(*radius > 0.0) {
                        push(&mut out, "circle radius > 0", id);
                        shape_ok = false;
                    }
                }
            },
            FeatureGeometry::Hole(h) => {
                if !(h.diameter > 0.0) {
                    push(&mut out, "Hole diameter > 0", id);
                    shape_ok = false;
                }
                if let Some(p) = h.pitch {
                    if !(p > 0.0) {
                        push(&mut out, "pitch > 0", id);
                    }
                }
                if h.through && (h.bottom_z - stock.origin.z).abs() > 1e-9 {
                    push(&mut out, "through hole bottom_z = origin.z", id);
                }
                if let Some(cs) = h.countersink {
                    if !(cs.diameter > h.diameter) {
                        push(&mut out, "countersink diameter > hole diameter", id);
                    }
                    if !(cs.angle > 0.0 && cs.angle < 180.0) {
                        push(&mut out, "countersink angle in (0, 180)", id);
                    }
                }
            }
        }
        if shape_ok && !within_footprint(stock, &f.outline()) {
            push(&mut out, "feature within stock footprint", id);
        }
    }
    if contours > 1 {
        push(&mut out, "at most one outer contour", "features");
    }
    out.sort();
    out
}

fn validate_tools(tools: &[Tool], out: &mut Vec<Violation>) {
    let mut ids = BTreeSet::new();
    for t in tools {
        let subject = format!("T{}", t.id);
        if !ids.insert(t.id) {
            push(out, "unique tool ids", &subject);
        }
        if !(t.diameter > 0.0) {
            push(out, "tool diameter > 0", &subject);
        }
        if t.flutes < 1 {
            push(out, "tool flutes >= 1", &subject);
        }
        if !(t.max_depth > 0.0) {
            push(out, "tool max_depth > 0", &subject);
        }
        if t.kind == ToolKind::Tap && !t.pitch.is_some_and(|p| p > 0.0) {
            push(out, "tap pitch > 0", &subject);
        }
    }
}

fn validate_materials(part: &PartModel, out: &mut Vec<Violation>) {
    for m in &part.materials {
        for kind in ToolKind::ALL {
            let ok = m.cutting_speed.get(&kind).is_some_and(|v| *v > 0.0)
                && m.feed_per_tooth.get(&kind).is_some_and(|v| *v > 0.0);
            if !ok {
                push(out, "material covers every tool kind with positive data", &m.id);
                break;
            }
        }
    }
    if !part.materials.is_empty() && part.material().is_none() {
        push(out, "stock material defined", &part.stock.material);
    }
}

/// Full validation report of a part model. Empty means valid.
pub fn validate_part(model: &PartModel) -> Vec<Violation> {
    let mut out = match &model.geometry {
        PartGeometry::Features(f) => validate_features(&model.stock, f),
        PartGeometry::Boundary(b) => {
            match crate::recognition::recognize_features(b, &model.stock) {
                Ok(fm) => validate_features(&model.stock, &fm.features),
                Err(e) => vec![Violation {
                    rule: "boundary topology recognized".to_string(),
                    subject: e.to_string(),
                }],
            }
        }
    };
    validate_tools(&model.tools, &mut out);
    validate_materials(model, &mut out);
    out.sort();
    out
}

/// Parses and validates part-file text.
pub fn parse_part(text: &str) -> Result<PartModel, PartError> {
    let model: PartModel = serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Eof => PartError::SyntaxError {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
            _ => PartError::SchemaError(e.to_string()),
        }
    })?;
    if let Some(v) = validate_part(&model).into_iter().next() {
        return Err(PartError::ValidationError(v.rule));
    }
    Ok(model)
}

pub fn load_part(path: impl AsRef<Path>) -> Result<PartModel, PartError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            PartError::FileNotFound(path.to_path_buf())
        } else {
            PartError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    parse_part(&text)
}

/// Serializes a part model in the format read by [`parse_part`].
pub fn write_part(model: &PartModel) -> String {
    let mut s = serde_json::to_string_pretty(model).expect("part model serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_json(diameter: f64) -> String {
        format!(
            r#"{{
  "stock": {{"origin": [0, 0, 0], "size": [100, 50, 20], "material": "steel"}},
  "features": [
    {{"id": "H1", "kind": "hole",
      "geometry": {{"center": [50, 25], "diameter": {diameter}, "bottom_z": 10}},
      "tech": {{"ra": 6.3, "it": 12}}}}
  ]
}}"#
        )
    }

    fn stock() -> Stock {
        Stock::new(Point3::new(0.0, 0.0, 0.0), Point3::new(100.0, 50.0, 20.0), "steel")
    }

    #[test]
    fn minimal_file_loads() {
        let m = parse_part(&minimal_json(10.0)).unwrap();
        match &m.geometry {
            PartGeometry::Features(f) => assert_eq!(f.len(), 1),
            _ => panic!("expected features"),
        }
    }

    #[test]
    fn negative_diameter_is_rejected() {
        match parse_part(&minimal_json(-10.0)) {
            Err(PartError::ValidationError(rule)) => assert_eq!(rule, "Hole diameter > 0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pocket_outside_footprint_is_rejected() {
        let text = r#"{
  "stock": {"origin": [0, 0, 0], "size": [100, 50, 20], "material": "steel"},
  "features": [
    {"id": "P1", "kind": "pocket",
     "geometry": {"boundary": {"polygon": [[80, 10], [120, 10], [120, 30], [80, 30]]}, "floor_z": 15}}
  ]
}"#;
        match parse_part(text) {
            Err(PartError::ValidationError(rule)) => {
                assert_eq!(rule, "feature within stock footprint")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_syntax_errors() {
        let bad_key = minimal_json(10.0).replace("\"bottom_z\"", "\"bottom\"");
        assert!(matches!(parse_part(&bad_key), Err(PartError::SchemaError(_))));
        let extra = minimal_json(10.0).replace("\"material\": \"steel\"", "\"material\": \"steel\", \"colour\": 1");
        assert!(matches!(parse_part(&extra), Err(PartError::SchemaError(_))));
        match parse_part("{\n  \"id\": \"a\",\n  \"stock\": }\n") {
            Err(PartError::SyntaxError { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load_part("/nonexistent/part.json"),
            Err(PartError::FileNotFound(_))
        ));
    }

    #[test]
    fn floor_at_top_is_a_violation() {
        let f = Feature {
            id: "P1".into(),
            geometry: FeatureGeometry::Pocket(PocketGeometry {
                boundary: Contour::Circle {
                    center: Point2::new(50.0, 25.0),
                    radius: 10.0,
                },
                floor_z: 20.0,
            }),
            tech: TechAttrs::default(),
        };
        let v = validate_features(&stock(), &[f]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "floor_z < z_top");
    }

    #[test]
    fn pitch_and_tolerance_are_independent() {
        let f = Feature {
            id: "H1".into(),
            geometry: FeatureGeometry::Hole(HoleGeometry {
                center: Point2::new(50.0, 25.0),
                diameter: 8.0,
                bottom_z: 5.0,
                through: false,
                pitch: Some(1.25),
                countersink: None,
            }),
            tech: TechAttrs { ra: 3.2, it: 14 },
        };
        assert!(validate_features(&stock(), &[f]).is_empty());
    }

    #[test]
    fn normalization_examples() {
        let s = stock();
        let q = s.normalize_point(Point3::new(50.0, 25.0, 10.0));
        assert_eq!(q, Point3::new(0.5, 0.5, 0.5));
        assert_eq!(s.normalize_point(s.origin), Point3::new(0.0, 0.0, 0.0));
        assert_eq!(
            s.normalize_point(Point3::new(100.0, 50.0, 20.0)),
            Point3::new(1.0, 1.0, 1.0)
        );
        assert_eq!(
            s.denormalize_point(Point3::new(0.5, 0.5, 0.5)),
            Point3::new(50.0, 25.0, 10.0)
        );
        assert_eq!(s.denormalize_point(Point3::new(0.0, 0.0, 0.0)), s.origin);
    }

    #[test]
    fn validation_is_order_independent() {
        let mk = |id: &str, d: f64| Feature {
            id: id.into(),
            geometry: FeatureGeometry::Hole(HoleGeometry {
                center: Point2::new(20.0, 20.0),
                diameter: d,
                bottom_z: 25.0,
                through: false,
                pitch: None,
                countersink: None,
            }),
            tech: TechAttrs::default(),
        };
        let a = vec![mk("A", -1.0), mk("B", 5.0)];
        let b = vec![mk("B", 5.0), mk("A", -1.0)];
        assert_eq!(validate_features(&stock(), &a), validate_features(&stock(), &b));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalize_round_trip(x in 0.0..100.0f64, y in 0.0..50.0f64, z in 0.0..20.0f64,
                                    ox in -50.0..50.0f64, oz in -30.0..30.0f64) {
                let s = Stock::new(Point3::new(ox, 0.0, oz), Point3::new(100.0, 50.0, 20.0), "m");
                let p = Point3::new(ox + x, y, oz + z);
                let back = s.denormalize_point(s.normalize_point(p));
                prop_assert!(back.distance(p) < 1e-9);
            }
        }
    }
}
