//! Feature recognition from a 2.5D boundary model and classification of
//! features into machining-operation classes.
//!
//! The boundary model is a set of horizontal planar faces, each with an outer
//! loop and inner loops. Walls are implied vertical unless a loop records a
//! draft angle. Recognition pairs every opening (inner loop) with the face
//! whose outer loop has the same shape further down:
//!
//! * circle, no floor face: through hole
//! * circle, drill-point floor: blind hole
//! * circle or polygon, flat floor: pocket
//! * top outer loop smaller than the stock: outer contour, floor taken from
//!   the shoulder face that carries the same loop as an inner loop
//! * any other face below the top: face-milled region

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Point2};
use crate::part_model::{
    Contour, ContourGeometry, Countersink, FaceGeometry, Feature, FeatureGeometry, HoleGeometry,
    PartGeometry, PartModel, PocketGeometry, Stock, TechAttrs,
};

const TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecognitionError {
    #[error("unrecognized topology at loop `{0}`")]
    UnrecognizedTopology(String),
    #[error("invalid boundary model: {0}")]
    InvalidBoundary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceSurface {
    #[default]
    Flat,
    /// Conical bottom left by a drill point.
    DrillPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Loop {
    pub id: String,
    pub shape: Contour,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draft_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tech: Option<TechAttrs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub countersink: Option<Countersink>,
}

impl Loop {
    fn plain(id: impl Into<String>, shape: Contour) -> Self {
        Loop {
            id: id.into(),
            shape,
            draft_angle: None,
            tech: None,
            pitch: None,
            countersink: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarFace {
    pub z_level: f64,
    pub outer_loop: Loop,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inner_loops: Vec<Loop>,
    #[serde(default, skip_serializing_if = "is_flat")]
    pub surface: FaceSurface,
}

fn is_flat(s: &FaceSurface) -> bool {
    *s == FaceSurface::Flat
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryModel {
    pub faces: Vec<PlanarFace>,
}

/// Features of a part in canonical order, with the loops each came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub stock: Stock,
    pub features: Vec<Feature>,
    #[serde(default)]
    pub provenance: BTreeMap<String, Vec<String>>,
}

impl FeatureModel {
    /// Builds a model from an explicit feature list, sorting it canonically.
    pub fn from_features(stock: Stock, mut features: Vec<Feature>) -> Self {
        features.sort_by(|a, b| a.canonical_cmp(b));
        FeatureModel {
            stock,
            features,
            provenance: BTreeMap::new(),
        }
    }

    pub fn from_part(part: &PartModel) -> Result<Self, RecognitionError> {
        match &part.geometry {
            PartGeometry::Features(f) => Ok(Self::from_features(part.stock.clone(), f.clone())),
            PartGeometry::Boundary(b) => recognize_features(b, &part.stock),
        }
    }

    pub fn feature(&self, id: &str) -> Option<&Feature> {
        self.features.iter().find(|f| f.id == id)
    }
}

/// The fourteen machining-operation classes. Ordinals are stable and used in
/// file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub enum OperationClass {
    FaceRough = 0,
    ContourRough = 1,
    ContourZFinish = 2,
    ContourFinish = 3,
    Contour3DFinish = 4,
    ZPlaneMill = 5,
    EquidistantFinish = 6,
    PocketMill = 7,
    DrillNormal = 8,
    DrillDeep = 9,
    Center = 10,
    Ream = 11,
    Sink = 12,
    Thread = 13,
}

impl OperationClass {
    pub const ALL: [OperationClass; 14] = [
        OperationClass::FaceRough,
        OperationClass::ContourRough,
        OperationClass::ContourZFinish,
        OperationClass::ContourFinish,
        OperationClass::Contour3DFinish,
        OperationClass::ZPlaneMill,
        OperationClass::EquidistantFinish,
        OperationClass::PocketMill,
        OperationClass::DrillNormal,
        OperationClass::DrillDeep,
        OperationClass::Center,
        OperationClass::Ream,
        OperationClass::Sink,
        OperationClass::Thread,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            OperationClass::FaceRough => "FaceRough",
            OperationClass::ContourRough => "ContourRough",
            OperationClass::ContourZFinish => "ContourZFinish",
            OperationClass::ContourFinish => "ContourFinish",
            OperationClass::Contour3DFinish => "Contour3DFinish",
            OperationClass::ZPlaneMill => "ZPlaneMill",
            OperationClass::EquidistantFinish => "EquidistantFinish",
            OperationClass::PocketMill => "PocketMill",
            OperationClass::DrillNormal => "DrillNormal",
            OperationClass::DrillDeep => "DrillDeep",
            OperationClass::Center => "Center",
            OperationClass::Ream => "Ream",
            OperationClass::Sink => "Sink",
            OperationClass::Thread => "Thread",
        }
    }

    /// Hole-making classes executed as point cycles.
    pub fn is_point_cycle(self) -> bool {
        matches!(
            self,
            OperationClass::Center
                | OperationClass::DrillNormal
                | OperationClass::DrillDeep
                | OperationClass::Ream
                | OperationClass::Sink
                | OperationClass::Thread
        )
    }
}

impl fmt::Display for OperationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OperationClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        OperationClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown operation class `{s}`"))
    }
}

/// Thresholds of the classification rule table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    /// Holes deeper than this multiple of the diameter are peck-drilled.
    pub deep_hole_ratio: f64,
    /// Holes at or below this IT grade are reamed.
    pub ream_max_it: u8,
    /// Surfaces at or below this Ra get finishing passes.
    pub finish_max_ra: f64,
    /// Outer contours deeper than this are finished level by level.
    pub contour_finish_max_depth: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            deep_hole_ratio: 3.0,
            ream_max_it: 8,
            finish_max_ra: 1.6,
            contour_finish_max_depth: 10.0,
        }
    }
}

/// Ordered operation classes for one feature.
pub fn classify_feature(f: &Feature, stock: &Stock, cfg: &ClassifyConfig) -> Vec<OperationClass> {
    use OperationClass::*;
    let finish = f.tech.ra <= cfg.finish_max_ra;
    let mut out = Vec::new();
    match &f.geometry {
        FeatureGeometry::Hole(h) => {
            out.push(Center);
            let depth = stock.z_top() - h.bottom_z;
            out.push(if depth <= cfg.deep_hole_ratio * h.diameter {
                DrillNormal
            } else {
                DrillDeep
            });
            if f.tech.it <= cfg.ream_max_it {
                out.push(Ream);
            }
            if h.pitch.is_some() {
                out.push(Thread);
            }
            if h.countersink.is_some() {
                out.push(Sink);
            }
        }
        FeatureGeometry::Pocket(_) => {
            out.push(PocketMill);
            if finish {
                out.push(ZPlaneMill);
                out.push(EquidistantFinish);
            }
        }
        FeatureGeometry::Face(_) => {
            out.push(FaceRough);
            if finish {
                out.push(ZPlaneMill);
            }
        }
        FeatureGeometry::OuterContour(c) => {
            out.push(ContourRough);
            let depth = stock.z_top() - c.floor_z;
            out.push(if c.draft_angle.is_some() {
                Contour3DFinish
            } else if depth > cfg.contour_finish_max_depth {
                ContourZFinish
            } else {
                ContourFinish
            });
        }
    }
    out
}

fn polygons_equal(a: &[Point2], b: &[Point2]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let ca = geometry::canonical_start(a);
    let cb = geometry::canonical_start(b);
    ca.iter().zip(&cb).all(|(p, q)| p.distance(*q) <= TOL)
}

fn shapes_equal(a: &Contour, b: &Contour) -> bool {
    match (a, b) {
        (Contour::Polygon(p), Contour::Polygon(q)) => polygons_equal(p, q),
        (
            Contour::Circle { center: c1, radius: r1 },
            Contour::Circle { center: c2, radius: r2 },
        ) => c1.distance(*c2) <= TOL && (r1 - r2).abs() <= TOL,
        _ => false,
    }
}

/// Recognizes features of a boundary model against its stock.
pub fn recognize_features(
    b: &BoundaryModel,
    stock: &Stock,
) -> Result<FeatureModel, RecognitionError> {
    let z_top = stock.z_top();
    let tops: Vec<usize> = (0..b.faces.len())
        .filter(|&i| (b.faces[i].z_level - z_top).abs() <= TOL)
        .collect();
    if tops.len() != 1 {
        return Err(RecognitionError::InvalidBoundary(format!(
            "expected exactly one face at z_top, found {}",
            tops.len()
        )));
    }
    let top = &b.faces[tops[0]];
    let mut ids = BTreeSet::new();
    for face in &b.faces {
        for l in std::iter::once(&face.outer_loop).chain(&face.inner_loops) {
            if !ids.insert(l.id.as_str()) {
                return Err(RecognitionError::InvalidBoundary(format!(
                    "duplicate loop id `{}`",
                    l.id
                )));
            }
        }
    }

    let mut claimed: BTreeSet<String> = BTreeSet::new();
    let mut features = Vec::new();
    let mut provenance = BTreeMap::new();

    // Outer contour: top outline differs from the stock footprint.
    let footprint = Contour::Polygon(stock.footprint());
    claimed.insert(top.outer_loop.id.clone());
    if !shapes_equal(&top.outer_loop.shape, &footprint) {
        let l = &top.outer_loop;
        let Contour::Polygon(poly) = &l.shape else {
            return Err(RecognitionError::UnrecognizedTopology(l.id.clone()));
        };
        let mut sources = vec![l.id.clone()];
        let mut floor_z = stock.origin.z;
        let shoulder = b
            .faces
            .iter()
            .filter(|f| f.z_level < z_top - TOL)
            .filter_map(|f| {
                f.inner_loops
                    .iter()
                    .find(|il| shapes_equal(&il.shape, &l.shape))
                    .map(|il| (f, il))
            })
            .max_by(|a, b| {
                a.0.z_level
                    .total_cmp(&b.0.z_level)
                    .then_with(|| b.0.outer_loop.id.cmp(&a.0.outer_loop.id))
            });
        if let Some((face, wall)) = shoulder {
            floor_z = face.z_level;
            claimed.insert(face.outer_loop.id.clone());
            claimed.insert(wall.id.clone());
            sources.push(face.outer_loop.id.clone());
            sources.push(wall.id.clone());
        }
        provenance.insert(l.id.clone(), sources);
        features.push(Feature {
            id: l.id.clone(),
            geometry: FeatureGeometry::OuterContour(ContourGeometry {
                boundary: poly.clone(),
                floor_z,
                draft_angle: l.draft_angle,
            }),
            tech: l.tech.unwrap_or_default(),
        });
    }

    // Openings and their floors.
    let mut order: Vec<usize> = (0..b.faces.len()).collect();
    order.sort_by(|&i, &j| {
        b.faces[j]
            .z_level
            .total_cmp(&b.faces[i].z_level)
            .then_with(|| b.faces[i].outer_loop.id.cmp(&b.faces[j].outer_loop.id))
    });
    for &fi in &order {
        let face = &b.faces[fi];
        let mut inner: Vec<&Loop> = face.inner_loops.iter().collect();
        inner.sort_by(|a, b| a.id.cmp(&b.id));
        for l in inner {
            if claimed.contains(&l.id) {
                continue;
            }
            let floor = b
                .faces
                .iter()
                .filter(|f| {
                    f.z_level < face.z_level - TOL
                        && !claimed.contains(&f.outer_loop.id)
                        && shapes_equal(&f.outer_loop.shape, &l.shape)
                })
                .max_by(|a, b| {
                    a.z_level
                        .total_cmp(&b.z_level)
                        .then_with(|| b.outer_loop.id.cmp(&a.outer_loop.id))
                });
            let tech = l.tech.unwrap_or_default();
            let geometry = match (&l.shape, floor) {
                (Contour::Circle { center, radius }, None) => FeatureGeometry::Hole(HoleGeometry {
                    center: *center,
                    diameter: 2.0 * radius,
                    bottom_z: stock.origin.z,
                    through: true,
                    pitch: l.pitch,
                    countersink: l.countersink,
                }),
                (Contour::Circle { center, radius }, Some(fl))
                    if fl.surface == FaceSurface::DrillPoint =>
                {
                    FeatureGeometry::Hole(HoleGeometry {
                        center: *center,
                        diameter: 2.0 * radius,
                        bottom_z: fl.z_level,
                        through: false,
                        pitch: l.pitch,
                        countersink: l.countersink,
                    })
                }
                (shape, Some(fl)) if fl.surface == FaceSurface::Flat => {
                    FeatureGeometry::Pocket(PocketGeometry {
                        boundary: shape.clone(),
                        floor_z: fl.z_level,
                    })
                }
                _ => return Err(RecognitionError::UnrecognizedTopology(l.id.clone())),
            };
            let mut sources = vec![l.id.clone()];
            claimed.insert(l.id.clone());
            if let Some(fl) = floor {
                claimed.insert(fl.outer_loop.id.clone());
                sources.push(fl.outer_loop.id.clone());
            }
            provenance.insert(l.id.clone(), sources);
            features.push(Feature {
                id: l.id.clone(),
                geometry,
                tech,
            });
        }
    }

    // Remaining lower faces are face-milled regions.
    for &fi in &order {
        let face = &b.faces[fi];
        if claimed.contains(&face.outer_loop.id) {
            continue;
        }
        let l = &face.outer_loop;
        match (&l.shape, face.surface) {
            (Contour::Polygon(region), FaceSurface::Flat) if face.z_level < z_top - TOL => {
                claimed.insert(l.id.clone());
                provenance.insert(l.id.clone(), vec![l.id.clone()]);
                features.push(Feature {
                    id: l.id.clone(),
                    geometry: FeatureGeometry::Face(FaceGeometry {
                        region: region.clone(),
                        target_z: face.z_level,
                    }),
                    tech: l.tech.unwrap_or_default(),
                });
            }
            _ => return Err(RecognitionError::UnrecognizedTopology(l.id.clone())),
        }
    }

    features.sort_by(|a, b| a.canonical_cmp(b));
    Ok(FeatureModel {
        stock: stock.clone(),
        features,
        provenance,
    })
}

/// Builds the boundary model whose recognition yields `fm`'s features.
pub fn synthesize_boundary(fm: &FeatureModel) -> BoundaryModel {
    let stock = &fm.stock;
    let z_top = stock.z_top();
    let mut features: Vec<&Feature> = fm.features.iter().collect();
    features.sort_by(|a, b| a.canonical_cmp(b));

    let mut top_outer = Loop::plain("top", Contour::Polygon(stock.footprint()));
    let mut top_inner = Vec::new();
    let mut lower = Vec::new();

    for f in features {
        match &f.geometry {
            FeatureGeometry::OuterContour(c) => {
                top_outer = Loop {
                    draft_angle: c.draft_angle,
                    tech: Some(f.tech),
                    ..Loop::plain(f.id.clone(), Contour::Polygon(c.boundary.clone()))
                };
                if c.floor_z > stock.origin.z + TOL {
                    lower.push(PlanarFace {
                        z_level: c.floor_z,
                        outer_loop: Loop::plain(
                            format!("{}.shoulder", f.id),
                            Contour::Polygon(stock.footprint()),
                        ),
                        inner_loops: vec![Loop::plain(
                            format!("{}.wall", f.id),
                            Contour::Polygon(c.boundary.clone()),
                        )],
                        surface: FaceSurface::Flat,
                    });
                }
            }
            FeatureGeometry::Pocket(p) => {
                top_inner.push(Loop {
                    tech: Some(f.tech),
                    ..Loop::plain(f.id.clone(), p.boundary.clone())
                });
                lower.push(PlanarFace {
                    z_level: p.floor_z,
                    outer_loop: Loop::plain(format!("{}.floor", f.id), p.boundary.clone()),
                    inner_loops: Vec::new(),
                    surface: FaceSurface::Flat,
                });
            }
            FeatureGeometry::Hole(h) => {
                let shape = Contour::Circle {
                    center: h.center,
                    radius: 0.5 * h.diameter,
                };
                top_inner.push(Loop {
                    tech: Some(f.tech),
                    pitch: h.pitch,
                    countersink: h.countersink,
                    ..Loop::plain(f.id.clone(), shape.clone())
                });
                if !h.through {
                    lower.push(PlanarFace {
                        z_level: h.bottom_z,
                        outer_loop: Loop::plain(format!("{}.floor", f.id), shape),
                        inner_loops: Vec::new(),
                        surface: FaceSurface::DrillPoint,
                    });
                }
            }
            FeatureGeometry::Face(g) => {
                lower.push(PlanarFace {
                    z_level: g.target_z,
                    outer_loop: Loop {
                        tech: Some(f.tech),
                        ..Loop::plain(f.id.clone(), Contour::Polygon(g.region.clone()))
                    },
                    inner_loops: Vec::new(),
                    surface: FaceSurface::Flat,
                });
            }
        }
    }

    let mut faces = vec![PlanarFace {
        z_level: z_top,
        outer_loop: top_outer,
        inner_loops: top_inner,
        surface: FaceSurface::Flat,
    }];
    faces.extend(lower);
    BoundaryModel { faces }
}
