//! Seeded synthetic parts for teaching: one feature per part, drawn from a
//! family whose teacher toolpaths share a topology.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{rectangle, Point2, Point3};
use crate::part_model::{
    Contour, ContourGeometry, Feature, FeatureGeometry, HoleGeometry, Material, PartGeometry, PartModel,
    PocketGeometry, Stock, TechAttrs, Tool, ToolKind,
};
use crate::recognition::OperationClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Blind holes up to three diameters deep.
    Holes,
    /// Blind holes needing five pecks.
    DeepHoles,
    /// Square pockets cleared with a single lap at a single level.
    Pockets,
    /// Rectangular outer contours centred on the stock, cut at a single
    /// level.
    Contours,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Holes, Family::DeepHoles, Family::Pockets, Family::Contours];

    pub fn name(self) -> &'static str {
        match self {
            Family::Holes => "holes",
            Family::DeepHoles => "deep_holes",
            Family::Pockets => "pockets",
            Family::Contours => "contours",
        }
    }

    /// Classes whose networks this family teaches.
    pub fn classes(self) -> &'static [OperationClass] {
        use OperationClass::*;
        match self {
            Family::Holes => &[Center, DrillNormal],
            Family::DeepHoles => &[DrillDeep],
            Family::Pockets => &[PocketMill],
            Family::Contours => &[ContourRough, ContourFinish],
        }
    }

    pub fn for_class(class: OperationClass) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.classes().contains(&class))
    }

    /// Stock of every part in the family. Heights are chosen so that the
    /// depth range spans a large share of the normalized z axis.
    pub fn stock(self) -> Stock {
        let h = match self {
            Family::Holes => 30.0,
            Family::DeepHoles => 40.0,
            Family::Pockets | Family::Contours => 12.0,
        };
        Stock::new(Point3::new(0.0, 0.0, 0.0), Point3::new(100.0, 80.0, h), "steel")
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown corpus family `{s}`"))
    }
}

/// Classes with a corpus family, in class order.
pub fn teachable_classes() -> Vec<OperationClass> {
    OperationClass::ALL
        .into_iter()
        .filter(|c| Family::for_class(*c).is_some())
        .collect()
}

pub fn standard_tools() -> Vec<Tool> {
    let t = |id, kind, diameter, flutes, max_depth| Tool {
        id,
        kind,
        diameter,
        flutes,
        max_depth,
        pitch: None,
    };
    use ToolKind::*;
    let mut tools = vec![
        t(1, EndMill, 20.0, 4, 40.0),
        t(2, EndMill, 16.0, 4, 40.0),
        t(3, EndMill, 10.0, 3, 30.0),
        t(4, EndMill, 6.0, 3, 20.0),
        t(5, CenterDrill, 6.0, 2, 6.0),
        t(6, Drill, 8.0, 2, 60.0),
        t(7, Drill, 9.7, 2, 60.0),
        t(8, Drill, 8.5, 2, 60.0),
        t(9, Drill, 6.6, 2, 60.0),
        t(10, Drill, 6.0, 2, 60.0),
        t(11, Reamer, 10.0, 6, 60.0),
        t(12, Tap, 10.0, 3, 40.0),
        t(13, Countersink, 16.0, 3, 10.0),
        t(14, Drill, 10.0, 2, 60.0),
    ];
    tools[11].pitch = Some(1.5);
    tools
}

pub fn standard_material() -> Material {
    use ToolKind::*;
    let speeds: BTreeMap<ToolKind, f64> = [
        (EndMill, 120.0),
        (Drill, 80.0),
        (CenterDrill, 60.0),
        (Reamer, 20.0),
        (Countersink, 40.0),
        (Tap, 10.0),
    ]
    .into();
    let feeds: BTreeMap<ToolKind, f64> = [
        (EndMill, 0.05),
        (Drill, 0.1),
        (CenterDrill, 0.05),
        (Reamer, 0.15),
        (Countersink, 0.05),
        (Tap, 1.0),
    ]
    .into();
    Material {
        id: "steel".into(),
        cutting_speed: speeds,
        feed_per_tooth: feeds,
        coolant: true,
    }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn feature(family: Family, rng: &mut ChaCha8Rng, stock: &Stock) -> Feature {
    let z_top = stock.z_top();
    let mut u = |lo: f64, hi: f64| round3(rng.gen_range(lo..=hi));
    let (id, geometry) = match family {
        Family::Holes | Family::DeepHoles => {
            let d = [6.0, 8.0, 10.0][(u(0.0, 2.999)) as usize];
            let depth = if family == Family::Holes {
                u(5.0, 2.9 * d)
            } else {
                // four full pecks of 0.8 d and a partial fifth
                u(0.8 * d * 4.1, 0.8 * d * 4.9)
            };
            let center = Point2::new(u(15.0, 85.0), u(15.0, 65.0));
            (
                "H1",
                FeatureGeometry::Hole(HoleGeometry {
                    center,
                    diameter: d,
                    bottom_z: z_top - depth,
                    through: false,
                    pitch: None,
                    countersink: None,
                }),
            )
        }
        Family::Pockets => {
            let half = 0.5 * u(21.5, 23.5);
            let c = Point2::new(u(20.0, 80.0), u(20.0, 60.0));
            let depth = u(2.0, 7.9);
            let boundary = rectangle(
                Point2::new(c.x - half, c.y - half),
                Point2::new(c.x + half, c.y + half),
            );
            (
                "P1",
                FeatureGeometry::Pocket(PocketGeometry {
                    boundary: Contour::Polygon(boundary),
                    floor_z: z_top - depth,
                }),
            )
        }
        Family::Contours => {
            let (sx, sy) = (stock.size.x, stock.size.y);
            let inset = Point2::new(u(3.0, 14.0), u(3.0, 14.0));
            let lo = inset;
            let hi = Point2::new(sx - inset.x, sy - inset.y);
            let depth = u(2.0, 9.5);
            (
                "C1",
                FeatureGeometry::OuterContour(ContourGeometry {
                    boundary: rectangle(lo + stock.origin.xy(), hi + stock.origin.xy()),
                    floor_z: z_top - depth,
                    draft_angle: None,
                }),
            )
        }
    };
    Feature {
        id: id.into(),
        geometry,
        tech: TechAttrs { ra: 3.2, it: 12 },
    }
}

/// `n` parts of one family. The same (family, n, seed) always yields the
/// same parts, and part `i` does not depend on `n`.
pub fn generate_family(family: Family, n: usize, seed: u64) -> Vec<PartModel> {
    let stock = family.stock();
    (0..n)
        .map(|i| {
            let s = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((family as u64) << 32)
                .wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            PartModel {
                id: Some(format!("{}-{seed}-{i:03}", family.name())),
                stock: stock.clone(),
                geometry: PartGeometry::Features(vec![feature(family, &mut rng, &stock)]),
                tools: standard_tools(),
                materials: vec![standard_material()],
            }
        })
        .collect()
}
