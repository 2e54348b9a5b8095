//! Deterministic process planner: tool choice, cutting parameters and
//! toolpaths for every operation class. Its output is the teaching material
//! for the network bank.

pub mod cycles;
pub mod offset;
pub mod toolpath;
pub mod zigzag;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::round_half_up;
use crate::part_model::{Feature, FeatureGeometry, HoleGeometry, Material, Stock, TechAttrs, Tool, ToolKind};
use crate::recognition::{classify_feature, ClassifyConfig, FeatureModel, OperationClass};

pub use cycles::{depth_levels, plan_milling_cycle, plan_point_cycle};
pub use offset::{offset_contour, OffsetShape, Side};
pub use toolpath::{Move, PathBuilder, Sense, Toolpath};
pub use zigzag::zigzag_fill;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no feasible tool for {class} on feature `{feature}`")]
    NoFeasibleTool { class: OperationClass, feature: String },
    #[error("material has no cutting data for tool kind {0:?}")]
    MissingMaterialData(ToolKind),
    #[error("offset {distance} collapses a boundary of inradius {inradius}")]
    OffsetCollapse { distance: f64, inradius: f64 },
    #[error("tool too large for pocket `{0}`")]
    ToolTooLarge(String),
    #[error("nothing to cut for feature `{0}`")]
    NoMaterial(String),
    #[error("{class} does not apply to feature `{feature}`")]
    ClassMismatch { class: OperationClass, feature: String },
    #[error("invalid planner input: {0}")]
    InvalidInput(String),
    #[error("feature `{feature}`, {class}: {source}")]
    InFeature {
        feature: String,
        class: OperationClass,
        #[source]
        source: Box<PlanError>,
    },
}

/// Strategy constants of the cycles. Ratios are relative to the tool diameter
/// unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Height of the clearance plane above the stock top.
    pub clearance: f64,
    pub zigzag_angle: f64,
    pub face_stepover: f64,
    pub zplane_stepover: f64,
    pub pocket_stepover: f64,
    pub contour_stepover: f64,
    /// Default milling stepdown; capped by the tool's max depth.
    pub stepdown: f64,
    pub peck: f64,
    /// Gap left above the previous peck bottom when re-entering a hole.
    pub peck_reentry: f64,
    pub rough_allowance: f64,
    /// Extra inward offsets of the equidistant passes before the final one.
    pub equidistant_allowances: Vec<f64>,
    /// Drill overrun below a through hole, relative to the hole diameter.
    pub through_allowance: f64,
    /// Centering depth relative to the hole diameter, and its cap in mm.
    pub center_depth: f64,
    pub center_depth_max: f64,
    /// Stock left for the reamer, in mm on the diameter.
    pub ream_allowance: f64,
    /// Largest pocket tool as a fraction of the pocket's minimal width.
    pub pocket_tool_ratio: f64,
    pub sink_dwell: f64,
    pub thread_dwell: f64,
    /// Blind taps stop this many pitches above the hole bottom.
    pub thread_runout: f64,
    /// Z spacing of drafted-wall finishing slices in mm.
    pub slice_step: f64,
    /// Plunge feed as a fraction of the cutting feed.
    pub plunge_feed: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            clearance: 2.0,
            zigzag_angle: 0.0,
            face_stepover: 0.7,
            zplane_stepover: 0.5,
            pocket_stepover: 0.7,
            contour_stepover: 0.7,
            stepdown: 0.5,
            peck: 0.8,
            peck_reentry: 1.0,
            rough_allowance: 0.5,
            equidistant_allowances: vec![0.4, 0.2],
            through_allowance: 0.3,
            center_depth: 0.3,
            center_depth_max: 2.0,
            ream_allowance: 0.3,
            pocket_tool_ratio: 0.8,
            sink_dwell: 0.5,
            thread_dwell: 0.2,
            thread_runout: 2.0,
            slice_step: 1.0,
            plunge_feed: 0.5,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("face_stepover", self.face_stepover),
            ("zplane_stepover", self.zplane_stepover),
            ("pocket_stepover", self.pocket_stepover),
            ("contour_stepover", self.contour_stepover),
            ("stepdown", self.stepdown),
            ("peck", self.peck),
            ("pocket_tool_ratio", self.pocket_tool_ratio),
            ("slice_step", self.slice_step),
            ("plunge_feed", self.plunge_feed),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(k.to_string());
            }
        }
        let non_negative = [
            ("clearance", self.clearance),
            ("peck_reentry", self.peck_reentry),
            ("rough_allowance", self.rough_allowance),
            ("through_allowance", self.through_allowance),
            ("center_depth", self.center_depth),
            ("center_depth_max", self.center_depth_max),
            ("ream_allowance", self.ream_allowance),
            ("sink_dwell", self.sink_dwell),
            ("thread_dwell", self.thread_dwell),
            ("thread_runout", self.thread_runout),
        ];
        for (k, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(k.to_string());
            }
        }
        if self.equidistant_allowances.iter().any(|a| !(*a > 0.0)) {
            return Err("equidistant_allowances".into());
        }
        Ok(())
    }
}

/// Everything the planner reads from configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanSettings {
    pub planner: PlannerConfig,
    pub classify: ClassifyConfig,
}

/// Optimization profile. It scales the feed only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Criteria {
    Time,
    Quality,
    #[default]
    Cost,
}

impl Criteria {
    pub fn feed_multiplier(self) -> f64 {
        match self {
            Criteria::Time => 1.15,
            Criteria::Quality => 0.8,
            Criteria::Cost => 1.0,
        }
    }
}

impl std::str::FromStr for Criteria {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "time" => Ok(Criteria::Time),
            "quality" => Ok(Criteria::Quality),
            "cost" => Ok(Criteria::Cost),
            _ => Err(format!("unknown criteria profile `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuttingParams {
    pub spindle_rpm: f64,
    pub feed: f64,
    pub depth_of_cut: f64,
    pub direction: Sense,
    pub coolant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operation {
    pub class: OperationClass,
    pub feature_id: String,
    pub tool: Tool,
    pub params: CuttingParams,
    pub toolpath: Toolpath,
    pub clearance_z: f64,
}

/// Diameter of the drill that precedes reaming or tapping, or the finished
/// diameter when the hole is drilled only.
pub fn drill_diameter(h: &HoleGeometry, tech: &TechAttrs, s: &PlanSettings) -> f64 {
    if let Some(p) = h.pitch {
        h.diameter - p
    } else if tech.it <= s.classify.ream_max_it {
        h.diameter - s.planner.ream_allowance
    } else {
        h.diameter
    }
}

fn pick<'a>(
    candidates: impl Iterator<Item = &'a Tool>,
    better: impl Fn(&Tool, &Tool) -> std::cmp::Ordering,
) -> Option<&'a Tool> {
    candidates.min_by(|a, b| better(a, b).then_with(|| a.id.cmp(&b.id)))
}

pub fn select_tool(
    class: OperationClass,
    f: &Feature,
    library: &[Tool],
    s: &PlanSettings,
) -> Result<Tool, PlanError> {
    use OperationClass::*;
    let none = || PlanError::NoFeasibleTool {
        class,
        feature: f.id.clone(),
    };
    let of_kind = |k: ToolKind| library.iter().filter(move |t| t.kind == k);
    let matches = |a: f64, b: f64| (a - b).abs() <= 1e-6;
    let larger_first = |a: &Tool, b: &Tool| b.diameter.total_cmp(&a.diameter);
    let smaller_first = |a: &Tool, b: &Tool| a.diameter.total_cmp(&b.diameter);

    let chosen = if class.is_point_cycle() {
        let h = f.as_hole().ok_or_else(|| PlanError::ClassMismatch {
            class,
            feature: f.id.clone(),
        })?;
        match class {
            Center => pick(
                of_kind(ToolKind::CenterDrill).filter(|t| t.diameter <= h.diameter + 1e-9),
                larger_first,
            ),
            DrillNormal | DrillDeep => {
                let d = drill_diameter(h, &f.tech, s);
                pick(of_kind(ToolKind::Drill).filter(|t| matches(t.diameter, d)), smaller_first)
            }
            Ream => pick(
                of_kind(ToolKind::Reamer).filter(|t| matches(t.diameter, h.diameter)),
                smaller_first,
            ),
            Thread => {
                let p = h.pitch.ok_or_else(none)?;
                pick(
                    of_kind(ToolKind::Tap).filter(|t| {
                        matches(t.diameter, h.diameter) && t.pitch.is_some_and(|tp| matches(tp, p))
                    }),
                    smaller_first,
                )
            }
            Sink => {
                let cs = h.countersink.ok_or_else(none)?;
                pick(
                    of_kind(ToolKind::Countersink).filter(|t| t.diameter >= cs.diameter - 1e-9),
                    smaller_first,
                )
            }
            _ => unreachable!(),
        }
    } else {
        let limit = match (&f.geometry, class) {
            (FeatureGeometry::Pocket(p), PocketMill | ZPlaneMill | EquidistantFinish) => {
                s.planner.pocket_tool_ratio * p.boundary.min_width()
            }
            _ => f64::INFINITY,
        };
        pick(
            of_kind(ToolKind::EndMill).filter(|t| t.diameter <= limit + 1e-9),
            larger_first,
        )
    };
    chosen.cloned().ok_or_else(none)
}

pub fn cutting_parameters(
    tool: &Tool,
    material: &Material,
    class: OperationClass,
    criteria: Criteria,
    s: &PlanSettings,
) -> Result<CuttingParams, PlanError> {
    let vc = material
        .cutting_speed
        .get(&tool.kind)
        .copied()
        .filter(|v| *v > 0.0)
        .ok_or(PlanError::MissingMaterialData(tool.kind))?;
    let fz = material
        .feed_per_tooth
        .get(&tool.kind)
        .copied()
        .filter(|v| *v > 0.0)
        .ok_or(PlanError::MissingMaterialData(tool.kind))?;
    let rpm = round_half_up(1000.0 * vc / (std::f64::consts::PI * tool.diameter)).max(1.0);
    let feed = if class == OperationClass::Thread {
        let pitch = tool
            .pitch
            .ok_or_else(|| PlanError::InvalidInput(format!("tap {} has no pitch", tool.id)))?;
        pitch * rpm
    } else {
        round_half_up(fz * tool.flutes as f64 * rpm * criteria.feed_multiplier()).max(1.0)
    };
    let depth_of_cut = match class {
        c if !c.is_point_cycle() => tool.max_depth.min(s.planner.stepdown * tool.diameter),
        OperationClass::DrillDeep => tool.max_depth.min(s.planner.peck * tool.diameter),
        _ => tool.max_depth,
    };
    Ok(CuttingParams {
        spindle_rpm: rpm,
        feed,
        depth_of_cut,
        direction: Sense::Cw,
        coolant: material.coolant,
    })
}

/// Stage of a class in the part sequence.
pub fn stage(class: OperationClass) -> u8 {
    use OperationClass::*;
    match class {
        FaceRough => 0,
        ContourRough => 1,
        PocketMill => 2,
        Center => 3,
        DrillNormal | DrillDeep => 4,
        Ream | Sink | Thread => 5,
        ContourZFinish | ContourFinish | Contour3DFinish | ZPlaneMill | EquidistantFinish => 6,
    }
}

/// Orders operations by stage, then by tool id, keeping the incoming order
/// otherwise.
pub fn order_operations(ops: &mut [Operation]) {
    ops.sort_by_key(|o| (stage(o.class), o.tool.id));
}

/// All (feature, class) pairs of a model in feature order.
pub fn requested_operations<'a>(
    fm: &'a FeatureModel,
    s: &PlanSettings,
) -> Vec<(&'a Feature, OperationClass)> {
    fm.features
        .iter()
        .flat_map(|f| {
            classify_feature(f, &fm.stock, &s.classify)
                .into_iter()
                .map(move |c| (f, c))
        })
        .collect()
}

pub fn plan_operation(
    class: OperationClass,
    f: &Feature,
    stock: &Stock,
    library: &[Tool],
    material: &Material,
    criteria: Criteria,
    s: &PlanSettings,
) -> Result<Operation, PlanError> {
    let wrap = |e: PlanError| match e {
        e @ PlanError::NoFeasibleTool { .. } => e,
        e => PlanError::InFeature {
            feature: f.id.clone(),
            class,
            source: Box::new(e),
        },
    };
    let tool = select_tool(class, f, library, s).map_err(wrap)?;
    let params = cutting_parameters(&tool, material, class, criteria, s).map_err(wrap)?;
    let toolpath = if class.is_point_cycle() {
        plan_point_cycle(class, f, &tool, &params, stock, &s.planner)
    } else {
        plan_milling_cycle(class, f, &tool, &params, stock, &s.planner)
    }
    .map_err(wrap)?;
    Ok(Operation {
        class,
        feature_id: f.id.clone(),
        tool,
        params,
        toolpath,
        clearance_z: stock.z_top() + s.planner.clearance,
    })
}

pub fn plan_part(
    fm: &FeatureModel,
    library: &[Tool],
    material: &Material,
    criteria: Criteria,
    s: &PlanSettings,
) -> Result<Vec<Operation>, PlanError> {
    let mut ops = requested_operations(fm, s)
        .into_iter()
        .map(|(f, c)| plan_operation(c, f, &fm.stock, library, material, criteria, s))
        .collect::<Result<Vec<_>, _>>()?;
    order_operations(&mut ops);
    Ok(ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn tool(id: u32, kind: ToolKind, d: f64) -> Tool {
        Tool {
            id,
            kind,
            diameter: d,
            flutes: 2,
            max_depth: 30.0,
            pitch: None,
        }
    }

    fn material(vc: f64, fz: f64) -> Material {
        Material {
            id: "m".into(),
            cutting_speed: ToolKind::ALL.iter().map(|k| (*k, vc)).collect::<BTreeMap<_, _>>(),
            feed_per_tooth: ToolKind::ALL.iter().map(|k| (*k, fz)).collect(),
            coolant: false,
        }
    }

    #[test]
    fn rpm_and_feed_follow_the_formula() {
        let t = tool(1, ToolKind::EndMill, 10.0);
        let s = PlanSettings::default();
        let m = material(100.0, 0.05);
        let p = cutting_parameters(&t, &m, OperationClass::PocketMill, Criteria::Cost, &s).unwrap();
        assert_eq!((p.spindle_rpm, p.feed), (3183.0, 318.0));
        assert_eq!(p.depth_of_cut, 5.0);
        let q = cutting_parameters(&t, &m, OperationClass::PocketMill, Criteria::Quality, &s).unwrap();
        assert_eq!(q.feed, 255.0);
    }

    #[test]
    fn missing_material_data_is_reported() {
        let t = tool(1, ToolKind::Tap, 8.0);
        let mut m = material(100.0, 0.05);
        m.cutting_speed.remove(&ToolKind::Tap);
        assert_eq!(
            cutting_parameters(&t, &m, OperationClass::Thread, Criteria::Cost, &PlanSettings::default()),
            Err(PlanError::MissingMaterialData(ToolKind::Tap))
        );
    }

    #[test]
    fn criteria_parse() {
        assert_eq!("quality".parse::<Criteria>().unwrap(), Criteria::Quality);
        assert!("speed".parse::<Criteria>().is_err());
    }
}
