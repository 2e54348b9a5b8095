//! Simulated control unit: program decoding, interpolation, the position
//! loop, material removal on a height field, and verification metrics.

pub mod heightfield;
pub mod interp;
pub mod motion;

use std::collections::BTreeMap;
use std::io::Write;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;
use crate::nc::NcProgram;
use crate::part_model::{Stock, Tool};

pub use heightfield::{carve_heightfield, compare_heightfields, expected_heightfield, DeviationMetrics, HeightField};
pub use interp::{interpret_program, Event, EventKind, Item, MachineState, Segment, SegmentKind};
pub use motion::{interpolate_segment, servo_track, Servo};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("block N{0}: feed moves need a positive F first")]
    FeedUndefined(u32),
    #[error("block N{0}: arc start and end are not equidistant from the center")]
    ArcGeometryError(u32),
    #[error("height fields have different grids")]
    GridMismatch,
    #[error("block N{block}: tool {tool} is not in the library")]
    UnknownTool { block: u32, tool: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Interpolation period in seconds.
    pub dt: f64,
    /// Rapid traverse rate in mm/min.
    pub rapid_rate: f64,
    /// Position-loop gain in 1/s.
    pub kv: f64,
    /// Height-field cell size in mm.
    pub cell_size: f64,
    /// Following error below which a hold point counts as reached, in mm.
    pub in_position: f64,
    /// Longest wait for the in-position condition, in seconds.
    pub max_settle: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.001,
            rapid_rate: 10000.0,
            kv: 30.0,
            cell_size: 0.5,
            in_position: 0.01,
            max_settle: 2.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (k, v) in [
            ("dt", self.dt),
            ("rapid_rate", self.rapid_rate),
            ("kv", self.kv),
            ("cell_size", self.cell_size),
            ("in_position", self.in_position),
            ("max_settle", self.max_settle),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(k.to_string());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct PathMetrics {
    pub cut_length: f64,
    pub rapid_length: f64,
    pub machining_time: f64,
    pub tool_changes: usize,
}

/// Lengths and nominal time of an interpreted program.
pub fn path_metrics(items: &[Item], rapid_rate: f64) -> PathMetrics {
    let mut m = PathMetrics::default();
    for it in items {
        match it {
            Item::Segment(s) => {
                let len = s.length();
                if s.is_rapid() {
                    m.rapid_length += len;
                    m.machining_time += len / rapid_rate * 60.0;
                } else {
                    m.cut_length += len;
                    m.machining_time += len / s.feed * 60.0;
                }
            }
            Item::Event(e) => match e.kind {
                EventKind::Dwell { seconds } => m.machining_time += seconds,
                EventKind::ToolChange { .. } => m.tool_changes += 1,
                _ => {}
            },
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub commanded: Point3,
    pub actual: Point3,
    pub feed: f64,
    pub tool: Option<u32>,
}

pub const TRACE_HEADER: &str = "t,cx,cy,cz,ax,ay,az,feed,tool";

impl TrajectorySample {
    pub fn csv_row(&self) -> String {
        let c = self.commanded;
        let a = self.actual;
        format!(
            "{:.3},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{}",
            self.t,
            c.x,
            c.y,
            c.z,
            a.x,
            a.y,
            a.z,
            self.feed,
            self.tool.map_or(String::new(), |t| t.to_string())
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SimReport {
    pub path: PathMetrics,
    pub samples: usize,
    pub simulated_time: f64,
    /// Largest distance between commanded and actual position.
    pub max_following_error: f64,
    pub tools_used: Vec<u32>,
}

/// Runs a program against a stock: every actual position of the active tool
/// lowers the height field. The loop settles to the in-position tolerance at
/// the end of every move that is not followed by a tangent feed move.
pub struct Simulator<'a> {
    pub cfg: &'a SimConfig,
    pub tools: BTreeMap<u32, &'a Tool>,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: &'a SimConfig, tools: &'a [Tool]) -> Self {
        Simulator {
            cfg,
            tools: tools.iter().map(|t| (t.id, t)).collect(),
        }
    }

    pub fn run(
        &self,
        program: &NcProgram,
        stock: &Stock,
        trace: Option<&mut dyn Write>,
    ) -> Result<(HeightField, SimReport), Box<dyn std::error::Error + Send + Sync>> {
        let items = interpret_program(program, self.cfg.rapid_rate)?;
        let dt = self.cfg.dt;
        let mut st = RunState {
            hf: HeightField::new(stock, self.cfg.cell_size),
            servo: Servo::new(self.cfg.kv, dt),
            dt,
            tool: None,
            k: 0,
            max_err: 0.0,
            last_carved: None,
            trace,
        };
        let mut tools_used = Vec::new();
        if let Some(w) = st.trace.as_deref_mut() {
            writeln!(w, "{TRACE_HEADER}")?;
        }

        let settle_steps = (self.cfg.max_settle / dt).ceil() as usize;
        let min_cos = 1.0f64.to_radians().cos();
        let mut first = true;
        for (idx, it) in items.iter().enumerate() {
            match it {
                Item::Segment(seg) => {
                    let pts = interpolate_segment(seg, dt);
                    let skip = if first { 0 } else { 1 };
                    first = false;
                    for &p in pts.iter().skip(skip.min(pts.len() - 1)) {
                        st.emit(p, seg.feed)?;
                    }
                    let tangent_next = match items.get(idx + 1) {
                        Some(Item::Segment(n)) if !seg.is_rapid() && !n.is_rapid() => {
                            match (seg.tangent(true), n.tangent(false)) {
                                (Some(a), Some(b)) => a.x * b.x + a.y * b.y + a.z * b.z >= min_cos,
                                _ => false,
                            }
                        }
                        _ => false,
                    };
                    if !tangent_next {
                        let mut steps = 0;
                        while st.servo.actual().is_some_and(|a| a.distance(seg.end) > self.cfg.in_position)
                            && steps < settle_steps
                        {
                            st.emit(seg.end, seg.feed)?;
                            steps += 1;
                        }
                    }
                }
                Item::Event(ev) => match ev.kind {
                    EventKind::ToolChange { tool: t } => {
                        let Some(def) = self.tools.get(&t) else {
                            return Err(Box::new(SimError::UnknownTool { block: ev.block, tool: t }));
                        };
                        st.tool = Some((t, 0.5 * def.diameter));
                        st.last_carved = None;
                        if !tools_used.contains(&t) {
                            tools_used.push(t);
                        }
                    }
                    EventKind::Dwell { seconds } => {
                        if let Some(p) = st.servo.actual() {
                            let n = (seconds / dt).round() as usize;
                            for _ in 0..n {
                                st.emit(p, 0.0)?;
                            }
                        }
                    }
                    _ => {}
                },
            }
        }
        let report = SimReport {
            path: path_metrics(&items, self.cfg.rapid_rate),
            samples: st.k,
            simulated_time: st.k as f64 * dt,
            max_following_error: st.max_err,
            tools_used,
        };
        Ok((st.hf, report))
    }
}

struct RunState<'w> {
    hf: HeightField,
    servo: Servo,
    dt: f64,
    tool: Option<(u32, f64)>,
    k: usize,
    max_err: f64,
    last_carved: Option<Point3>,
    trace: Option<&'w mut dyn Write>,
}

impl RunState<'_> {
    /// One servo period: step the loop, carve, and log the sample.
    fn emit(&mut self, cmd: Point3, feed: f64) -> std::io::Result<()> {
        let act = self.servo.step(cmd);
        self.max_err = self.max_err.max(act.distance(cmd));
        if let Some((_, r)) = self.tool {
            let same = self
                .last_carved
                .is_some_and(|q| q.x == act.x && q.y == act.y && q.z <= act.z);
            if !same {
                self.hf.plunge(act, r);
                self.last_carved = Some(act);
            }
        }
        if let Some(w) = self.trace.as_deref_mut() {
            let s = TrajectorySample {
                t: self.k as f64 * self.dt,
                commanded: cmd,
                actual: act,
                feed,
                tool: self.tool.map(|t| t.0),
            };
            writeln!(w, "{}", s.csv_row())?;
        }
        self.k += 1;
        Ok(())
    }
}
