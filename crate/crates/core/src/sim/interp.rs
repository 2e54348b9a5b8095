//! Modal expansion of a program into motion segments and function events.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{Point2, Point3};
use crate::nc::{Address, NcProgram};
use crate::planner::toolpath::{arc_length, arc_sweep};
use crate::planner::Sense;

/// Radius mismatch above which an arc block is rejected.
pub const ARC_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Rapid,
    Linear,
    ArcCw,
    ArcCcw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub block: u32,
    pub kind: SegmentKind,
    pub start: Point3,
    pub end: Point3,
    pub center: Option<Point2>,
    /// Programmed feed in mm/min; rapids carry the rapid rate.
    pub feed: f64,
}

impl Segment {
    pub fn is_rapid(&self) -> bool {
        self.kind == SegmentKind::Rapid
    }

    pub fn sweep(&self) -> f64 {
        match (self.kind, self.center) {
            (SegmentKind::ArcCw, Some(c)) => arc_sweep(self.start.xy(), self.end.xy(), c, Sense::Cw),
            (SegmentKind::ArcCcw, Some(c)) => arc_sweep(self.start.xy(), self.end.xy(), c, Sense::Ccw),
            _ => 0.0,
        }
    }

    pub fn length(&self) -> f64 {
        match self.center {
            Some(c) => arc_length(self.start, self.end, c, self.sweep()),
            None => self.start.distance(self.end),
        }
    }

    /// Unit tangent at the start (`at_end = false`) or the end of the move.
    pub fn tangent(&self, at_end: bool) -> Option<Point3> {
        let d = match self.center {
            None => self.end - self.start,
            Some(c) => {
                let p = if at_end { self.end } else { self.start };
                let radial = p.xy() - c;
                let t = match self.kind {
                    SegmentKind::ArcCw => Point2::new(radial.y, -radial.x),
                    _ => Point2::new(-radial.y, radial.x),
                };
                let sweep = self.sweep().abs().max(1e-12);
                let r = radial.norm();
                let dz = (self.end.z - self.start.z) / (sweep * r.max(1e-12));
                Point3::new(t.x / r.max(1e-12), t.y / r.max(1e-12), dz)
            }
        };
        let n = d.norm();
        (n > 1e-12).then(|| d * (1.0 / n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    ToolChange { tool: u32 },
    SpindleOn { rpm: f64, clockwise: bool },
    SpindleOff,
    CoolantOn,
    CoolantOff,
    Dwell { seconds: f64 },
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub block: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    Segment(Segment),
    Event(Event),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spindle {
    Off,
    Cw,
    Ccw,
}

/// Modal state of the control while a program runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineState {
    pub position: Option<Point3>,
    pub motion: u8,
    pub feed: Option<f64>,
    pub rpm: Option<f64>,
    pub selected_tool: Option<u32>,
    pub tool: Option<u32>,
    pub spindle: Spindle,
    pub coolant: bool,
    pub pointer: usize,
}

impl Default for MachineState {
    fn default() -> Self {
        Self {
            position: None,
            motion: 0,
            feed: None,
            rpm: None,
            selected_tool: None,
            tool: None,
            spindle: Spindle::Off,
            coolant: false,
            pointer: 0,
        }
    }
}

/// Expands `p` into segments and events in execution order. Within a block,
/// tool change, spindle and coolant words act before the motion, spindle
/// stop and coolant off after it, and program end last.
pub fn interpret_program(p: &NcProgram, rapid_rate: f64) -> Result<Vec<Item>, SimError> {
    let mut st = MachineState::default();
    let mut out = Vec::new();
    for (idx, b) in p.blocks.iter().enumerate() {
        st.pointer = idx;
        let n = b.number;
        let ev = |kind| Item::Event(Event { block: n, kind });
        let ms: Vec<u8> = b.m_codes().collect();

        if let Some(t) = b.get(Address::T) {
            st.selected_tool = Some(t as u32);
        }
        if ms.contains(&6) {
            let t = st.selected_tool.unwrap_or(0);
            st.tool = Some(t);
            out.push(ev(EventKind::ToolChange { tool: t }));
        }
        if let Some(s) = b.get(Address::S) {
            st.rpm = Some(s);
            if st.spindle != Spindle::Off && !ms.iter().any(|m| *m == 3 || *m == 4) {
                out.push(ev(EventKind::SpindleOn {
                    rpm: s,
                    clockwise: st.spindle == Spindle::Cw,
                }));
            }
        }
        for &m in &ms {
            if m == 3 || m == 4 {
                st.spindle = if m == 3 { Spindle::Cw } else { Spindle::Ccw };
                out.push(ev(EventKind::SpindleOn {
                    rpm: st.rpm.unwrap_or(0.0),
                    clockwise: m == 3,
                }));
            }
            if m == 8 {
                st.coolant = true;
                out.push(ev(EventKind::CoolantOn));
            }
        }
        if let Some(f) = b.get(Address::F) {
            st.feed = Some(f);
        }

        let g = b.get(Address::G).map(|v| v as u8);
        if g == Some(4) {
            let seconds = b.get(Address::P).unwrap_or(0.0);
            out.push(ev(EventKind::Dwell { seconds }));
        } else {
            if let Some(g) = g {
                st.motion = g;
            }
            let axes = [b.get(Address::X), b.get(Address::Y), b.get(Address::Z)];
            let has_arc_center = b.get(Address::I).is_some() || b.get(Address::J).is_some();
            if axes.iter().any(Option::is_some) || (has_arc_center && st.motion >= 2) {
                let cur = st.position;
                let base = cur.unwrap_or_default();
                let end = Point3::new(
                    axes[0].unwrap_or(base.x),
                    axes[1].unwrap_or(base.y),
                    axes[2].unwrap_or(base.z),
                );
                let start = cur.unwrap_or(end);
                let feed = if st.motion == 0 {
                    rapid_rate
                } else {
                    match st.feed {
                        Some(f) if f > 0.0 => f,
                        _ => return Err(SimError::FeedUndefined(n)),
                    }
                };
                let (kind, center) = match st.motion {
                    0 => (SegmentKind::Rapid, None),
                    1 => (SegmentKind::Linear, None),
                    m => {
                        let c = Point2::new(
                            start.x + b.get(Address::I).unwrap_or(0.0),
                            start.y + b.get(Address::J).unwrap_or(0.0),
                        );
                        let r0 = start.xy().distance(c);
                        let r1 = end.xy().distance(c);
                        if (r0 - r1).abs() > ARC_TOLERANCE || r0 <= ARC_TOLERANCE {
                            return Err(SimError::ArcGeometryError(n));
                        }
                        let k = if m == 2 { SegmentKind::ArcCw } else { SegmentKind::ArcCcw };
                        (k, Some(c))
                    }
                };
                out.push(Item::Segment(Segment {
                    block: n,
                    kind,
                    start,
                    end,
                    center,
                    feed,
                }));
                st.position = Some(end);
            }
        }

        for &m in &ms {
            match m {
                5 => {
                    st.spindle = Spindle::Off;
                    out.push(ev(EventKind::SpindleOff));
                }
                9 => {
                    st.coolant = false;
                    out.push(ev(EventKind::CoolantOff));
                }
                _ => {}
            }
        }
        if ms.contains(&30) {
            out.push(ev(EventKind::End));
            break;
        }
    }
    Ok(out)
}
