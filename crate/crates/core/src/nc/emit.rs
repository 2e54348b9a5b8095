//! Operation list to program text.
//!
//! Each operation gets a tool change when the tool differs from the one in
//! the spindle, a spindle block when speed or direction changes, and coolant
//! words when the coolant state changes. Motion words are modal: unchanged
//! axes, motion codes and feeds are left out. The program ends by stopping
//! the spindle and coolant, then M30.

use super::program::{quantize, Address, Block, NcProgram, Word, DEFAULT_HEADER};
use crate::geometry::{Point2, Point3};
use crate::planner::toolpath::{arc_point, arc_segments, arc_sweep};
use crate::planner::{Move, Operation, Sense};

/// Largest start/end radius mismatch an emitted arc may carry.
const ARC_RADIUS_SLACK: f64 = 9e-4;

#[derive(Default)]
struct Emitter {
    blocks: Vec<Block>,
    tool: Option<u32>,
    spindle: Option<Sense>,
    rpm: Option<f64>,
    coolant: bool,
    motion: Option<u8>,
    feed: Option<f64>,
    pos: [Option<f64>; 3],
}

fn q(a: Address, v: f64) -> f64 {
    quantize(a, v)
}

fn spindle_code(s: Sense) -> u8 {
    match s {
        Sense::Cw => 3,
        Sense::Ccw => 4,
    }
}

impl Emitter {
    fn push(&mut self, words: Vec<Word>) {
        if !words.is_empty() {
            let n = 10 * (self.blocks.len() as u32 + 1);
            self.blocks.push(Block::new(n, words));
        }
    }

    fn position(&self) -> Option<Point3> {
        match self.pos {
            [Some(x), Some(y), Some(z)] => Some(Point3::new(x, y, z)),
            _ => None,
        }
    }

    fn spindle(&mut self, dir: Sense, rpm: f64) {
        let mut words = Vec::new();
        let rpm = q(Address::S, rpm);
        if self.rpm != Some(rpm) || self.spindle.is_none() {
            words.push(Word::new(Address::S, rpm));
            self.rpm = Some(rpm);
        }
        if self.spindle != Some(dir) {
            words.push(Word::m(spindle_code(dir)));
            self.spindle = Some(dir);
        }
        self.push(words);
    }

    fn axis_words(&self, to: Point3, force_xy: bool) -> Vec<Word> {
        let mut words = Vec::new();
        for (i, (a, v)) in [(Address::X, to.x), (Address::Y, to.y), (Address::Z, to.z)]
            .into_iter()
            .enumerate()
        {
            let v = q(a, v);
            if self.pos[i] != Some(v) || (force_xy && i < 2) {
                words.push(Word::new(a, v));
            }
        }
        words
    }

    fn set_pos(&mut self, to: Point3) {
        self.pos = [
            Some(q(Address::X, to.x)),
            Some(q(Address::Y, to.y)),
            Some(q(Address::Z, to.z)),
        ];
    }

    fn motion_word(&mut self, code: u8, words: &mut Vec<Word>) {
        if self.motion != Some(code) {
            words.push(Word::g(code));
            self.motion = Some(code);
        }
    }

    fn feed_word(&mut self, feed: f64, words: &mut Vec<Word>) {
        let f = q(Address::F, feed);
        if self.feed != Some(f) {
            words.push(Word::new(Address::F, f));
            self.feed = Some(f);
        }
    }

    fn straight(&mut self, code: u8, to: Point3, feed: Option<f64>) {
        let mut axes = self.axis_words(to, false);
        if axes.is_empty() {
            return;
        }
        let mut words = Vec::new();
        self.motion_word(code, &mut words);
        words.append(&mut axes);
        if let Some(f) = feed {
            self.feed_word(f, &mut words);
        }
        self.set_pos(to);
        self.push(words);
    }

    fn arc(&mut self, to: Point3, center: Point2, sense: Sense, feed: f64) {
        let Some(start) = self.position() else {
            self.straight(1, to, Some(feed));
            return;
        };
        let end = Point3::new(q(Address::X, to.x), q(Address::Y, to.y), q(Address::Z, to.z));
        if (end.x, end.y) == (start.x, start.y) {
            // the quantized arc vanished; a full turn is never intended here
            self.straight(1, to, Some(feed));
            return;
        }
        let Some((i, j)) = arc_offsets(start.xy(), end.xy(), center) else {
            // no grid center fits: fall back to chords
            let sweep = arc_sweep(start.xy(), end.xy(), center, sense);
            let r = start.xy().distance(center);
            let n = arc_segments(r, sweep, 0.005);
            let true_start = Point3::new(
                center.x + r * (start.y - center.y).atan2(start.x - center.x).cos(),
                center.y + r * (start.y - center.y).atan2(start.x - center.x).sin(),
                start.z,
            );
            for k in 1..=n {
                let p = arc_point(true_start, to, center, sweep, k as f64 / n as f64);
                self.straight(1, p, Some(feed));
            }
            return;
        };
        let code = match sense {
            Sense::Cw => 2,
            Sense::Ccw => 3,
        };
        let mut words = Vec::new();
        self.motion_word(code, &mut words);
        words.extend(self.axis_words(to, true));
        words.push(Word::new(Address::I, i));
        words.push(Word::new(Address::J, j));
        self.feed_word(feed, &mut words);
        self.set_pos(to);
        self.push(words);
    }

    fn dwell(&mut self, seconds: f64) {
        self.push(vec![Word::g(4), Word::new(Address::P, seconds)]);
    }
}

/// Center offsets on the thousandths grid, chosen near `center` so that the
/// quantized start and end lie at the same distance from the encoded center.
fn arc_offsets(start: Point2, end: Point2, center: Point2) -> Option<(f64, f64)> {
    let i0 = q(Address::I, center.x - start.x);
    let j0 = q(Address::J, center.y - start.y);
    let mut best: Option<(f64, f64, f64)> = None;
    for di in -12i32..=12 {
        for dj in -12i32..=12 {
            let i = q(Address::I, i0 + di as f64 * 1e-3);
            let j = q(Address::J, j0 + dj as f64 * 1e-3);
            let c = Point2::new(start.x + i, start.y + j);
            let mismatch = (start.distance(c) - end.distance(c)).abs();
            let key = mismatch + 0.1 * c.distance(center);
            if best.map_or(true, |b| key < b.2) && mismatch <= ARC_RADIUS_SLACK {
                best = Some((i, j, key));
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}

/// Builds the program for an ordered list of operations.
pub fn emit_program(ops: &[Operation]) -> NcProgram {
    let mut e = Emitter::default();
    for op in ops {
        if e.tool != Some(op.tool.id) {
            if e.spindle.is_some() {
                e.push(vec![Word::m(5)]);
                e.spindle = None;
            }
            e.push(vec![Word::new(Address::T, op.tool.id as f64), Word::m(6)]);
            e.tool = Some(op.tool.id);
        }
        let tapping = op.class == crate::recognition::OperationClass::Thread;
        e.spindle(op.params.direction, op.params.spindle_rpm);
        if op.params.coolant != e.coolant {
            e.push(vec![Word::m(if op.params.coolant { 8 } else { 9 })]);
            e.coolant = op.params.coolant;
        }
        for m in &op.toolpath.moves {
            match *m {
                Move::Rapid { to } => e.straight(0, to, None),
                Move::Linear { to, feed } => {
                    if let (true, Some(p)) = (tapping, e.position()) {
                        let z = q(Address::Z, to.z);
                        // the tap is backed out with the spindle reversed
                        let want = if z > p.z {
                            Some(Sense::Ccw)
                        } else if z < p.z {
                            Some(Sense::Cw)
                        } else {
                            None
                        };
                        if let Some(w) = want.filter(|w| e.spindle != Some(*w)) {
                            e.push(vec![Word::m(spindle_code(w))]);
                            e.spindle = Some(w);
                        }
                    }
                    e.straight(1, to, Some(feed))
                }
                Move::Arc {
                    to,
                    center,
                    sense,
                    feed,
                } => e.arc(to, center, sense, feed),
                Move::Dwell { seconds } => e.dwell(seconds),
            }
        }
    }
    let mut end = Vec::new();
    if e.spindle.is_some() {
        end.push(Word::m(5));
    }
    if e.coolant {
        end.push(Word::m(9));
    }
    e.push(end);
    e.push(vec![Word::m(30)]);
    NcProgram {
        header: DEFAULT_HEADER.to_string(),
        blocks: e.blocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_program_is_header_and_end() {
        let p = emit_program(&[]);
        assert_eq!(p.blocks.len(), 1);
        assert_eq!(p.to_text(), format!("({DEFAULT_HEADER})\nN10 M30\n"));
    }

    #[test]
    fn arc_offsets_keep_radius_consistent() {
        let c = Point2::new(1.234_567, -2.345_678);
        for k in 0..50 {
            let a = k as f64 * 0.37;
            let r = 3.0 + k as f64 * 0.1;
            let s = Point2::new(q(Address::X, c.x + r * a.cos()), q(Address::Y, c.y + r * a.sin()));
            let e = Point2::new(
                q(Address::X, c.x + r * (a + 2.0).cos()),
                q(Address::Y, c.y + r * (a + 2.0).sin()),
            );
            let (i, j) = arc_offsets(s, e, c).unwrap();
            let cc = Point2::new(s.x + i, s.y + j);
            assert!((s.distance(cc) - e.distance(cc)).abs() <= ARC_RADIUS_SLACK);
            assert!(cc.distance(c) < 0.01);
        }
    }
}
