//! Separation of a program into tool-path data and function data, and the
//! inverse merge.
//!
//! Motion codes, axis targets, arc centers and feeds form the geometry
//! stream. M, S, T and P words form the function stream. A block holding both
//! kinds appears in both streams under its own number.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::program::{Address, Block, NcProgram, Word, DEFAULT_HEADER};
use super::NcError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEntry {
    pub number: u32,
    pub words: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GeometryStream {
    pub entries: Vec<StreamEntry>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FunctionStream {
    /// Program header, carried as auxiliary data.
    pub header: String,
    pub entries: Vec<StreamEntry>,
}

impl GeometryStream {
    /// One line per entry: block number then words.
    pub fn to_text(&self) -> String {
        entries_text(&self.entries)
    }
}

impl FunctionStream {
    pub fn to_text(&self) -> String {
        entries_text(&self.entries)
    }
}

fn entries_text(entries: &[StreamEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&Block::new(e.number, e.words.clone()).to_string());
        out.push('\n');
    }
    out
}

pub fn split_program(p: &NcProgram) -> (GeometryStream, FunctionStream) {
    let mut g = GeometryStream::default();
    let mut f = FunctionStream {
        header: p.header.clone(),
        entries: Vec::new(),
    };
    for b in &p.blocks {
        let (geo, fun): (Vec<Word>, Vec<Word>) =
            b.words.iter().partition(|w| w.address.is_geometric());
        if !geo.is_empty() {
            g.entries.push(StreamEntry {
                number: b.number,
                words: geo,
            });
        }
        if !fun.is_empty() {
            f.entries.push(StreamEntry {
                number: b.number,
                words: fun,
            });
        }
    }
    (g, f)
}

pub fn merge_streams(g: &GeometryStream, f: &FunctionStream) -> Result<NcProgram, NcError> {
    let mut by_number: BTreeMap<u32, (bool, bool, Vec<Word>)> = BTreeMap::new();
    for (entries, geometric) in [(&g.entries, true), (&f.entries, false)] {
        for e in entries {
            let slot = by_number.entry(e.number).or_insert((false, false, Vec::new()));
            let seen = if geometric { &mut slot.0 } else { &mut slot.1 };
            if *seen {
                return Err(NcError::StreamConflict(e.number));
            }
            *seen = true;
            for w in &e.words {
                if w.address.is_geometric() != geometric {
                    return Err(NcError::StreamConflict(e.number));
                }
                let same = slot.2.iter().filter(|x| x.address == w.address).count();
                let limit = if w.address == Address::M { 2 } else { 1 };
                if same >= limit {
                    return Err(NcError::StreamConflict(e.number));
                }
                slot.2.push(*w);
            }
        }
    }
    let mut blocks: Vec<Block> = by_number
        .into_iter()
        .map(|(n, (_, _, words))| Block::new(n, words))
        .collect();
    if !blocks.last().is_some_and(Block::is_end) {
        let n = blocks.last().map_or(10, |b| b.number + 10);
        blocks.push(Block::new(n, vec![Word::m(30)]));
    }
    let header = if f.header.is_empty() && g.entries.is_empty() && f.entries.is_empty() {
        DEFAULT_HEADER.to_string()
    } else {
        f.header.clone()
    };
    Ok(NcProgram { header, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nc::parse_program;

    #[test]
    fn mixed_block_goes_to_both_streams() {
        let p = parse_program("N10 G01 Z-10.000 F318 M08\nN20 M30\n").unwrap();
        let (g, f) = split_program(&p);
        assert_eq!(g.to_text(), "N10 G01 Z-10.000 F318\n");
        assert_eq!(f.to_text(), "N10 M08\nN20 M30\n");
        assert_eq!(merge_streams(&g, &f).unwrap(), p);
    }

    #[test]
    fn overlapping_words_conflict() {
        let g = GeometryStream {
            entries: vec![StreamEntry { number: 10, words: vec![Word::g(1)] }],
        };
        let f = FunctionStream {
            header: String::new(),
            entries: vec![StreamEntry { number: 10, words: vec![Word::g(0)] }],
        };
        assert_eq!(merge_streams(&g, &f), Err(NcError::StreamConflict(10)));
    }

    #[test]
    fn empty_streams_give_skeleton() {
        let p = merge_streams(&GeometryStream::default(), &FunctionStream::default()).unwrap();
        assert_eq!(p.to_text(), format!("({DEFAULT_HEADER})\nN10 M30\n"));
    }
}
