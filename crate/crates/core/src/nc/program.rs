//! Blocks, words and the canonical text form of a program.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Word addresses in canonical order within a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Address {
    G,
    X,
    Y,
    Z,
    A,
    B,
    C,
    I,
    J,
    P,
    F,
    S,
    T,
    M,
}

impl Address {
    pub fn from_char(c: char) -> Option<Address> {
        Some(match c.to_ascii_uppercase() {
            'G' => Address::G,
            'X' => Address::X,
            'Y' => Address::Y,
            'Z' => Address::Z,
            'A' => Address::A,
            'B' => Address::B,
            'C' => Address::C,
            'I' => Address::I,
            'J' => Address::J,
            'P' => Address::P,
            'F' => Address::F,
            'S' => Address::S,
            'T' => Address::T,
            'M' => Address::M,
            _ => return None,
        })
    }

    pub fn letter(self) -> char {
        match self {
            Address::G => 'G',
            Address::X => 'X',
            Address::Y => 'Y',
            Address::Z => 'Z',
            Address::A => 'A',
            Address::B => 'B',
            Address::C => 'C',
            Address::I => 'I',
            Address::J => 'J',
            Address::P => 'P',
            Address::F => 'F',
            Address::S => 'S',
            Address::T => 'T',
            Address::M => 'M',
        }
    }

    /// Words that describe motion and travel in the geometry stream.
    pub fn is_geometric(self) -> bool {
        matches!(
            self,
            Address::G
                | Address::X
                | Address::Y
                | Address::Z
                | Address::A
                | Address::B
                | Address::C
                | Address::I
                | Address::J
                | Address::F
        )
    }

    fn is_integer(self) -> bool {
        matches!(self, Address::G | Address::M | Address::S | Address::T)
    }
}

/// Rounds to the stored precision of an address: integers for G, M, S, T,
/// thousandths for everything else. Negative zero becomes zero.
pub fn quantize(addr: Address, v: f64) -> f64 {
    let q = if addr.is_integer() {
        v.round()
    } else {
        (v * 1000.0).round() / 1000.0
    };
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub address: Address,
    pub value: f64,
}

impl Word {
    pub fn new(address: Address, value: f64) -> Self {
        Word {
            address,
            value: quantize(address, value),
        }
    }

    pub fn g(code: u8) -> Self {
        Word::new(Address::G, code as f64)
    }

    pub fn m(code: u8) -> Self {
        Word::new(Address::M, code as f64)
    }
}

fn trim_decimal(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.address.letter();
        match self.address {
            Address::G | Address::M => write!(f, "{a}{:02}", self.value as i64),
            Address::S | Address::T => write!(f, "{a}{}", self.value as i64),
            Address::F | Address::P => write!(f, "{a}{}", trim_decimal(self.value)),
            _ => write!(f, "{a}{:.3}", self.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub number: u32,
    pub words: Vec<Word>,
}

impl Block {
    /// Builds a block with its words in canonical order.
    pub fn new(number: u32, mut words: Vec<Word>) -> Self {
        words.sort_by_key(|w| w.address);
        Block { number, words }
    }

    pub fn get(&self, a: Address) -> Option<f64> {
        self.words.iter().find(|w| w.address == a).map(|w| w.value)
    }

    pub fn m_codes(&self) -> impl Iterator<Item = u8> + '_ {
        self.words
            .iter()
            .filter(|w| w.address == Address::M)
            .map(|w| w.value as u8)
    }

    pub fn is_end(&self) -> bool {
        self.m_codes().any(|m| m == 30)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N{}", self.number)?;
        for w in &self.words {
            write!(f, " {w}")?;
        }
        Ok(())
    }
}

/// Interpretation context recorded in the header: metric, absolute, XY plane.
pub const DEFAULT_HEADER: &str = "G21 G90 G17 METRIC ABSOLUTE XY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcProgram {
    pub header: String,
    pub blocks: Vec<Block>,
}

impl NcProgram {
    /// Program text, LF line endings, with a trailing newline.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.header.is_empty() {
            out.push('(');
            out.push_str(&self.header);
            out.push_str(")\n");
        }
        for b in &self.blocks {
            out.push_str(&b.to_string());
            out.push('\n');
        }
        out
    }

    /// Sets block numbers to 10, 20, 30, ...
    pub fn renumber(&mut self) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.number = 10 * (i as u32 + 1);
        }
    }
}

impl fmt::Display for NcProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
