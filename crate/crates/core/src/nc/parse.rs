//! Parser for program text.
//!
//! A line is an optional `N` number, address-value words, and an optional
//! parenthesized comment. Addresses are case-insensitive. A comment on a line
//! of its own before the first block becomes the header; other comments are
//! dropped. G17, G21 and G90 restate the fixed context and are dropped. M02
//! is read as M30. Blocks are renumbered 10, 20, 30, ...

use super::program::{Address, Block, NcProgram, Word};
use super::NcError;

const MOTION_G: [u8; 5] = [0, 1, 2, 3, 4];
const CONTEXT_G: [u8; 3] = [17, 21, 90];
const SUPPORTED_M: [u8; 8] = [2, 3, 4, 5, 6, 8, 9, 30];

struct Cursor {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn err(&self, message: impl Into<String>) -> NcError {
        NcError::SyntaxError {
            line: self.line,
            col: self.col(),
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn number(&mut self) -> Result<(String, f64), NcError> {
        let start = self.pos;
        if matches!(self.peek(), Some('+' | '-')) {
            self.pos += 1;
        }
        let mut digits = 0;
        let mut dot = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                digits += 1;
            } else if c == '.' && !dot {
                dot = true;
            } else {
                break;
            }
            self.pos += 1;
        }
        if digits == 0 {
            self.pos = start;
            return Err(self.err("expected a number"));
        }
        let s: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        let v: f64 = s.parse().map_err(|_| self.err("malformed number"))?;
        Ok((s, v))
    }
}

pub fn parse_program(text: &str) -> Result<NcProgram, NcError> {
    let mut header: Option<String> = None;
    let mut blocks: Vec<Block> = Vec::new();
    let mut ended = false;

    for (idx, raw) in text.lines().enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let mut cur = Cursor {
            chars: raw.char_indices().collect(),
            pos: 0,
            line: idx + 1,
        };
        let mut words: Vec<Word> = Vec::new();
        let mut comment: Option<String> = None;
        let mut has_number = false;
        let mut saw_context_word = false;
        let mut motion_col = None;
        loop {
            cur.skip_ws();
            let Some(c) = cur.peek() else { break };
            if c == '(' {
                let start = cur.pos + 1;
                let Some(end) = cur.chars[start..].iter().position(|x| x.1 == ')') else {
                    return Err(cur.err("unterminated comment"));
                };
                comment = Some(cur.chars[start..start + end].iter().map(|x| x.1).collect());
                cur.pos = start + end + 1;
                cur.skip_ws();
                if cur.peek().is_some() {
                    return Err(cur.err("text after comment"));
                }
                break;
            }
            if !c.is_ascii_alphabetic() {
                return Err(cur.err(format!("unexpected character `{c}`")));
            }
            let word_col = cur.col();
            cur.pos += 1;
            if c.eq_ignore_ascii_case(&'N') {
                if has_number || !words.is_empty() || saw_context_word {
                    return Err(NcError::SyntaxError {
                        line: cur.line,
                        col: word_col,
                        message: "N word must open the block".into(),
                    });
                }
                let (_, v) = cur.number()?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(cur.err("block number must be a non-negative integer"));
                }
                has_number = true;
                continue;
            }
            let Some(addr) = Address::from_char(c) else {
                return Err(NcError::UnsupportedWord(c.to_ascii_uppercase().to_string()));
            };
            let (lit, v) = cur.number()?;
            match addr {
                Address::G | Address::M => {
                    let code = if v.fract() == 0.0 && (0.0..100.0).contains(&v) {
                        v as u8
                    } else {
                        return Err(NcError::UnsupportedWord(format!("{}{}", addr.letter(), lit)));
                    };
                    let supported = if addr == Address::G {
                        MOTION_G.contains(&code) || CONTEXT_G.contains(&code)
                    } else {
                        SUPPORTED_M.contains(&code)
                    };
                    if !supported {
                        return Err(NcError::UnsupportedWord(format!("{}{:02}", addr.letter(), code)));
                    }
                    if addr == Address::G && CONTEXT_G.contains(&code) {
                        saw_context_word = true;
                        continue;
                    }
                    if addr == Address::G {
                        if motion_col.is_some() {
                            return Err(NcError::SyntaxError {
                                line: cur.line,
                                col: word_col,
                                message: "more than one motion G word".into(),
                            });
                        }
                        motion_col = Some(word_col);
                    }
                    let code = if addr == Address::M && code == 2 { 30 } else { code };
                    words.push(Word::new(addr, code as f64));
                }
                _ => {
                    if (addr == Address::S || addr == Address::T) && (v < 0.0 || v.fract() != 0.0) {
                        return Err(NcError::SyntaxError {
                            line: cur.line,
                            col: word_col,
                            message: format!("{} takes a non-negative integer", addr.letter()),
                        });
                    }
                    words.push(Word::new(addr, v));
                }
            }
            let dup = words.iter().filter(|w| w.address == addr).count();
            let limit = if addr == Address::M { 2 } else { 1 };
            if dup > limit {
                return Err(NcError::SyntaxError {
                    line: cur.line,
                    col: word_col,
                    message: format!("repeated {} word", addr.letter()),
                });
            }
        }

        if words.is_empty() {
            if let Some(c) = comment {
                if blocks.is_empty() && header.is_none() && !has_number {
                    header = Some(c.trim().to_string());
                }
            }
            continue;
        }
        if ended {
            return Err(NcError::SyntaxError {
                line: idx + 1,
                col: 1,
                message: "block after program end".into(),
            });
        }
        let block = Block::new(0, words);
        ended = block.is_end();
        blocks.push(block);
    }
    if !ended {
        return Err(NcError::MissingEnd);
    }
    let mut p = NcProgram {
        header: header.unwrap_or_default(),
        blocks,
    };
    p.renumber();
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse_program("N10 G00 X0.000 Y0.000 Z5.000\nN20 M30").unwrap();
        assert_eq!(p.blocks.len(), 2);
        assert_eq!(p.header, "");
    }

    #[test]
    fn unsupported_g_word() {
        assert_eq!(
            parse_program("N10 G07 X0"),
            Err(NcError::UnsupportedWord("G07".into()))
        );
        assert_eq!(parse_program("N10 Q1\nN20 M30"), Err(NcError::UnsupportedWord("Q".into())));
    }

    #[test]
    fn missing_end() {
        assert_eq!(parse_program("N10 G00 X1"), Err(NcError::MissingEnd));
    }

    #[test]
    fn lower_case_m02_and_context_words() {
        let p = parse_program("(hdr)\nn5 g90 g21 g00 x1 y2\nn7 m02\n").unwrap();
        assert_eq!(p.header, "hdr");
        assert_eq!(p.blocks[0].to_string(), "N10 G00 X1.000 Y2.000");
        assert_eq!(p.blocks[1].to_string(), "N20 M30");
    }

    #[test]
    fn syntax_error_position() {
        match parse_program("N10 G00 X1\nN20 X1..2\nN30 M30") {
            Err(NcError::SyntaxError { line, col, .. }) => assert_eq!((line, col), (2, 8)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_motion_words_rejected() {
        assert!(matches!(
            parse_program("N10 G00 G01 X1\nN20 M30"),
            Err(NcError::SyntaxError { line: 1, .. })
        ));
    }
}
