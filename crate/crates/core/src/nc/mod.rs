//! NC part programs: data model, emission from operations, parsing, and the
//! split into geometry and function streams.

mod emit;
mod parse;
pub mod program;
mod split;

use thiserror::Error;

pub use emit::emit_program;
pub use parse::parse_program;
pub use program::{Address, Block, NcProgram, Word, DEFAULT_HEADER};
pub use split::{merge_streams, split_program, FunctionStream, GeometryStream, StreamEntry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NcError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    SyntaxError {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unsupported word `{0}`")]
    UnsupportedWord(String),
    #[error("program has no end block (M30 or M02)")]
    MissingEnd,
    #[error("geometry and function streams conflict at block N{0}")]
    StreamConflict(u32),
}
