//! Abstract syntax, model-file parser, printer and the structural normaliser.

mod ast;
mod lexer;
mod normalize;
mod parser;
mod printer;

use thiserror::Error;

pub use ast::*;
pub use normalize::normalize;
pub use parser::{parse_model, parse_process};
pub use printer::{pretty_print, print_model, render_desugared};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Undeclared,
    DuplicateInstance,
    OverlappingPages,
    Invalid,
}

impl ParseErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::Undeclared => "undeclared identifier",
            ParseErrorKind::DuplicateInstance => "duplicate instance",
            ParseErrorKind::OverlappingPages => "overlapping cache pages",
            ParseErrorKind::Invalid => "invalid model",
        }
    }
}

/// A parse or validation error. Line and column are 1-based; `0:0` means the error
/// is not tied to a single position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {}: {message}", kind.as_str())]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        Self::at(ParseErrorKind::Syntax, (line, col), message)
    }

    pub(crate) fn at(kind: ParseErrorKind, (line, col): (usize, usize), message: impl Into<String>) -> Self {
        Self {
            kind,
            line,
            col,
            message: message.into(),
        }
    }
}
