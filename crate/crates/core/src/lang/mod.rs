//! The machine language: syntax tree, parser, printer and static checks.

pub mod ast;
mod check;
mod lexer;
mod parser;
mod print;

use std::fmt;

pub use ast::{Command, Domain, ExprRole, Machine, Operation, OutOfDomain, VarDecl};
pub use check::{desugar_atmost, typecheck};
pub use parser::{parse, parse_command, parse_expr, parse_expr_in};
pub use print::print_machine;

/// A located message. Semantic diagnostics without a source position use
/// line and column 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn at(line: usize, col: usize, message: impl Into<String>) -> Self {
        Diagnostic { line, col, message: message.into() }
    }

    pub fn semantic(message: impl Into<String>) -> Self {
        Diagnostic::at(0, 0, message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}:{}: {}", self.line, self.col, self.message)
        }
    }
}
