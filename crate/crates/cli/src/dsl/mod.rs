//! Derivation-script language: lexer, parser, AST and canonical renderer.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod render;

use std::fmt;

use ast::Span;

pub use parser::parse_script;
pub use render::render_script;

/// A syntax error with the set of tokens that would have been accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: Span,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(span: Span, message: String, expected: Vec<String>) -> ParseError {
        ParseError { span, message, expected }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}: {}", self.span, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}
