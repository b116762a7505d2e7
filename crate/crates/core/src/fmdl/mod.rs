//! Frame Model Description Language: lexer, parser, validator and
//! pretty-printer.

mod lexer;
mod parser;
mod pretty;
mod validate;

use std::collections::HashMap;
use std::fmt;

pub use lexer::{is_keyword, tokenize, Keyword, Token, TokenKind};
pub use parser::{parse, parse_expression};
pub use pretty::{pretty_print, pretty_print_builder};
pub use validate::validate;

use crate::model::WorldBuilder;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub file: String,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Severity {
    Error,
    Warning,
}

impl Severity {
    pub fn name(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: SourceSpan,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: SourceSpan, code: &str, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, span, code: code.to_string(), message: message.into() }
    }

    pub fn warning(span: SourceSpan, code: &str, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, span, code: code.to_string(), message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}[{}]: {}", self.span, self.severity.name(), self.code, self.message)
    }
}

/// Source positions of parsed declarations, used by the validator.
#[derive(Debug, Clone, Default)]
pub struct SourceMap {
    pub frames: HashMap<String, SourceSpan>,
    pub parents: HashMap<String, SourceSpan>,
    pub slots: HashMap<(String, String), SourceSpan>,
    pub defaults: HashMap<(String, String), SourceSpan>,
    /// Keyed by frame and index into its action list.
    pub actions: HashMap<(String, usize), SourceSpan>,
    pub constraints: HashMap<(String, usize), SourceSpan>,
    pub externs: HashMap<String, SourceSpan>,
}

/// Result of a successful parse: an unfrozen world and where each
/// declaration came from.
#[derive(Debug, Clone)]
pub struct ParsedWorld {
    pub builder: WorldBuilder,
    pub spans: SourceMap,
}

/// Parses and validates `text`. On success returns the builder together
/// with any warnings; otherwise every diagnostic found.
pub fn compile(file: &str, text: &str) -> Result<(WorldBuilder, Vec<Diagnostic>), Vec<Diagnostic>> {
    let parsed = parse(file, text)?;
    let diags = validate(&parsed);
    if diags.iter().any(Diagnostic::is_error) {
        return Err(diags);
    }
    Ok((parsed.builder, diags))
}
