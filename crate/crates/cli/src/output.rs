//! Plain or `{type, payload}` JSON-lines output.

use std::fmt::Display;

use framekit_core::fmdl::Diagnostic;
use serde_json::{json, Value as Json};

pub struct Out {
    pub json: bool,
}

impl Out {
    /// One line on standard output.
    pub fn emit(&self, kind: &str, text: impl Display, payload: Json) {
        if self.json {
            println!("{}", json!({ "type": kind, "payload": payload }));
        } else {
            println!("{text}");
        }
    }

    pub fn error(&self, code: &str, message: impl Display) {
        if self.json {
            eprintln!("{}", json!({ "type": "error", "payload": { "code": code, "message": message.to_string() } }));
        } else {
            eprintln!("error: {message}");
        }
    }

    pub fn diagnostic(&self, d: &Diagnostic) {
        if self.json {
            let payload = json!({
                "severity": d.severity.name(),
                "code": d.code,
                "message": d.message,
                "file": d.span.file,
                "line": d.span.line,
                "column": d.span.column,
                "length": d.span.length,
            });
            eprintln!("{}", json!({ "type": "diagnostic", "payload": payload }));
        } else {
            eprintln!("{d}");
        }
    }
}
