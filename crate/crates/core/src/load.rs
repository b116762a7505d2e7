//! Loading worlds from `.fmdl` sources and `.fwx` interchange files.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::datasources::{bind_declared_tables, DataError};
use crate::fmdl::{self, Diagnostic};
use crate::interchange::{builder_from_xml, InterchangeError};
use crate::model::{FrameWorld, ModelError, WorldBuilder};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{} error(s) in {path}", .diagnostics.iter().filter(|d| d.is_error()).count())]
    Diagnostics { path: String, diagnostics: Vec<Diagnostic> },
    #[error(transparent)]
    Interchange(#[from] InterchangeError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A loaded world and the warnings produced while compiling it.
#[derive(Debug)]
pub struct Loaded {
    pub world: FrameWorld,
    pub warnings: Vec<Diagnostic>,
}

/// Parses a world file without binding tables. Files ending in `.fmdl` are
/// compiled; anything else is read as interchange XML.
pub fn load_builder(path: &Path) -> Result<(WorldBuilder, Vec<Diagnostic>), LoadError> {
    let text = fs::read_to_string(path)
        .map_err(|e| LoadError::Io { path: path.display().to_string(), message: e.to_string() })?;
    if is_fmdl(path) {
        let file = path.display().to_string();
        fmdl::compile(&file, &text).map_err(|diagnostics| LoadError::Diagnostics { path: file, diagnostics })
    } else {
        Ok((builder_from_xml(&text)?, Vec::new()))
    }
}

/// Loads, binds frameset tables relative to the file, and freezes.
pub fn load_world(path: &Path) -> Result<Loaded, LoadError> {
    let (mut builder, warnings) = load_builder(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    bind_declared_tables(&mut builder, base)?;
    Ok(Loaded { world: builder.freeze()?, warnings })
}

pub fn is_fmdl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "fmdl")
}
