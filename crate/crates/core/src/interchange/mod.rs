//! XML forms of worlds, rule sets, session snapshots and traces.

mod codec;
mod snapshot;
mod world;
pub mod xml;

use thiserror::Error;

pub use codec::{decode_expr, decode_value, encode_expr, encode_value};
pub use snapshot::{decode_question, encode_question, snapshot_from_xml, snapshot_to_xml, trace_from_element, trace_to_element, trace_to_xml, Snapshot};
pub use world::{
    builder_from_element, builder_from_xml, builder_to_xml, decode_frame, decode_rule, encode_action, encode_frame,
    encode_rule, inferred_kind, merge_rule_set, merge_rules, rules_from_element, rules_to_element, world_from_xml,
    world_to_element, world_to_xml, world_version, RuleSet, FORMAT_VERSION,
};
pub use xml::{Cursor, Element};

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterchangeError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("document of {size} bytes exceeds the limit of {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("unsupported format version `{0}`")]
    VersionUnsupported(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("cannot infer the type of remote slot {frame}.{slot}")]
    UntypedRemoteSlot { frame: String, slot: String },
    #[error("snapshot was taken against world {found}, current world is {expected}")]
    WorldVersionMismatch { expected: String, found: String },
}
