//! Frame-based knowledge representation with production rules,
//! backward/forward chaining, a textual model language, XML interchange and
//! tabular data sources.

pub mod datasources;
pub mod eval;
pub mod expr;
pub mod fmdl;
pub mod inference;
pub mod interchange;
pub mod load;
pub mod model;
pub mod value;

pub use expr::{BinaryOp, Expression, UnaryOp};
pub use inference::{Engine, InferenceError, InferenceSession, Outcome, Question};
pub use model::{Action, FrameDef, FrameKind, FrameWorld, ModelError, Rule, SlotDef, WorkingMemory, WorldBuilder};
pub use value::{make_value, ListValue, RawValue, ScalarKind, Value, ValueKind};
