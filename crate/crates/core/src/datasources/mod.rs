//! Tables, framesets, frame generation and external-object adapters.

pub mod table;

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{FrameDef, FrameKind, ModelError, WorldBuilder};
use crate::value::{ListValue, ScalarKind, Value};
pub use table::{type_cell, CmpOp, Predicate, TableSource};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed table: {0}")]
    Csv(String),
    #[error("table `{table}` has no key column `{key}`")]
    MissingKeyColumn { table: String, key: String },
    #[error("table `{table}` repeats key `{key}`")]
    DuplicateKey { table: String, key: String },
    #[error("table `{table}` has no column `{column}`")]
    UnknownColumn { table: String, column: String },
    #[error("no table is bound under `{0}`")]
    UnknownTable(String),
    #[error("no row of `{table}` matches {column} = {value}")]
    NoMatchingRow { table: String, column: String, value: String },
    #[error("frame name `{0}` is already taken")]
    AmbiguousFrameName(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Registers a frameset over the table at `location` and binds it.
pub fn bind_table(
    builder: &mut WorldBuilder,
    name: &str,
    location: impl AsRef<Path>,
    key: &str,
    parent: Option<&str>,
) -> Result<(), DataError> {
    let location = location.as_ref();
    let table = TableSource::open(name, location, key)?;
    let mut frame = FrameDef::new(name);
    frame.parent = parent.map(str::to_string);
    frame.kind = FrameKind::Frameset { table: location.display().to_string(), key: key.to_string() };
    builder.add_frame(frame)?;
    builder.attach_table(name, Arc::new(table));
    Ok(())
}

/// Opens the tables of every declared frameset, resolving relative
/// locations against `base`.
pub fn bind_declared_tables(builder: &mut WorldBuilder, base: &Path) -> Result<(), DataError> {
    let sets: Vec<(String, String, String)> = builder
        .frames()
        .filter_map(|f| match &f.kind {
            FrameKind::Frameset { table, key } => Some((f.name.clone(), table.clone(), key.clone())),
            _ => None,
        })
        .collect();
    for (name, location, key) in sets {
        let path = base.join(&location);
        let table = TableSource::open(&name, path, &key)?;
        builder.attach_table(&name, Arc::new(table));
    }
    Ok(())
}

/// Query result by match count: none is unknown, one is the cell, more are
/// a list in file order. Empty cells are left out of lists.
pub fn query_rows(table: &TableSource, column: &str, predicate: Option<&Predicate>) -> Result<Value, DataError> {
    let col = table
        .column_index(column)
        .ok_or_else(|| DataError::UnknownColumn { table: table.name().to_string(), column: column.to_string() })?;
    let rows = table.select(predicate)?;
    match rows.len() {
        0 => Ok(Value::Unknown),
        1 => Ok(rows[0][col].clone()),
        _ => {
            let kind = table.column_kind(col);
            let values: Vec<Value> = rows.iter().map(|r| r[col].clone()).filter(|v| !v.is_unknown()).collect();
            let list = ListValue::from_values(kind, &values).unwrap_or_else(|_| ListValue::empty(ScalarKind::String));
            Ok(Value::List(list))
        }
    }
}

/// Slot access for an external-object frame.
pub trait ObjectAdapter: Send + Sync {
    /// Value of `slot`, or `None` when the object has no such slot.
    fn read(&self, slot: &str) -> Option<Value>;

    /// Stores a value; returns false when the object does not accept it.
    fn write(&self, _slot: &str, _value: &Value) -> bool {
        false
    }
}

impl<F> ObjectAdapter for F
where
    F: Fn(&str) -> Option<Value> + Send + Sync,
{
    fn read(&self, slot: &str) -> Option<Value> {
        self(slot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn wheels() -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,name,wheels\n1,trike,3\n2,car,4").unwrap();
        f
    }

    #[test]
    fn cardinality_law() {
        let f = wheels();
        let t = TableSource::open("V", f.path(), "id").unwrap();
        assert_eq!(query_rows(&t, "wheels", Some(&Predicate::eq("name", "trike"))).unwrap(), Value::Integer(3));
        let all = Predicate { column: "wheels".into(), op: CmpOp::Gt, value: Value::Integer(0) };
        assert_eq!(query_rows(&t, "wheels", Some(&all)).unwrap(), Value::List(ListValue::Integer(vec![3, 4])));
        assert_eq!(query_rows(&t, "wheels", Some(&Predicate::eq("name", "boat"))).unwrap(), Value::Unknown);
        assert!(matches!(query_rows(&t, "colour", None), Err(DataError::UnknownColumn { .. })));
    }

    #[test]
    fn bind_registers_members() {
        let f = wheels();
        let mut b = WorldBuilder::new();
        b.add_frame(FrameDef::new("Vehicle")).unwrap();
        bind_table(&mut b, "V", f.path(), "id", Some("Vehicle")).unwrap();
        let w = b.freeze().unwrap();
        assert!(w.contains("V_1") && w.contains("V_2") && !w.contains("V_3"));
        assert_eq!(w.children("Vehicle"), vec!["V_1", "V_2"]);
        assert_eq!(w.table("V").unwrap().rows_read(), 0);
    }
}
