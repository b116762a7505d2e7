//! File-backed delimited tables with a key index and lazy row access.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use indexmap::IndexMap;

use super::DataError;
use crate::value::{ScalarKind, Value};

/// Comparison used by table predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "=" => CmpOp::Eq,
            "<>" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            _ => return None,
        })
    }

    /// `None` when the operands are not comparable.
    pub fn test(self, cell: &Value, rhs: &Value) -> Option<bool> {
        let ord = match (cell, rhs) {
            (Value::Integer(a), Value::Integer(b)) => a.cmp(b),
            (Value::String(a), Value::String(b)) => a.cmp(b),
            (Value::Boolean(a), Value::Boolean(b)) => match self {
                CmpOp::Eq => return Some(a == b),
                CmpOp::Ne => return Some(a != b),
                _ => return None,
            },
            _ => return None,
        };
        Some(match self {
            CmpOp::Eq => ord.is_eq(),
            CmpOp::Ne => ord.is_ne(),
            CmpOp::Lt => ord.is_lt(),
            CmpOp::Le => ord.is_le(),
            CmpOp::Gt => ord.is_gt(),
            CmpOp::Ge => ord.is_ge(),
        })
    }
}

/// Row filter `column op value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub column: String,
    pub op: CmpOp,
    pub value: Value,
}

impl Predicate {
    pub fn eq(column: &str, value: impl Into<Value>) -> Self {
        Predicate { column: column.to_string(), op: CmpOp::Eq, value: value.into() }
    }
}

/// Types a cell: integers, then `true`/`false`, else string. Empty cells are
/// unknown.
pub fn type_cell(text: &str) -> Value {
    if text.is_empty() {
        Value::Unknown
    } else if let Ok(i) = text.parse::<i64>() {
        Value::Integer(i)
    } else if text == "true" {
        Value::Boolean(true)
    } else if text == "false" {
        Value::Boolean(false)
    } else {
        Value::String(text.to_string())
    }
}

/// A delimited text table with a header row.
///
/// Opening the table builds a key index (byte positions); row contents are
/// only decoded when a row is requested, and every decoded row increments
/// [`TableSource::rows_read`].
#[derive(Debug)]
pub struct TableSource {
    name: String,
    location: PathBuf,
    columns: Vec<String>,
    kinds: Vec<ScalarKind>,
    key_column: usize,
    index: IndexMap<String, csv::Position>,
    rows_read: AtomicU64,
}

impl TableSource {
    pub fn open(name: &str, location: impl AsRef<Path>, key: &str) -> Result<Self, DataError> {
        let location = location.as_ref().to_path_buf();
        let io = |e: std::io::Error| DataError::Io { path: location.display().to_string(), message: e.to_string() };
        let file = File::open(&location).map_err(io)?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let columns: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let key_column = columns
            .iter()
            .position(|c| c == key)
            .ok_or_else(|| DataError::MissingKeyColumn { table: name.to_string(), key: key.to_string() })?;

        let mut index = IndexMap::new();
        let mut kinds = vec![ScalarKind::String; columns.len()];
        let mut record = csv::StringRecord::new();
        let mut first = true;
        loop {
            let pos = reader.position().clone();
            if !reader.read_record(&mut record).map_err(csv_err)? {
                break;
            }
            if first {
                // member slot types come from the first data row
                for (i, cell) in record.iter().enumerate().take(columns.len()) {
                    kinds[i] = match type_cell(cell) {
                        Value::Integer(_) => ScalarKind::Integer,
                        Value::Boolean(_) => ScalarKind::Boolean,
                        _ => ScalarKind::String,
                    };
                }
                first = false;
            }
            let k = record.get(key_column).unwrap_or_default().to_string();
            if index.insert(k.clone(), pos).is_some() {
                return Err(DataError::DuplicateKey { table: name.to_string(), key: k });
            }
        }
        Ok(TableSource { name: name.to_string(), location, columns, kinds, key_column, index, rows_read: AtomicU64::new(0) })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn location(&self) -> &Path {
        &self.location
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn key_column(&self) -> &str {
        &self.columns[self.key_column]
    }

    pub fn column_index(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    pub fn column_kind(&self, column: usize) -> ScalarKind {
        self.kinds[column]
    }

    /// Keys in file order.
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    /// The stored key equal to `key`.
    pub fn key_ref(&self, key: &str) -> Option<&str> {
        self.index.get_key_value(key).map(|(k, _)| k.as_str())
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Rows decoded since the table was opened.
    pub fn rows_read(&self) -> u64 {
        self.rows_read.load(Ordering::Relaxed)
    }

    fn typed(&self, record: &csv::StringRecord) -> Vec<Value> {
        (0..self.columns.len())
            .map(|i| {
                let v = type_cell(record.get(i).unwrap_or_default());
                // a cell that disagrees with the sampled column kind is unknown
                let ok = matches!(
                    (&v, self.kinds[i]),
                    (Value::Integer(_), ScalarKind::Integer)
                        | (Value::Boolean(_), ScalarKind::Boolean)
                        | (Value::String(_), ScalarKind::String)
                );
                match (ok, &v, self.kinds[i]) {
                    (true, _, _) => v,
                    // integer/boolean looking text in a string column stays text
                    (false, Value::Integer(_) | Value::Boolean(_), ScalarKind::String) => {
                        Value::String(record.get(i).unwrap_or_default().to_string())
                    }
                    _ => Value::Unknown,
                }
            })
            .collect()
    }

    fn reader(&self) -> Result<csv::Reader<File>, DataError> {
        let file = File::open(&self.location)
            .map_err(|e| DataError::Io { path: self.location.display().to_string(), message: e.to_string() })?;
        Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
    }

    /// Decodes the row with `key`.
    pub fn row(&self, key: &str) -> Result<Option<Vec<Value>>, DataError> {
        let Some(pos) = self.index.get(key) else {
            return Ok(None);
        };
        let mut reader = self.reader()?;
        reader.seek(pos.clone()).map_err(csv_err)?;
        let mut record = csv::StringRecord::new();
        if !reader.read_record(&mut record).map_err(csv_err)? {
            return Ok(None);
        }
        self.rows_read.fetch_add(1, Ordering::Relaxed);
        Ok(Some(self.typed(&record)))
    }

    /// Decodes every row in file order.
    pub fn scan(&self) -> Result<Vec<Vec<Value>>, DataError> {
        let mut reader = self.reader()?;
        let mut out = Vec::with_capacity(self.index.len());
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            self.rows_read.fetch_add(1, Ordering::Relaxed);
            out.push(self.typed(&record));
        }
        Ok(out)
    }

    /// Rows matching `predicate`, in file order.
    pub fn select(&self, predicate: Option<&Predicate>) -> Result<Vec<Vec<Value>>, DataError> {
        let col = match predicate {
            Some(p) => Some(self.column_index(&p.column).ok_or_else(|| DataError::UnknownColumn {
                table: self.name.clone(),
                column: p.column.clone(),
            })?),
            None => None,
        };
        let rows = self.scan()?;
        Ok(rows
            .into_iter()
            .filter(|row| match (predicate, col) {
                (Some(p), Some(c)) => p.op.test(&row[c], &p.value) == Some(true),
                _ => true,
            })
            .collect())
    }

    /// Key of the first row (file order) matching `predicate`.
    pub fn first_match(&self, predicate: &Predicate) -> Result<Option<Vec<Value>>, DataError> {
        Ok(self.select(Some(predicate))?.into_iter().next())
    }

    /// Column values keyed by column name.
    pub fn named(&self, row: &[Value]) -> HashMap<String, Value> {
        self.columns.iter().cloned().zip(row.iter().cloned()).collect()
    }
}

fn csv_err(e: csv::Error) -> DataError {
    DataError::Csv(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn lazy_keyed_rows() {
        let f = write("id,name,wheels\n1,trike,3\n2,car,4\n");
        let t = TableSource::open("V", f.path(), "id").unwrap();
        assert_eq!(t.keys().collect::<Vec<_>>(), vec!["1", "2"]);
        assert_eq!(t.rows_read(), 0);
        let row = t.row("1").unwrap().unwrap();
        assert_eq!(row, vec![Value::Integer(1), Value::from("trike"), Value::Integer(3)]);
        assert_eq!(t.rows_read(), 1);
        assert_eq!(t.row("9").unwrap(), None);
    }

    #[test]
    fn duplicate_keys_rejected() {
        let f = write("id,name\n1,a\n1,b\n");
        assert!(matches!(TableSource::open("T", f.path(), "id"), Err(DataError::DuplicateKey { .. })));
    }

    #[test]
    fn missing_key_column() {
        let f = write("id,name\n1,a\n");
        assert!(matches!(TableSource::open("T", f.path(), "nope"), Err(DataError::MissingKeyColumn { .. })));
    }

    #[test]
    fn quoted_cells_and_typing() {
        let f = write("k,txt,flag\na,\"x, \"\"y\"\"\",true\nb,,false\n");
        let t = TableSource::open("T", f.path(), "k").unwrap();
        let row = t.row("a").unwrap().unwrap();
        assert_eq!(row[1], Value::from("x, \"y\""));
        assert_eq!(row[2], Value::Boolean(true));
        assert_eq!(t.row("b").unwrap().unwrap()[1], Value::Unknown);
    }

    #[test]
    fn select_filters_in_file_order() {
        let f = write("id,name,wheels\n1,trike,3\n2,car,4\n");
        let t = TableSource::open("V", f.path(), "id").unwrap();
        let rows = t.select(Some(&Predicate { column: "wheels".into(), op: CmpOp::Gt, value: Value::Integer(0) })).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(t.select(Some(&Predicate::eq("colour", "red"))).is_err());
    }
}
