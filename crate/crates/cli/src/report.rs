//! CSV and JSON artifacts. JSON objects have sorted keys, numbers must be
//! finite, and the optional timestamp is the only run-dependent field.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::ser::{self, Serialize};
use serde_json::{Map, Value};
use sha1::{Digest, Sha1};

use crate::CliError;

/// Git blob id of a byte string: SHA-1 over `"blob <len>\0"` and the bytes.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct InputDigest {
    pub path: String,
    pub blob: String,
}

pub fn digest_file(path: &Path) -> Result<InputDigest, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(InputDigest { path: path.display().to_string(), blob: git_blob_hash(&bytes) })
}

/// Error raised by [`ensure_finite`], naming the offending field.
#[derive(Debug)]
struct NonFinite(String);

impl fmt::Display for NonFinite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NonFinite {}

impl ser::Error for NonFinite {
    fn custom<T: fmt::Display>(msg: T) -> Self {
        NonFinite(msg.to_string())
    }
}

/// Walks a value through serde and rejects NaN and infinities, which JSON
/// would otherwise turn into `null`.
struct FiniteCheck {
    path: Vec<String>,
}

impl FiniteCheck {
    fn float(&mut self, v: f64) -> Result<(), NonFinite> {
        if v.is_finite() {
            Ok(())
        } else {
            let at = if self.path.is_empty() { "<root>".to_string() } else { self.path.join(".") };
            Err(NonFinite(format!("non-finite value {v} at {at}")))
        }
    }

    fn nested<T: Serialize + ?Sized>(&mut self, key: String, value: &T) -> Result<(), NonFinite> {
        self.path.push(key);
        let r = value.serialize(&mut *self);
        self.path.pop();
        r
    }
}

macro_rules! accept {
    ($($name:ident: $ty:ty),*) => {
        $(fn $name(self, _: $ty) -> Result<(), NonFinite> { Ok(()) })*
    };
}

impl<'a> ser::Serializer for &'a mut FiniteCheck {
    type Ok = ();
    type Error = NonFinite;
    type SerializeSeq = Self;
    type SerializeTuple = Self;
    type SerializeTupleStruct = Self;
    type SerializeTupleVariant = Self;
    type SerializeMap = Self;
    type SerializeStruct = Self;
    type SerializeStructVariant = Self;

    accept!(serialize_bool: bool, serialize_i8: i8, serialize_i16: i16, serialize_i32: i32, serialize_i64: i64,
        serialize_u8: u8, serialize_u16: u16, serialize_u32: u32, serialize_u64: u64, serialize_char: char,
        serialize_str: &str, serialize_bytes: &[u8]);

    fn serialize_f32(self, v: f32) -> Result<(), NonFinite> {
        self.float(v as f64)
    }
    fn serialize_f64(self, v: f64) -> Result<(), NonFinite> {
        self.float(v)
    }
    fn serialize_none(self) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_some<T: Serialize + ?Sized>(self, value: &T) -> Result<(), NonFinite> {
        value.serialize(self)
    }
    fn serialize_unit(self) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_unit_struct(self, _: &'static str) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_unit_variant(self, _: &'static str, _: u32, _: &'static str) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_newtype_struct<T: Serialize + ?Sized>(self, _: &'static str, value: &T) -> Result<(), NonFinite> {
        value.serialize(self)
    }
    fn serialize_newtype_variant<T: Serialize + ?Sized>(
        self,
        _: &'static str,
        _: u32,
        variant: &'static str,
        value: &T,
    ) -> Result<(), NonFinite> {
        self.nested(variant.to_string(), value)
    }
    fn serialize_seq(self, _: Option<usize>) -> Result<Self, NonFinite> {
        Ok(self)
    }
    fn serialize_tuple(self, _: usize) -> Result<Self, NonFinite> {
        Ok(self)
    }
    fn serialize_tuple_struct(self, _: &'static str, _: usize) -> Result<Self, NonFinite> {
        Ok(self)
    }
    fn serialize_tuple_variant(self, _: &'static str, _: u32, _: &'static str, _: usize) -> Result<Self, NonFinite> {
        Ok(self)
    }
    fn serialize_map(self, _: Option<usize>) -> Result<Self, NonFinite> {
        Ok(self)
    }
    fn serialize_struct(self, _: &'static str, _: usize) -> Result<Self, NonFinite> {
        Ok(self)
    }
    fn serialize_struct_variant(self, _: &'static str, _: u32, _: &'static str, _: usize) -> Result<Self, NonFinite> {
        Ok(self)
    }
}

impl ser::SerializeSeq for &mut FiniteCheck {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_element<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), NonFinite> {
        self.nested("[]".into(), value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

impl ser::SerializeTuple for &mut FiniteCheck {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_element<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), NonFinite> {
        self.nested("()".into(), value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

impl ser::SerializeTupleStruct for &mut FiniteCheck {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), NonFinite> {
        self.nested("()".into(), value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

impl ser::SerializeTupleVariant for &mut FiniteCheck {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), NonFinite> {
        self.nested("()".into(), value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

impl ser::SerializeMap for &mut FiniteCheck {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_key<T: Serialize + ?Sized>(&mut self, _: &T) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_value<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), NonFinite> {
        self.nested("{}".into(), value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

impl ser::SerializeStruct for &mut FiniteCheck {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, key: &'static str, value: &T) -> Result<(), NonFinite> {
        self.nested(key.into(), value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

impl ser::SerializeStructVariant for &mut FiniteCheck {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, key: &'static str, value: &T) -> Result<(), NonFinite> {
        self.nested(key.into(), value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

/// Reject any NaN or infinity reachable from `value`.
pub fn ensure_finite<T: Serialize + ?Sized>(value: &T) -> Result<(), CliError> {
    value.serialize(&mut FiniteCheck { path: Vec::new() }).map_err(|e| CliError::Numerical(e.0))
}

/// A JSON report: the run header plus named result sections.
pub struct Report {
    command: String,
    config: Value,
    inputs: Vec<InputDigest>,
    timestamp: Option<u64>,
    sections: Map<String, Value>,
}

impl Report {
    pub fn new<C: Serialize>(command: &str, config: &C, inputs: Vec<InputDigest>, timestamp: bool) -> Result<Self, CliError> {
        ensure_finite(config)?;
        let config = serde_json::to_value(config).map_err(|e| CliError::Validation(e.to_string()))?;
        let timestamp = timestamp.then(|| {
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
        });
        Ok(Self { command: command.into(), config, inputs, timestamp, sections: Map::new() })
    }

    /// Add a result section; non-finite numbers are an error.
    pub fn section<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        ensure_finite(value)?;
        let v = serde_json::to_value(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        self.sections.insert(name.into(), v);
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        let mut root = Map::new();
        root.insert("tool".into(), Value::from(env!("CARGO_PKG_NAME")));
        root.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        root.insert("command".into(), Value::from(self.command.clone()));
        root.insert("config".into(), self.config.clone());
        root.insert("inputs".into(), serde_json::to_value(&self.inputs).unwrap_or(Value::Null));
        if let Some(t) = self.timestamp {
            root.insert("timestamp_unix".into(), Value::from(t));
        }
        for (k, v) in &self.sections {
            root.insert(k.clone(), v.clone());
        }
        Value::Object(root)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("JSON values always serialize");
        s.push('\n');
        s.into_bytes()
    }
}

/// A CSV table with a fixed header.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<(), CliError> {
        if row.len() != self.header.len() {
            return Err(CliError::Validation(format!("row of {} cells for {} columns", row.len(), self.header.len())));
        }
        let cells = row.into_iter().map(Cell::render).collect::<Result<Vec<_>, _>>()?;
        self.rows.push(cells);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(self) -> Result<String, CliError> {
        match self {
            Cell::Num(x) if x.is_finite() => Ok(format!("{x:?}")),
            Cell::Num(x) => Err(CliError::Numerical(format!("non-finite value {x} in a table"))),
            Cell::Int(i) => Ok(i.to_string()),
            Cell::Text(s) => Ok(s),
            Cell::Empty => Ok(String::new()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Where a command writes its artifacts: `<dir>/<stem>.csv` and `.json`.
pub struct Sink {
    dir: PathBuf,
    stem: String,
}

impl Sink {
    pub fn new(dir: &Path, stem: &str) -> Self {
        Self { dir: dir.to_path_buf(), stem: stem.into() }
    }

    pub fn write(&self, table: Option<&Table>, report: &Report) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::Io(format!("{}: {e}", self.dir.display())))?;
        let mut written = Vec::new();
        if let Some(t) = table {
            let p = self.dir.join(format!("{}.csv", self.stem));
            fs::write(&p, t.to_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            written.push(p);
        }
        let p = self.dir.join(format!("{}.json", self.stem));
        fs::write(&p, report.to_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        written.push(p);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin` and `git hash-object /dev/null`
        assert_eq!(git_blob_hash(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
        assert_eq!(git_blob_hash(b""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(&["delta", "tau", "volume"]);
        assert_eq!(t.to_bytes(), b"delta,tau,volume\r\n");
    }

    #[test]
    fn non_finite_numbers_are_rejected() {
        #[derive(serde::Serialize)]
        struct Inner {
            x: Vec<f64>,
        }
        #[derive(serde::Serialize)]
        struct Outer {
            fit: Inner,
        }
        let err = ensure_finite(&Outer { fit: Inner { x: vec![1.0, f64::NAN] } }).unwrap_err();
        assert!(err.to_string().contains("fit.x"), "{err}");
        assert!(ensure_finite(&Outer { fit: Inner { x: vec![1.0] } }).is_ok());
        let mut t = Table::new(&["a"]);
        assert!(t.push(vec![Cell::Num(f64::INFINITY)]).is_err());
    }

    #[test]
    fn keys_are_sorted_and_timestamp_optional() {
        let mut r = Report::new("bounds", &serde_json::json!({"z": 1, "a": 2}), Vec::new(), false).unwrap();
        r.section("zeta", &1.0).unwrap();
        r.section("alpha", &2.0).unwrap();
        let s = String::from_utf8(r.to_bytes()).unwrap();
        assert!(!s.contains("timestamp"));
        assert!(s.find("\"alpha\"").unwrap() < s.find("\"zeta\"").unwrap());
        assert!(s.find("\"a\"").unwrap() < s.find("\"z\"").unwrap());
        let r = Report::new("bounds", &serde_json::json!({}), Vec::new(), true).unwrap();
        assert!(String::from_utf8(r.to_bytes()).unwrap().contains("timestamp_unix"));
    }
}
