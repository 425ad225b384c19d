//! Machine-readable command reports.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{json, Value};

use crate::error::Result;
use crate::tensor::LabeledOperator;

/// One pass/fail verdict with the quantity it compared.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

/// Rows written to `--csv`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(ToString::to_string).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub results: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub seed: u64,
    pub version: String,
    #[serde(skip)]
    pub table: Option<Table>,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            results: BTreeMap::new(),
            checks: Vec::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            table: None,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.insert(key.to_string(), value.into());
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    /// Records `measured <= tolerance`.
    pub fn check_at_most(&mut self, name: &str, measured: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            passed: measured <= tolerance,
            measured,
            tolerance,
        });
    }

    /// Records `measured < -tolerance`.
    pub fn check_negative(&mut self, name: &str, measured: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            passed: measured < -tolerance,
            measured,
            tolerance,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFormatter::default());
        self.serialize(&mut ser)?;
        out.push(b'\n');
        Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
    }
}

/// Pretty JSON whose floats carry 17 significant digits.
#[derive(Default)]
pub struct FixedFormatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl Formatter for FixedFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// `{"dims", "re", "im"}` view of an operator.
pub fn matrix_value(op: &LabeledOperator) -> Value {
    let d_out = op.dim_out();
    let d_in = op.dim_in();
    let part = |f: fn(f64, f64) -> f64| -> Vec<Vec<f64>> {
        (0..d_out)
            .map(|i| {
                (0..d_in)
                    .map(|j| {
                        let z = op.get(i, j);
                        f(z.re, z.im)
                    })
                    .collect()
            })
            .collect()
    };
    json!({
        "dims": op.dims_out(),
        "re": part(|re, _| re),
        "im": part(|_, im| im),
    })
}

/// Shortest round-trip decimal, used in CSV cells.
pub fn cell(x: f64) -> String {
    format!("{x}")
}
