//! Result rows and their CSV encoding. Columns are fixed; floats carry six
//! significant digits; undefined bounds/errors are empty fields. Parsing an
//! emitted file reproduces the rows exactly (values are quantized at emit
//! time, so emit -> parse -> emit is the identity on files).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::BenchError;

pub const CSV_HEADER: &str = "structure,threads,width,depth,shift_up,shift_down,k_bound,\
put_rate,prefill,ops_per_sec,hops_per_op,shifts_per_op,mean_error,max_error,seed";

/// One averaged experiment result.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub structure: String,
    pub threads: u64,
    pub width: u64,
    /// 0 for structures without a depth dimension.
    pub depth: u64,
    pub shift_up: u64,
    pub shift_down: u64,
    pub k_bound: Option<u64>,
    pub put_rate: f64,
    pub prefill: u64,
    pub ops_per_sec: f64,
    pub hops_per_op: f64,
    pub shifts_per_op: f64,
    pub mean_error: Option<f64>,
    pub max_error: Option<u64>,
    pub seed: u64,
}

/// Six significant digits, scientific; exact zero stays "0".
fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.5e}")
    }
}

fn opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultRow {
    /// Quantizes the float fields to the emitted precision, making the row
    /// a fixpoint of emit-then-parse.
    pub fn quantized(mut self) -> Self {
        self.put_rate = fmt_g6(self.put_rate).parse().unwrap();
        self.ops_per_sec = fmt_g6(self.ops_per_sec).parse().unwrap();
        self.hops_per_op = fmt_g6(self.hops_per_op).parse().unwrap();
        self.shifts_per_op = fmt_g6(self.shifts_per_op).parse().unwrap();
        self.mean_error = self.mean_error.map(|m| fmt_g6(m).parse().unwrap());
        self
    }

    fn to_line(&self) -> String {
        let mut line = String::new();
        let _ = write!(
            line,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.structure,
            self.threads,
            self.width,
            self.depth,
            self.shift_up,
            self.shift_down,
            opt_u64(self.k_bound),
            fmt_g6(self.put_rate),
            self.prefill,
            fmt_g6(self.ops_per_sec),
            fmt_g6(self.hops_per_op),
            fmt_g6(self.shifts_per_op),
            self.mean_error.map(fmt_g6).unwrap_or_default(),
            opt_u64(self.max_error),
            self.seed,
        );
        line
    }

    fn from_line(line: &str, lineno: usize) -> Result<Self, BenchError> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(BenchError::Parse(format!(
                "line {lineno}: expected 15 fields, found {}",
                fields.len()
            )));
        }
        let uint = |i: usize| -> Result<u64, BenchError> {
            fields[i]
                .parse()
                .map_err(|e| BenchError::Parse(format!("line {lineno} field {i}: {e}")))
        };
        let real = |i: usize| -> Result<f64, BenchError> {
            fields[i]
                .parse()
                .map_err(|e| BenchError::Parse(format!("line {lineno} field {i}: {e}")))
        };
        let opt_uint = |i: usize| -> Result<Option<u64>, BenchError> {
            if fields[i].is_empty() {
                Ok(None)
            } else {
                uint(i).map(Some)
            }
        };
        Ok(ResultRow {
            structure: fields[0].to_string(),
            threads: uint(1)?,
            width: uint(2)?,
            depth: uint(3)?,
            shift_up: uint(4)?,
            shift_down: uint(5)?,
            k_bound: opt_uint(6)?,
            put_rate: real(7)?,
            prefill: uint(8)?,
            ops_per_sec: real(9)?,
            hops_per_op: real(10)?,
            shifts_per_op: real(11)?,
            mean_error: if fields[12].is_empty() {
                None
            } else {
                Some(real(12)?)
            },
            max_error: opt_uint(13)?,
            seed: uint(14)?,
        })
    }
}

/// The whole file as a string: header plus one line per row.
pub fn format_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    out
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), BenchError> {
    std::fs::write(path, format_csv(rows)).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, BenchError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        other => {
            return Err(BenchError::Parse(format!(
                "bad header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| ResultRow::from_line(l, i + 2))
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text)
}
