//! CSV and JSON manifest serialization for every result type.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same `f64`, so reading and rewriting a file reproduces it byte for byte.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{CalibrationTable, TableRow};
use crate::error::{Error, Result};
use crate::sampler::{SamplerMode, SweepResult};
use crate::smearing::VerificationReport;
use crate::walker::WalkEnsembleResult;

pub const SWEEP_HEADER: [&str; 6] = ["t0", "c_analytic", "f_shift", "c_simulated", "stderr", "n_steps"];
pub const TABLE_HEADER: [&str; 4] = ["f", "c_estimate", "stderr", "n_steps"];
pub const WALK_HEADER: [&str; 3] = ["N", "msd", "stderr"];
pub const QUADRATURE_HEADER: [&str; 6] = ["t0", "quad_value", "closed_form", "abs_dev", "err_bound", "alpha"];
pub const KERNEL_HEADER: [&str; 2] = ["t0", "value"];

/// Shortest round-trip decimal; plain notation for moderate magnitudes.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("not a number: '{s}'")))
}

/// A header plus rows of numbers; the common shape of every output file.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericCsv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericCsv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| fmt_num(v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = r.headers()?.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            rows.push(rec.iter().map(parse_num).collect::<Result<Vec<_>>>()?);
        }
        Ok(Self { header, rows })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }

    /// Writes the file and returns its SHA-256 digest in hex.
    pub fn write_file(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes()?;
        fs::write(path, &bytes)?;
        Ok(sha256_hex(&bytes))
    }

    fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self
            .header
            .iter()
            .map(String::as_str)
            .eq(expected.iter().copied())
        {
            Ok(())
        } else {
            Err(Error::Parse(format!(
                "unexpected header {:?}, expected {:?}",
                self.header, expected
            )))
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sweep_to_csv(result: &SweepResult) -> NumericCsv {
    let mut csv = NumericCsv::new(&SWEEP_HEADER);
    for r in &result.rows {
        csv.push(vec![
            r.t0,
            r.c_analytic,
            r.f_shift,
            r.c_simulated,
            r.stderr,
            r.n_steps as f64,
        ]);
    }
    csv
}

pub fn table_to_csv(table: &CalibrationTable) -> NumericCsv {
    let mut csv = NumericCsv::new(&TABLE_HEADER);
    for r in table.rows() {
        csv.push(vec![r.f, r.c_estimate, r.stderr, r.n_steps as f64]);
    }
    csv
}

/// Rebuilds a calibration table; the sampler mode and base variance are not
/// stored in the CSV and must be supplied.
pub fn table_from_csv(csv: &NumericCsv, mode: SamplerMode, sigma2: f64) -> Result<CalibrationTable> {
    csv.expect_header(&TABLE_HEADER)?;
    let rows = csv
        .rows
        .iter()
        .map(|r| TableRow {
            f: r[0],
            c_estimate: r[1],
            stderr: r[2],
            n_steps: r[3] as usize,
        })
        .collect();
    CalibrationTable::new(mode, sigma2, rows)
}

pub fn walk_to_csv(result: &WalkEnsembleResult) -> NumericCsv {
    let mut csv = NumericCsv::new(&WALK_HEADER);
    for p in &result.msd {
        csv.push(vec![p.n as f64, p.msd, p.stderr]);
    }
    csv
}

pub fn report_to_csv(reports: &[VerificationReport]) -> NumericCsv {
    let mut csv = NumericCsv::new(&QUADRATURE_HEADER);
    for r in reports.iter().flat_map(|rep| &rep.rows) {
        csv.push(vec![
            r.t0,
            r.quad_value,
            r.closed_form,
            r.abs_dev,
            r.err_bound,
            r.alpha,
        ]);
    }
    csv
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub outputs: Vec<OutputDigest>,
    /// Command-specific results (summaries, fits).
    #[serde(default)]
    pub results: serde_json::Value,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        let now = unix_now();
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seed,
            outputs: Vec::new(),
            results: serde_json::Value::Null,
            started_unix: now,
            finished_unix: now,
        }
    }

    pub fn add_output(&mut self, path: &Path, sha256: String) {
        self.outputs.push(OutputDigest {
            path: path.display().to_string(),
            sha256,
        });
    }

    pub fn write_file(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
