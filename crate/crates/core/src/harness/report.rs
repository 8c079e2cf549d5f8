use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::BoundCheck;
use crate::error::{Error, Result};

pub const REPLICATIONS_FILE: &str = "replications.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const BOUNDS_FILE: &str = "bounds.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// One row of `replications.csv`. A failed replication has a NaN excess
/// risk; its message goes to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub estimator: String,
    pub n: usize,
    pub rep: usize,
    pub excess_risk: f64,
    pub accept_rate: Option<f64>,
    pub wall_ms: f64,
}

impl ReplicationRecord {
    pub fn failed(&self) -> bool {
        self.excess_risk.is_nan()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub estimator: String,
    pub n: usize,
    pub stat: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub theorem: String,
    pub param_json: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

impl From<&BoundCheck> for BoundRow {
    fn from(c: &BoundCheck) -> Self {
        Self {
            theorem: c.theorem.clone(),
            param_json: c.params.to_string(),
            lhs: c.lhs,
            rhs: c.rhs,
            margin: c.margin,
            pass: c.pass,
        }
    }
}

/// Reproduction metadata written next to the CSV files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: u64,
    pub seeding: String,
    pub config: String,
    pub failures: Vec<String>,
}

pub const SEEDING_SCHEME: &str =
    "splitmix64 chain: seed(stream, n, rep) = mix(mix(mix(master, fnv1a64(stream)), n), rep); \
dataset stream \"data\" (\"data:minus\"/\"data:plus\" for hypercube pairs), estimator stream = estimator label";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub replications: Vec<ReplicationRecord>,
    pub aggregates: Vec<AggregateRow>,
    pub bounds: Vec<BoundRow>,
    pub manifest: Manifest,
}

impl Report {
    /// Aggregate value for `(estimator, n, stat)`.
    pub fn stat(&self, estimator: &str, n: usize, stat: &str) -> Option<f64> {
        self.aggregates.iter().find(|r| r.estimator == estimator && r.n == n && r.stat == stat).map(|r| r.value)
    }

    /// Successful excess risks for `(estimator, n)` in replication order.
    pub fn excess_risks(&self, estimator: &str, n: usize) -> Vec<f64> {
        self.replications
            .iter()
            .filter(|r| r.estimator == estimator && r.n == n && !r.failed())
            .map(|r| r.excess_risk)
            .collect()
    }

    /// Zeroes the timing column.
    pub fn without_timing(mut self) -> Self {
        for r in &mut self.replications {
            r.wall_ms = 0.0;
        }
        self
    }
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T], header: &[&str]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header).map_err(csv_error)?;
    for row in rows {
        out.serialize(row).map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::Parse(e.to_string()))
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(r: R, header: &[&str]) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let got = rdr.headers().map_err(csv_error)?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Parse(format!(
            "unexpected header {:?}, expected {header:?}",
            got.iter().collect::<Vec<_>>()
        )));
    }
    rdr.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

pub const REPLICATION_HEADER: [&str; 6] = ["estimator", "n", "rep", "excess_risk", "accept_rate", "wall_ms"];
pub const AGGREGATE_HEADER: [&str; 4] = ["estimator", "n", "stat", "value"];
pub const BOUND_HEADER: [&str; 6] = ["theorem", "param_json", "lhs", "rhs", "margin", "pass"];

pub fn write_replications<W: Write>(w: W, rows: &[ReplicationRecord]) -> Result<()> {
    write_rows(w, rows, &REPLICATION_HEADER)
}

pub fn write_aggregates<W: Write>(w: W, rows: &[AggregateRow]) -> Result<()> {
    write_rows(w, rows, &AGGREGATE_HEADER)
}

pub fn write_bounds<W: Write>(w: W, rows: &[BoundRow]) -> Result<()> {
    write_rows(w, rows, &BOUND_HEADER)
}

pub fn parse_replications<R: Read>(r: R) -> Result<Vec<ReplicationRecord>> {
    read_rows(r, &REPLICATION_HEADER)
}

pub fn parse_aggregates<R: Read>(r: R) -> Result<Vec<AggregateRow>> {
    read_rows(r, &AGGREGATE_HEADER)
}

pub fn parse_bounds<R: Read>(r: R) -> Result<Vec<BoundRow>> {
    read_rows(r, &BOUND_HEADER)
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes the three CSV files and the manifest into `dir`, overwriting.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths: Vec<PathBuf> =
        [REPLICATIONS_FILE, AGGREGATE_FILE, BOUNDS_FILE, MANIFEST_FILE].iter().map(|f| dir.join(f)).collect();
    write_file(&paths[0], |b| write_replications(b, &report.replications))?;
    write_file(&paths[1], |b| write_aggregates(b, &report.aggregates))?;
    write_file(&paths[2], |b| write_bounds(b, &report.bounds))?;
    let manifest = toml::to_string(&report.manifest).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&paths[3], manifest).map_err(|e| Error::io(&paths[3], e))?;
    Ok(paths)
}

pub fn load_report(dir: &Path) -> Result<Report> {
    let open = |name: &str| -> Result<std::fs::File> {
        let p = dir.join(name);
        std::fs::File::open(&p).map_err(|e| Error::io(&p, e))
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(Report {
        replications: parse_replications(open(REPLICATIONS_FILE)?)?,
        aggregates: parse_aggregates(open(AGGREGATE_FILE)?)?,
        bounds: parse_bounds(open(BOUNDS_FILE)?)?,
        manifest: toml::from_str(&manifest_text).map_err(|e| Error::Parse(e.to_string()))?,
    })
}

/// `replications.csv` text with the timing column removed, for
/// determinism comparisons.
pub fn strip_timing(csv_text: &str) -> String {
    csv_text.lines().map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}
