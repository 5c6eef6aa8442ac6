//! Reports in three forms: human text, CSV and a structured TOML record.
//!
//! CSV is the golden-file format, so it carries nothing that varies between
//! runs. Wall times appear only in the text and structured forms.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::HarnessError;

pub trait Emit {
    /// File stem for the report files, e.g. `main-theorem.verify`.
    fn stem(&self) -> String;
    fn passed(&self) -> bool;
    fn csv(&self) -> String;
    fn text(&self) -> String;
    fn structured(&self) -> String;
}

/// Writes `<stem>.csv` and `<stem>.report.toml` into `dir`.
pub fn write_files(report: &dyn Emit, dir: &Path) -> Result<(PathBuf, PathBuf), HarnessError> {
    let output = |path: &Path, e: std::io::Error| HarnessError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| output(dir, e))?;
    let csv_path = dir.join(format!("{}.csv", report.stem()));
    let toml_path = dir.join(format!("{}.report.toml", report.stem()));
    std::fs::write(&csv_path, report.csv()).map_err(|e| output(&csv_path, e))?;
    std::fs::write(&toml_path, report.structured()).map_err(|e| output(&toml_path, e))?;
    Ok((csv_path, toml_path))
}

fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn to_csv<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("report types serialize to toml")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub anchor: String,
    /// Instances the check applied to.
    pub instances: usize,
    pub max_entry: f64,
    pub op_norm: f64,
    pub tol: f64,
    pub passed: bool,
    /// Instance seed that produced the largest deviation.
    pub worst_seed: Option<u64>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub instances: usize,
    pub checks: Vec<CheckRow>,
}

impl Report {
    pub fn row(&self, check: &str) -> Option<&CheckRow> {
        self.checks.iter().find(|r| r.check == check)
    }
}

impl Emit for Report {
    fn stem(&self) -> String {
        format!("{}.verify", self.scenario)
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|r| r.passed)
    }

    fn csv(&self) -> String {
        to_csv(
            ["scenario", "check", "anchor", "instances", "max_entry", "op_norm", "tol", "status", "worst_seed"],
            self.checks.iter().map(|r| {
                [
                    self.scenario.clone(),
                    r.check.clone(),
                    r.anchor.clone(),
                    r.instances.to_string(),
                    sci(r.max_entry),
                    sci(r.op_norm),
                    sci(r.tol),
                    verdict(r.passed).to_string(),
                    r.worst_seed.map(|s| s.to_string()).unwrap_or_default(),
                ]
            }),
        )
    }

    fn text(&self) -> String {
        let mut out = format!("scenario {} (seed {}, {} instances)\n", self.scenario, self.seed, self.instances);
        for r in &self.checks {
            let _ = writeln!(
                out,
                "  {:<4} {:<28} max {:>12}  op {:>12}  tol {:>8}  n={:<4} {:>9.1} ms  {}",
                verdict(r.passed),
                r.check,
                sci(r.max_entry),
                sci(r.op_norm),
                format!("{:.0e}", r.tol),
                r.instances,
                r.wall_time_ms,
                r.anchor
            );
        }
        let failed = self.checks.iter().filter(|r| !r.passed).count();
        let _ = writeln!(out, "{} of {} checks passed", self.checks.len() - failed, self.checks.len());
        out
    }

    fn structured(&self) -> String {
        to_toml(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergeRow {
    pub level: usize,
    pub boundaries: Vec<usize>,
    pub max_gap: f64,
    pub max_cocycle_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergeTable {
    pub scenario: String,
    pub seed: u64,
    pub tol: f64,
    pub levels: Vec<ConvergeRow>,
    /// Gap at every grid time is non-increasing from each level to the next.
    pub gap_monotone: bool,
    /// Cocycle deviation on every probe is non-increasing likewise.
    pub cocycle_monotone: bool,
    /// The finest level resolves every atom of the target.
    pub target_resolved: bool,
    pub passed: bool,
}

impl Emit for ConvergeTable {
    fn stem(&self) -> String {
        format!("{}.converge", self.scenario)
    }

    fn passed(&self) -> bool {
        self.passed
    }

    fn csv(&self) -> String {
        to_csv(
            ["scenario", "level", "boundaries", "max_gap", "max_cocycle_deviation"],
            self.levels.iter().map(|r| {
                [
                    self.scenario.clone(),
                    r.level.to_string(),
                    r.boundaries.len().to_string(),
                    sci(r.max_gap),
                    sci(r.max_cocycle_deviation),
                ]
            }),
        )
    }

    fn text(&self) -> String {
        let mut out = format!("convergence for {} (seed {})\n", self.scenario, self.seed);
        let _ = writeln!(out, "  level  boundaries  {:>12}  {:>12}", "max gap", "cocycle dev");
        for r in &self.levels {
            let _ = writeln!(
                out,
                "  {:>5}  {:>10}  {:>12}  {:>12}",
                r.level,
                r.boundaries.len(),
                sci(r.max_gap),
                sci(r.max_cocycle_deviation)
            );
        }
        let _ = writeln!(
            out,
            "  gap monotone: {}  cocycle monotone: {}  target resolved: {}  => {}",
            self.gap_monotone,
            self.cocycle_monotone,
            self.target_resolved,
            verdict(self.passed)
        );
        out
    }

    fn structured(&self) -> String {
        to_toml(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cap: usize,
    pub fock_dim: usize,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub scenario: String,
    pub seed: u64,
    pub pairs: usize,
    pub norm: f64,
    pub rows: Vec<SweepRow>,
    /// Every sampled pair's error is non-increasing in the cap.
    pub monotone: bool,
}

impl Emit for SweepTable {
    fn stem(&self) -> String {
        format!("{}.sweep", self.scenario)
    }

    fn passed(&self) -> bool {
        self.monotone
    }

    fn csv(&self) -> String {
        to_csv(
            ["scenario", "cap", "fock_dim", "max_error"],
            self.rows.iter().map(|r| [self.scenario.clone(), r.cap.to_string(), r.fock_dim.to_string(), sci(r.max_error)]),
        )
    }

    fn text(&self) -> String {
        let mut out = format!(
            "truncation sweep for {} (seed {}, {} pairs, ‖f‖, ‖g‖ ≤ {})\n",
            self.scenario, self.seed, self.pairs, self.norm
        );
        let _ = writeln!(out, "  cap  fock_dim  {:>12}", "max error");
        for r in &self.rows {
            let _ = writeln!(out, "  {:>3}  {:>8}  {:>12}", r.cap, r.fock_dim, sci(r.max_error));
        }
        let _ = writeln!(out, "  monotone: {}  => {}", self.monotone, verdict(self.monotone));
        out
    }

    fn structured(&self) -> String {
        to_toml(self)
    }
}
