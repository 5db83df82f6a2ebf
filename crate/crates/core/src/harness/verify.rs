//! Cell-by-cell comparison of a sweep's `summary.csv` against a reference.
//!
//! Reference format, one cell per line:
//!
//! ```text
//! key,expected,tolerance
//! fixed:5/sent,139500,exact
//! fixed:1/sent,128216,rel:0.02
//! conservative/pdr_percent,87,abs:2
//! ```
//!
//! Keys are `<policy>/<column>` with the columns `sent`, `received`,
//! `lost`, `pdr_percent` and `connected_sensor_rounds`. An empty tolerance
//! picks the column default: exact for period-bound fixed-DR sent counts,
//! 2% relative for other counts, 2 points for PDR.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::control::PolicyKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Exact,
    /// Fraction of the expected value.
    Relative(f64),
    Absolute(f64),
}

impl Tolerance {
    pub fn accepts(&self, expected: f64, actual: f64) -> bool {
        let diff = (actual - expected).abs();
        match *self {
            Tolerance::Exact => diff < 1e-9,
            Tolerance::Relative(r) => diff <= r * expected.abs() + 1e-9,
            Tolerance::Absolute(a) => diff <= a + 1e-9,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(Tolerance::Exact),
            _ => {
                if let Some(r) = s.strip_prefix("rel:") {
                    r.parse().ok().map(Tolerance::Relative)
                } else {
                    s.strip_prefix("abs:")?.parse().ok().map(Tolerance::Absolute)
                }
            }
        }
    }

    /// Column default for `key`.
    pub fn default_for(key: &str) -> Self {
        let (policy, column) = key.split_once('/').unwrap_or((key, ""));
        match (policy.parse::<PolicyKind>(), column) {
            (_, "pdr_percent") => Tolerance::Absolute(2.0),
            (Ok(PolicyKind::Fixed(dr)), "sent") if dr >= 2 => Tolerance::Exact,
            _ => Tolerance::Relative(0.02),
        }
    }
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tolerance::Exact => f.write_str("exact"),
            Tolerance::Relative(r) => write!(f, "rel:{r}"),
            Tolerance::Absolute(a) => write!(f, "abs:{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCell {
    pub key: String,
    pub expected: f64,
    pub tolerance: Tolerance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellCheck {
    pub key: String,
    pub expected: f64,
    pub actual: Option<f64>,
    pub tolerance: Tolerance,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<CellCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let actual = c.actual.map_or("missing".to_string(), |a| {
                if a.fract() == 0.0 {
                    format!("{a}")
                } else {
                    format!("{a:.4}")
                }
            });
            writeln!(
                f,
                "{} {} expected {} actual {} ({})",
                if c.pass { "PASS" } else { "FAIL" },
                c.key,
                c.expected,
                actual,
                c.tolerance
            )?;
        }
        let failed = self.failures().count();
        write!(f, "{} cells, {} failed", self.checks.len(), failed)
    }
}

pub fn parse_reference(text: &str, origin: &Path) -> Result<Vec<ReferenceCell>> {
    let mut cells = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with("key,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(2..=3).contains(&fields.len()) || fields[0].is_empty() {
            return Err(Error::parse(origin, i + 1, "expected 'key,expected[,tolerance]'"));
        }
        let expected: f64 = fields[1]
            .parse()
            .map_err(|_| Error::parse(origin, i + 1, format!("bad expected value '{}'", fields[1])))?;
        let tolerance = match fields.get(2).copied().unwrap_or("") {
            "" => Tolerance::default_for(fields[0]),
            t => Tolerance::parse(t)
                .ok_or_else(|| Error::parse(origin, i + 1, format!("bad tolerance '{t}'")))?,
        };
        cells.push(ReferenceCell {
            key: fields[0].to_string(),
            expected,
            tolerance,
        });
    }
    if cells.is_empty() {
        return Err(Error::parse(origin, 0, "reference has no cells"));
    }
    Ok(cells)
}

/// Reads `summary.csv` from a report directory into `<policy>/<column>` cells.
pub fn load_result_cells(dir: &Path) -> Result<BTreeMap<String, f64>> {
    let path = dir.join("summary.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = match lines.next() {
        Some((_, h)) => h.split(',').collect(),
        None => return Err(Error::parse(&path, 1, "empty summary")),
    };
    let mut cells = BTreeMap::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::parse(&path, i + 1, "column count mismatch"));
        }
        let policy = fields[0];
        for (col, v) in header.iter().zip(&fields).skip(1) {
            let v: f64 = v
                .parse()
                .map_err(|_| Error::parse(&path, i + 1, format!("bad number in column {col}")))?;
            if *col == "pdr" {
                cells.insert(format!("{policy}/pdr_percent"), v * 100.0);
            } else {
                cells.insert(format!("{policy}/{col}"), v);
            }
        }
    }
    Ok(cells)
}

pub fn compare_cells(actual: &BTreeMap<String, f64>, reference: &[ReferenceCell]) -> VerifyReport {
    VerifyReport {
        checks: reference
            .iter()
            .map(|r| {
                let a = actual.get(&r.key).copied();
                CellCheck {
                    key: r.key.clone(),
                    expected: r.expected,
                    actual: a,
                    tolerance: r.tolerance,
                    pass: a.is_some_and(|a| r.tolerance.accepts(r.expected, a)),
                }
            })
            .collect(),
    }
}

/// Compares the report in `result_dir` with the reference file.
pub fn compare_to_reference(result_dir: &Path, reference: &Path) -> Result<VerifyReport> {
    let text = std::fs::read_to_string(reference).map_err(|e| Error::io(reference, e))?;
    let cells = parse_reference(&text, reference)?;
    Ok(compare_cells(&load_result_cells(result_dir)?, &cells))
}
