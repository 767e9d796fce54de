use std::cmp::Ordering;
use std::fmt::Write;

use super::{BenchError, BenchResult};

pub const SEEDS_HEADER: &str = "label,seed,steps_per_second";
pub const SUMMARY_HEADER: &str =
    "label,mean_steps_per_second,std_steps_per_second,relative_mean,relative_std,seeds_ok,seeds_failed";
const FAILED: &str = "failed";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub mean: f64,
    pub std: f64,
    /// Mean relative to the baseline mean.
    pub relative_mean: f64,
    /// Standard deviation relative to the baseline mean.
    pub relative_std: f64,
    pub seeds_ok: usize,
    pub seeds_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub baseline: String,
    /// Sorted by relative mean, fastest first.
    pub rows: Vec<ReportRow>,
    pub results: Vec<BenchResult>,
}

/// Normalizes every result by the baseline's mean throughput.
pub fn relative_report(results: &[BenchResult], baseline: &str) -> Result<Report, BenchError> {
    let base = results.iter().find(|r| r.label == baseline).ok_or_else(|| {
        BenchError::Usage(format!(
            "baseline {baseline:?} is not among the configurations: {}",
            results.iter().map(|r| r.label.as_str()).collect::<Vec<_>>().join(", ")
        ))
    })?;
    let base_mean = base.mean();
    if !(base_mean.is_finite() && base_mean > 0.0) {
        return Err(BenchError::Usage(format!(
            "baseline {baseline:?} has no successful measurement"
        )));
    }
    let mut rows: Vec<ReportRow> = results
        .iter()
        .map(|r| {
            let (mean, std) = (r.mean(), r.std());
            ReportRow {
                label: r.label.clone(),
                mean,
                std,
                relative_mean: mean / base_mean,
                relative_std: std / base_mean,
                seeds_ok: r.completed().count(),
                seeds_failed: r.failed(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        match (a.relative_mean.is_nan(), b.relative_mean.is_nan()) {
            (false, true) => Ordering::Less,
            (true, false) => Ordering::Greater,
            _ => b
                .relative_mean
                .partial_cmp(&a.relative_mean)
                .unwrap_or(Ordering::Equal),
        }
        .then_with(|| a.label.cmp(&b.label))
    });
    Ok(Report {
        baseline: baseline.to_string(),
        rows,
        results: results.to_vec(),
    })
}

impl Report {
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        let mut out = format!("relative throughput, baseline {}\n", self.baseline);
        let _ = writeln!(
            out,
            "{:<width$}  {:>14}  {:>12}  {:>9}  {:>9}  seeds",
            "label", "steps/s", "std", "relative", "rel. std"
        );
        for r in &self.rows {
            let seeds = if r.seeds_failed > 0 {
                format!("{} ok, {} failed", r.seeds_ok, r.seeds_failed)
            } else {
                format!("{}", r.seeds_ok)
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:>14.1}  {:>12.1}  {:>9.3}  {:>9.3}  {seeds}",
                r.label, r.mean, r.std, r.relative_mean, r.relative_std
            );
        }
        out
    }

    /// Per-seed block, a blank line, then the summary block in row order.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SEEDS_HEADER}\n");
        for r in &self.results {
            for (seed, sps) in r.seeds.iter().zip(&r.steps_per_second) {
                match sps {
                    Some(v) => writeln!(out, "{},{seed},{v}", r.label),
                    None => writeln!(out, "{},{seed},{FAILED}", r.label),
                }
                .expect("writing to a String");
            }
        }
        out.push('\n');
        out.push_str(SUMMARY_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.label, r.mean, r.std, r.relative_mean, r.relative_std, r.seeds_ok, r.seeds_failed
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub results: Vec<BenchResult>,
    pub rows: Vec<ReportRow>,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> BenchError {
    BenchError::Report(format!("line {}: {msg}", line + 1))
}

fn float(line: usize, s: &str) -> Result<f64, BenchError> {
    s.parse().map_err(|_| bad(line, format!("{s:?} is not a number")))
}

fn int<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, BenchError> {
    s.parse().map_err(|_| bad(line, format!("{s:?} is not an integer")))
}

/// Reads back what [`Report::to_csv`] wrote.
pub fn parse_report_csv(text: &str) -> Result<ParsedReport, BenchError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, SEEDS_HEADER)) => {}
        _ => return Err(bad(0, format!("expected header {SEEDS_HEADER}"))),
    }
    let mut results: Vec<BenchResult> = Vec::new();
    for (n, line) in lines.by_ref() {
        if line.is_empty() {
            break;
        }
        let f: Vec<&str> = line.split(',').collect();
        let [label, seed, sps] = f[..] else {
            return Err(bad(n, "expected 3 fields"));
        };
        let seed: u64 = int(n, seed)?;
        let sps = if sps == FAILED { None } else { Some(float(n, sps)?) };
        match results.iter_mut().find(|r| r.label == label) {
            Some(r) => {
                r.seeds.push(seed);
                r.steps_per_second.push(sps);
            }
            None => results.push(BenchResult {
                label: label.to_string(),
                seeds: vec![seed],
                steps_per_second: vec![sps],
            }),
        }
    }
    match lines.next() {
        Some((_, SUMMARY_HEADER)) => {}
        Some((n, _)) => return Err(bad(n, format!("expected header {SUMMARY_HEADER}"))),
        None => return Err(BenchError::Report("missing summary block".into())),
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let [label, mean, std, rel, rel_std, ok, failed] = f[..] else {
            return Err(bad(n, "expected 7 fields"));
        };
        rows.push(ReportRow {
            label: label.to_string(),
            mean: float(n, mean)?,
            std: float(n, std)?,
            relative_mean: float(n, rel)?,
            relative_std: float(n, rel_std)?,
            seeds_ok: int(n, ok)?,
            seeds_failed: int(n, failed)?,
        });
    }
    Ok(ParsedReport { results, rows })
}
