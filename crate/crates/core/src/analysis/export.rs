//! Deterministic CSV / JSON-lines exports of run artifacts.
//!
//! Files are named `<experiment>_<eta>_<gamma>_<seed>.<ext>`.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stats::{SurvivalRecord, TimeSeries};
use crate::error::{Error, Result};
use crate::protocol::RoundReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    #[default]
    Csv,
    /// One JSON object per line.
    Jsonl,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Jsonl => "jsonl",
        }
    }
}

/// Identifies one run in exported file names.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTag {
    pub eta: f64,
    pub gamma: f64,
    /// Seed, or a label such as `all` for cross-seed aggregates.
    pub seed: String,
}

pub fn file_name(experiment: &str, tag: &RunTag, format: ExportFormat) -> String {
    format!("{experiment}_{}_{}_{}.{}", tag.eta, tag.gamma, tag.seed, format.extension())
}

/// Columns of the per-round export.
#[derive(Debug, Serialize)]
struct RoundRow {
    round: u64,
    decision: i8,
    proposers: usize,
    voters: usize,
    accept_votes: usize,
    reject_votes: usize,
    removed: String,
    pool_p: f64,
    pool_v: f64,
    global_score: f64,
    test_accuracy: Option<f64>,
}

const ROUND_COLUMNS: &[&str] = &[
    "round",
    "decision",
    "proposers",
    "voters",
    "accept_votes",
    "reject_votes",
    "removed",
    "pool_p",
    "pool_v",
    "global_score",
    "test_accuracy",
];

impl From<&RoundReport> for RoundRow {
    fn from(r: &RoundReport) -> Self {
        let accept_votes = r.ballots.iter().filter(|b| b.vote.sign() > 0).count();
        RoundRow {
            round: r.round,
            decision: r.decision.sign(),
            proposers: r.proposers.len(),
            voters: r.voters.len(),
            accept_votes,
            reject_votes: r.ballots.len() - accept_votes,
            removed: r.removed.iter().map(|c| c.0.to_string()).collect::<Vec<_>>().join(";"),
            pool_p: r.pools_after.pool_p,
            pool_v: r.pools_after.pool_v,
            global_score: r.global_score,
            test_accuracy: r.test_accuracy,
        }
    }
}

#[derive(Debug, Serialize)]
struct SeriesRow<'a> {
    series: &'a str,
    round: u64,
    mean: f64,
    std: f64,
}

const SERIES_COLUMNS: &[&str] = &["series", "round", "mean", "std"];
const SURVIVAL_COLUMNS: &[&str] = &["client_id", "malicious", "removal_round"];

fn render<T: Serialize>(columns: &[&str], rows: &[T], format: ExportFormat) -> Result<Vec<u8>> {
    match format {
        ExportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(columns)?;
            for row in rows {
                w.serialize(row)?;
            }
            w.into_inner()
                .map_err(|e| Error::config(format!("csv buffer: {e}")))
        }
        ExportFormat::Jsonl => {
            let mut out = Vec::new();
            for row in rows {
                serde_json::to_writer(&mut out, row).map_err(|e| Error::config(e.to_string()))?;
                out.push(b'\n');
            }
            Ok(out)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_reports(reports: &[RoundReport], path: &Path, format: ExportFormat) -> Result<()> {
    let rows: Vec<RoundRow> = reports.iter().map(RoundRow::from).collect();
    write_file(path, &render(ROUND_COLUMNS, &rows, format)?)
}

pub fn write_series(series: &[TimeSeries], path: &Path, format: ExportFormat) -> Result<()> {
    let rows: Vec<SeriesRow<'_>> = series
        .iter()
        .flat_map(|s| {
            s.points.iter().map(move |p| SeriesRow {
                series: &s.label,
                round: p.round,
                mean: p.mean,
                std: p.std,
            })
        })
        .collect();
    write_file(path, &render(SERIES_COLUMNS, &rows, format)?)
}

pub fn write_survival(records: &[SurvivalRecord], path: &Path, format: ExportFormat) -> Result<()> {
    write_file(path, &render(SURVIVAL_COLUMNS, records, format)?)
}

/// Writes `rounds_*`, `tokens_*` and `survival_*` files for one run into
/// `dir` and returns their paths.
pub fn export(
    reports: &[RoundReport],
    series: &[TimeSeries],
    records: &[SurvivalRecord],
    dir: &Path,
    tag: &RunTag,
    format: ExportFormat,
) -> Result<Vec<PathBuf>> {
    let rounds = dir.join(file_name("rounds", tag, format));
    let tokens = dir.join(file_name("tokens", tag, format));
    let survival = dir.join(file_name("survival", tag, format));
    write_reports(reports, &rounds, format)?;
    write_series(series, &tokens, format)?;
    write_survival(records, &survival, format)?;
    Ok(vec![rounds, tokens, survival])
}
