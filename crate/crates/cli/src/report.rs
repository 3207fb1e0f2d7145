//! Per-BH comparison tables and a long-format CSV from a sweep directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cma_core::metrics::Estimate;
use serde::Serialize;

use crate::experiment::{read_asset, write_atomic, Cell, ExperimentSpec};
use crate::sweep::{cell_paths, CellResult, SPEC_FILE};
use crate::CliError;

pub const REPORT_MD: &str = "report.md";
pub const REPORT_CSV: &str = "report_long.csv";

#[derive(Debug, Serialize)]
struct LongRow {
    bh: String,
    policy: String,
    p_obs: f64,
    metric: &'static str,
    mean: f64,
    two_sem: f64,
    n: usize,
}

/// One displayed row: a result placed at an observability level. Results of
/// observation-independent policies appear at every level.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub p_obs: f64,
    pub result: CellResult,
}

pub struct Report {
    pub spec: ExperimentSpec,
    pub rows: Vec<ReportRow>,
}

/// Loads every expected cell. Any missing or unreadable cell is a gap; all
/// gaps are collected before failing.
pub fn load(results: &Path) -> Result<Report, CliError> {
    let spec_text = read_asset(&results.join(SPEC_FILE))?;
    let spec: ExperimentSpec = serde_json::from_str(&spec_text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", results.join(SPEC_FILE).display())))?;
    let mut gaps = Vec::new();
    let mut loaded = Vec::new();
    for cell in spec.cells() {
        let (csv_path, json_path) = cell_paths(results, &cell);
        if !csv_path.is_file() {
            gaps.push(format!("{cell}: missing {}", csv_path.display()));
            continue;
        }
        match fs::read_to_string(&json_path).map_err(|e| e.to_string()).and_then(|t| {
            serde_json::from_str::<CellResult>(&t).map_err(|e| e.to_string())
        }) {
            Ok(r) if r.cell == cell => loaded.push(r),
            Ok(_) => gaps.push(format!("{cell}: {} holds a different cell", json_path.display())),
            Err(e) => gaps.push(format!("{cell}: {}: {e}", json_path.display())),
        }
    }
    if !gaps.is_empty() {
        return Err(CliError::MissingAssets(format!("{} missing cell(s):\n  {}", gaps.len(), gaps.join("\n  "))));
    }
    let mut rows = Vec::new();
    for &p in &spec.p_obs {
        rows.extend(
            loaded
                .iter()
                .filter(|r| r.cell.p_obs.is_none_or(|q| q == p))
                .map(|r| ReportRow { p_obs: p, result: r.clone() }),
        );
    }
    Ok(Report { spec, rows })
}

fn pm(e: &Estimate, digits: usize) -> String {
    format!("{:.digits$} ± {:.digits$}", e.mean, 2.0 * e.sem)
}

impl Report {
    fn rows_for<'a>(&'a self, bh: &'a cma_core::model::BatteryHealth) -> impl Iterator<Item = &'a ReportRow> {
        let order = |c: &Cell| c.policy;
        let mut v: Vec<&ReportRow> = self.rows.iter().filter(|r| r.result.cell.bh == *bh).collect();
        v.sort_by(|a, b| order(&a.result.cell).cmp(&order(&b.result.cell)).then(b.p_obs.total_cmp(&a.p_obs)));
        v.into_iter()
    }

    /// Markdown tables, one per battery-health cohort.
    pub fn tables(&self) -> String {
        let mut s = String::new();
        for bh in &self.spec.bh {
            let _ = writeln!(s, "## Battery health {bh}\n");
            s.push_str("| policy | p_obs | completion ± 2·SEM | safety ± 2·SEM | mean reward ± 2·SEM | n |\n");
            s.push_str("|---|---|---|---|---|---|\n");
            for r in self.rows_for(bh) {
                let m = &r.result.summary;
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} |",
                    r.result.cell.policy,
                    r.p_obs,
                    pm(&m.completion_rate, 4),
                    pm(&m.safety_rate, 4),
                    pm(&m.cum_reward, 3),
                    m.n
                );
            }
            s.push('\n');
        }
        s
    }

    pub fn long_csv(&self) -> anyhow::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for bh in &self.spec.bh {
            for r in self.rows_for(bh) {
                let m = &r.result.summary;
                let metrics: [(&'static str, &Estimate); 7] = [
                    ("completion_rate", &m.completion_rate),
                    ("safety_rate", &m.safety_rate),
                    ("failure_rate", &m.failure_rate),
                    ("true_success_rate", &m.true_success_rate),
                    ("cum_reward", &m.cum_reward),
                    ("disc_reward", &m.disc_reward),
                    ("steps", &m.steps),
                ];
                for (metric, e) in metrics {
                    w.serialize(LongRow {
                        bh: bh.to_string(),
                        policy: r.result.cell.policy.to_string(),
                        p_obs: r.p_obs,
                        metric,
                        mean: e.mean,
                        two_sem: 2.0 * e.sem,
                        n: m.n,
                    })?;
                }
            }
        }
        Ok(w.into_inner()?)
    }

    pub fn write(&self, out: &Path) -> anyhow::Result<()> {
        write_atomic(&out.join(REPORT_MD), self.tables().as_bytes())?;
        write_atomic(&out.join(REPORT_CSV), &self.long_csv()?)
    }
}
