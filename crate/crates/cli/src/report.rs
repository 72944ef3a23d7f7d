//! Summary tables and plot-ready series.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use guided_mapf::lifelong::mean_std;

use crate::batch::{file_label, ResultTable, RunResult};
use crate::config::Mode;

pub const SUMMARY_CSV: &str = "summary.csv";
pub const PLOT_DIR: &str = "plot";
pub const LIFELONG_SUMMARY_HEADER: &str =
    "alg,agents,runs,throughput_mean,throughput_std,rt_mean,rt_std,timeouts";
pub const ONESHOT_SUMMARY_HEADER: &str =
    "alg,agents,runs,solved,sic_mean,sic_std,runtime_mean,runtime_std,timeouts";

/// Aggregate over the seeds of one (algorithm, agent count) cell. Means and
/// population deviations are taken across seeds of the per-run means.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub alg: String,
    pub agents: usize,
    pub runs: usize,
    pub timeouts: usize,
    /// Throughput, or SIC over solved runs in one-shot mode.
    pub primary: (f64, f64),
    /// Response time, or total runtime in one-shot mode.
    pub time: (f64, f64),
    /// Solved runs in one-shot mode.
    pub solved: usize,
}

/// Cells in first-appearance order.
fn cells(table: &ResultTable) -> Vec<(String, usize)> {
    let mut out: Vec<(String, usize)> = Vec::new();
    for r in &table.records {
        if !out.iter().any(|(a, n)| *a == r.alg && *n == r.agents) {
            out.push((r.alg.clone(), r.agents));
        }
    }
    out
}

fn algorithms(table: &ResultTable) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in &table.records {
        if !out.contains(&r.alg) {
            out.push(r.alg.clone());
        }
    }
    out
}

pub fn summarize(table: &ResultTable) -> Vec<SummaryRow> {
    cells(table)
        .into_iter()
        .map(|(alg, agents)| {
            let runs: Vec<&RunResult> = table
                .records
                .iter()
                .filter(|r| r.alg == alg && r.agents == agents)
                .map(|r| &r.result)
                .collect();
            let timeouts = table
                .records
                .iter()
                .filter(|r| r.alg == alg && r.agents == agents && r.timeout())
                .count();
            let mut primary = Vec::new();
            let mut time = Vec::new();
            let mut solved = 0;
            for r in &runs {
                match r {
                    RunResult::Lifelong(m) => {
                        primary.push(m.throughput_mean);
                        time.push(m.rt_mean);
                    }
                    RunResult::OneShot(o) => {
                        if o.solved {
                            solved += 1;
                            primary.push(o.sic as f64);
                        }
                        time.push(o.runtime_s);
                    }
                }
            }
            SummaryRow {
                alg,
                agents,
                runs: runs.len(),
                timeouts,
                primary: mean_std(&primary),
                time: mean_std(&time),
                solved,
            }
        })
        .collect()
}

pub fn summary_csv(mode: Mode, rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    match mode {
        Mode::Lifelong => {
            out.push_str(LIFELONG_SUMMARY_HEADER);
            out.push('\n');
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
                    r.alg,
                    r.agents,
                    r.runs,
                    r.primary.0,
                    r.primary.1,
                    r.time.0,
                    r.time.1,
                    r.timeouts
                );
            }
        }
        Mode::Oneshot => {
            out.push_str(ONESHOT_SUMMARY_HEADER);
            out.push('\n');
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
                    r.alg,
                    r.agents,
                    r.runs,
                    r.solved,
                    r.primary.0,
                    r.primary.1,
                    r.time.0,
                    r.time.1,
                    r.timeouts
                );
            }
        }
    }
    out
}

/// Human-readable table in the layout `ALG | Throughput | R-Time (s)`,
/// each cell `mean±std` over seeds.
pub fn summary_table(mode: Mode, rows: &[SummaryRow]) -> String {
    let (primary, time) = match mode {
        Mode::Lifelong => ("Throughput", "R-Time (s)"),
        Mode::Oneshot => ("SIC", "Runtime (s)"),
    };
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            let (p, t) = match mode {
                Mode::Lifelong => (
                    format!("{:.2}±{:.2}", r.primary.0, r.primary.1),
                    format!("{:.4}±{:.4}", r.time.0, r.time.1),
                ),
                Mode::Oneshot => (
                    format!(
                        "{:.1}±{:.1} ({}/{})",
                        r.primary.0, r.primary.1, r.solved, r.runs
                    ),
                    format!("{:.3}±{:.3}", r.time.0, r.time.1),
                ),
            };
            [
                r.alg.clone(),
                r.agents.to_string(),
                p,
                t,
                r.timeouts.to_string(),
            ]
        })
        .collect();
    let header = [
        "ALG".to_string(),
        "Agents".into(),
        primary.into(),
        time.into(),
        "Timeouts".into(),
    ];
    let mut widths = header.clone().map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&body) {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(widths).enumerate() {
            let pad = w - cell.chars().count();
            if i == 0 {
                line.push_str(cell);
                line.push_str(&" ".repeat(pad));
            } else {
                line.push_str("  ");
                line.push_str(&" ".repeat(pad));
                line.push_str(cell);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Per-timestep mean and deviation of response times across runs. Runs
/// that stopped early contribute only to the steps they reached.
pub fn response_time_series(series: &[&[f64]]) -> Vec<(usize, f64, f64)> {
    let len = series.iter().map(|s| s.len()).max().unwrap_or(0);
    (0..len)
        .map(|t| {
            let at: Vec<f64> = series.iter().filter_map(|s| s.get(t).copied()).collect();
            let (m, s) = mean_std(&at);
            (t, m, s)
        })
        .collect()
}

/// Writes per-algorithm series under `dir`:
///
/// - lifelong: `<alg>_throughput.csv` with `agents,throughput_mean,throughput_std`
///   and `<alg>_<agents>_rt.csv` with `t,rt_mean,rt_std` for every agent count;
/// - one-shot: `<alg>_sic.csv` with `agents,sic_mean,sic_std,solved,runs`.
///
/// Returns the files written.
pub fn emit_plot_data(table: &ResultTable, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let summary = summarize(table);
    let mut written = Vec::new();
    for alg in algorithms(table) {
        let name = file_label(&alg);
        let rows: Vec<&SummaryRow> = summary.iter().filter(|r| r.alg == alg).collect();
        match table.mode {
            Mode::Lifelong => {
                let mut text = String::from("agents,throughput_mean,throughput_std\n");
                for r in &rows {
                    let _ = writeln!(text, "{},{:.6},{:.6}", r.agents, r.primary.0, r.primary.1);
                }
                let path = dir.join(format!("{name}_throughput.csv"));
                fs::write(&path, text)?;
                written.push(path);
                for r in &rows {
                    let series: Vec<&[f64]> = table
                        .records
                        .iter()
                        .filter(|x| x.alg == alg && x.agents == r.agents)
                        .filter_map(|x| match &x.result {
                            RunResult::Lifelong(m) => Some(m.response_time.as_slice()),
                            RunResult::OneShot(_) => None,
                        })
                        .collect();
                    let mut text = String::from("t,rt_mean,rt_std\n");
                    for (t, m, s) in response_time_series(&series) {
                        let _ = writeln!(text, "{t},{m:.9},{s:.9}");
                    }
                    let path = dir.join(format!("{name}_{}_rt.csv", r.agents));
                    fs::write(&path, text)?;
                    written.push(path);
                }
            }
            Mode::Oneshot => {
                let mut text = String::from("agents,sic_mean,sic_std,solved,runs\n");
                for r in &rows {
                    let _ = writeln!(
                        text,
                        "{},{:.6},{:.6},{},{}",
                        r.agents, r.primary.0, r.primary.1, r.solved, r.runs
                    );
                }
                let path = dir.join(format!("{name}_sic.csv"));
                fs::write(&path, text)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
