//! Batch execution over algorithms, agent counts and seeds.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Instant;

use guided_mapf::oneshot::{FailureReason, OneShotOutcome};
use guided_mapf::{mapgen, run_lifelong, sic, solve_oneshot, GridMap, Metrics, Scenario};

use crate::config::{Mode, RunConfig};

pub const ONESHOT_CSV_HEADER: &str =
    "map,agents,alg,seed,solved,sic,makespan,unfinished,runtime_s,timeout";

/// Per-run file names inside the output directory.
pub const RUNS_CSV: &str = "runs.csv";
pub const EVENTS_DIR: &str = "events";
pub const SOLUTIONS_DIR: &str = "solutions";

#[derive(Debug, Clone, PartialEq)]
pub struct OneShotResult {
    pub solved: bool,
    pub sic: u64,
    pub makespan: usize,
    pub unfinished: usize,
    pub runtime_s: f64,
    pub timeout: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunResult {
    Lifelong(Metrics),
    OneShot(OneShotResult),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub alg: String,
    pub agents: usize,
    pub seed: u64,
    pub result: RunResult,
}

impl RunRecord {
    pub fn timeout(&self) -> bool {
        match &self.result {
            RunResult::Lifelong(m) => m.timeout,
            RunResult::OneShot(o) => o.timeout,
        }
    }

    pub fn csv_row(&self, map: &str) -> String {
        match &self.result {
            RunResult::Lifelong(m) => m.csv_row(map, self.agents, &self.alg, self.seed),
            RunResult::OneShot(o) => format!(
                "{map},{},{},{},{},{},{},{},{:.6},{}",
                self.agents,
                self.alg,
                self.seed,
                o.solved,
                o.sic,
                o.makespan,
                o.unfinished,
                o.runtime_s,
                o.timeout
            ),
        }
    }
}

/// Every run of a batch, in job order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub mode: Mode,
    pub map: String,
    pub records: Vec<RunRecord>,
}

impl ResultTable {
    pub fn any_timeout(&self) -> bool {
        self.records.iter().any(RunRecord::timeout)
    }

    pub fn csv_header(&self) -> &'static str {
        match self.mode {
            Mode::Lifelong => Metrics::CSV_HEADER,
            Mode::Oneshot => ONESHOT_CSV_HEADER,
        }
    }
}

#[derive(Debug, Clone)]
struct Job {
    alg: usize,
    agents: usize,
    seed: u64,
}

/// File-name friendly version of an algorithm label.
pub fn file_label(alg: &str) -> String {
    alg.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-._".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Stem shared by a run's event log or solution file.
pub fn run_stem(alg: &str, agents: usize, seed: u64) -> String {
    format!("{}_{agents}_{seed}", file_label(alg))
}

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{alg} with {agents} agents, seed {seed}: {source}")]
    Run {
        alg: String,
        agents: usize,
        seed: u64,
        source: guided_mapf::Error,
    },
}

fn scenario(config: &RunConfig, agents: usize, seed: u64) -> guided_mapf::Result<Scenario> {
    match &config.scen {
        Some(s) => Ok(Scenario::new(
            s.starts[..agents].to_vec(),
            s.goals[..agents].to_vec(),
        )),
        None => mapgen::generate_scenario(&config.map, agents, seed),
    }
}

fn execute(config: &RunConfig, map: &Arc<GridMap>, job: &Job) -> Result<RunRecord, BatchError> {
    let alg = &config.algorithms[job.alg];
    let fail = |source| BatchError::Run {
        alg: alg.label.clone(),
        agents: job.agents,
        seed: job.seed,
        source,
    };
    let scen = scenario(config, job.agents, job.seed).map_err(fail)?;
    let stem = run_stem(&alg.label, job.agents, job.seed);
    let result = match config.mode {
        Mode::Lifelong => {
            let mut c = alg
                .lifelong_config(&config.knobs, job.seed, config.timesteps)
                .expect("knobs validated with the config");
            c.step_deadline = config.step_deadline;
            let out = run_lifelong(map.clone(), &scen, c).map_err(fail)?;
            fs::write(
                config.out.join(EVENTS_DIR).join(format!("{stem}.jsonl")),
                out.event_log(),
            )?;
            RunResult::Lifelong(out.metrics)
        }
        Mode::Oneshot => {
            let mut c = alg
                .oneshot_config(&config.knobs, job.seed)
                .expect("knobs validated with the config");
            c.time_limit = config.time_limit;
            c.step_limit = config.step_limit;
            let start = Instant::now();
            let out = solve_oneshot(map.clone(), &scen, &c).map_err(fail)?;
            let runtime_s = start.elapsed().as_secs_f64();
            let (sol, unfinished, timeout) = match &out {
                OneShotOutcome::Solved(s) => (s, 0, false),
                OneShotOutcome::Failed(f) => (
                    &f.partial,
                    f.unfinished.len(),
                    f.reason == FailureReason::TimeLimit,
                ),
            };
            fs::write(
                config.out.join(SOLUTIONS_DIR).join(format!("{stem}.txt")),
                sol.to_file_string(),
            )?;
            RunResult::OneShot(OneShotResult {
                solved: unfinished == 0,
                sic: sic(sol),
                makespan: sol.horizon(),
                unfinished,
                runtime_s,
                timeout,
            })
        }
    };
    Ok(RunRecord {
        alg: alg.label.clone(),
        agents: job.agents,
        seed: job.seed,
        result,
    })
}

/// Path of the per-run CSV for `out`.
pub fn runs_csv(out: &Path) -> PathBuf {
    out.join(RUNS_CSV)
}

/// Runs every (algorithm, agent count, seed) combination on up to
/// `workers` threads. Rows are appended to `runs.csv` in job order as soon
/// as they are available, and each is flushed before the next.
pub fn run_batch(config: &RunConfig, workers: usize) -> Result<ResultTable, BatchError> {
    let sub = match config.mode {
        Mode::Lifelong => EVENTS_DIR,
        Mode::Oneshot => SOLUTIONS_DIR,
    };
    fs::create_dir_all(config.out.join(sub))?;
    let mut table = ResultTable {
        mode: config.mode,
        map: config.map_name.clone(),
        records: Vec::new(),
    };
    let mut csv = BufWriter::new(File::create(runs_csv(&config.out))?);
    writeln!(csv, "{}", table.csv_header())?;
    csv.flush()?;

    let mut jobs = Vec::new();
    for alg in 0..config.algorithms.len() {
        for &agents in &config.agents {
            for &seed in &config.seeds {
                jobs.push(Job { alg, agents, seed });
            }
        }
    }
    let map = Arc::new(config.map.clone());
    let next = AtomicUsize::new(0);
    let workers = workers.clamp(1, jobs.len().max(1));
    let (tx, rx) = mpsc::channel();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next, map) = (&jobs, &next, &map);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let result = execute(config, map, job);
                let failed = result.is_err();
                if tx.send((i, result)).is_err() || failed {
                    // Stop handing out work once anything failed.
                    next.store(jobs.len(), Ordering::SeqCst);
                    break;
                }
            });
        }
        drop(tx);

        let mut pending: Vec<Option<RunRecord>> = vec![None; jobs.len()];
        let mut written = 0;
        for (i, result) in rx {
            pending[i] = Some(result?);
            while let Some(record) = pending.get_mut(written).and_then(Option::take) {
                writeln!(csv, "{}", record.csv_row(&table.map))?;
                csv.flush()?;
                table.records.push(record);
                written += 1;
            }
        }
        Ok::<(), BatchError>(())
    })?;
    Ok(table)
}
