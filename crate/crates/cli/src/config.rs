//! Flags, config files and the validated [`RunConfig`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use guided_mapf::mapgen::{self, MapSpec};
use guided_mapf::traffic::FlowAccounting;
use guided_mapf::{CostModel, GridMap, Scenario};
use serde::{Deserialize, Deserializer};

use crate::algorithm::{Algorithm, Knobs};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "GUIDED_MAPF_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Lifelong,
    Oneshot,
}

/// Comma separated values; ranges `a..b` (exclusive) are expanded for
/// integers. Config files may also use TOML arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim) {
            if item.is_empty() {
                return Err(format!("empty item in list {s:?}"));
            }
            match item.split_once("..") {
                Some((a, b)) => {
                    let a: u64 = a.trim().parse().map_err(|e| format!("{item:?}: {e}"))?;
                    let b: u64 = b.trim().parse().map_err(|e| format!("{item:?}: {e}"))?;
                    for x in a..b {
                        out.push(x.to_string().parse().map_err(|e: T::Err| e.to_string())?);
                    }
                }
                None => out.push(item.parse().map_err(|e: T::Err| format!("{item:?}: {e}"))?),
            }
        }
        if out.is_empty() {
            return Err(format!("empty list {s:?}"));
        }
        Ok(List(out))
    }
}

impl<'de, T> Deserialize<'de> for List<T>
where
    T: FromStr + Deserialize<'de>,
    T::Err: fmt::Display,
{
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Seq(Vec<T>),
            One(T),
            Text(String),
        }
        match Raw::<T>::deserialize(d)? {
            Raw::Seq(v) if !v.is_empty() => Ok(List(v)),
            Raw::Seq(_) => Err(serde::de::Error::custom("empty list")),
            Raw::One(x) => Ok(List(vec![x])),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn from_text<'de, D, T>(d: D) -> Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: fmt::Display,
{
    let s = String::deserialize(d)?;
    s.parse().map(Some).map_err(serde::de::Error::custom)
}

fn parse_cost_model(s: &str) -> Result<CostModel, String> {
    s.parse().map_err(|e: guided_mapf::Error| e.to_string())
}

fn parse_accounting(s: &str) -> Result<FlowAccounting, String> {
    s.parse().map_err(|e: guided_mapf::Error| e.to_string())
}

fn parse_spec(s: &str) -> Result<MapSpec, String> {
    s.parse().map_err(|e: guided_mapf::Error| e.to_string())
}

/// Command-line flags. The same names, in kebab case, are the keys of the
/// TOML config file; flags win over file values.
#[derive(Debug, Clone, Default, Parser, Deserialize)]
#[command(
    name = "guided-mapf",
    version,
    about = "Run guided PIBT experiments",
    allow_negative_numbers = true
)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Args {
    /// TOML file with defaults for any of the other flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// movingai `.map` file.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Generated map, `archetype:WxH:seed`.
    #[arg(long, value_parser = parse_spec)]
    #[serde(deserialize_with = "from_text")]
    pub gen: Option<MapSpec>,
    /// movingai `.scen` file; the first N entries are used.
    #[arg(long)]
    pub scen: Option<PathBuf>,
    /// Agent counts, e.g. `200,400,600`.
    #[arg(long)]
    pub agents: Option<List<usize>>,
    /// Seeds, e.g. `0..24` or `1,2,3`.
    #[arg(long)]
    pub seeds: Option<List<u64>>,
    /// Algorithm labels, e.g. `PIBT,GP-R100,GP-R100-Re10`.
    #[arg(long)]
    pub alg: Option<List<Algorithm>>,
    /// Cost model overriding the label: two-part, two-part-normalized, sum-ovc, sum-novc, vertex-only, free-flow.
    #[arg(long, value_parser = parse_cost_model)]
    #[serde(deserialize_with = "from_text")]
    pub cost_model: Option<CostModel>,
    /// FOCAL suboptimality factor for guide-path search (at least 1).
    #[arg(long)]
    pub focal_w: Option<f64>,
    /// Guide paths initialised per timestep.
    #[arg(long)]
    pub init_per_step: Option<usize>,
    /// Refinement iterations per timestep (lifelong) or in total (one-shot).
    #[arg(long)]
    pub refine_iters: Option<usize>,
    /// Agents replanned per refinement iteration.
    #[arg(long)]
    pub refine_subset: Option<usize>,
    /// Whether a path being planned counts itself: joining or others.
    #[arg(long, value_parser = parse_accounting)]
    #[serde(deserialize_with = "from_text")]
    pub flow_accounting: Option<FlowAccounting>,
    /// Lifelong horizon; defaults to `5 * (width + height)`.
    #[arg(long)]
    pub timesteps: Option<usize>,
    /// Per-step planning deadline in lifelong mode; 0 disables it.
    #[arg(long)]
    pub step_deadline_s: Option<f64>,
    /// Wall-clock limit per one-shot run.
    #[arg(long)]
    pub time_limit_s: Option<f64>,
    /// One-shot step limit; defaults to `10 * (width + height)`.
    #[arg(long)]
    pub step_limit: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

impl Args {
    /// Fills unset fields from `file`.
    pub fn merge(self, file: Args) -> Args {
        Args {
            config: self.config,
            mode: self.mode.or(file.mode),
            map: self.map.or(file.map),
            gen: self.gen.or(file.gen),
            scen: self.scen.or(file.scen),
            agents: self.agents.or(file.agents),
            seeds: self.seeds.or(file.seeds),
            alg: self.alg.or(file.alg),
            cost_model: self.cost_model.or(file.cost_model),
            focal_w: self.focal_w.or(file.focal_w),
            init_per_step: self.init_per_step.or(file.init_per_step),
            refine_iters: self.refine_iters.or(file.refine_iters),
            refine_subset: self.refine_subset.or(file.refine_subset),
            flow_accounting: self.flow_accounting.or(file.flow_accounting),
            timesteps: self.timesteps.or(file.timesteps),
            step_deadline_s: self.step_deadline_s.or(file.step_deadline_s),
            time_limit_s: self.time_limit_s.or(file.time_limit_s),
            step_limit: self.step_limit.or(file.step_limit),
            out: self.out.or(file.out),
        }
    }

    /// Reads the config file named by `--config`, if any, and merges it.
    pub fn resolve(self) -> Result<RunConfig, ConfigError> {
        let merged = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
                let file: Args = toml::from_str(&text)
                    .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
                self.merge(file)
            }
            None => self,
        };
        RunConfig::from_args(merged)
    }
}

/// Invalid configuration, detected before any run starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    File(PathBuf),
    Generated(MapSpec),
}

/// A validated batch description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub map_source: MapSource,
    pub map: GridMap,
    /// Name used in CSV rows and file names.
    pub map_name: String,
    pub scen: Option<Scenario>,
    pub agents: Vec<usize>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub knobs: Knobs,
    pub timesteps: usize,
    pub step_deadline: Option<Duration>,
    pub time_limit: Option<Duration>,
    pub step_limit: Option<usize>,
    pub out: PathBuf,
}

fn seconds(name: &str, s: Option<f64>) -> Result<Option<Duration>, ConfigError> {
    match s {
        None => Ok(None),
        Some(0.0) => Ok(None),
        Some(x) if x.is_finite() && x > 0.0 => Ok(Some(Duration::from_secs_f64(x))),
        Some(x) => Err(ConfigError(format!("{name} must be non-negative, got {x}"))),
    }
}

fn load_map(path: &Path) -> Result<GridMap, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("map {}: {e}", path.display())))?;
    GridMap::parse_map(&text).map_err(|e| ConfigError(format!("map {}: {e}", path.display())))
}

impl RunConfig {
    pub fn from_args(args: Args) -> Result<RunConfig, ConfigError> {
        let err = |m: &str| ConfigError(m.to_string());
        let (map_source, map, map_name) = match (args.map, args.gen) {
            (Some(_), Some(_)) => return Err(err("--map and --gen are mutually exclusive")),
            (None, None) => return Err(err("one of --map or --gen is required")),
            (Some(path), None) => {
                let map = load_map(&path)?;
                let name = path
                    .file_stem()
                    .map_or("map".into(), |s| s.to_string_lossy().into_owned());
                (MapSource::File(path), map, name)
            }
            (None, Some(spec)) => {
                let map = mapgen::generate(&spec)
                    .map_err(|e| ConfigError(format!("--gen {spec}: {e}")))?;
                let name = spec.label();
                (MapSource::Generated(spec), map, name)
            }
        };
        let agents = args.agents.ok_or_else(|| err("--agents is required"))?.0;
        let free = map.num_traversable();
        if let Some(&n) = agents.iter().find(|&&n| n == 0 || n > free) {
            return Err(ConfigError(format!(
                "agent count {n} outside 1..={free} for this map"
            )));
        }
        let scen = match args.scen {
            Some(path) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ConfigError(format!("scen {}: {e}", path.display())))?;
                let scen = Scenario::parse_scen(&text, &map)
                    .map_err(|e| ConfigError(format!("scen {}: {e}", path.display())))?;
                let max = agents.iter().copied().max().unwrap_or(0);
                if scen.num_agents() < max {
                    return Err(ConfigError(format!(
                        "scen {} has only {} agents",
                        path.display(),
                        scen.num_agents()
                    )));
                }
                Some(scen)
            }
            None => None,
        };
        let knobs = Knobs {
            cost_model: args.cost_model,
            focal_w: args.focal_w,
            init_per_step: args.init_per_step,
            refine_iters: args.refine_iters,
            refine_subset: args.refine_subset,
            flow_accounting: args.flow_accounting,
        };
        let config = RunConfig {
            mode: args.mode.unwrap_or(Mode::Lifelong),
            map_name,
            map_source,
            scen,
            agents,
            seeds: args.seeds.map_or(vec![0], |l| l.0),
            algorithms: args
                .alg
                .map_or_else(|| vec!["GP-R100".parse().expect("valid label")], |l| l.0),
            knobs,
            timesteps: args.timesteps.unwrap_or(5 * (map.width() + map.height())),
            step_deadline: seconds(
                "--step-deadline-s",
                Some(args.step_deadline_s.unwrap_or(10.0)),
            )?,
            time_limit: seconds("--time-limit-s", args.time_limit_s)?,
            step_limit: args.step_limit,
            out: args.out.unwrap_or_else(|| PathBuf::from("results")),
            map,
        };
        config.check_knobs()?;
        Ok(config)
    }

    /// Builds every per-run config once so that knob errors surface early.
    fn check_knobs(&self) -> Result<(), ConfigError> {
        if self.timesteps == 0 {
            return Err(ConfigError("--timesteps must be at least 1".into()));
        }
        if self.knobs.refine_subset == Some(0) {
            return Err(ConfigError("--refine-subset must be positive".into()));
        }
        if self.step_limit == Some(0) {
            return Err(ConfigError("--step-limit must be positive".into()));
        }
        for alg in &self.algorithms {
            let checked = match self.mode {
                Mode::Lifelong => alg
                    .lifelong_config(&self.knobs, 0, self.timesteps)
                    .map(drop),
                Mode::Oneshot => alg.oneshot_config(&self.knobs, 0).map(drop),
            };
            checked.map_err(|e| ConfigError(format!("{alg}: {e}")))?;
        }
        Ok(())
    }
}

/// Worker budget from [`THREADS_ENV`], defaulting to the available cores.
pub fn worker_budget() -> Result<usize, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(ConfigError(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}
