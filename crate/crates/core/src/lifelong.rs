//! Lifelong simulation: agents receive a new goal whenever they reach one.
//!
//! Every timestep [`LifelongSim::guided_plan_step`] runs four phases:
//!
//! 1. **Initialising**: up to `init_per_step` agents without a guide path get
//!    one, planned from their current cell. The rest keep following free-flow
//!    distances.
//! 2. **Updating**: agents that received a new goal and already hold a path
//!    are replanned from their current cell.
//! 3. **Refining**: once every agent holds a path, `refine_iterations` rounds
//!    of path refinement run over all agents.
//! 4. **Stepping**: one PIBT step with guide heuristics where available.
//!
//! With `init_per_step = Some(0)` no guide path is ever computed and the
//! simulation is plain PIBT.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridMap, Scenario, Vertex};
use crate::guidance::{GuideConfig, GuideHeuristic, GuidePlanner};
use crate::pibt::{check_moves, AgentState, Pibt, PreferenceFn};

const ASSIGNER_STREAM: u64 = 0x7461_736b;
const PRIORITY_STREAM: u64 = 0x7072_696f;

/// Knobs for a lifelong run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifelongConfig {
    /// Guide paths initialised per timestep; `None` initialises everyone at
    /// the first step, `Some(0)` disables guidance.
    pub init_per_step: Option<usize>,
    /// Refinement iterations per timestep once all agents hold paths.
    pub refine_iterations: usize,
    pub guide: GuideConfig,
    pub max_timesteps: usize,
    /// Wall-clock limit for a single planning call.
    pub step_deadline: Option<Duration>,
    pub seed: u64,
    /// Shuffle the initial priority tie-break instead of using agent ids.
    pub shuffle_priorities: bool,
}

impl Default for LifelongConfig {
    fn default() -> Self {
        LifelongConfig {
            init_per_step: Some(100),
            refine_iterations: 0,
            guide: GuideConfig::default(),
            max_timesteps: 100,
            step_deadline: Some(Duration::from_secs(10)),
            seed: 0,
            shuffle_priorities: false,
        }
    }
}

impl LifelongConfig {
    /// Plain free-flow PIBT.
    pub fn pibt() -> Self {
        LifelongConfig {
            init_per_step: Some(0),
            guide: GuideConfig {
                model: crate::traffic::CostModel::FreeFlow,
                ..GuideConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_timesteps == 0 {
            return Err(Error::InvalidInput(
                "max_timesteps must be at least 1".into(),
            ));
        }
        if !(self.guide.decay > 0.0 && self.guide.decay < 1.0) {
            return Err(Error::InvalidInput(
                "refinement decay must be in (0, 1)".into(),
            ));
        }
        if self.refine_iterations > 0 && self.guide.subset_size == 0 {
            return Err(Error::InvalidInput(
                "refinement subset size must be positive".into(),
            ));
        }
        Ok(())
    }

    /// True when guidance can never activate.
    pub fn guidance_disabled(&self) -> bool {
        self.init_per_step == Some(0)
    }
}

/// Uniform goal stream over traversable cells, excluding the agent's cell.
#[derive(Debug, Clone)]
pub struct TaskAssigner {
    rng: ChaCha8Rng,
    pool: Vec<Vertex>,
}

impl TaskAssigner {
    pub fn new(map: &GridMap, seed: u64) -> Result<Self> {
        let pool: Vec<Vertex> = map.traversable_vertices().collect();
        if pool.is_empty() {
            return Err(Error::InvalidInput("map has no traversable cells".into()));
        }
        Ok(TaskAssigner {
            rng: ChaCha8Rng::seed_from_u64(seed ^ ASSIGNER_STREAM),
            pool,
        })
    }

    pub fn next_goal(&mut self, current: Vertex) -> Vertex {
        if self.pool.len() == 1 {
            return self.pool[0];
        }
        loop {
            let g = self.pool[self.rng.gen_range(0..self.pool.len())];
            if g != current {
                return g;
            }
        }
    }
}

/// One line of the per-timestep event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: usize,
    pub response_time_s: f64,
    pub tasks_finished: u32,
    pub cumulative_tasks: u64,
    pub initialized_agents: usize,
    pub refined_paths: usize,
}

impl EventRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event record serializes")
    }

    /// JSON line with the wall-clock field zeroed, for determinism checks.
    pub fn to_json_line_untimed(&self) -> String {
        EventRecord {
            response_time_s: 0.0,
            ..self.clone()
        }
        .to_json_line()
    }
}

/// Summary statistics of a lifelong run. Throughput is tasks finished per
/// timestep; standard deviations are population deviations over timesteps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tasks_finished: Vec<u32>,
    pub response_time: Vec<f64>,
    pub total_tasks: u64,
    pub throughput_mean: f64,
    pub throughput_std: f64,
    pub rt_mean: f64,
    pub rt_std: f64,
    pub timeout: bool,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Metrics {
    pub fn from_events(events: &[EventRecord], timeout: bool) -> Self {
        let tasks_finished: Vec<u32> = events.iter().map(|e| e.tasks_finished).collect();
        let response_time: Vec<f64> = events.iter().map(|e| e.response_time_s).collect();
        let tp: Vec<f64> = tasks_finished.iter().map(|&x| f64::from(x)).collect();
        let (throughput_mean, throughput_std) = mean_std(&tp);
        let (rt_mean, rt_std) = mean_std(&response_time);
        Metrics {
            total_tasks: tasks_finished.iter().map(|&x| u64::from(x)).sum(),
            tasks_finished,
            response_time,
            throughput_mean,
            throughput_std,
            rt_mean,
            rt_std,
            timeout,
        }
    }

    pub const CSV_HEADER: &'static str =
        "map,agents,alg,seed,throughput_mean,throughput_std,rt_mean,rt_std,timeout";

    pub fn csv_row(&self, map: &str, agents: usize, alg: &str, seed: u64) -> String {
        format!(
            "{map},{agents},{alg},{seed},{:.6},{:.6},{:.6},{:.6},{}",
            self.throughput_mean, self.throughput_std, self.rt_mean, self.rt_std, self.timeout
        )
    }
}

/// Moves chosen by one planning call plus bookkeeping for the event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepPlan {
    pub moves: Vec<Vertex>,
    pub newly_initialized: Vec<usize>,
    pub refined_paths: usize,
}

/// Outcome of [`run_lifelong`].
#[derive(Debug, Clone)]
pub struct LifelongOutcome {
    pub metrics: Metrics,
    pub events: Vec<EventRecord>,
}

impl LifelongOutcome {
    pub fn event_log(&self) -> String {
        self.events
            .iter()
            .map(|e| e.to_json_line() + "\n")
            .collect()
    }

    pub fn event_log_untimed(&self) -> String {
        self.events
            .iter()
            .map(|e| e.to_json_line_untimed() + "\n")
            .collect()
    }
}

/// State of a running lifelong simulation.
#[derive(Debug, Clone)]
pub struct LifelongSim {
    map: Arc<GridMap>,
    config: LifelongConfig,
    agents: Vec<AgentState>,
    planner: GuidePlanner,
    prefs: Vec<PreferenceFn>,
    goal_changed: Vec<bool>,
    lazy_queue: VecDeque<usize>,
    assigner: TaskAssigner,
    pibt: Pibt,
    t: usize,
    cumulative: u64,
}

impl LifelongSim {
    pub fn new(map: Arc<GridMap>, scenario: &Scenario, config: LifelongConfig) -> Result<Self> {
        config.validate()?;
        scenario.validate(&map)?;
        let k = scenario.num_agents();
        let mut agents: Vec<AgentState> = (0..k)
            .map(|i| AgentState::new(i, scenario.starts[i], scenario.goals[i]))
            .collect();
        if config.shuffle_priorities {
            let mut ties: Vec<u32> = (0..k as u32).collect();
            ties.shuffle(&mut ChaCha8Rng::seed_from_u64(
                config.seed ^ PRIORITY_STREAM,
            ));
            for (a, t) in agents.iter_mut().zip(ties) {
                a.priority.tie = t;
            }
        }
        let guide = GuideConfig {
            seed: config.seed,
            ..config.guide
        };
        let mut planner = GuidePlanner::new(
            map.clone(),
            guide,
            scenario.starts.clone(),
            scenario.goals.clone(),
        )?;
        let prefs = agents
            .iter()
            .map(|a| PreferenceFn::FreeFlow(planner.distances(a.goal)))
            .collect();
        let lazy_queue = if config.guidance_disabled() {
            VecDeque::new()
        } else {
            (0..k).collect()
        };
        Ok(LifelongSim {
            assigner: TaskAssigner::new(&map, config.seed)?,
            map,
            config,
            agents,
            planner,
            prefs,
            goal_changed: vec![false; k],
            lazy_queue,
            pibt: Pibt::new(),
            t: 0,
            cumulative: 0,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn config(&self) -> &LifelongConfig {
        &self.config
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn positions(&self) -> Vec<Vertex> {
        self.agents.iter().map(|a| a.pos).collect()
    }

    pub fn planner(&self) -> &GuidePlanner {
        &self.planner
    }

    pub fn timestep(&self) -> usize {
        self.t
    }

    pub fn cumulative_tasks(&self) -> u64 {
        self.cumulative
    }

    /// Agents still waiting for their first guide path, in queue order.
    pub fn uninitialized(&self) -> impl Iterator<Item = usize> + '_ {
        self.lazy_queue.iter().copied()
    }

    fn set_guided(&mut self, a: usize) {
        let goal = self.agents[a].goal;
        let fallback = self.planner.distances(goal);
        let path = self.planner.path(a).expect("guided agent has a path");
        debug_assert_eq!(path.last(), Some(&goal));
        self.prefs[a] = PreferenceFn::Guided {
            heuristic: GuideHeuristic::new(&self.map, path),
            fallback,
        };
    }

    /// Runs the four planning phases and returns the chosen moves.
    pub fn guided_plan_step(&mut self) -> Result<StepPlan> {
        let mut newly_initialized = Vec::new();
        let mut refined_paths = 0;

        // Initialising.
        if !self.lazy_queue.is_empty() {
            let budget = self.config.init_per_step.unwrap_or(usize::MAX);
            let take = budget.min(self.lazy_queue.len());
            let batch: Vec<usize> = self.lazy_queue.drain(..take).collect();
            for &a in &batch {
                self.planner.set_origin(a, self.agents[a].pos);
                self.planner.set_goal(a, self.agents[a].goal);
            }
            self.planner.find_paths(&batch)?;
            for &a in &batch {
                self.goal_changed[a] = false;
                self.set_guided(a);
            }
            newly_initialized = batch;
        }

        // Updating.
        for a in 0..self.agents.len() {
            if !std::mem::take(&mut self.goal_changed[a]) || !self.planner.has_path(a) {
                continue;
            }
            self.planner.set_origin(a, self.agents[a].pos);
            self.planner.set_goal(a, self.agents[a].goal);
            self.planner.replan(&[a])?;
            self.set_guided(a);
        }

        // Refining.
        if self.config.refine_iterations > 0
            && self.lazy_queue.is_empty()
            && !self.config.guidance_disabled()
        {
            for a in &self.agents {
                self.planner.set_origin(a.id, a.pos);
            }
            let all: Vec<usize> = (0..self.agents.len()).collect();
            let report = self
                .planner
                .path_refinement(&all, self.config.refine_iterations)?;
            refined_paths = report.changed.len();
            for a in report.changed {
                self.set_guided(a);
            }
        }

        let moves = self
            .pibt
            .plan_step(&self.map, &mut self.agents, &mut self.prefs);
        Ok(StepPlan {
            moves,
            newly_initialized,
            refined_paths,
        })
    }

    /// Applies validated moves, counts arrivals and hands out new goals.
    /// Returns the number of tasks finished.
    pub fn execute_and_assign(&mut self, moves: &[Vertex]) -> Result<u32> {
        let from = self.positions();
        let violations = check_moves(&self.map, &from, moves);
        if moves.len() != from.len() || !violations.is_empty() {
            return Err(Error::ConflictingMoves {
                t: self.t,
                detail: format!("{violations:?}"),
            });
        }
        for (a, &v) in self.agents.iter_mut().zip(moves) {
            a.pos = v;
        }
        let mut finished = 0;
        for a in 0..self.agents.len() {
            if self.agents[a].pos != self.agents[a].goal {
                continue;
            }
            finished += 1;
            let goal = self.assigner.next_goal(self.agents[a].pos);
            self.agents[a].goal = goal;
            self.agents[a].priority.epoch = 0;
            self.goal_changed[a] = true;
            self.planner.set_goal(a, goal);
            self.prefs[a] = PreferenceFn::FreeFlow(self.planner.distances(goal));
        }
        self.cumulative += u64::from(finished);
        self.t += 1;
        Ok(finished)
    }

    /// Plans (timed) and executes one timestep.
    pub fn step(&mut self) -> Result<(EventRecord, Duration)> {
        let started = Instant::now();
        let plan = self.guided_plan_step()?;
        let elapsed = started.elapsed();
        let t = self.t;
        let finished = self.execute_and_assign(&plan.moves)?;
        Ok((
            EventRecord {
                t,
                response_time_s: elapsed.as_secs_f64(),
                tasks_finished: finished,
                cumulative_tasks: self.cumulative,
                initialized_agents: self.planner.num_initialized(),
                refined_paths: plan.refined_paths,
            },
            elapsed,
        ))
    }
}

/// Runs a full lifelong episode. A planning call over the deadline ends the
/// run with `timeout = true` and the metrics gathered so far.
pub fn run_lifelong(
    map: Arc<GridMap>,
    scenario: &Scenario,
    config: LifelongConfig,
) -> Result<LifelongOutcome> {
    let deadline = config.step_deadline;
    let steps = config.max_timesteps;
    let mut sim = LifelongSim::new(map, scenario, config)?;
    let mut events = Vec::with_capacity(steps);
    let mut timeout = false;
    for _ in 0..steps {
        let (event, elapsed) = sim.step()?;
        events.push(event);
        if deadline.is_some_and(|d| elapsed > d) {
            timeout = true;
            break;
        }
    }
    Ok(LifelongOutcome {
        metrics: Metrics::from_events(&events, timeout),
        events,
    })
}
