//! One-shot MAPF with guided PIBT: every agent travels to a fixed goal and
//! stays there. PIBT is incomplete, so the driver can fail on a livelock; the
//! failure carries the agents that never settled.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::grid::{GridMap, Scenario, Vertex};
use crate::guidance::{GuideConfig, GuideHeuristic, GuidePlanner};
use crate::pathfile;
use crate::pibt::{AgentState, Pibt, PreferenceFn};

/// Per-agent vertex sequences over a common horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub paths: Vec<Vec<Vertex>>,
}

impl Solution {
    /// Builds a solution from joint configurations, one per timestep.
    pub fn from_configs(configs: &[Vec<Vertex>]) -> Self {
        let k = configs.first().map_or(0, Vec::len);
        let paths = (0..k)
            .map(|a| configs.iter().map(|c| c[a]).collect())
            .collect();
        Solution { paths }
    }

    pub fn num_agents(&self) -> usize {
        self.paths.len()
    }

    /// Number of timesteps (length of each path minus one).
    pub fn horizon(&self) -> usize {
        self.paths
            .iter()
            .map(Vec::len)
            .max()
            .unwrap_or(1)
            .saturating_sub(1)
    }

    pub fn to_file_string(&self) -> String {
        pathfile::write_paths(
            self.paths
                .iter()
                .enumerate()
                .map(|(a, p)| (a, p.as_slice())),
        )
    }

    /// Parses the solution file format; agent ids must be `0..k` in order.
    pub fn parse(text: &str) -> Result<Self> {
        let rows = pathfile::parse_paths(text)?;
        let mut paths = Vec::with_capacity(rows.len());
        for (i, (id, path)) in rows.into_iter().enumerate() {
            if id != i {
                return Err(Error::InvalidInput(format!(
                    "expected agent {i}, found {id}"
                )));
            }
            paths.push(path);
        }
        Ok(Solution { paths })
    }
}

/// A defect found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    WrongStart {
        agent: usize,
        found: Vertex,
    },
    LengthMismatch {
        agent: usize,
        len: usize,
        expected: usize,
    },
    Untraversable {
        agent: usize,
        v: Vertex,
        t: usize,
    },
    NonAdjacent {
        agent: usize,
        from: Vertex,
        to: Vertex,
        t: usize,
    },
    VertexConflict {
        a: usize,
        b: usize,
        v: Vertex,
        t: usize,
    },
    EdgeConflict {
        a: usize,
        b: usize,
        u: Vertex,
        v: Vertex,
        t: usize,
    },
    NotAtGoal {
        agent: usize,
        found: Vertex,
    },
    AgentCount {
        found: usize,
        expected: usize,
    },
}

/// Reports every defect of `solution` as a plan for `scenario`. Transitions
/// are reported at the timestep `t` they start from.
pub fn validate(
    solution: &Solution,
    map: &GridMap,
    scenario: &Scenario,
) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let k = scenario.num_agents();
    if solution.num_agents() != k {
        out.push(Violation::AgentCount {
            found: solution.num_agents(),
            expected: k,
        });
        return Err(out);
    }
    let len = solution.paths.iter().map(Vec::len).max().unwrap_or(0);
    for (a, p) in solution.paths.iter().enumerate() {
        if p.len() != len {
            out.push(Violation::LengthMismatch {
                agent: a,
                len: p.len(),
                expected: len,
            });
        }
        if p.first() != Some(&scenario.starts[a]) {
            out.push(Violation::WrongStart {
                agent: a,
                found: p.first().copied().unwrap_or(Vertex(u32::MAX)),
            });
        }
        for (t, &v) in p.iter().enumerate() {
            if v.index() >= map.len() || !map.is_traversable(v) {
                out.push(Violation::Untraversable { agent: a, v, t });
            }
        }
        for (t, w) in p.windows(2).enumerate() {
            if w[0] != w[1] && !grid_neighbors(map, w[0], w[1]) {
                out.push(Violation::NonAdjacent {
                    agent: a,
                    from: w[0],
                    to: w[1],
                    t,
                });
            }
        }
        if let Some(&last) = p.last() {
            if last != scenario.goals[a] {
                out.push(Violation::NotAtGoal {
                    agent: a,
                    found: last,
                });
            }
        }
    }
    // Shorter paths are treated as resting at their last vertex.
    let at = |a: usize, t: usize| -> Option<Vertex> {
        let p = &solution.paths[a];
        p.get(t).or(p.last()).copied()
    };
    let mut seen = std::collections::HashMap::with_capacity(k);
    for t in 0..len {
        seen.clear();
        for a in 0..k {
            let Some(v) = at(a, t) else { continue };
            if let Some(&b) = seen.get(&v) {
                out.push(Violation::VertexConflict { a: b, b: a, v, t });
            } else {
                seen.insert(v, a);
            }
        }
        if t + 1 == len {
            break;
        }
        for a in 0..k {
            let (Some(u), Some(v)) = (at(a, t), at(a, t + 1)) else {
                continue;
            };
            if u == v {
                continue;
            }
            if let Some(&b) = seen.get(&v) {
                if b > a && at(b, t + 1) == Some(u) {
                    out.push(Violation::EdgeConflict { a, b, u, v, t });
                }
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Geometric 4-adjacency, ignoring obstacles so that a blocked cell is only
/// reported as untraversable.
fn grid_neighbors(map: &GridMap, a: Vertex, b: Vertex) -> bool {
    if a.index() >= map.len() || b.index() >= map.len() {
        return true;
    }
    let ((ra, ca), (rb, cb)) = (map.coords(a), map.coords(b));
    ra.abs_diff(rb) + ca.abs_diff(cb) == 1
}

/// Cost of one agent: the index after which it rests at its final vertex.
pub fn individual_cost(path: &[Vertex]) -> u64 {
    let Some(&goal) = path.last() else { return 0 };
    path.iter()
        .rposition(|&v| v != goal)
        .map_or(0, |i| i as u64 + 1)
}

/// Sum of individual costs.
pub fn sic(solution: &Solution) -> u64 {
    solution.paths.iter().map(|p| individual_cost(p)).sum()
}

/// Knobs for [`solve_oneshot`].
#[derive(Debug, Clone, PartialEq)]
pub struct OneShotConfig {
    /// `None` runs plain free-flow PIBT.
    pub guide: Option<GuideConfig>,
    /// Upper bound on refinement iterations during setup.
    pub refine_iterations: usize,
    /// `None` means `(width + height) * 10`.
    pub step_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Share of `time_limit` spent on guide paths and refinement.
    pub setup_ratio: f64,
}

impl Default for OneShotConfig {
    fn default() -> Self {
        OneShotConfig {
            guide: Some(GuideConfig::default()),
            refine_iterations: 100,
            step_limit: None,
            time_limit: None,
            setup_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    StepLimit,
    TimeLimit,
}

/// An unfinished run: the executed prefix and the agents not at their goals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneShotFailure {
    pub reason: FailureReason,
    pub unfinished: Vec<usize>,
    pub partial: Solution,
}

impl std::fmt::Display for OneShotFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:?} after {} steps; unfinished agents: {:?}",
            self.reason,
            self.partial.horizon(),
            self.unfinished
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OneShotOutcome {
    Solved(Solution),
    Failed(OneShotFailure),
}

impl OneShotOutcome {
    pub fn solution(&self) -> Option<&Solution> {
        match self {
            OneShotOutcome::Solved(s) => Some(s),
            OneShotOutcome::Failed(_) => None,
        }
    }
}

/// Computes guide paths, refines them within the setup budget, then steps
/// PIBT until every agent sits on its goal.
pub fn solve_oneshot(
    map: Arc<GridMap>,
    scenario: &Scenario,
    config: &OneShotConfig,
) -> Result<OneShotOutcome> {
    scenario.validate(&map)?;
    if !(0.0..=1.0).contains(&config.setup_ratio) {
        return Err(Error::InvalidInput("setup_ratio must be in [0, 1]".into()));
    }
    let started = Instant::now();
    let k = scenario.num_agents();
    let mut agents: Vec<AgentState> = (0..k)
        .map(|i| AgentState::new(i, scenario.starts[i], scenario.goals[i]))
        .collect();
    let guide = config.guide.unwrap_or(GuideConfig {
        model: crate::traffic::CostModel::FreeFlow,
        ..GuideConfig::default()
    });
    let mut planner = GuidePlanner::new(
        map.clone(),
        guide,
        scenario.starts.clone(),
        scenario.goals.clone(),
    )?;
    for a in &agents {
        if planner.distances(a.goal).get(a.pos).is_none() {
            return Err(Error::Unreachable {
                agent: a.id,
                start: a.pos,
                goal: a.goal,
            });
        }
    }

    let mut prefs: Vec<PreferenceFn> = Vec::with_capacity(k);
    if config.guide.is_some() {
        let all: Vec<usize> = (0..k).collect();
        planner.find_paths(&all)?;
        let setup_deadline = config
            .time_limit
            .map(|t| started + t.mul_f64(config.setup_ratio));
        for _ in 0..config.refine_iterations {
            if setup_deadline.is_some_and(|d| Instant::now() >= d) {
                break;
            }
            planner.path_refinement(&all, 1)?;
        }
        for a in 0..k {
            let fallback = planner.distances(scenario.goals[a]);
            let path = planner.path(a).expect("all agents planned");
            prefs.push(PreferenceFn::Guided {
                heuristic: GuideHeuristic::new(&map, path),
                fallback,
            });
        }
    } else {
        for a in 0..k {
            prefs.push(PreferenceFn::FreeFlow(planner.distances(scenario.goals[a])));
        }
    }

    let step_limit = config
        .step_limit
        .unwrap_or((map.width() + map.height()) * 10);
    let mut configs = vec![scenario.starts.clone()];
    let mut pibt = Pibt::new();
    let done = |agents: &[AgentState]| agents.iter().all(|a| a.pos == a.goal);
    let mut reason = None;
    while !done(&agents) {
        if configs.len() > step_limit {
            reason = Some(FailureReason::StepLimit);
            break;
        }
        if config.time_limit.is_some_and(|t| started.elapsed() >= t) {
            reason = Some(FailureReason::TimeLimit);
            break;
        }
        let next = pibt.plan_step(&map, &mut agents, &mut prefs);
        for (a, &v) in agents.iter_mut().zip(&next) {
            a.pos = v;
            // Once at the goal the rest of the guide path is the goal alone.
            if v == a.goal && matches!(prefs[a.id], PreferenceFn::Guided { .. }) {
                prefs[a.id] = PreferenceFn::FreeFlow(planner.distances(a.goal));
            }
        }
        configs.push(next);
    }
    let solution = Solution::from_configs(&configs);
    Ok(match reason {
        None => OneShotOutcome::Solved(solution),
        Some(reason) => OneShotOutcome::Failed(OneShotFailure {
            reason,
            unfinished: agents
                .iter()
                .filter(|a| a.pos != a.goal)
                .map(|a| a.id)
                .collect(),
            partial: solution,
        }),
    })
}
