//! Congestion-aware guide paths.
//!
//! A [`GuidePlanner`] owns the flow map and one guide path per agent. Paths
//! are planned one agent at a time, each against the flows left by every
//! path registered before it, so later agents route around earlier ones.
//! [`GuidePlanner::path_refinement`] then repeatedly rips up a small subset of
//! paths and replans them, choosing between two subset builders by adaptive
//! weights.
//!
//! [`GuideHeuristic`] turns a finished path into the per-vertex move
//! preference used by PIBT.

mod heuristic;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use heuristic::{GuideHeuristic, GuideValue};

use crate::error::{Error, Result};
use crate::grid::{DistanceCache, DistanceTable, GridMap, Vertex};
use crate::pathfile;
use crate::search::{sp, FocalParams};
use crate::traffic::{path_cost, CostModel, EdgeCosts, FlowAccounting, FlowMap};

/// Knobs for guide-path planning and refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuideConfig {
    pub model: CostModel,
    /// Whether a path being planned counts its own traversal.
    #[serde(default)]
    pub accounting: FlowAccounting,
    /// `None` selects lexicographic A*, `Some` a length-bounded FOCAL search.
    pub focal: Option<FocalParams>,
    /// Agents replanned per refinement iteration.
    pub subset_size: usize,
    /// Adaptive weight decay `gamma` in `(0, 1)`.
    pub decay: f64,
    /// Floor that keeps every selection weight positive.
    pub min_weight: f64,
    pub seed: u64,
}

impl Default for GuideConfig {
    fn default() -> Self {
        GuideConfig {
            model: CostModel::TwoPart,
            accounting: FlowAccounting::Joining,
            focal: None,
            subset_size: 10,
            decay: 0.99,
            min_weight: 1e-3,
            seed: 0,
        }
    }
}

/// Subset builders used by path refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionMethod {
    RandomSubset,
    CongestionIntersecting,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 2] = [
        SelectionMethod::RandomSubset,
        SelectionMethod::CongestionIntersecting,
    ];
}

/// Adaptive-LNS style roulette over [`SelectionMethod`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementSelector {
    weights: [f64; 2],
    decay: f64,
    min_weight: f64,
}

impl RefinementSelector {
    pub fn new(decay: f64, min_weight: f64) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::InvalidInput(format!(
                "decay must be in (0, 1), got {decay}"
            )));
        }
        if !(min_weight > 0.0 && min_weight.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "min weight must be positive, got {min_weight}"
            )));
        }
        Ok(RefinementSelector {
            weights: [1.0, 1.0],
            decay,
            min_weight,
        })
    }

    pub fn weight(&self, m: SelectionMethod) -> f64 {
        self.weights[m as usize]
    }

    pub fn probability(&self, m: SelectionMethod) -> f64 {
        self.weights[m as usize] / self.weights.iter().sum::<f64>()
    }

    /// Roulette draw: one `f64` from `rng`.
    pub fn choose<R: Rng>(&self, rng: &mut R) -> SelectionMethod {
        let total: f64 = self.weights.iter().sum();
        let r = rng.gen::<f64>() * total;
        if r < self.weights[0] {
            SelectionMethod::RandomSubset
        } else {
            SelectionMethod::CongestionIntersecting
        }
    }

    /// `w <- gamma * w + (1 - gamma) * max(0, improvement)`.
    pub fn update(&mut self, m: SelectionMethod, improvement: f64) {
        let w = &mut self.weights[m as usize];
        *w = (self.decay * *w + (1.0 - self.decay) * improvement.max(0.0)).max(self.min_weight);
    }
}

/// One refinement iteration, for tracing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementRound {
    pub method: SelectionMethod,
    pub subset: Vec<usize>,
    pub cost_before: u64,
    pub cost_after: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RefinementReport {
    pub rounds: Vec<RefinementRound>,
    /// Agents whose path differs from before the call, ascending.
    pub changed: Vec<usize>,
}

/// Guide paths for a team of agents plus the flows they induce.
#[derive(Debug, Clone)]
pub struct GuidePlanner {
    map: Arc<GridMap>,
    config: GuideConfig,
    flows: FlowMap,
    paths: Vec<Option<Vec<Vertex>>>,
    origins: Vec<Vertex>,
    goals: Vec<Vertex>,
    distances: DistanceCache,
    selector: RefinementSelector,
    rng: ChaCha8Rng,
}

impl GuidePlanner {
    pub fn new(
        map: Arc<GridMap>,
        config: GuideConfig,
        origins: Vec<Vertex>,
        goals: Vec<Vertex>,
    ) -> Result<Self> {
        if origins.len() != goals.len() {
            return Err(Error::InvalidInput(
                "origins and goals differ in length".into(),
            ));
        }
        for &v in origins.iter().chain(&goals) {
            if !map.is_traversable(v) {
                return Err(Error::InvalidInput(format!(
                    "location {} is not traversable",
                    v.0
                )));
            }
        }
        let flows = FlowMap::new(&map);
        Ok(GuidePlanner {
            flows,
            paths: vec![None; origins.len()],
            origins,
            goals,
            distances: DistanceCache::new(),
            selector: RefinementSelector::new(config.decay, config.min_weight)?,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            map,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn config(&self) -> &GuideConfig {
        &self.config
    }

    pub fn costs(&self) -> EdgeCosts {
        EdgeCosts::new(self.config.model, self.config.accounting)
    }

    pub fn num_agents(&self) -> usize {
        self.paths.len()
    }

    pub fn flows(&self) -> &FlowMap {
        &self.flows
    }

    pub fn selector(&self) -> &RefinementSelector {
        &self.selector
    }

    pub fn path(&self, agent: usize) -> Option<&[Vertex]> {
        self.paths[agent].as_deref()
    }

    pub fn has_path(&self, agent: usize) -> bool {
        self.paths[agent].is_some()
    }

    pub fn num_initialized(&self) -> usize {
        self.paths.iter().filter(|p| p.is_some()).count()
    }

    pub fn origin(&self, agent: usize) -> Vertex {
        self.origins[agent]
    }

    pub fn goal(&self, agent: usize) -> Vertex {
        self.goals[agent]
    }

    /// Sets where the agent's next (re)plan starts. Registered flows are not
    /// touched until the agent is replanned.
    pub fn set_origin(&mut self, agent: usize, v: Vertex) {
        self.origins[agent] = v;
    }

    pub fn set_goal(&mut self, agent: usize, v: Vertex) {
        self.goals[agent] = v;
    }

    /// Goal-rooted free-flow distances, memoized.
    pub fn distances(&mut self, goal: Vertex) -> Arc<DistanceTable> {
        self.distances.get(&self.map, goal)
    }

    fn plan_one(&mut self, agent: usize) -> Result<Vec<Vertex>> {
        let (start, goal) = (self.origins[agent], self.goals[agent]);
        let dist = self.distances(goal);
        sp(
            &self.map,
            &self.flows,
            self.costs(),
            start,
            goal,
            self.config.focal,
            &dist,
        )
        .map(|p| p.path)
        .map_err(|e| match e {
            Error::NoPath { start, goal } => Error::Unreachable { agent, start, goal },
            e => e,
        })
    }

    /// Removes an agent's path from the flows.
    pub fn unregister(&mut self, agent: usize) -> Result<Option<Vec<Vertex>>> {
        if let Some(p) = self.paths[agent].take() {
            if let Err(e) = self.flows.remove_path(&self.map, &p) {
                self.paths[agent] = Some(p);
                return Err(e);
            }
            return Ok(Some(p));
        }
        Ok(None)
    }

    /// Plans the given agents one by one in ascending id order, registering
    /// each path before the next agent plans. Returns agents whose path
    /// changed.
    pub fn find_paths(&mut self, agents: &[usize]) -> Result<Vec<usize>> {
        let mut order = agents.to_vec();
        order.sort_unstable();
        order.dedup();
        let mut changed = Vec::new();
        for a in order {
            let old = self.unregister(a)?;
            let path = self.plan_one(a)?;
            self.flows.add_path(&self.map, &path)?;
            if old.as_ref() != Some(&path) {
                changed.push(a);
            }
            self.paths[a] = Some(path);
        }
        Ok(changed)
    }

    /// Unregisters every path in `subset`, then replans them in ascending id
    /// order with flows updated after each. Replacement is unconditional.
    pub fn replan(&mut self, subset: &[usize]) -> Result<Vec<usize>> {
        let mut order = subset.to_vec();
        order.sort_unstable();
        order.dedup();
        let mut old = Vec::with_capacity(order.len());
        for &a in &order {
            if !self.has_path(a) {
                return Err(Error::InvalidInput(format!(
                    "agent {a} has no registered path"
                )));
            }
            old.push(self.unregister(a)?);
        }
        let mut changed = Vec::new();
        for (a, old) in order.into_iter().zip(old) {
            let path = self.plan_one(a)?;
            self.flows.add_path(&self.map, &path)?;
            if old.as_ref() != Some(&path) {
                changed.push(a);
            }
            self.paths[a] = Some(path);
        }
        Ok(changed)
    }

    /// Sum of second cost components along the agent's path under the
    /// current flows (0 without a path).
    pub fn scalarized_cost(&self, agent: usize) -> u64 {
        self.paths[agent]
            .as_deref()
            .map(|p| path_cost(self.config.model, &self.flows, &self.map, p).second)
            .unwrap_or(0)
    }

    /// Congestion share of [`Self::scalarized_cost`]: the excess over one
    /// unit per move.
    pub fn traffic_cost(&self, agent: usize) -> u64 {
        let moves = self.paths[agent]
            .as_ref()
            .map_or(0, |p| p.len().saturating_sub(1)) as u64;
        self.scalarized_cost(agent) - moves
    }

    pub fn total_scalarized_cost(&self, agents: &[usize]) -> u64 {
        agents.iter().map(|&a| self.scalarized_cost(a)).sum()
    }

    /// Uniform sample of `size` agents from `candidates`, ascending.
    pub fn random_subset(&mut self, candidates: &[usize], size: usize) -> Vec<usize> {
        let mut s: Vec<usize> = candidates
            .choose_multiple(&mut self.rng, size)
            .copied()
            .collect();
        s.sort_unstable();
        s
    }

    /// The agent with the highest traffic cost plus agents whose paths share
    /// a vertex with it (ascending id), truncated to `size` and padded with
    /// random candidates. Returned ascending.
    pub fn congestion_intersecting_subset(
        &mut self,
        candidates: &[usize],
        size: usize,
    ) -> Vec<usize> {
        let mut cands: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&a| self.has_path(a))
            .collect();
        cands.sort_unstable();
        if size >= cands.len() {
            return cands;
        }
        if size == 0 {
            return Vec::new();
        }
        let mut seed = cands[0];
        let mut best = self.traffic_cost(seed);
        for &a in &cands[1..] {
            let c = self.traffic_cost(a);
            if c > best {
                best = c;
                seed = a;
            }
        }
        let mut on_seed = vec![false; self.map.len()];
        for v in self.paths[seed].as_deref().unwrap_or(&[]) {
            on_seed[v.index()] = true;
        }
        let mut chosen = vec![seed];
        for &a in &cands {
            if chosen.len() >= size {
                break;
            }
            if a != seed
                && self.paths[a]
                    .as_deref()
                    .is_some_and(|p| p.iter().any(|v| on_seed[v.index()]))
            {
                chosen.push(a);
            }
        }
        if chosen.len() < size {
            let rest: Vec<usize> = cands
                .iter()
                .copied()
                .filter(|a| !chosen.contains(a))
                .collect();
            let need = size - chosen.len();
            chosen.extend(rest.choose_multiple(&mut self.rng, need).copied());
        }
        chosen.sort_unstable();
        chosen
    }

    /// Runs `iterations` rounds of select-and-replan over `candidates`.
    ///
    /// Each round draws a method by weight, builds a subset of the configured
    /// size, replans it, and rewards the method with the decrease in total
    /// scalarized cost over `candidates`.
    pub fn path_refinement(
        &mut self,
        candidates: &[usize],
        iterations: usize,
    ) -> Result<RefinementReport> {
        let cands: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&a| self.has_path(a))
            .collect();
        let mut report = RefinementReport::default();
        if cands.is_empty() {
            return Ok(report);
        }
        let before_paths: Vec<Option<Vec<Vertex>>> =
            cands.iter().map(|&a| self.paths[a].clone()).collect();
        for _ in 0..iterations {
            let method = self.selector.choose(&mut self.rng);
            let size = self.config.subset_size;
            let subset = match method {
                SelectionMethod::RandomSubset => self.random_subset(&cands, size),
                SelectionMethod::CongestionIntersecting => {
                    self.congestion_intersecting_subset(&cands, size)
                }
            };
            let cost_before = self.total_scalarized_cost(&cands);
            self.replan(&subset)?;
            let cost_after = self.total_scalarized_cost(&cands);
            self.selector
                .update(method, cost_before as f64 - cost_after as f64);
            report.rounds.push(RefinementRound {
                method,
                subset,
                cost_before,
                cost_after,
            });
        }
        report.changed = cands
            .iter()
            .zip(before_paths)
            .filter(|(&a, old)| self.paths[a] != *old)
            .map(|(&a, _)| a)
            .collect();
        Ok(report)
    }

    /// True iff the incrementally maintained flows equal a rebuild from the
    /// registered paths.
    pub fn flows_consistent(&self) -> bool {
        FlowMap::from_paths(&self.map, self.paths.iter().flatten().map(Vec::as_slice))
            .map(|f| f == self.flows)
            .unwrap_or(false)
    }

    /// Guide-path dump, `agent_id: v0 v1 ... vn` per registered agent.
    pub fn dump(&self) -> String {
        pathfile::write_paths(
            self.paths
                .iter()
                .enumerate()
                .filter_map(|(a, p)| p.as_deref().map(|p| (a, p))),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::bfs_distances;

    fn planner(map: GridMap, starts: &[u32], goals: &[u32], model: CostModel) -> GuidePlanner {
        let config = GuideConfig {
            model,
            ..GuideConfig::default()
        };
        GuidePlanner::new(
            Arc::new(map),
            config,
            starts.iter().map(|&v| Vertex(v)).collect(),
            goals.iter().map(|&v| Vertex(v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_agent_gets_free_flow_path() {
        let map = GridMap::open(6, 4).unwrap();
        let mut p = planner(map.clone(), &[0], &[23], CostModel::TwoPart);
        p.find_paths(&[0]).unwrap();
        let d = bfs_distances(&map, Vertex(0)).get(Vertex(23)).unwrap() as usize;
        assert_eq!(p.path(0).unwrap().len() - 1, d);
        assert!(p.flows_consistent());
    }

    #[test]
    fn free_flow_paths_are_shortest() {
        let map = GridMap::from_rows(&["......", ".@@.@.", "......", "@....."]).unwrap();
        let starts = [0, 5, 12, 19];
        let goals = [23, 17, 3, 2];
        let mut p = planner(map.clone(), &starts, &goals, CostModel::FreeFlow);
        p.find_paths(&[3, 1, 0, 2]).unwrap();
        for a in 0..4 {
            let d = bfs_distances(&map, Vertex(starts[a]))
                .get(Vertex(goals[a]))
                .unwrap() as usize;
            assert_eq!(p.path(a).unwrap().len() - 1, d);
        }
    }

    #[test]
    fn replan_all_equals_fresh_find_paths() {
        let map = GridMap::from_rows(&["......", ".@@.@.", "......", "@....."]).unwrap();
        let starts = [0, 5, 12, 19];
        let goals = [23, 17, 3, 2];
        let mut a = planner(map.clone(), &starts, &goals, CostModel::TwoPart);
        a.find_paths(&[0, 1, 2, 3]).unwrap();
        let mut b = a.clone();
        b.replan(&[0, 1, 2, 3]).unwrap();
        for i in 0..4 {
            assert_eq!(a.path(i), b.path(i));
        }
        assert_eq!(a.flows(), b.flows());
    }

    #[test]
    fn replan_requires_registered_path() {
        let map = GridMap::open(3, 3).unwrap();
        let mut p = planner(map, &[0], &[8], CostModel::TwoPart);
        assert!(p.replan(&[0]).is_err());
    }

    #[test]
    fn refinement_zero_iterations_is_noop() {
        let map = GridMap::open(5, 5).unwrap();
        let mut p = planner(map, &[0, 4], &[24, 20], CostModel::TwoPart);
        p.find_paths(&[0, 1]).unwrap();
        let before = p.dump();
        let r = p.path_refinement(&[0, 1], 0).unwrap();
        assert!(r.rounds.is_empty() && r.changed.is_empty());
        assert_eq!(p.dump(), before);
    }

    #[test]
    fn refinement_single_optimal_agent_decays_weight() {
        let map = GridMap::open(5, 1).unwrap();
        let mut p = planner(map, &[0], &[4], CostModel::TwoPart);
        p.find_paths(&[0]).unwrap();
        let before = p.path(0).unwrap().to_vec();
        let r = p.path_refinement(&[0], 5).unwrap();
        assert_eq!(p.path(0).unwrap(), before.as_slice());
        assert!(r.changed.is_empty());
        let total: f64 = SelectionMethod::ALL
            .iter()
            .map(|&m| p.selector().weight(m))
            .sum();
        assert!(total < 2.0);
        assert!(SelectionMethod::ALL
            .iter()
            .all(|&m| p.selector().weight(m) > 0.0));
    }

    #[test]
    fn congestion_subset_tie_breaks_to_lowest_id() {
        // Three disjoint rows: no shared vertices, no congestion.
        let map = GridMap::open(4, 3).unwrap();
        let mut p = planner(map, &[0, 4, 8], &[3, 7, 11], CostModel::TwoPart);
        p.find_paths(&[0, 1, 2]).unwrap();
        let s = p.congestion_intersecting_subset(&[0, 1, 2], 2);
        assert_eq!(s.len(), 2);
        assert!(s.contains(&0));
        assert_eq!(
            p.congestion_intersecting_subset(&[0, 1, 2], 5),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn selector_update_rule() {
        let mut s = RefinementSelector::new(0.5, 1e-3).unwrap();
        s.update(SelectionMethod::RandomSubset, 3.0);
        assert_eq!(s.weight(SelectionMethod::RandomSubset), 2.0);
        s.update(SelectionMethod::CongestionIntersecting, -4.0);
        assert_eq!(s.weight(SelectionMethod::CongestionIntersecting), 0.5);
        assert!((s.probability(SelectionMethod::RandomSubset) - 0.8).abs() < 1e-12);
        assert!(RefinementSelector::new(1.0, 1e-3).is_err());
    }
}
