//! Priority inheritance with backtracking: one joint step at a time.
//!
//! Agents are visited in descending priority. Each picks the best free
//! candidate among its neighbors and its own cell (Wait); if the chosen cell
//! is occupied by an agent that has not moved yet, that agent is pushed and
//! must vacate, recursively. A pushed agent may not move into its pusher's
//! cell, which rules out swaps. If every candidate fails the agent stays put
//! and the pusher tries its next candidate.
//!
//! The recursion is run on an explicit stack so that long push chains in
//! dense instances cannot overflow the thread stack.

use std::collections::HashMap;
use std::sync::Arc;

use crate::grid::{DistanceTable, GridMap, Vertex, INF};
use crate::guidance::GuideHeuristic;

const NONE: u32 = u32::MAX;

/// PIBT priority: larger `epoch` first, then smaller `tie`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Priority {
    pub epoch: u32,
    pub tie: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub id: usize,
    pub pos: Vertex,
    pub goal: Vertex,
    pub priority: Priority,
}

impl AgentState {
    /// Initial state with `tie = id`.
    pub fn new(id: usize, pos: Vertex, goal: Vertex) -> Self {
        AgentState {
            id,
            pos,
            goal,
            priority: Priority {
                epoch: 0,
                tie: id as u32,
            },
        }
    }
}

/// Key that candidate moves are sorted by; smaller is preferred.
pub type PrefKey = (u32, u32);

/// Per-agent move preference.
#[derive(Debug, Clone)]
pub enum PreferenceFn {
    /// Free-flow distance to the goal.
    FreeFlow(Arc<DistanceTable>),
    /// Guide heuristic `(dp, dg)`; cells the heuristic cannot reach fall back
    /// to `(INF, free-flow distance)`.
    Guided {
        heuristic: GuideHeuristic,
        fallback: Arc<DistanceTable>,
    },
}

impl PreferenceFn {
    #[inline]
    pub fn key(&mut self, map: &GridMap, v: Vertex) -> PrefKey {
        match self {
            PreferenceFn::FreeFlow(d) => (d.raw(v), 0),
            PreferenceFn::Guided {
                heuristic,
                fallback,
            } => match heuristic.query(map, v) {
                Some(h) => (h.dp, h.dg),
                None => (INF, fallback.raw(v)),
            },
        }
    }

    pub fn is_guided(&self) -> bool {
        matches!(self, PreferenceFn::Guided { .. })
    }
}

#[derive(Clone, Copy)]
struct Frame {
    agent: u32,
    pusher: u32,
    cands: [u32; 5],
    n: u8,
    next: u8,
}

/// PIBT step planner with reusable scratch space.
#[derive(Debug, Clone, Default)]
pub struct Pibt {
    occupant: Vec<u32>,
    claim: Vec<u32>,
    theta: Vec<u32>,
    order: Vec<usize>,
}

impl Pibt {
    pub fn new() -> Self {
        Self::default()
    }

    /// Updates priorities, then decides one move per agent.
    ///
    /// Agents at their goal get `epoch = 0`; all others increment. Returns
    /// the next position of every agent, indexed like `agents`.
    pub fn plan_step(
        &mut self,
        map: &GridMap,
        agents: &mut [AgentState],
        prefs: &mut [PreferenceFn],
    ) -> Vec<Vertex> {
        assert_eq!(agents.len(), prefs.len());
        let k = agents.len();
        if self.occupant.len() != map.len() {
            self.occupant = vec![NONE; map.len()];
            self.claim = vec![NONE; map.len()];
        }
        self.theta.clear();
        self.theta.resize(k, NONE);

        for a in agents.iter_mut() {
            if a.pos == a.goal {
                a.priority.epoch = 0;
            } else {
                a.priority.epoch += 1;
            }
        }
        for (i, a) in agents.iter().enumerate() {
            debug_assert_eq!(self.occupant[a.pos.index()], NONE, "agents share a cell");
            self.occupant[a.pos.index()] = i as u32;
        }

        self.order.clear();
        self.order.extend(0..k);
        self.order.sort_unstable_by_key(|&i| {
            (
                std::cmp::Reverse(agents[i].priority.epoch),
                agents[i].priority.tie,
                i,
            )
        });

        let order = std::mem::take(&mut self.order);
        for &i in &order {
            if self.theta[i] == NONE {
                self.run(map, agents, prefs, i);
            }
        }
        self.order = order;

        let out: Vec<Vertex> = self.theta.iter().map(|&v| Vertex(v)).collect();
        for (a, &v) in agents.iter().zip(&out) {
            self.occupant[a.pos.index()] = NONE;
            self.claim[v.index()] = NONE;
        }
        out
    }

    fn candidates(map: &GridMap, pos: Vertex, pref: &mut PreferenceFn) -> ([u32; 5], u8) {
        let mut keyed: [(PrefKey, u32); 5] = [((0, 0), 0); 5];
        let mut n = 0;
        for v in map.neighbors(pos).chain(std::iter::once(pos)) {
            keyed[n] = (pref.key(map, v), v.0);
            n += 1;
        }
        // Stable: ties keep N, E, S, W, Wait order.
        keyed[..n].sort_by_key(|e| e.0);
        let mut out = [NONE; 5];
        for (o, e) in out.iter_mut().zip(&keyed[..n]) {
            *o = e.1;
        }
        (out, n as u8)
    }

    #[inline]
    fn assign(&mut self, agent: u32, v: u32) {
        let old = self.theta[agent as usize];
        if old != NONE && self.claim[old as usize] == agent {
            self.claim[old as usize] = NONE;
        }
        self.theta[agent as usize] = v;
        self.claim[v as usize] = agent;
    }

    fn run(
        &mut self,
        map: &GridMap,
        agents: &[AgentState],
        prefs: &mut [PreferenceFn],
        root: usize,
    ) {
        let (cands, n) = Self::candidates(map, agents[root].pos, &mut prefs[root]);
        let mut stack = vec![Frame {
            agent: root as u32,
            pusher: NONE,
            cands,
            n,
            next: 0,
        }];
        let mut child_ok: Option<bool> = None;

        'outer: while let Some(&top) = stack.last() {
            if child_ok.take() == Some(true) {
                stack.pop();
                child_ok = Some(true);
                continue;
            }
            let a = top.agent;
            let mut frame = top;
            while frame.next < frame.n {
                let v = frame.cands[frame.next as usize];
                frame.next += 1;
                if self.claim[v as usize] != NONE {
                    continue;
                }
                if frame.pusher != NONE && agents[frame.pusher as usize].pos.0 == v {
                    continue;
                }
                self.assign(a, v);
                let occ = self.occupant[v as usize];
                if occ != NONE && occ != a && self.theta[occ as usize] == NONE {
                    *stack.last_mut().unwrap() = frame;
                    let (cands, n) =
                        Self::candidates(map, agents[occ as usize].pos, &mut prefs[occ as usize]);
                    stack.push(Frame {
                        agent: occ,
                        pusher: a,
                        cands,
                        n,
                        next: 0,
                    });
                    continue 'outer;
                }
                stack.pop();
                child_ok = Some(true);
                continue 'outer;
            }
            self.assign(a, agents[a as usize].pos.0);
            stack.pop();
            child_ok = Some(false);
        }
    }
}

/// One-shot convenience around [`Pibt::plan_step`].
pub fn plan_step(
    map: &GridMap,
    agents: &mut [AgentState],
    prefs: &mut [PreferenceFn],
) -> Vec<Vertex> {
    Pibt::new().plan_step(map, agents, prefs)
}

/// A rule broken by a joint move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MoveViolation {
    /// Agent's next cell is neither its current cell nor a neighbor.
    InvalidMove {
        agent: usize,
    },
    VertexConflict {
        a: usize,
        b: usize,
        v: Vertex,
    },
    EdgeConflict {
        a: usize,
        b: usize,
    },
}

/// Checks one joint move for invalid transitions, vertex conflicts and swaps.
pub fn check_moves(map: &GridMap, from: &[Vertex], to: &[Vertex]) -> Vec<MoveViolation> {
    let mut out = Vec::new();
    let mut at_now = HashMap::with_capacity(from.len());
    for (i, &v) in from.iter().enumerate() {
        at_now.insert(v, i);
    }
    let mut at_next: HashMap<Vertex, usize> = HashMap::with_capacity(to.len());
    for (i, (&f, &t)) in from.iter().zip(to).enumerate() {
        if f != t && !map.adjacent(f, t) {
            out.push(MoveViolation::InvalidMove { agent: i });
        }
        match at_next.get(&t) {
            Some(&j) => out.push(MoveViolation::VertexConflict { a: j, b: i, v: t }),
            None => {
                at_next.insert(t, i);
            }
        }
        // Each swap is reported once, from its lower-indexed agent.
        if f != t {
            if let Some(&j) = at_now.get(&t) {
                if j > i && to[j] == f {
                    out.push(MoveViolation::EdgeConflict { a: i, b: j });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::bfs_distances;

    fn free_flow(map: &GridMap, agents: &[AgentState]) -> Vec<PreferenceFn> {
        agents
            .iter()
            .map(|a| PreferenceFn::FreeFlow(Arc::new(bfs_distances(map, a.goal))))
            .collect()
    }

    #[test]
    fn single_agent_moves_toward_goal() {
        let map = GridMap::open(5, 1).unwrap();
        let mut agents = vec![AgentState::new(0, Vertex(2), Vertex(4))];
        let mut prefs = free_flow(&map, &agents);
        assert_eq!(plan_step(&map, &mut agents, &mut prefs), vec![Vertex(3)]);
    }

    #[test]
    fn agent_at_goal_waits_and_resets() {
        let map = GridMap::open(3, 3).unwrap();
        let mut agents = vec![AgentState::new(0, Vertex(4), Vertex(4))];
        agents[0].priority.epoch = 7;
        let mut prefs = free_flow(&map, &agents);
        assert_eq!(plan_step(&map, &mut agents, &mut prefs), vec![Vertex(4)]);
        assert_eq!(agents[0].priority.epoch, 0);
    }

    #[test]
    fn swap_is_never_produced() {
        // Two cells, each agent wants the other's cell.
        let map = GridMap::open(2, 1).unwrap();
        let mut agents = vec![
            AgentState::new(0, Vertex(0), Vertex(1)),
            AgentState::new(1, Vertex(1), Vertex(0)),
        ];
        let mut prefs = free_flow(&map, &agents);
        let next = plan_step(&map, &mut agents, &mut prefs);
        assert_eq!(next, vec![Vertex(0), Vertex(1)]);
        let from: Vec<_> = agents.iter().map(|a| a.pos).collect();
        assert!(check_moves(&map, &from, &next).is_empty());
    }

    #[test]
    fn check_moves_reports_each_kind() {
        let map = GridMap::open(3, 1).unwrap();
        let from = [Vertex(0), Vertex(1)];
        assert_eq!(
            check_moves(&map, &from, &[Vertex(1), Vertex(0)]),
            vec![MoveViolation::EdgeConflict { a: 0, b: 1 }]
        );
        assert_eq!(
            check_moves(&map, &from, &[Vertex(1), Vertex(1)]),
            vec![MoveViolation::VertexConflict {
                a: 0,
                b: 1,
                v: Vertex(1)
            }]
        );
        assert_eq!(
            check_moves(&map, &from, &[Vertex(2), Vertex(1)]),
            vec![MoveViolation::InvalidMove { agent: 0 }]
        );
        // A three-cycle rotation is not a swap.
        let ring = GridMap::open(2, 2).unwrap();
        let from = [Vertex(0), Vertex(1), Vertex(3)];
        let to = [Vertex(1), Vertex(3), Vertex(2)];
        assert!(check_moves(&ring, &from, &to).is_empty());
    }
}
