//! Single-agent search over [`TwoPartCost`] edge weights.
//!
//! Two modes are provided:
//!
//! * **Lexicographic A\*** (no [`FocalParams`]): minimizes the two-part cost,
//!   then the move count, with the admissible heuristic `(0, d)` where `d` is
//!   the free-flow distance to the goal.
//! * **FOCAL** (with [`FocalParams`]): OPEN is ordered by path length
//!   `g_len + d`, FOCAL admits every open node with length estimate at most
//!   `w * f_min` and orders them by the two-part cost estimate. The returned
//!   path has at most `w * C*` moves, where `C*` is the free-flow distance.
//!
//! FOCAL keeps a Pareto set of `(cost, length)` labels per vertex so that a
//! cheaper but longer arrival never evicts the label that certifies the
//! length bound.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::error::{Error, Result};
use crate::grid::{bfs_distances, DistanceTable, GridMap, Vertex, INF};
use crate::traffic::{EdgeCosts, FlowMap, TwoPartCost};

const NO_PARENT: u32 = u32::MAX;

// Slack for the floating point product `w * C*`.
const BOUND_EPS: f64 = 1e-9;

/// Suboptimality factor for FOCAL search.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FocalParams {
    w: f64,
}

impl FocalParams {
    pub fn new(w: f64) -> Result<Self> {
        if !w.is_finite() || w < 1.0 {
            return Err(Error::InvalidInput(format!(
                "focal weight must be >= 1, got {w}"
            )));
        }
        Ok(FocalParams { w })
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// Largest integer length admitted for a given minimum estimate.
    #[inline]
    fn threshold(&self, f_min: u32) -> u32 {
        (self.w * f64::from(f_min) + BOUND_EPS).floor() as u32
    }
}

/// A path together with its two-part cost at search time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortestPath {
    pub path: Vec<Vertex>,
    pub cost: TwoPartCost,
}

impl ShortestPath {
    pub fn moves(&self) -> usize {
        self.path.len() - 1
    }
}

/// Shortest guide path from `start` to `goal` under `costs`; a bare
/// [`CostModel`](crate::traffic::CostModel) is accepted and uses joining
/// flow accounting.
///
/// `dist_to_goal` must be the free-flow distance table rooted at `goal`.
pub fn sp(
    map: &GridMap,
    flows: &FlowMap,
    costs: impl Into<EdgeCosts>,
    start: Vertex,
    goal: Vertex,
    params: Option<FocalParams>,
    dist_to_goal: &DistanceTable,
) -> Result<ShortestPath> {
    debug_assert_eq!(dist_to_goal.source(), goal);
    if !map.is_traversable(start) || !map.is_traversable(goal) {
        return Err(Error::InvalidInput(format!(
            "search endpoints must be traversable ({} -> {})",
            start.0, goal.0
        )));
    }
    if dist_to_goal.get(start).is_none() {
        return Err(Error::NoPath { start, goal });
    }
    let costs = costs.into();
    match params {
        None => lexicographic_astar(map, flows, costs, start, goal, dist_to_goal),
        Some(p) => focal_search(map, flows, costs, start, goal, p, dist_to_goal),
    }
}

/// Convenience wrapper that computes the goal distance table itself.
pub fn sp_simple(
    map: &GridMap,
    flows: &FlowMap,
    costs: impl Into<EdgeCosts>,
    start: Vertex,
    goal: Vertex,
    params: Option<FocalParams>,
) -> Result<ShortestPath> {
    let dist = bfs_distances(map, goal);
    sp(map, flows, costs, start, goal, params, &dist)
}

/// True iff `path` uses at most `w * dist(start, goal)` moves.
pub fn verify_bound(path: &[Vertex], start: Vertex, goal: Vertex, map: &GridMap, w: f64) -> bool {
    let Some(c_star) = bfs_distances(map, start).get(goal) else {
        return false;
    };
    if path.first() != Some(&start) || path.last() != Some(&goal) {
        return false;
    }
    let moves = path.len() as f64 - 1.0;
    moves <= w * f64::from(c_star) + BOUND_EPS
}

struct Node {
    v: Vertex,
    g: TwoPartCost,
    len: u32,
    parent: u32,
}

fn reconstruct(nodes: &[impl AsRef<Node>], mut idx: u32) -> Vec<Vertex> {
    let mut path = Vec::new();
    while idx != NO_PARENT {
        let n = nodes[idx as usize].as_ref();
        path.push(n.v);
        idx = n.parent;
    }
    path.reverse();
    path
}

impl AsRef<Node> for Node {
    fn as_ref(&self) -> &Node {
        self
    }
}

fn lexicographic_astar(
    map: &GridMap,
    flows: &FlowMap,
    costs: EdgeCosts,
    start: Vertex,
    goal: Vertex,
    dist: &DistanceTable,
) -> Result<ShortestPath> {
    // Label per vertex: (g, g_len) compared lexicographically.
    let mut best: Vec<Option<(TwoPartCost, u32)>> = vec![None; map.len()];
    let mut closed = vec![false; map.len()];
    let mut nodes: Vec<Node> = Vec::new();
    let mut heap = BinaryHeap::new();

    let h0 = dist.raw(start);
    nodes.push(Node {
        v: start,
        g: TwoPartCost::ZERO,
        len: 0,
        parent: NO_PARENT,
    });
    best[start.index()] = Some((TwoPartCost::ZERO, 0));
    heap.push(Reverse((0u64, u64::from(h0), h0, start.0, 0u32)));

    while let Some(Reverse((_, _, _, v, idx))) = heap.pop() {
        let vi = v as usize;
        if closed[vi] {
            continue;
        }
        let node = &nodes[idx as usize];
        if best[vi] != Some((node.g, node.len)) {
            continue;
        }
        closed[vi] = true;
        let (g, len) = (node.g, node.len);
        let u = Vertex(v);
        if u == goal {
            return Ok(ShortestPath {
                path: reconstruct(&nodes, idx),
                cost: g,
            });
        }
        for (d, n) in map.neighbors_with_dir(u) {
            if closed[n.index()] {
                continue;
            }
            let h = dist.raw(n);
            if h == INF {
                continue;
            }
            let ng = g + costs.step(flows, u, d, n);
            let nl = len + 1;
            if best[n.index()].is_some_and(|b| b <= (ng, nl)) {
                continue;
            }
            best[n.index()] = Some((ng, nl));
            let child = nodes.len() as u32;
            nodes.push(Node {
                v: n,
                g: ng,
                len: nl,
                parent: idx,
            });
            heap.push(Reverse((
                ng.first,
                ng.second + u64::from(h),
                nl + h,
                n.0,
                child,
            )));
        }
    }
    Err(Error::NoPath { start, goal })
}

struct FocalNode {
    node: Node,
    f_len: u32,
    open: bool,
}

impl AsRef<Node> for FocalNode {
    fn as_ref(&self) -> &Node {
        &self.node
    }
}

type FocalKey = Reverse<(u64, u64, Reverse<u32>, u32, u32)>;

struct Focal<'a> {
    params: FocalParams,
    dist: &'a DistanceTable,
    nodes: Vec<FocalNode>,
    // Live open node counts by length estimate.
    open_counts: BTreeMap<u32, usize>,
    // Open nodes above the current FOCAL threshold, by length estimate.
    waiting: BTreeMap<u32, Vec<u32>>,
    focal: BinaryHeap<FocalKey>,
    threshold: u32,
    pareto: Vec<Vec<u32>>,
}

impl Focal<'_> {
    fn key(&self, idx: u32) -> FocalKey {
        let n = &self.nodes[idx as usize].node;
        let h = u64::from(self.dist.raw(n.v));
        Reverse((n.g.first, n.g.second + h, Reverse(n.len), n.v.0, idx))
    }

    fn insert(&mut self, node: Node) {
        let f_len = node.len + self.dist.raw(node.v);
        let idx = self.nodes.len() as u32;
        self.pareto[node.v.index()].push(idx);
        self.nodes.push(FocalNode {
            node,
            f_len,
            open: true,
        });
        *self.open_counts.entry(f_len).or_default() += 1;
        if f_len <= self.threshold {
            let k = self.key(idx);
            self.focal.push(k);
        } else {
            self.waiting.entry(f_len).or_default().push(idx);
        }
    }

    fn close(&mut self, idx: u32) {
        let n = &mut self.nodes[idx as usize];
        if !n.open {
            return;
        }
        n.open = false;
        let f_len = n.f_len;
        if let Some(c) = self.open_counts.get_mut(&f_len) {
            *c -= 1;
            if *c == 0 {
                self.open_counts.remove(&f_len);
            }
        }
    }

    /// Adds a label unless an existing one dominates it; evicts labels it
    /// dominates.
    fn offer(&mut self, node: Node) {
        let v = node.v.index();
        let dominated = self.pareto[v].iter().any(|&i| {
            let o = &self.nodes[i as usize].node;
            o.g <= node.g && o.len <= node.len
        });
        if dominated {
            return;
        }
        let mut evicted = Vec::new();
        self.pareto[v].retain(|&i| {
            let o = &self.nodes[i as usize].node;
            let gone = node.g <= o.g && node.len <= o.len;
            if gone {
                evicted.push(i);
            }
            !gone
        });
        for i in evicted {
            self.close(i);
        }
        self.insert(node);
    }

    fn raise_threshold(&mut self) {
        let Some((&f_min, _)) = self.open_counts.iter().next() else {
            return;
        };
        let new_thr = self.params.threshold(f_min);
        if new_thr <= self.threshold {
            return;
        }
        let moved: Vec<u32> = self
            .waiting
            .keys()
            .copied()
            .take_while(|&f| f <= new_thr)
            .collect();
        for f in moved {
            for idx in self.waiting.remove(&f).unwrap_or_default() {
                if self.nodes[idx as usize].open {
                    let k = self.key(idx);
                    self.focal.push(k);
                }
            }
        }
        self.threshold = new_thr;
    }
}

fn focal_search(
    map: &GridMap,
    flows: &FlowMap,
    costs: EdgeCosts,
    start: Vertex,
    goal: Vertex,
    params: FocalParams,
    dist: &DistanceTable,
) -> Result<ShortestPath> {
    let mut s = Focal {
        params,
        dist,
        nodes: Vec::new(),
        open_counts: BTreeMap::new(),
        waiting: BTreeMap::new(),
        focal: BinaryHeap::new(),
        threshold: params.threshold(dist.raw(start)),
        pareto: vec![Vec::new(); map.len()],
    };
    s.insert(Node {
        v: start,
        g: TwoPartCost::ZERO,
        len: 0,
        parent: NO_PARENT,
    });

    while let Some(Reverse((_, _, _, _, idx))) = s.focal.pop() {
        if !s.nodes[idx as usize].open {
            continue;
        }
        s.close(idx);
        let (u, g, len) = {
            let n = &s.nodes[idx as usize].node;
            (n.v, n.g, n.len)
        };
        if u == goal {
            return Ok(ShortestPath {
                path: reconstruct(&s.nodes, idx),
                cost: g,
            });
        }
        for (d, n) in map.neighbors_with_dir(u) {
            if dist.raw(n) == INF {
                continue;
            }
            s.offer(Node {
                v: n,
                g: g + costs.step(flows, u, d, n),
                len: len + 1,
                parent: idx,
            });
        }
        s.raise_threshold();
    }
    Err(Error::NoPath { start, goal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::CostModel;

    #[test]
    fn zero_flow_gives_free_flow_length() {
        let map = GridMap::from_rows(&["......", ".@@@@.", "......", "..@..."]).unwrap();
        let flows = FlowMap::new(&map);
        let (s, g) = (Vertex(0), Vertex(23));
        let c_star = bfs_distances(&map, s).get(g).unwrap() as usize;
        for model in CostModel::ALL {
            for params in [
                None,
                Some(FocalParams::new(1.0).unwrap()),
                Some(FocalParams::new(2.0).unwrap()),
            ] {
                let p = sp_simple(&map, &flows, model, s, g, params).unwrap();
                if params.is_none() || params.unwrap().w() == 1.0 {
                    assert_eq!(p.moves(), c_star, "{model} {params:?}");
                } else {
                    assert!(p.moves() <= 2 * c_star);
                }
                assert_eq!(p.path[0], s);
                assert_eq!(*p.path.last().unwrap(), g);
            }
        }
    }

    #[test]
    fn start_equals_goal() {
        let map = GridMap::open(3, 3).unwrap();
        let flows = FlowMap::new(&map);
        for params in [None, Some(FocalParams::new(1.5).unwrap())] {
            let p = sp_simple(
                &map,
                &flows,
                CostModel::TwoPart,
                Vertex(4),
                Vertex(4),
                params,
            )
            .unwrap();
            assert_eq!(p.path, vec![Vertex(4)]);
            assert_eq!(p.cost, TwoPartCost::ZERO);
        }
    }

    #[test]
    fn unreachable_goal_is_error() {
        let map = GridMap::from_rows(&[".@."]).unwrap();
        let flows = FlowMap::new(&map);
        let err =
            sp_simple(&map, &flows, CostModel::TwoPart, Vertex(0), Vertex(2), None).unwrap_err();
        assert!(matches!(err, Error::NoPath { .. }));
    }

    #[test]
    fn focal_params_reject_below_one() {
        assert!(FocalParams::new(0.99).is_err());
        assert!(FocalParams::new(f64::NAN).is_err());
        assert!(FocalParams::new(1.0).is_ok());
    }

    #[test]
    fn verify_bound_examples() {
        let map = GridMap::open(5, 1).unwrap();
        let opt: Vec<Vertex> = (0..3).map(Vertex).collect();
        assert!(verify_bound(&opt, Vertex(0), Vertex(2), &map, 1.0));
        // 4 moves against C* = 2 with w = 1.5 (bound 3).
        let long = [0, 1, 2, 3, 2].map(Vertex);
        assert!(!verify_bound(&long, Vertex(0), Vertex(2), &map, 1.5));
    }

    #[test]
    fn opposing_flow_diverts_to_longer_corridor() {
        // Row 0 is a short corridor, row 2 a longer detour via rows 1-3.
        let map = GridMap::from_rows(&[
            ".....", //
            ".@@@.", //
            ".@@@.", //
            ".....",
        ])
        .unwrap();
        let (s, g) = (Vertex(0), Vertex(4));
        let mut flows = FlowMap::new(&map);
        let top: Vec<Vertex> = (0..5).map(Vertex).collect();
        let back: Vec<Vertex> = top.iter().rev().copied().collect();
        // Seven opposing traversals give p_v = 3 on the corridor cells, so
        // the top route costs 3 * 4 + 1 = 13 against 10 for the detour.
        for _ in 0..7 {
            flows.add_path(&map, &back).unwrap();
        }
        let p = sp_simple(&map, &flows, CostModel::TwoPart, s, g, None).unwrap();
        assert_eq!(p.cost.first, 0);
        assert_eq!(p.moves(), 10);
        // Free flow ignores the congestion.
        let p = sp_simple(&map, &flows, CostModel::FreeFlow, s, g, None).unwrap();
        assert_eq!(p.path, top);
        // A length bound of 1.2 * 4 forbids the detour.
        let p = sp_simple(
            &map,
            &flows,
            CostModel::TwoPart,
            s,
            g,
            Some(FocalParams::new(1.2).unwrap()),
        )
        .unwrap();
        assert_eq!(p.path, top);
    }
}
