//! Independent oracles shared by the integration tests. Nothing here calls
//! into the search, heuristic or congestion code under test.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use guided_mapf::traffic::{CostModel, FlowAccounting, FlowMap, TwoPartCost, FIXED_POINT_SCALE};
use guided_mapf::{GridMap, Vertex};
use rand::seq::SliceRandom;
use rand::Rng;

pub const UNREACHED: u32 = u32::MAX;

/// Random map with each cell blocked with probability `p_block`.
pub fn random_map<R: Rng>(rng: &mut R, w: usize, h: usize, p_block: f64) -> GridMap {
    let cells = (0..w * h).map(|_| !rng.gen_bool(p_block)).collect();
    GridMap::new(w, h, cells).unwrap()
}

/// Plain 4-neighbour adjacency computed from coordinates.
pub fn adj(map: &GridMap, v: Vertex) -> Vec<Vertex> {
    let (w, h) = (map.width() as i64, map.height() as i64);
    let (r, c) = (v.0 as i64 / w, v.0 as i64 % w);
    [(r - 1, c), (r, c + 1), (r + 1, c), (r, c - 1)]
        .into_iter()
        .filter(|&(rr, cc)| rr >= 0 && cc >= 0 && rr < h && cc < w)
        .map(|(rr, cc)| Vertex((rr * w + cc) as u32))
        .filter(|&u| map.is_traversable(u))
        .collect()
}

/// Unit-weight Dijkstra with a binary heap.
pub fn dijkstra(map: &GridMap, source: Vertex) -> Vec<u32> {
    let mut dist = vec![UNREACHED; map.len()];
    if !map.is_traversable(source) {
        return dist;
    }
    let mut heap = BinaryHeap::new();
    dist[source.index()] = 0;
    heap.push(Reverse((0u32, source.0)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u as usize] {
            continue;
        }
        for n in adj(map, Vertex(u)) {
            if d + 1 < dist[n.index()] {
                dist[n.index()] = d + 1;
                heap.push(Reverse((d + 1, n.0)));
            }
        }
    }
    dist
}

/// Random simple walk of up to `len` moves starting anywhere traversable.
pub fn random_walk<R: Rng>(rng: &mut R, map: &GridMap, len: usize) -> Vec<Vertex> {
    let open: Vec<Vertex> = (0..map.len() as u32)
        .map(Vertex)
        .filter(|&v| map.is_traversable(v))
        .collect();
    let mut path = vec![*open.choose(rng).unwrap()];
    for _ in 0..len {
        let last = *path.last().unwrap();
        let next: Vec<Vertex> = adj(map, last)
            .into_iter()
            .filter(|v| !path.contains(v))
            .collect();
        match next.choose(rng) {
            Some(&n) => path.push(n),
            None => break,
        }
    }
    path
}

/// Flows from `n` random walks.
pub fn random_flows<R: Rng>(rng: &mut R, map: &GridMap, n: usize, len: usize) -> FlowMap {
    let mut f = FlowMap::new(map);
    for _ in 0..n {
        let p = random_walk(rng, map, len);
        f.add_path(map, &p).unwrap();
    }
    f
}

/// Directed flow recomputed by scanning a path list.
pub fn count_flow(paths: &[Vec<Vertex>], u: Vertex, v: Vertex) -> u64 {
    paths
        .iter()
        .flat_map(|p| p.windows(2))
        .filter(|w| w[0] == u && w[1] == v)
        .count() as u64
}

/// Edge price written out from the closed forms.
pub fn oracle_weight(
    model: CostModel,
    accounting: FlowAccounting,
    flows: &FlowMap,
    map: &GridMap,
    u: Vertex,
    v: Vertex,
) -> TwoPartCost {
    let own = u64::from(accounting == FlowAccounting::Joining);
    let f12 = u64::from(flows.flow(map, u, v)) + own;
    let f21 = u64::from(flows.flow(map, v, u));
    let n = u64::from(flows.inflow(v)) + own;
    // ceil((n - 1) / 2), with n = 0 giving 0.
    let p = if n == 0 { 0 } else { (n - 1).div_ceil(2) };
    let c_e = f12 * f21;
    let total = f12 + f21;
    match model {
        CostModel::TwoPart => TwoPartCost::new(c_e, 1 + p),
        CostModel::TwoPartNormalized => {
            let c = if total == 0 {
                0
            } else {
                c_e * FIXED_POINT_SCALE / total
            };
            TwoPartCost::new(c, 1 + p)
        }
        CostModel::SumOvc => TwoPartCost::new(0, 1 + c_e + p),
        CostModel::SumNovc => {
            let c = if total == 0 { 0 } else { c_e.div_ceil(total) };
            TwoPartCost::new(0, 1 + c + p)
        }
        CostModel::VertexOnly => TwoPartCost::new(0, 1 + p),
        CostModel::FreeFlow => TwoPartCost::new(0, 1),
    }
}

pub fn oracle_path_cost(
    model: CostModel,
    accounting: FlowAccounting,
    flows: &FlowMap,
    map: &GridMap,
    path: &[Vertex],
) -> TwoPartCost {
    let mut c = TwoPartCost::ZERO;
    for w in path.windows(2) {
        c += oracle_weight(model, accounting, flows, map, w[0], w[1]);
    }
    c
}

/// Minimum cost over all simple paths by exhaustive DFS. Branches are cut
/// only once their partial cost already exceeds the best complete path,
/// which is exact because every edge weight is nonnegative.
pub fn brute_force_min(
    model: CostModel,
    accounting: FlowAccounting,
    flows: &FlowMap,
    map: &GridMap,
    s: Vertex,
    g: Vertex,
) -> Option<TwoPartCost> {
    fn dfs(
        ctx: &(CostModel, FlowAccounting, &FlowMap, &GridMap, Vertex),
        u: Vertex,
        cost: TwoPartCost,
        seen: &mut Vec<bool>,
        best: &mut Option<TwoPartCost>,
    ) {
        if best.is_some_and(|b| cost > b) {
            return;
        }
        if u == ctx.4 {
            *best = Some(best.map_or(cost, |b| b.min(cost)));
            return;
        }
        for n in adj(ctx.3, u) {
            if seen[n.index()] {
                continue;
            }
            seen[n.index()] = true;
            let c = cost + oracle_weight(ctx.0, ctx.1, ctx.2, ctx.3, u, n);
            dfs(ctx, n, c, seen, best);
            seen[n.index()] = false;
        }
    }
    let mut seen = vec![false; map.len()];
    seen[s.index()] = true;
    let mut best = None;
    dfs(
        &(model, accounting, flows, map, g),
        s,
        TwoPartCost::ZERO,
        &mut seen,
        &mut best,
    );
    best
}

/// Eager multi-source BFS from every path vertex; ties in `dp` keep the
/// smallest `dg`. Returns `(dp, dg)` per vertex, `UNREACHED` when cut off.
pub fn eager_guide(map: &GridMap, path: &[Vertex]) -> Vec<(u32, u32)> {
    let mut out = vec![(UNREACHED, UNREACHED); map.len()];
    let moves = path.len() as u32 - 1;
    let mut q = VecDeque::new();
    for (j, &v) in path.iter().enumerate() {
        let e = &mut out[v.index()];
        if e.0 == UNREACHED {
            q.push_back(v);
        }
        *e = (0, e.1.min(moves - j as u32));
    }
    while let Some(u) = q.pop_front() {
        let (d, g) = out[u.index()];
        for n in adj(map, u) {
            let e = &mut out[n.index()];
            if e.0 == UNREACHED {
                *e = (d + 1, g);
                q.push_back(n);
            } else if e.0 == d + 1 && g < e.1 {
                e.1 = g;
            }
        }
    }
    out
}

/// True if `path` is a walk along traversable cells with unit steps.
pub fn is_walk(map: &GridMap, path: &[Vertex]) -> bool {
    path.iter().all(|&v| map.is_traversable(v))
        && path.windows(2).all(|w| adj(map, w[0]).contains(&w[1]))
}
