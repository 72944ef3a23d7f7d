//! Directed-edge flow counts and the congestion edge weights derived from them.
//!
//! A [`FlowMap`] counts how many registered guide paths traverse each
//! directed edge. From those counts:
//!
//! * vertex congestion of `v` with `n` entering agents is `c_v = n(n-1)/2`,
//!   shared per agent as `p_v = ceil((n-1)/2)`;
//! * contraflow congestion of an undirected edge is the product of its two
//!   directed flows, `c_e = f(u->v) * f(v->u)`.
//!
//! [`edge_weight`] turns these into a lexicographic [`TwoPartCost`] under the
//! selected [`CostModel`]. [`EdgeCosts`] adds the planning view, where the
//! path being searched counts toward the flows it is priced on.

use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Dir, GridMap, Vertex};

/// Fixed-point scale used for normalized contraflow values.
pub const FIXED_POINT_SCALE: u64 = 1 << 16;

/// Lexicographic pair: contraflow units first, congestion-weighted distance
/// second. The derived `Ord` compares `first`, then `second`.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct TwoPartCost {
    pub first: u64,
    pub second: u64,
}

impl TwoPartCost {
    pub const ZERO: TwoPartCost = TwoPartCost {
        first: 0,
        second: 0,
    };

    #[inline]
    pub const fn new(first: u64, second: u64) -> Self {
        TwoPartCost { first, second }
    }
}

impl Add for TwoPartCost {
    type Output = TwoPartCost;

    #[inline]
    fn add(self, rhs: TwoPartCost) -> TwoPartCost {
        TwoPartCost {
            first: self.first + rhs.first,
            second: self.second + rhs.second,
        }
    }
}

impl AddAssign for TwoPartCost {
    #[inline]
    fn add_assign(&mut self, rhs: TwoPartCost) {
        self.first += rhs.first;
        self.second += rhs.second;
    }
}

impl std::iter::Sum for TwoPartCost {
    fn sum<I: Iterator<Item = TwoPartCost>>(iter: I) -> Self {
        iter.fold(TwoPartCost::ZERO, Add::add)
    }
}

impl fmt::Display for TwoPartCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.first, self.second)
    }
}

/// How flows are converted into edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostModel {
    /// `(c_e, 1 + p_v)`.
    #[default]
    TwoPart,
    /// `(c_e / n, 1 + p_v)` with the first part in 1/65536 units.
    TwoPartNormalized,
    /// `(0, 1 + c_e + p_v)`.
    SumOvc,
    /// `(0, 1 + ceil(c_e / n) + p_v)`.
    SumNovc,
    /// `(0, 1 + p_v)`: vertex congestion only, contraflow ignored.
    VertexOnly,
    /// `(0, 1)`: individual shortest paths.
    FreeFlow,
}

impl CostModel {
    pub const ALL: [CostModel; 6] = [
        CostModel::TwoPart,
        CostModel::TwoPartNormalized,
        CostModel::SumOvc,
        CostModel::SumNovc,
        CostModel::VertexOnly,
        CostModel::FreeFlow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostModel::TwoPart => "two-part",
            CostModel::TwoPartNormalized => "two-part-normalized",
            CostModel::SumOvc => "sum-ovc",
            CostModel::SumNovc => "sum-novc",
            CostModel::VertexOnly => "vertex-only",
            CostModel::FreeFlow => "free-flow",
        }
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CostModel::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown cost model {s:?}")))
    }
}

/// Vertex congestion of a vertex: total delay and its per-agent share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexCongestion {
    pub total: u64,
    pub per_agent: u64,
}

/// Closed form for `n` agents entering one vertex.
#[inline]
pub fn vertex_congestion_for(n: u64) -> VertexCongestion {
    if n == 0 {
        return VertexCongestion {
            total: 0,
            per_agent: 0,
        };
    }
    VertexCongestion {
        total: n * (n - 1) / 2,
        per_agent: n / 2,
    }
}

/// Normalized contraflow in fixed point: `floor(c_e * 2^16 / (f12 + f21))`,
/// or 0 when both flows are zero.
#[inline]
pub fn normalized_contraflow_for(f12: u64, f21: u64) -> u64 {
    (f12 * f21 * FIXED_POINT_SCALE)
        .checked_div(f12 + f21)
        .unwrap_or(0)
}

/// Per-directed-edge traversal counts of the registered guide paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowMap {
    // Indexed `v * 4 + dir` for the edge leaving `v` in `dir`.
    flow: Vec<u32>,
    inflow: Vec<u32>,
}

impl FlowMap {
    pub fn new(map: &GridMap) -> Self {
        FlowMap {
            flow: vec![0; map.len() * 4],
            inflow: vec![0; map.len()],
        }
    }

    /// Rebuilds flows from scratch for a set of paths.
    pub fn from_paths<'a, I>(map: &GridMap, paths: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [Vertex]>,
    {
        let mut flows = FlowMap::new(map);
        for p in paths {
            flows.add_path(map, p)?;
        }
        Ok(flows)
    }

    #[inline]
    pub fn flow_dir(&self, from: Vertex, dir: Dir) -> u32 {
        self.flow[from.index() * 4 + dir as usize]
    }

    /// Flow on the directed edge `from -> to` (0 if not adjacent).
    pub fn flow(&self, map: &GridMap, from: Vertex, to: Vertex) -> u32 {
        map.dir_between(from, to)
            .map(|d| self.flow_dir(from, d))
            .unwrap_or(0)
    }

    /// Number of path traversals entering `v`.
    #[inline]
    pub fn inflow(&self, v: Vertex) -> u32 {
        self.inflow[v.index()]
    }

    pub fn is_zero(&self) -> bool {
        self.flow.iter().all(|&f| f == 0)
    }

    fn path_dirs(map: &GridMap, path: &[Vertex]) -> Result<Vec<Dir>> {
        path.windows(2)
            .map(|w| {
                map.dir_between(w[0], w[1]).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "path step {} -> {} is not an edge",
                        w[0].0, w[1].0
                    ))
                })
            })
            .collect()
    }

    /// Increments the flow of every directed edge along `path`.
    pub fn add_path(&mut self, map: &GridMap, path: &[Vertex]) -> Result<()> {
        let dirs = Self::path_dirs(map, path)?;
        for (w, d) in path.windows(2).zip(dirs) {
            self.flow[w[0].index() * 4 + d as usize] += 1;
            self.inflow[w[1].index()] += 1;
        }
        Ok(())
    }

    /// Decrements the flow of every directed edge along `path`.
    ///
    /// Fails without modifying anything if a flow would drop below zero.
    pub fn remove_path(&mut self, map: &GridMap, path: &[Vertex]) -> Result<()> {
        let dirs = Self::path_dirs(map, path)?;
        // Repeated traversals of the same edge must all be covered.
        let mut needed: Vec<(usize, Vertex, Vertex)> = path
            .windows(2)
            .zip(&dirs)
            .map(|(w, &d)| (w[0].index() * 4 + d as usize, w[0], w[1]))
            .collect();
        needed.sort_unstable_by_key(|e| e.0);
        for group in needed.chunk_by(|a, b| a.0 == b.0) {
            if (self.flow[group[0].0] as usize) < group.len() {
                return Err(Error::FlowUnderflow {
                    from: group[0].1,
                    to: group[0].2,
                });
            }
        }
        for (w, d) in path.windows(2).zip(dirs) {
            self.flow[w[0].index() * 4 + d as usize] -= 1;
            self.inflow[w[1].index()] -= 1;
        }
        Ok(())
    }

    /// CSV dump of nonzero directed edges, `u,v,flow`.
    pub fn to_csv(&self, map: &GridMap) -> String {
        let mut out = String::from("u,v,flow\n");
        for u in map.traversable_vertices() {
            for (d, v) in map.neighbors_with_dir(u) {
                let f = self.flow_dir(u, d);
                if f > 0 {
                    out.push_str(&format!("{},{},{}\n", u.0, v.0, f));
                }
            }
        }
        out
    }
}

/// Vertex congestion `(c_v, p_v)` of `v` under the current flows.
#[inline]
pub fn vertex_congestion(flows: &FlowMap, v: Vertex) -> VertexCongestion {
    vertex_congestion_for(u64::from(flows.inflow(v)))
}

/// Contraflow congestion of the undirected edge `{u, v}`.
pub fn contraflow_congestion(flows: &FlowMap, map: &GridMap, u: Vertex, v: Vertex) -> u64 {
    u64::from(flows.flow(map, u, v)) * u64::from(flows.flow(map, v, u))
}

/// Normalized contraflow of `{u, v}` in units of `1 / FIXED_POINT_SCALE`.
pub fn normalized_contraflow(flows: &FlowMap, map: &GridMap, u: Vertex, v: Vertex) -> u64 {
    normalized_contraflow_for(
        u64::from(flows.flow(map, u, v)),
        u64::from(flows.flow(map, v, u)),
    )
}

/// Weight of an edge whose forward flow is `fwd`, backward flow `back`, and
/// whose head vertex has `inflow` entering paths.
pub fn weight_from_counts(model: CostModel, fwd: u64, back: u64, inflow: u64) -> TwoPartCost {
    let p_v = vertex_congestion_for(inflow).per_agent;
    match model {
        CostModel::TwoPart => TwoPartCost::new(fwd * back, 1 + p_v),
        CostModel::TwoPartNormalized => {
            TwoPartCost::new(normalized_contraflow_for(fwd, back), 1 + p_v)
        }
        CostModel::SumOvc => TwoPartCost::new(0, 1 + fwd * back + p_v),
        CostModel::SumNovc => {
            let n = fwd + back;
            let c_hat = if n == 0 { 0 } else { (fwd * back).div_ceil(n) };
            TwoPartCost::new(0, 1 + c_hat + p_v)
        }
        CostModel::VertexOnly => TwoPartCost::new(0, 1 + p_v),
        CostModel::FreeFlow => TwoPartCost::new(0, 1),
    }
}

/// Weight of the directed edge leaving `from` in direction `dir`, evaluated
/// on the registered flows as they are.
///
/// `to` must be the neighbor of `from` in `dir`.
#[inline]
pub fn edge_weight(
    model: CostModel,
    flows: &FlowMap,
    from: Vertex,
    dir: Dir,
    to: Vertex,
) -> TwoPartCost {
    if model == CostModel::FreeFlow {
        return TwoPartCost::new(0, 1);
    }
    weight_from_counts(
        model,
        u64::from(flows.flow_dir(from, dir)),
        u64::from(flows.flow_dir(to, dir.opposite())),
        u64::from(flows.inflow(to)),
    )
}

/// Whether a path being planned sees its own traversal in the flows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowAccounting {
    /// Each step is priced as if the planned path were already registered:
    /// forward flow and head inflow count the planning agent. The cost of a
    /// simple path then equals its [`path_cost`] right after registration.
    #[default]
    Joining,
    /// Steps are priced on the other agents' flows only.
    Others,
}

impl FlowAccounting {
    pub fn name(self) -> &'static str {
        match self {
            FlowAccounting::Joining => "joining",
            FlowAccounting::Others => "others",
        }
    }
}

impl FromStr for FlowAccounting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "joining" => Ok(FlowAccounting::Joining),
            "others" => Ok(FlowAccounting::Others),
            _ => Err(Error::InvalidInput(format!(
                "unknown flow accounting '{s}'"
            ))),
        }
    }
}

/// Cost model plus flow accounting: everything a search needs to price an edge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeCosts {
    pub model: CostModel,
    pub accounting: FlowAccounting,
}

impl EdgeCosts {
    pub fn new(model: CostModel, accounting: FlowAccounting) -> Self {
        EdgeCosts { model, accounting }
    }

    /// Weight of the step `from -> to` (in direction `dir`) for a path being planned.
    #[inline]
    pub fn step(self, flows: &FlowMap, from: Vertex, dir: Dir, to: Vertex) -> TwoPartCost {
        match self.accounting {
            FlowAccounting::Others => edge_weight(self.model, flows, from, dir, to),
            FlowAccounting::Joining => {
                if self.model == CostModel::FreeFlow {
                    return TwoPartCost::new(0, 1);
                }
                weight_from_counts(
                    self.model,
                    u64::from(flows.flow_dir(from, dir)) + 1,
                    u64::from(flows.flow_dir(to, dir.opposite())),
                    u64::from(flows.inflow(to)) + 1,
                )
            }
        }
    }

    /// Planning cost of a whole path against `flows` (which must not contain it).
    pub fn path_cost(self, flows: &FlowMap, map: &GridMap, path: &[Vertex]) -> TwoPartCost {
        path.windows(2)
            .map(|w| {
                let d = map
                    .dir_between(w[0], w[1])
                    .expect("path steps must be edges");
                self.step(flows, w[0], d, w[1])
            })
            .sum()
    }
}

/// A bare model plans with [`FlowAccounting::Joining`].
impl From<CostModel> for EdgeCosts {
    fn from(model: CostModel) -> Self {
        EdgeCosts::new(model, FlowAccounting::Joining)
    }
}

/// Weight of the directed edge `from -> to`, looked up by vertices.
pub fn edge_weight_between(
    model: CostModel,
    flows: &FlowMap,
    map: &GridMap,
    from: Vertex,
    to: Vertex,
) -> Option<TwoPartCost> {
    map.dir_between(from, to)
        .map(|d| edge_weight(model, flows, from, d, to))
}

/// Sum of edge weights along a path.
pub fn path_cost(model: CostModel, flows: &FlowMap, map: &GridMap, path: &[Vertex]) -> TwoPartCost {
    path.windows(2)
        .map(|w| {
            edge_weight_between(model, flows, map, w[0], w[1]).expect("path steps must be edges")
        })
        .sum()
}
