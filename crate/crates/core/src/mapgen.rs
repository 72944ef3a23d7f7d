//! Seeded generators for four map archetypes plus random scenarios.
//!
//! The layouts approximate the benchmark families used for lifelong MAPF:
//!
//! - `Warehouse`: 2×8 shelf blocks separated by single-width aisles inside
//!   an open two-cell margin.
//! - `Sortation`: a field of 1×1 pillars on every other cell, leaving
//!   one-cell lanes, inside an open margin sized to a target traversable
//!   fraction.
//! - `Room`: 7×7 rooms on a period-8 grid joined by single-cell doors.
//! - `Game`: cellular-automata caves trimmed to one component.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridMap, Scenario, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Archetype {
    Warehouse,
    Sortation,
    Room,
    Game,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [
        Archetype::Warehouse,
        Archetype::Sortation,
        Archetype::Room,
        Archetype::Game,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::Warehouse => "warehouse",
            Archetype::Sortation => "sortation",
            Archetype::Room => "room",
            Archetype::Game => "game",
        }
    }

    /// Traversable fraction the generator aims for, if it has one. Warehouse
    /// layouts are fully determined by their block structure.
    pub fn default_target(self) -> Option<f64> {
        match self {
            Archetype::Warehouse => None,
            Archetype::Sortation => Some(0.92),
            Archetype::Room => Some(0.79),
            Archetype::Game => Some(0.55),
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Archetype::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown archetype '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub archetype: Archetype,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Overrides [`Archetype::default_target`]; ignored by `Warehouse`.
    pub target_fraction: Option<f64>,
}

impl MapSpec {
    pub fn new(archetype: Archetype, width: usize, height: usize, seed: u64) -> Self {
        MapSpec {
            archetype,
            width,
            height,
            seed,
            target_fraction: None,
        }
    }

    pub fn target(&self) -> Option<f64> {
        self.target_fraction.or(self.archetype.default_target())
    }

    /// Short name usable in file names and CSV rows.
    pub fn label(&self) -> String {
        format!(
            "{}-{}x{}-{}",
            self.archetype, self.width, self.height, self.seed
        )
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}x{}:{}",
            self.archetype, self.width, self.height, self.seed
        )
    }
}

/// Parses `archetype:WxH:seed`.
impl FromStr for MapSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("expected archetype:WxH:seed, got '{s}'"));
        let mut parts = s.split(':');
        let (Some(a), Some(dims), Some(seed), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        let (w, h) = dims.split_once(['x', 'X']).ok_or_else(bad)?;
        Ok(MapSpec::new(
            a.parse()?,
            w.trim().parse().map_err(|_| bad())?,
            h.trim().parse().map_err(|_| bad())?,
            seed.trim().parse().map_err(|_| bad())?,
        ))
    }
}

/// Generates a connected map for `spec`.
pub fn generate(spec: &MapSpec) -> Result<GridMap> {
    if spec.width < 8 || spec.height < 8 {
        return Err(Error::Generation(format!(
            "map must be at least 8x8, got {}x{}",
            spec.width, spec.height
        )));
    }
    if let Some(t) = spec.target_fraction {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Generation(format!(
                "target fraction {t} outside (0, 1]"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width, spec.height);
    let cells = match spec.archetype {
        Archetype::Warehouse => warehouse(w, h),
        Archetype::Sortation => sortation(w, h, spec.target().unwrap_or(0.92)),
        Archetype::Room => room(w, h, &mut rng),
        Archetype::Game => game(w, h, spec.target().unwrap_or(0.55), &mut rng),
    };
    let map = GridMap::new(w, h, cells)?;
    if map.num_traversable() == 0 || !map.is_connected() {
        return Err(Error::Generation(format!(
            "{spec} produced a disconnected map"
        )));
    }
    Ok(map)
}

fn warehouse(w: usize, h: usize) -> Vec<bool> {
    const MARGIN: usize = 2;
    let mut cells = vec![true; w * h];
    for r in MARGIN..h - MARGIN {
        let rr = r - MARGIN;
        if rr.is_multiple_of(3) {
            continue;
        }
        for c in MARGIN..w - MARGIN {
            if (c - MARGIN) % 9 != 8 {
                cells[r * w + c] = false;
            }
        }
    }
    cells
}

fn sortation(w: usize, h: usize, target: f64) -> Vec<bool> {
    // Pillars every other cell leave one-cell lanes; the open margin around
    // the field grows until the traversable fraction is closest to target.
    let field = |mr: usize| {
        let mc = (mr * w / h).max(1);
        let mut cells = vec![true; w * h];
        for r in (mr..h - mr).step_by(2) {
            for c in (mc..w - mc).step_by(2) {
                cells[r * w + c] = false;
            }
        }
        cells
    };
    let fraction =
        |cells: &[bool]| cells.iter().filter(|&&t| t).count() as f64 / cells.len() as f64;
    (1..h / 2)
        .map(field)
        .min_by(|a, b| {
            (fraction(a) - target)
                .abs()
                .total_cmp(&(fraction(b) - target).abs())
        })
        .expect("height of at least 8 leaves a margin choice")
}

fn room(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    const PERIOD: usize = 8;
    let mut cells = vec![true; w * h];
    for r in 0..h {
        for c in 0..w {
            if r % PERIOD == PERIOD - 1 || c % PERIOD == PERIOD - 1 {
                cells[r * w + c] = false;
            }
        }
    }
    // Rooms are the maximal blocks between wall lines; edge rooms may be cut
    // short by the map boundary.
    let span = |n: usize| -> Vec<(usize, usize)> {
        (0..n.div_ceil(PERIOD))
            .map(|i| (i * PERIOD, ((i + 1) * PERIOD - 1).min(n)))
            .filter(|(a, b)| a < b)
            .collect()
    };
    let rows = span(h);
    let cols = span(w);
    let id = |i: usize, j: usize| i * cols.len() + j;

    // Each candidate door: (room a, room b, cells the door may occupy).
    let mut walls: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for (i, &(r0, r1)) in rows.iter().enumerate() {
        for (j, &(c0, c1)) in cols.iter().enumerate() {
            if j + 1 < cols.len() {
                let wc = c1;
                walls.push((
                    id(i, j),
                    id(i, j + 1),
                    (r0..r1).map(|r| r * w + wc).collect(),
                ));
            }
            if i + 1 < rows.len() {
                let wr = r1;
                walls.push((
                    id(i, j),
                    id(i + 1, j),
                    (c0..c1).map(|c| wr * w + c).collect(),
                ));
            }
        }
    }
    walls.shuffle(rng);
    let mut uf = UnionFind::new(rows.len() * cols.len());
    let mut extra = Vec::new();
    for (a, b, slots) in walls {
        let door = *slots.choose(rng).expect("wall segments are nonempty");
        if uf.union(a, b) {
            cells[door] = true;
        } else {
            extra.push(door);
        }
    }
    for door in extra {
        if rng.gen_bool(0.66) {
            cells[door] = true;
        }
    }
    cells
}

fn game(w: usize, h: usize, target: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut cells: Vec<bool> = (0..w * h)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            let border = r == 0 || c == 0 || r == h - 1 || c == w - 1;
            !border && rng.gen_bool(target.clamp(0.05, 0.95))
        })
        .collect();
    for _ in 0..4 {
        let prev = cells.clone();
        for r in 1..h - 1 {
            for c in 1..w - 1 {
                let mut walls = 0;
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if (dr, dc) != (0, 0)
                            && !prev[(r as i64 + dr) as usize * w + (c as i64 + dc) as usize]
                        {
                            walls += 1;
                        }
                    }
                }
                cells[r * w + c] = match walls {
                    0..=3 => true,
                    4 => prev[r * w + c],
                    _ => false,
                };
            }
        }
    }
    keep_largest_component(&mut cells, w, h);
    if !cells.iter().any(|&t| t) {
        // Small maps can erode completely; regrow from the centre.
        cells[(h / 2) * w + w / 2] = true;
    }
    adjust_fraction(&mut cells, w, h, target, rng);
    cells
}

fn neighbors4(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (r, c) = (i / w, i % w);
    [
        (r > 0).then(|| i - w),
        (c + 1 < w).then(|| i + 1),
        (r + 1 < h).then(|| i + w),
        (c > 0).then(|| i - 1),
    ]
    .into_iter()
    .flatten()
}

fn keep_largest_component(cells: &mut [bool], w: usize, h: usize) {
    let mut comp = vec![usize::MAX; cells.len()];
    let mut sizes = Vec::new();
    for s in 0..cells.len() {
        if !cells[s] || comp[s] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        let mut q = VecDeque::from([s]);
        comp[s] = id;
        while let Some(u) = q.pop_front() {
            size += 1;
            for v in neighbors4(u, w, h) {
                if cells[v] && comp[v] == usize::MAX {
                    comp[v] = id;
                    q.push_back(v);
                }
            }
        }
        sizes.push(size);
    }
    let Some(best) = (0..sizes.len()).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))) else {
        return;
    };
    for (c, &id) in cells.iter_mut().zip(&comp) {
        if id != best {
            *c = false;
        }
    }
}

/// True if closing `i` cannot disconnect its open 4-neighbors: they stay
/// linked through open cells of the surrounding 3×3 ring.
fn is_simple(cells: &[bool], i: usize, w: usize, h: usize) -> bool {
    let (r, c) = (i / w, i % w);
    // Ring in clockwise order starting at the north cell.
    const RING: [(i64, i64); 8] = [
        (-1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
        (1, 0),
        (1, -1),
        (0, -1),
        (-1, -1),
    ];
    let open = |k: usize| {
        let (dr, dc) = RING[k % 8];
        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
        rr >= 0
            && cc >= 0
            && (rr as usize) < h
            && (cc as usize) < w
            && cells[rr as usize * w + cc as usize]
    };
    let orth: Vec<usize> = (0..8).step_by(2).filter(|&k| open(k)).collect();
    if orth.is_empty() {
        return false;
    }
    // Walk the ring; corners only bridge two orthogonal cells when open.
    let mut groups = 0;
    for &k in &orth {
        let prev = (k + 6) % 8;
        let linked = open(prev) && open((k + 7) % 8);
        if !linked {
            groups += 1;
        }
    }
    groups == 1 || (groups == 0 && orth.len() == 4)
}

fn adjust_fraction(cells: &mut [bool], w: usize, h: usize, target: f64, rng: &mut ChaCha8Rng) {
    let n = cells.len() as f64;
    let want = (target * n).round() as usize;
    let mut open = cells.iter().filter(|&&t| t).count();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    while open < want {
        order.shuffle(rng);
        let before = open;
        for &i in &order {
            if open >= want {
                break;
            }
            let (r, c) = (i / w, i % w);
            let interior = r > 0 && c > 0 && r + 1 < h && c + 1 < w;
            if !cells[i] && interior && neighbors4(i, w, h).any(|v| cells[v]) {
                cells[i] = true;
                open += 1;
            }
        }
        if open == before {
            break;
        }
    }
    while open > want && open > 1 {
        order.shuffle(rng);
        let before = open;
        for &i in &order {
            if open <= want {
                break;
            }
            if cells[i] && is_simple(cells, i, w, h) {
                cells[i] = false;
                open -= 1;
            }
        }
        if open == before {
            break;
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Samples `k` distinct starts and `k` distinct goals uniformly.
pub fn generate_scenario(map: &GridMap, k: usize, seed: u64) -> Result<Scenario> {
    let n = map.num_traversable();
    if k > n {
        return Err(Error::InvalidInput(format!(
            "{k} agents exceed {n} traversable cells"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<Vertex> = map.traversable_vertices().choose_multiple(&mut rng, k);
    starts.shuffle(&mut rng);
    let mut goals: Vec<Vertex> = map.traversable_vertices().choose_multiple(&mut rng, k);
    goals.shuffle(&mut rng);
    Ok(Scenario::new(starts, goals))
}
