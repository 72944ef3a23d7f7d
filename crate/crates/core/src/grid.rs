//! Grid maps, scenarios and free-flow distance tables.
//!
//! Maps are 4-connected. Cells are indexed row-major, so a [`Vertex`] with
//! index `i` sits at row `i / width` and column `i % width`. The movingai
//! `.map` and `.scen` formats are supported for input and output; octile
//! (diagonal) moves implied by the format are ignored.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};

/// Sentinel for "unreachable" in distance tables.
pub const INF: u32 = u32::MAX;

const NO_EDGE: u32 = u32::MAX;

/// A cell of a [`GridMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Vertex(pub u32);

impl Vertex {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Grid move directions, in the fixed tie-breaking order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::North, Dir::East, Dir::South, Dir::West];

    #[inline]
    pub fn opposite(self) -> Dir {
        match self {
            Dir::North => Dir::South,
            Dir::East => Dir::West,
            Dir::South => Dir::North,
            Dir::West => Dir::East,
        }
    }

    #[inline]
    pub fn from_index(i: usize) -> Dir {
        Dir::ALL[i]
    }
}

/// A 4-connected grid with traversable and blocked cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    traversable: Vec<bool>,
    adj: Vec<[u32; 4]>,
}

impl GridMap {
    /// Builds a map from a row-major traversability mask.
    pub fn new(width: usize, height: usize, traversable: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "map dimensions must be positive, got {width}x{height}"
            )));
        }
        if traversable.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "expected {} cells, got {}",
                width * height,
                traversable.len()
            )));
        }
        if width * height >= NO_EDGE as usize {
            return Err(Error::InvalidInput("map too large".into()));
        }
        let mut adj = vec![[NO_EDGE; 4]; width * height];
        for row in 0..height {
            for col in 0..width {
                let v = row * width + col;
                if !traversable[v] {
                    continue;
                }
                let cand = [
                    (row > 0).then(|| v - width),
                    (col + 1 < width).then(|| v + 1),
                    (row + 1 < height).then(|| v + width),
                    (col > 0).then(|| v - 1),
                ];
                for (d, n) in cand.into_iter().enumerate() {
                    if let Some(n) = n {
                        if traversable[n] {
                            adj[v][d] = n as u32;
                        }
                    }
                }
            }
        }
        Ok(GridMap {
            width,
            height,
            traversable,
            adj,
        })
    }

    /// An obstacle-free map.
    pub fn open(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width * height])
    }

    /// Builds a map from rows of movingai cell characters.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let height = rows.len();
        let width = rows
            .first()
            .map(|r| r.as_ref().chars().count())
            .unwrap_or(0);
        let mut cells = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            let found = row.chars().count();
            if found != width {
                return Err(ParseError::RowLength {
                    line: i + 1,
                    expected: width,
                    found,
                }
                .into());
            }
            for ch in row.chars() {
                cells.push(cell_from_char(ch).ok_or(ParseError::UnknownCell { line: i + 1, ch })?);
            }
        }
        Self::new(width, height, cells)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Total number of cells, traversable or not.
    #[inline]
    pub fn len(&self) -> usize {
        self.traversable.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.traversable.is_empty()
    }

    #[inline]
    pub fn is_traversable(&self, v: Vertex) -> bool {
        self.traversable.get(v.index()).copied().unwrap_or(false)
    }

    pub fn traversable_mask(&self) -> &[bool] {
        &self.traversable
    }

    pub fn traversable_vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.traversable
            .iter()
            .enumerate()
            .filter(|(_, &t)| t)
            .map(|(i, _)| Vertex(i as u32))
    }

    pub fn num_traversable(&self) -> usize {
        self.traversable.iter().filter(|&&t| t).count()
    }

    /// `(row, col)` of a vertex.
    #[inline]
    pub fn coords(&self, v: Vertex) -> (usize, usize) {
        (v.index() / self.width, v.index() % self.width)
    }

    #[inline]
    pub fn vertex_at(&self, row: usize, col: usize) -> Option<Vertex> {
        (row < self.height && col < self.width).then(|| Vertex((row * self.width + col) as u32))
    }

    /// The traversable neighbor of `v` in direction `dir`, if any.
    #[inline]
    pub fn neighbor(&self, v: Vertex, dir: Dir) -> Option<Vertex> {
        let n = self.adj[v.index()][dir as usize];
        (n != NO_EDGE).then_some(Vertex(n))
    }

    /// Traversable 4-neighbors of `v` in the order N, E, S, W. `v` itself is
    /// not included.
    #[inline]
    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.adj[v.index()]
            .iter()
            .filter(|&&n| n != NO_EDGE)
            .map(|&n| Vertex(n))
    }

    /// Neighbors paired with the direction that reaches them.
    #[inline]
    pub fn neighbors_with_dir(&self, v: Vertex) -> impl Iterator<Item = (Dir, Vertex)> + '_ {
        self.adj[v.index()]
            .iter()
            .enumerate()
            .filter(|(_, &n)| n != NO_EDGE)
            .map(|(d, &n)| (Dir::from_index(d), Vertex(n)))
    }

    /// Direction of the move `from -> to`, if the two cells are adjacent.
    #[inline]
    pub fn dir_between(&self, from: Vertex, to: Vertex) -> Option<Dir> {
        self.adj[from.index()]
            .iter()
            .position(|&n| n == to.0)
            .map(Dir::from_index)
    }

    #[inline]
    pub fn adjacent(&self, a: Vertex, b: Vertex) -> bool {
        self.dir_between(a, b).is_some()
    }

    /// True iff every traversable cell is reachable from every other.
    pub fn is_connected(&self) -> bool {
        match self.traversable_vertices().next() {
            None => true,
            Some(v) => {
                let table = bfs_distances(self, v);
                self.traversable_vertices().all(|u| table.get(u).is_some())
            }
        }
    }

    /// Parses a movingai `.map` file.
    pub fn parse_map(text: &str) -> Result<Self> {
        parse_map(text)
    }

    /// Serializes to the movingai `.map` format (`.` and `@` cells).
    pub fn to_map_string(&self) -> String {
        let mut out = String::with_capacity(self.len() + self.height + 40);
        let _ = writeln!(out, "type octile");
        let _ = writeln!(out, "height {}", self.height);
        let _ = writeln!(out, "width {}", self.width);
        let _ = writeln!(out, "map");
        for row in self.traversable.chunks(self.width) {
            out.extend(row.iter().map(|&t| if t { '.' } else { '@' }));
            out.push('\n');
        }
        out
    }
}

fn cell_from_char(ch: char) -> Option<bool> {
    match ch {
        '.' | 'G' => Some(true),
        '@' | 'T' | 'O' => Some(false),
        _ => None,
    }
}

/// Parses a movingai `.map` file.
pub fn parse_map(text: &str) -> Result<GridMap> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).enumerate();
    let mut height = None;
    let mut width = None;
    let mut saw_type = false;
    let mut map_line = None;

    for (i, line) in lines.by_ref() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let key = parts.next().unwrap_or_default();
        match key {
            "type" => saw_type = true,
            "height" | "width" => {
                let value: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .filter(|&n| n > 0)
                    .ok_or_else(|| ParseError::Header {
                        line: line_no,
                        msg: format!("expected positive integer after '{key}'"),
                    })?;
                if key == "height" {
                    height = Some(value);
                } else {
                    width = Some(value);
                }
            }
            "map" => {
                map_line = Some(line_no);
                break;
            }
            _ => {
                return Err(ParseError::Header {
                    line: line_no,
                    msg: format!("unexpected header line {trimmed:?}"),
                }
                .into())
            }
        }
    }

    let map_line = map_line.ok_or(ParseError::Header {
        line: 1,
        msg: "missing 'map' line".into(),
    })?;
    let header_err = |msg: &str| ParseError::Header {
        line: map_line,
        msg: msg.into(),
    };
    if !saw_type {
        return Err(header_err("missing 'type' line").into());
    }
    let height = height.ok_or_else(|| header_err("missing 'height' line"))?;
    let width = width.ok_or_else(|| header_err("missing 'width' line"))?;

    let mut cells = Vec::with_capacity(width * height);
    let mut rows = 0;
    let mut last_line = map_line;
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        last_line = line_no;
        if rows == height {
            return Err(ParseError::RowCount {
                line: line_no,
                expected: height,
                found: rows + 1,
            }
            .into());
        }
        let found = line.chars().count();
        if found != width {
            return Err(ParseError::RowLength {
                line: line_no,
                expected: width,
                found,
            }
            .into());
        }
        for ch in line.chars() {
            cells.push(cell_from_char(ch).ok_or(ParseError::UnknownCell { line: line_no, ch })?);
        }
        rows += 1;
    }
    if rows != height {
        return Err(ParseError::RowCount {
            line: last_line,
            expected: height,
            found: rows,
        }
        .into());
    }
    GridMap::new(width, height, cells)
}

/// Agent start and goal locations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub starts: Vec<Vertex>,
    pub goals: Vec<Vertex>,
}

impl Scenario {
    pub fn new(starts: Vec<Vertex>, goals: Vec<Vertex>) -> Self {
        Scenario { starts, goals }
    }

    pub fn num_agents(&self) -> usize {
        self.starts.len()
    }

    /// Checks that starts are distinct and every location is traversable.
    pub fn validate(&self, map: &GridMap) -> Result<()> {
        if self.starts.len() != self.goals.len() {
            return Err(Error::InvalidInput(format!(
                "{} starts but {} goals",
                self.starts.len(),
                self.goals.len()
            )));
        }
        let mut seen = vec![false; map.len()];
        for (a, (&s, &g)) in self.starts.iter().zip(&self.goals).enumerate() {
            for v in [s, g] {
                if !map.is_traversable(v) {
                    return Err(Error::InvalidInput(format!(
                        "agent {a}: location {} is not traversable",
                        v.0
                    )));
                }
            }
            if std::mem::replace(&mut seen[s.index()], true) {
                return Err(Error::InvalidInput(format!(
                    "agent {a}: start {} is shared with another agent",
                    s.0
                )));
            }
        }
        Ok(())
    }

    /// Parses a movingai `.scen` file against `map`. Coordinates are
    /// `(x = column, y = row)`.
    pub fn parse_scen(text: &str, map: &GridMap) -> Result<Self> {
        let mut starts = Vec::new();
        let mut goals = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with("version") {
                continue;
            }
            let fields: Vec<&str> = if line.contains('\t') {
                line.split('\t').collect()
            } else {
                line.split_whitespace().collect()
            };
            if fields.len() < 8 {
                return Err(ParseError::Malformed {
                    line: line_no,
                    msg: format!("expected at least 8 fields, found {}", fields.len()),
                }
                .into());
            }
            let num = |idx: usize| -> Result<usize> {
                fields[idx].trim().parse::<usize>().map_err(|_| {
                    ParseError::Malformed {
                        line: line_no,
                        msg: format!("field {} is not a non-negative integer", idx + 1),
                    }
                    .into()
                })
            };
            let (w, h) = (num(2)?, num(3)?);
            if w != map.width() || h != map.height() {
                return Err(ParseError::Malformed {
                    line: line_no,
                    msg: format!(
                        "scenario is for a {w}x{h} map, map is {}x{}",
                        map.width(),
                        map.height()
                    ),
                }
                .into());
            }
            let at = |x: usize, y: usize| -> Result<Vertex> {
                map.vertex_at(y, x).ok_or_else(|| {
                    ParseError::Malformed {
                        line: line_no,
                        msg: format!("coordinate ({x}, {y}) outside the map"),
                    }
                    .into()
                })
            };
            starts.push(at(num(4)?, num(5)?)?);
            goals.push(at(num(6)?, num(7)?)?);
        }
        let scen = Scenario { starts, goals };
        scen.validate(map)?;
        Ok(scen)
    }

    /// Writes a movingai `.scen` file. The `optimal` column holds the
    /// 4-connected free-flow distance.
    pub fn to_scen_string(&self, map: &GridMap, map_name: &str) -> String {
        let mut out = String::from("version 1\n");
        for (&s, &g) in self.starts.iter().zip(&self.goals) {
            let (sy, sx) = map.coords(s);
            let (gy, gx) = map.coords(g);
            let opt = bfs_distances(map, s).get(g).map(f64::from).unwrap_or(-1.0);
            let _ = writeln!(
                out,
                "0\t{map_name}\t{}\t{}\t{sx}\t{sy}\t{gx}\t{gy}\t{opt:.8}",
                map.width(),
                map.height()
            );
        }
        out
    }
}

/// Free-flow (unit cost) distances from a single source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    source: Vertex,
    dist: Vec<u32>,
}

impl DistanceTable {
    pub fn source(&self) -> Vertex {
        self.source
    }

    /// Distance to `v`, or `None` when unreachable.
    #[inline]
    pub fn get(&self, v: Vertex) -> Option<u32> {
        let d = self.dist[v.index()];
        (d != INF).then_some(d)
    }

    /// Raw distance with [`INF`] for unreachable cells.
    #[inline]
    pub fn raw(&self, v: Vertex) -> u32 {
        self.dist[v.index()]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.dist
    }
}

/// Breadth-first distances from `source` over traversable cells.
pub fn bfs_distances(map: &GridMap, source: Vertex) -> DistanceTable {
    let mut dist = vec![INF; map.len()];
    let mut queue = VecDeque::new();
    if map.is_traversable(source) {
        dist[source.index()] = 0;
        queue.push_back(source);
    }
    while let Some(u) = queue.pop_front() {
        let du = dist[u.index()];
        for n in map.neighbors(u) {
            if dist[n.index()] == INF {
                dist[n.index()] = du + 1;
                queue.push_back(n);
            }
        }
    }
    DistanceTable { source, dist }
}

/// Memoized goal-rooted distance tables.
#[derive(Debug, Default, Clone)]
pub struct DistanceCache {
    tables: HashMap<Vertex, Arc<DistanceTable>>,
}

impl DistanceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, map: &GridMap, goal: Vertex) -> Arc<DistanceTable> {
        self.tables
            .entry(goal)
            .or_insert_with(|| Arc::new(bfs_distances(map, goal)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}
