use serde::{Deserialize, Serialize};

use crate::grid::{GridMap, Vertex, INF};

/// `(dp, dg)`: free-flow distance to the guide path, then the remaining
/// on-path distance to the goal from the attachment point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GuideValue {
    pub dp: u32,
    pub dg: u32,
}

/// Lazily expanded multi-source backward BFS rooted at every vertex of a
/// guide path.
///
/// Expansion proceeds one full layer at a time, so a vertex's value is final
/// as soon as it is cached: every vertex in layer `k + 1` has seen all of its
/// layer-`k` parents and keeps the smallest `dg` among them.
#[derive(Debug, Clone)]
pub struct GuideHeuristic {
    dp: Vec<u32>,
    dg: Vec<u32>,
    frontier: Vec<Vertex>,
    depth: u32,
}

impl GuideHeuristic {
    /// Seeds layer 0 with the path vertices; `path[j]` gets `dg = len - j`
    /// where `len` is the number of moves.
    pub fn new(map: &GridMap, path: &[Vertex]) -> Self {
        let mut dp = vec![INF; map.len()];
        let mut dg = vec![INF; map.len()];
        let mut frontier = Vec::with_capacity(path.len());
        let moves = path.len().saturating_sub(1) as u32;
        for (j, &v) in path.iter().enumerate() {
            let rem = moves - j as u32;
            if dp[v.index()] == INF {
                dp[v.index()] = 0;
                dg[v.index()] = rem;
                frontier.push(v);
            } else {
                dg[v.index()] = dg[v.index()].min(rem);
            }
        }
        GuideHeuristic {
            dp,
            dg,
            frontier,
            depth: 0,
        }
    }

    /// Value already computed for `v`, without expanding.
    #[inline]
    pub fn cached(&self, v: Vertex) -> Option<GuideValue> {
        let dp = self.dp[v.index()];
        (dp != INF).then(|| GuideValue {
            dp,
            dg: self.dg[v.index()],
        })
    }

    /// Value for `v`, resuming the BFS until `v` is reached. `None` means
    /// `v` is not connected to the path.
    pub fn query(&mut self, map: &GridMap, v: Vertex) -> Option<GuideValue> {
        while self.dp[v.index()] == INF && !self.frontier.is_empty() {
            self.expand_layer(map);
        }
        self.cached(v)
    }

    /// Number of completed BFS layers beyond the path itself.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn is_exhausted(&self) -> bool {
        self.frontier.is_empty()
    }

    fn expand_layer(&mut self, map: &GridMap) {
        let next_dp = self.depth + 1;
        let mut next = Vec::new();
        for &u in &self.frontier {
            let du = self.dg[u.index()];
            for n in map.neighbors(u) {
                let ni = n.index();
                if self.dp[ni] == INF {
                    self.dp[ni] = next_dp;
                    self.dg[ni] = du;
                    next.push(n);
                } else if self.dp[ni] == next_dp && du < self.dg[ni] {
                    self.dg[ni] = du;
                }
            }
        }
        self.frontier = next;
        self.depth = next_dp;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_path_values() {
        let map = GridMap::open(5, 3).unwrap();
        let path: Vec<Vertex> = (5..10).map(Vertex).collect();
        let mut h = GuideHeuristic::new(&map, &path);
        for (j, &v) in path.iter().enumerate() {
            assert_eq!(
                h.query(&map, v),
                Some(GuideValue {
                    dp: 0,
                    dg: 4 - j as u32
                })
            );
        }
    }

    #[test]
    fn single_attachment() {
        let map = GridMap::from_rows(&["@.@", "...", "@@@"]).unwrap();
        let path = [3, 4, 5].map(Vertex);
        let mut h = GuideHeuristic::new(&map, &path);
        assert_eq!(h.cached(Vertex(1)), None);
        assert_eq!(h.query(&map, Vertex(1)), Some(GuideValue { dp: 1, dg: 1 }));
    }

    #[test]
    fn ties_prefer_smaller_remaining() {
        let map = GridMap::open(3, 3).unwrap();
        // Path 0 -> 1 -> 2 -> 5 -> 8; vertex 4 touches 1 (dg 3) and 5 (dg 1).
        let path = [0, 1, 2, 5, 8].map(Vertex);
        let mut h = GuideHeuristic::new(&map, &path);
        assert_eq!(h.query(&map, Vertex(4)), Some(GuideValue { dp: 1, dg: 1 }));
        assert_eq!(h.query(&map, Vertex(6)), Some(GuideValue { dp: 2, dg: 0 }));
    }

    #[test]
    fn unreachable_is_none() {
        let map = GridMap::from_rows(&["..@."]).unwrap();
        let mut h = GuideHeuristic::new(&map, &[Vertex(0), Vertex(1)]);
        assert_eq!(h.query(&map, Vertex(3)), None);
        assert!(h.is_exhausted());
    }
}
