//! Congestion-aware guide paths for PIBT.
//!
//! Guide paths are planned like a traffic assignment: each agent's path is a
//! shortest path under edge weights that grow with the flow of the other
//! agents' paths. During execution PIBT prefers moves that approach the
//! agent's guide path and then follow it to the goal.
//!
//! The crate covers the full pipeline:
//!
//! - [`grid`]: grids, movingai `.map`/`.scen` files, BFS distances.
//! - [`traffic`]: flow bookkeeping and the congestion cost models.
//! - [`search`]: lexicographic A* and a bounded-suboptimal FOCAL variant.
//! - [`guidance`]: guide-path planning, refinement and the guide heuristic.
//! - [`pibt`]: one PIBT step over arbitrary move preferences.
//! - [`lifelong`] and [`oneshot`]: simulation drivers with metrics.
//! - [`mapgen`]: seeded benchmark-style maps and scenarios.
//!
//! ```
//! use std::sync::Arc;
//! use guided_mapf::{mapgen, lifelong};
//!
//! let spec: mapgen::MapSpec = "sortation:20x12:1".parse().unwrap();
//! let map = Arc::new(mapgen::generate(&spec).unwrap());
//! let scen = mapgen::generate_scenario(&map, 30, 7).unwrap();
//! let config = lifelong::LifelongConfig { max_timesteps: 20, ..Default::default() };
//! let out = lifelong::run_lifelong(map, &scen, config).unwrap();
//! assert_eq!(out.events.len(), 20);
//! ```

pub mod error;
pub mod grid;
pub mod guidance;
pub mod lifelong;
pub mod mapgen;
pub mod oneshot;
pub mod pathfile;
pub mod pibt;
pub mod search;
pub mod traffic;

pub use error::{Error, ParseError, Result};
pub use grid::{bfs_distances, DistanceTable, GridMap, Scenario, Vertex};
pub use guidance::{GuideConfig, GuideHeuristic, GuidePlanner};
pub use lifelong::{run_lifelong, LifelongConfig, LifelongSim, Metrics};
pub use oneshot::{sic, solve_oneshot, validate, OneShotConfig, Solution};
pub use pibt::{check_moves, plan_step, AgentState, PreferenceFn};
pub use search::{sp, FocalParams, ShortestPath};
pub use traffic::{CostModel, FlowMap, TwoPartCost};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/congestion.md")]
    mod congestion {}
    #[doc = include_str!("../../../book/src/guide-paths.md")]
    mod guide_paths {}
    #[doc = include_str!("../../../book/src/pibt.md")]
    mod pibt {}
    #[doc = include_str!("../../../book/src/lifelong.md")]
    mod lifelong {}
    #[doc = include_str!("../../../book/src/oneshot.md")]
    mod oneshot {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
