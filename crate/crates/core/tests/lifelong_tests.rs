use std::sync::Arc;

use guided_mapf::guidance::GuideHeuristic;
use guided_mapf::lifelong::TaskAssigner;
use guided_mapf::pibt::Pibt;
use guided_mapf::{
    bfs_distances, check_moves, mapgen, run_lifelong, AgentState, GridMap, GuideConfig,
    GuidePlanner, LifelongConfig, LifelongSim, PreferenceFn, Scenario, Vertex,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn free_flow(map: &GridMap, goal: Vertex) -> PreferenceFn {
    PreferenceFn::FreeFlow(Arc::new(bfs_distances(map, goal)))
}

/// Single agent: every task takes exactly its free-flow distance.
fn single_agent_oracle(
    map: &GridMap,
    start: Vertex,
    goal: Vertex,
    seed: u64,
    steps: usize,
) -> Vec<u32> {
    let mut assigner = TaskAssigner::new(map, seed).unwrap();
    let mut trace = vec![0; steps];
    let (mut pos, mut goal) = (start, goal);
    let mut t = 0usize;
    loop {
        let d = bfs_distances(map, goal).raw(pos) as usize;
        // Arrival is recorded at the step index of the final move.
        t += d;
        if t == 0 || t > steps {
            break;
        }
        trace[t - 1] += 1;
        pos = goal;
        goal = assigner.next_goal(pos);
    }
    trace
}

#[test]
fn single_agent_matches_closed_form() {
    let map = GridMap::open(12, 9).unwrap();
    for seed in 0..6 {
        let scen = Scenario::new(vec![Vertex(0)], vec![Vertex(50)]);
        let want = single_agent_oracle(&map, Vertex(0), Vertex(50), seed, 120);
        for config in [LifelongConfig::pibt(), LifelongConfig::default()] {
            let config = LifelongConfig {
                max_timesteps: 120,
                seed,
                step_deadline: None,
                ..config
            };
            let out = run_lifelong(Arc::new(map.clone()), &scen, config).unwrap();
            assert_eq!(out.metrics.tasks_finished, want, "seed {seed}");
        }
    }
}

fn far_scenario(map: &GridMap, k: usize, min_dist: u32, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<Vertex> = map.traversable_vertices().collect();
    let starts: Vec<Vertex> = cells.choose_multiple(&mut rng, k).copied().collect();
    let goals = starts
        .iter()
        .map(|&s| {
            let d = bfs_distances(map, s);
            let far: Vec<Vertex> = cells
                .iter()
                .copied()
                .filter(|&c| d.raw(c) >= min_dist)
                .collect();
            *far.choose(&mut rng).unwrap()
        })
        .collect();
    Scenario::new(starts, goals)
}

#[test]
fn lazy_initialisation_follows_schedule() {
    let map = Arc::new(GridMap::open(64, 64).unwrap());
    let k = 100;
    let x = 10;
    let scen = far_scenario(&map, k, 30, 1);
    let config = LifelongConfig {
        init_per_step: Some(x),
        step_deadline: None,
        ..LifelongConfig::default()
    };
    let mut sim = LifelongSim::new(map.clone(), &scen, config.clone()).unwrap();
    let mut oracle = GuidePlanner::new(
        map.clone(),
        GuideConfig {
            seed: config.seed,
            ..config.guide
        },
        scen.starts.clone(),
        scen.goals.clone(),
    )
    .unwrap();
    for t in 0..12 {
        let positions = sim.positions();
        let (event, _) = sim.step().unwrap();
        assert_eq!(event.tasks_finished, 0);
        assert_eq!(event.initialized_agents, k.min(x * (t + 1)));
        assert_eq!(sim.planner().num_initialized(), k.min(x * (t + 1)));
        // Oracle: the next x agents by id, planned from their position now.
        let batch: Vec<usize> = (x * t..k.min(x * (t + 1))).collect();
        for &a in &batch {
            oracle.set_origin(a, positions[a]);
        }
        oracle.find_paths(&batch).unwrap();
        assert_eq!(sim.planner().dump(), oracle.dump(), "step {t}");
        assert_eq!(sim.planner().flows(), oracle.flows());
    }
}

#[test]
fn full_budget_step_zero_equals_find_paths_then_pibt() {
    let map = Arc::new(mapgen::generate(&"warehouse:40x24:2".parse().unwrap()).unwrap());
    let scen = mapgen::generate_scenario(&map, 60, 8).unwrap();
    let config = LifelongConfig {
        init_per_step: None,
        step_deadline: None,
        ..LifelongConfig::default()
    };
    let mut sim = LifelongSim::new(map.clone(), &scen, config.clone()).unwrap();
    let plan = sim.guided_plan_step().unwrap();

    let mut planner = GuidePlanner::new(
        map.clone(),
        GuideConfig {
            seed: config.seed,
            ..config.guide
        },
        scen.starts.clone(),
        scen.goals.clone(),
    )
    .unwrap();
    planner.find_paths(&(0..60).collect::<Vec<_>>()).unwrap();
    assert_eq!(sim.planner().dump(), planner.dump());
    let mut agents: Vec<AgentState> = (0..60)
        .map(|i| AgentState::new(i, scen.starts[i], scen.goals[i]))
        .collect();
    let mut prefs: Vec<PreferenceFn> = (0..60)
        .map(|a| PreferenceFn::Guided {
            heuristic: GuideHeuristic::new(&map, planner.path(a).unwrap()),
            fallback: Arc::new(bfs_distances(&map, scen.goals[a])),
        })
        .collect();
    let moves = Pibt::new().plan_step(&map, &mut agents, &mut prefs);
    assert_eq!(plan.moves, moves);
}

/// Hand-rolled free-flow PIBT loop sharing only the task stream.
pub fn baseline_trace(map: &GridMap, scen: &Scenario, seed: u64, steps: usize) -> Vec<Vec<Vertex>> {
    let k = scen.num_agents();
    let mut agents: Vec<AgentState> = (0..k)
        .map(|i| AgentState::new(i, scen.starts[i], scen.goals[i]))
        .collect();
    let mut prefs: Vec<PreferenceFn> = agents.iter().map(|a| free_flow(map, a.goal)).collect();
    let mut assigner = TaskAssigner::new(map, seed).unwrap();
    let mut pibt = Pibt::new();
    let mut out = Vec::new();
    for _ in 0..steps {
        let moves = pibt.plan_step(map, &mut agents, &mut prefs);
        for (a, &v) in agents.iter_mut().zip(&moves) {
            a.pos = v;
        }
        for (a, p) in agents.iter_mut().zip(prefs.iter_mut()) {
            if a.pos == a.goal {
                a.goal = assigner.next_goal(a.pos);
                a.priority.epoch = 0;
                *p = free_flow(map, a.goal);
            }
        }
        out.push(moves);
    }
    out
}

#[test]
fn disabled_guidance_reproduces_plain_pibt() {
    let map = Arc::new(mapgen::generate(&"room:32x32:4".parse().unwrap()).unwrap());
    for seed in 0..3 {
        let scen = mapgen::generate_scenario(&map, 80, seed).unwrap();
        let config = LifelongConfig {
            max_timesteps: 60,
            seed,
            step_deadline: None,
            ..LifelongConfig::pibt()
        };
        let mut sim = LifelongSim::new(map.clone(), &scen, config).unwrap();
        let want = baseline_trace(&map, &scen, seed, 60);
        for (t, moves) in want.iter().enumerate() {
            let plan = sim.guided_plan_step().unwrap();
            assert_eq!(&plan.moves, moves, "seed {seed} step {t}");
            assert!(plan.newly_initialized.is_empty());
            sim.execute_and_assign(&plan.moves).unwrap();
        }
    }
}

#[test]
fn scripted_arrivals() {
    // Agents in well separated rows walking east never compete for a cell,
    // so each first arrival happens exactly at its distance.
    let map = GridMap::open(10, 10).unwrap();
    let dists = [3u32, 7, 1, 5];
    let rows = [0u32, 3, 6, 9];
    let starts: Vec<Vertex> = rows.iter().map(|r| Vertex(r * 10)).collect();
    let goals: Vec<Vertex> = rows
        .iter()
        .zip(dists)
        .map(|(r, d)| Vertex(r * 10 + d))
        .collect();
    let scen = Scenario::new(starts, goals.clone());
    let config = LifelongConfig {
        step_deadline: None,
        ..LifelongConfig::pibt()
    };
    let mut sim = LifelongSim::new(Arc::new(map), &scen, config).unwrap();
    let mut first_arrival = [None; 4];
    for t in 0..7 {
        let (event, _) = sim.step().unwrap();
        let mut fresh = 0;
        for a in 0..4 {
            if first_arrival[a].is_none() && sim.agents()[a].goal != goals[a] {
                first_arrival[a] = Some(t);
                assert_eq!(sim.agents()[a].priority.epoch, 0);
                fresh += 1;
            }
        }
        assert!(event.tasks_finished >= fresh);
    }
    assert_eq!(first_arrival, [Some(2), Some(6), Some(0), Some(4)]);
}

#[test]
fn refinement_runs_stay_conflict_free_and_reproducible() {
    let map = Arc::new(mapgen::generate(&"sortation:24x20:3".parse().unwrap()).unwrap());
    let scen = mapgen::generate_scenario(&map, 120, 3).unwrap();
    for refine in [0, 10] {
        let config = LifelongConfig {
            init_per_step: Some(30),
            refine_iterations: refine,
            max_timesteps: 80,
            step_deadline: None,
            seed: 3,
            ..LifelongConfig::default()
        };
        let mut sim = LifelongSim::new(map.clone(), &scen, config.clone()).unwrap();
        for _ in 0..80 {
            let from = sim.positions();
            let plan = sim.guided_plan_step().unwrap();
            assert!(check_moves(&map, &from, &plan.moves).is_empty());
            sim.execute_and_assign(&plan.moves).unwrap();
            assert!(sim.planner().flows_consistent());
        }
        let a = run_lifelong(map.clone(), &scen, config.clone()).unwrap();
        let b = run_lifelong(map.clone(), &scen, config).unwrap();
        assert_eq!(a.event_log_untimed(), b.event_log_untimed());
        assert_eq!(a.metrics.tasks_finished, b.metrics.tasks_finished);
        assert!(a.metrics.total_tasks > 0);
    }
}

#[test]
fn deadline_breach_marks_timeout() {
    let map = Arc::new(GridMap::open(16, 16).unwrap());
    let scen = mapgen::generate_scenario(&map, 40, 0).unwrap();
    let config = LifelongConfig {
        step_deadline: Some(std::time::Duration::ZERO),
        max_timesteps: 50,
        ..LifelongConfig::default()
    };
    let out = run_lifelong(map, &scen, config).unwrap();
    assert!(out.metrics.timeout);
    assert_eq!(out.events.len(), 1);
}
