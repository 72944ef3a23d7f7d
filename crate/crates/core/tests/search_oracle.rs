mod common;

use guided_mapf::search::{sp_simple, verify_bound};
use guided_mapf::traffic::{CostModel, EdgeCosts, FlowAccounting};
use guided_mapf::{FocalParams, Vertex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn pure_mode_matches_brute_force_for_every_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 60 {
        let (w, h) = (rng.gen_range(2..=6), rng.gen_range(2..=5));
        let map = common::random_map(&mut rng, w, h, 0.25);
        let open: Vec<Vertex> = map.traversable_vertices().collect();
        if open.len() < 2 {
            continue;
        }
        let n = rng.gen_range(0..12);
        let flows = common::random_flows(&mut rng, &map, n, 6);
        let (s, g) = (
            *open.choose(&mut rng).unwrap(),
            *open.choose(&mut rng).unwrap(),
        );
        for model in CostModel::ALL {
            for acc in [FlowAccounting::Joining, FlowAccounting::Others] {
                let best = common::brute_force_min(model, acc, &flows, &map, s, g);
                match sp_simple(&map, &flows, EdgeCosts::new(model, acc), s, g, None) {
                    Ok(p) => {
                        assert!(common::is_walk(&map, &p.path));
                        assert_eq!((p.path[0], *p.path.last().unwrap()), (s, g));
                        let c = common::oracle_path_cost(model, acc, &flows, &map, &p.path);
                        assert_eq!(Some(c), best, "{model} {acc:?} {s:?}->{g:?}");
                        assert_eq!(p.cost, c);
                    }
                    Err(_) => assert_eq!(best, None),
                }
            }
        }
        checked += 1;
    }
}

#[test]
fn focal_respects_length_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..150 {
        let (w, h) = (rng.gen_range(3..=12), rng.gen_range(3..=12));
        let map = common::random_map(&mut rng, w, h, 0.2);
        let open: Vec<Vertex> = map.traversable_vertices().collect();
        if open.len() < 2 {
            continue;
        }
        let n = rng.gen_range(0..30);
        let flows = common::random_flows(&mut rng, &map, n, 12);
        let (s, g) = (
            *open.choose(&mut rng).unwrap(),
            *open.choose(&mut rng).unwrap(),
        );
        let c_star = common::dijkstra(&map, s)[g.index()];
        for w in [1.0, 1.2, 1.5, 2.0] {
            let res = sp_simple(
                &map,
                &flows,
                CostModel::TwoPart,
                s,
                g,
                Some(FocalParams::new(w).unwrap()),
            );
            if c_star == common::UNREACHED {
                assert!(res.is_err());
                continue;
            }
            let p = res.unwrap();
            assert!(common::is_walk(&map, &p.path));
            assert!(verify_bound(&p.path, s, g, &map, w));
            assert!((p.moves() as f64) <= w * f64::from(c_star) + 1e-9);
            if w == 1.0 {
                assert_eq!(p.moves() as u32, c_star);
            }
        }
    }
}

#[test]
fn focal_at_one_is_cheapest_shortest_path() {
    // Among paths of length C*, w = 1 must still minimise the two-part cost.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..80 {
        let map = common::random_map(&mut rng, 5, 4, 0.15);
        let open: Vec<Vertex> = map.traversable_vertices().collect();
        if open.len() < 2 {
            continue;
        }
        let flows = common::random_flows(&mut rng, &map, 10, 6);
        let (s, g) = (
            *open.choose(&mut rng).unwrap(),
            *open.choose(&mut rng).unwrap(),
        );
        let Ok(p) = sp_simple(
            &map,
            &flows,
            CostModel::TwoPart,
            s,
            g,
            Some(FocalParams::new(1.0).unwrap()),
        ) else {
            continue;
        };
        let c_star = p.moves();
        let mut best = None;
        enumerate_shortest(&map, s, g, c_star, &mut vec![s], &mut |path| {
            let c = common::oracle_path_cost(
                CostModel::TwoPart,
                FlowAccounting::Joining,
                &flows,
                &map,
                path,
            );
            best = Some(best.map_or(c, |b: guided_mapf::TwoPartCost| b.min(c)));
        });
        assert_eq!(Some(p.cost), best);
    }
}

fn enumerate_shortest(
    map: &guided_mapf::GridMap,
    u: Vertex,
    g: Vertex,
    left: usize,
    path: &mut Vec<Vertex>,
    f: &mut impl FnMut(&[Vertex]),
) {
    if left == 0 {
        if u == g {
            f(path);
        }
        return;
    }
    for n in common::adj(map, u) {
        path.push(n);
        enumerate_shortest(map, n, g, left - 1, path, f);
        path.pop();
    }
}
