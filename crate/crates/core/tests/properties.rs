mod common;

use std::collections::BTreeSet;

use common::*;
use dte_core::actions::{build_minimal_action_set, signature, verify_cover, ActionBudget, ActionSet};
use dte_core::analysis::ProfileIndex;
use dte_core::learning::{lll_distribution, run, LearningConfig};
use dte_core::task::validate_monotonicity;
use dte_core::{Cell, GameInstance, JointPlan, Task, Value};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_game(seed: u64, overlap: bool) -> Option<GameInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_st = rng.gen_range(1..=2);
    let grid = random_grid(&mut rng, 5, 5, n_st);
    let horizon = rng.gen_range(2..=6);
    let m = rng.gen_range(1..=5);
    let mut tasks = random_tasks(&mut rng, &grid, horizon, m, false);
    if overlap && !tasks.is_empty() {
        let t = tasks[0].clone();
        tasks.push(Task::new("dup", t.location, t.arrival, t.departure, t.value.clone()));
    }
    let n = rng.gen_range(1..=3);
    let stations: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n_st)).collect();
    GameInstance::build(grid, horizon, robots_at(&stations), tasks, &Default::default()).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dp_count_matches_enumeration(seed in any::<u64>(), t in 1u32..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, 4, 4, 1);
        let s = grid.stations()[0];
        let dp = grid.count_feasible_trajectories(s, t).unwrap();
        let all = grid.enumerate_feasible_trajectories(s, t, 1_000_000).unwrap();
        prop_assert_eq!(dp, all.len() as u128);
        prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(all.iter().all(|p| grid.is_feasible_trajectory(s, p)));
    }

    #[test]
    fn neighborhoods_are_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, 6, 6, 0);
        for p in grid.feasible_cells() {
            let np = grid.neighborhood(p).unwrap();
            prop_assert!(np.contains(&p));
            for q in np {
                prop_assert!(grid.is_feasible(q) && p.chebyshev(q) <= 1);
                prop_assert!(grid.neighborhood(q).unwrap().contains(&p));
            }
        }
    }

    #[test]
    fn distances_are_a_metric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, 5, 5, 0);
        let cells: Vec<Cell> = grid.feasible_cells().collect();
        let d: Vec<Vec<Option<u32>>> = cells.iter().map(|&c| {
            let all = grid.distances_from(c).unwrap();
            cells.iter().map(|&x| all[grid.index(x)]).collect()
        }).collect();
        for a in 0..cells.len() {
            prop_assert_eq!(d[a][a], Some(0));
            for b in 0..cells.len() {
                prop_assert_eq!(d[a][b], d[b][a]);
                if let Some(ab) = d[a][b] {
                    prop_assert!(ab >= cells[a].chebyshev(cells[b]) as u32);
                }
                for c in 0..cells.len() {
                    if let (Some(ab), Some(bc)) = (d[a][b], d[b][c]) {
                        prop_assert!(d[a][c].unwrap() <= ab + bc);
                    }
                }
            }
        }
    }

    #[test]
    fn parametric_values_are_monotone(seed in any::<u64>(), w in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_value(&mut rng, w, false);
        prop_assert!(validate_monotonicity(&spec, w, 3, 1 << 16).unwrap());
    }

    #[test]
    fn action_sets_are_minimal_covers(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, 5, 5, 1);
        let horizon = rng.gen_range(1..=5);
        let m = rng.gen_range(0..=4);
        let tasks = random_tasks(&mut rng, &grid, horizon, m, false);
        let s = grid.stations()[0];
        let set = build_minimal_action_set(&grid, s, horizon, &tasks, &ActionBudget::default()).unwrap();
        let again = build_minimal_action_set(&grid, s, horizon, &tasks, &ActionBudget::default()).unwrap();
        prop_assert_eq!(&set, &again);
        prop_assert!(!set.is_empty());
        for (p, sig) in set.actions.iter().zip(&set.signatures) {
            prop_assert!(grid.is_feasible_trajectory(s, p));
            prop_assert_eq!(&signature(p, &tasks), sig);
        }
        for a in 0..set.len() {
            for b in 0..set.len() {
                if a != b {
                    prop_assert!(!set.signatures[a].is_subset_of(&set.signatures[b]));
                }
            }
        }
        prop_assert!(verify_cover(&set, &grid, s, horizon, &tasks, 1_000_000).unwrap());
        if !set.is_degenerate() {
            for k in 0..set.len() {
                let mut fewer: ActionSet = set.clone();
                fewer.actions.remove(k);
                fewer.signatures.remove(k);
                prop_assert!(!verify_cover(&fewer, &grid, s, horizon, &tasks, 1_000_000).unwrap());
            }
        }
    }

    #[test]
    fn potential_identity_holds(seed in any::<u64>(), overlap in any::<bool>()) {
        if let Some(game) = small_game(seed, overlap) {
            prop_assert!(game.verify_potential_identity(50, seed));
        }
    }

    #[test]
    fn local_information_suffices(seed in any::<u64>()) {
        if let Some(game) = small_game(seed, false) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10 {
                let plan = game.random_plan(&mut rng);
                for i in 0..game.n_robots() {
                    prop_assert_eq!(game.local_utility(&plan, i).unwrap(), game.utility(&plan, i).unwrap());
                }
            }
            // a robot's actions only serve its local tasks
            for i in 0..game.n_robots() {
                let local: BTreeSet<usize> = game.local_tasks(i).unwrap().into_iter().collect();
                for a in game.actions(i) {
                    prop_assert!(a.tasks_served().all(|j| local.contains(&j)));
                }
            }
        }
    }

    #[test]
    fn best_response_never_decreases_value(seed in any::<u64>()) {
        if let Some(game) = small_game(seed, false) {
            let tr = run(&game, &LearningConfig::best_response(60, seed)).unwrap();
            let v: Vec<Value> = tr.values().collect();
            prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn lll_distribution_is_a_distribution(seed in any::<u64>(), eps in 0.01f64..10.0) {
        if let Some(game) = small_game(seed, false) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plan = game.random_plan(&mut rng);
            let p = lll_distribution(&game, &plan, 0, eps).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn profile_index_round_trips(seed in any::<u64>()) {
        if let Some(game) = small_game(seed, false) {
            let idx = ProfileIndex::new(&game);
            prop_assume!(idx.len() <= 100_000);
            for k in (0..idx.len()).step_by(1 + idx.len() / 50) {
                let plan: JointPlan = idx.plan(k);
                prop_assert_eq!(idx.index(&plan), k);
            }
        }
    }
}

#[test]
fn generator_yields_nontrivial_games() {
    let built: Vec<GameInstance> = (0..100).filter_map(|s| small_game(s, false)).collect();
    assert!(built.len() >= 90, "{}", built.len());
    let rich = built.iter().filter(|g| g.action_counts().iter().any(|&n| n > 1)).count();
    eprintln!("rich {rich} of {}", built.len());
    assert!(rich >= 40);
}
