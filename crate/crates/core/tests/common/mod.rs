#![allow(dead_code)]

use std::path::PathBuf;

use dte_core::scenario::{load_scenario, Scenario};
use dte_core::{BuildOptions, Cell, GameInstance, Grid, Robot, Task, ValueSpec};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub const FIXTURES: [&str; 6] = [
    "example_1.json",
    "example_2.json",
    "example_3.json",
    "case_study_1.json",
    "case_study_2.json",
    "experiment_episodes.json",
];

pub fn load(name: &str) -> Scenario {
    load_scenario(scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every (fixture, variant, game) triple.
pub fn fixture_games() -> Vec<(String, GameInstance)> {
    let mut out = Vec::new();
    for f in FIXTURES {
        let s = load(f);
        for v in &s.variants {
            let g = s.build(v, &BuildOptions::default()).unwrap();
            out.push((format!("{f}:{}", v.name), g));
        }
    }
    out
}

pub fn fixture_game(name: &str, variant: Option<&str>) -> GameInstance {
    let s = load(name);
    let v = s.variant(variant).unwrap();
    s.build(v, &BuildOptions::default()).unwrap()
}

/// Random grid with roughly 20% obstacles and `stations` feasible stations.
pub fn random_grid<R: Rng>(rng: &mut R, max_w: u16, max_h: u16, stations: usize) -> Grid {
    loop {
        let w = rng.gen_range(2..=max_w);
        let h = rng.gen_range(2..=max_h);
        let mut obstacles = Vec::new();
        let mut free = Vec::new();
        for y in 1..=h {
            for x in 1..=w {
                if rng.gen_bool(0.2) {
                    obstacles.push(Cell::new(x, y));
                } else {
                    free.push(Cell::new(x, y));
                }
            }
        }
        if free.len() < stations.max(1) {
            continue;
        }
        let st: Vec<Cell> = free.choose_multiple(rng, stations).copied().collect();
        return Grid::new(w, h, obstacles, st).unwrap();
    }
}

pub fn random_value<R: Rng>(rng: &mut R, window: usize, simple_only: bool) -> ValueSpec {
    let value = rng.gen_range(1..=10);
    if simple_only {
        return if rng.gen_bool(0.5) {
            ValueSpec::Simple { value }
        } else {
            ValueSpec::ThresholdMax { value, threshold: 1 }
        };
    }
    match rng.gen_range(0..4) {
        0 => ValueSpec::Simple { value },
        1 => ValueSpec::ThresholdMax {
            value,
            threshold: rng.gen_range(1..=2),
        },
        2 => ValueSpec::ThresholdSum {
            value,
            threshold: rng.gen_range(1..=window as u32 + 1),
        },
        _ => ValueSpec::SequentialHeavyLight {
            value,
            heavy: rng.gen_range(1..=2),
            follow: rng.gen_range(1..=2),
        },
    }
}

/// Random tasks on feasible cells; same-location windows never overlap.
pub fn random_tasks<R: Rng>(rng: &mut R, grid: &Grid, horizon: u32, m: usize, simple_only: bool) -> Vec<Task> {
    // prefer cells a robot can stay at and still get home: 2 * dist < T
    let reach: Vec<Vec<Option<u32>>> = grid.stations().iter().map(|&s| grid.distances_from(s).unwrap()).collect();
    let mut cells: Vec<Cell> = grid
        .feasible_cells()
        .filter(|&c| reach.iter().any(|d| d[grid.index(c)].is_some_and(|k| 2 * k < horizon)))
        .collect();
    if cells.is_empty() || rng.gen_bool(0.1) {
        cells = grid.feasible_cells().collect();
    }
    let mut tasks: Vec<Task> = Vec::new();
    let mut attempts = 0;
    while tasks.len() < m && attempts < 1000 {
        attempts += 1;
        let loc = *cells.choose(rng).unwrap();
        let a = rng.gen_range(0..horizon);
        let d = rng.gen_range(a + 1..=horizon);
        if tasks
            .iter()
            .any(|t| t.location == loc && t.departure.min(d) > t.arrival.max(a))
        {
            continue;
        }
        let value = random_value(rng, (d - a) as usize, simple_only);
        tasks.push(Task::new(format!("t{}", tasks.len() + 1), loc, a, d, value));
    }
    tasks
}

pub fn robots_at(stations: &[usize]) -> Vec<Robot> {
    stations
        .iter()
        .enumerate()
        .map(|(i, &s)| Robot {
            id: format!("r{}", i + 1),
            station: s,
        })
        .collect()
}
