//! Best-response and log-linear learning over repeated play.
//!
//! Randomness comes from `ChaCha8Rng` (rand_chacha 0.3.1, pinned) seeded with
//! `seed_from_u64(seed)`. Three independent streams are derived from the same
//! seed with `set_stream`:
//!
//! | stream | use                                  |
//! |--------|--------------------------------------|
//! | 0      | which robot updates in each round    |
//! | 1      | the updating robot's action choice   |
//! | 2      | the random initial joint plan        |
//!
//! Batch run `j` uses seed `base_seed + j`.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DteError, Result};
use crate::game::{GameInstance, JointPlan};
use crate::task::Value;

pub const AGENT_STREAM: u64 = 0;
pub const ACTION_STREAM: u64 = 1;
pub const INIT_STREAM: u64 = 2;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[serde(alias = "br")]
    BestResponse,
    #[serde(alias = "lll")]
    LogLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPlan {
    Random,
    Explicit(JointPlan),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub rounds: usize,
    pub seed: u64,
    pub initial: InitialPlan,
}

impl LearningConfig {
    pub fn best_response(rounds: usize, seed: u64) -> Self {
        LearningConfig {
            algorithm: Algorithm::BestResponse,
            epsilon: 0.0,
            rounds,
            seed,
            initial: InitialPlan::Random,
        }
    }

    pub fn log_linear(epsilon: f64, rounds: usize, seed: u64) -> Self {
        LearningConfig {
            algorithm: Algorithm::LogLinear,
            epsilon,
            rounds,
            seed,
            initial: InitialPlan::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(DteError::Domain("rounds must be at least 1".into()));
        }
        if self.algorithm == Algorithm::LogLinear && !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(DteError::Domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub robot: usize,
    pub action: usize,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunTrace {
    pub initial_plan: JointPlan,
    pub initial_value: Value,
    pub records: Vec<RoundRecord>,
    pub final_plan: JointPlan,
}

impl RunTrace {
    /// Values at rounds `0..=K`, starting with the initial plan.
    pub fn values(&self) -> impl Iterator<Item = Value> + '_ {
        std::iter::once(self.initial_value).chain(self.records.iter().map(|r| r.value))
    }

    pub fn final_value(&self) -> Value {
        self.records.last().map_or(self.initial_value, |r| r.value)
    }
}

/// Actions maximizing the robot's utility against the others' current actions.
pub fn best_response_set(game: &GameInstance, plan: &JointPlan, robot: usize) -> Result<Vec<usize>> {
    let u = game.deviation_utilities(plan, robot)?;
    Ok(argmax(&u))
}

fn argmax(u: &[Value]) -> Vec<usize> {
    let best = u.iter().copied().max().unwrap_or(0);
    (0..u.len()).filter(|&a| u[a] == best).collect()
}

/// Softmax of `U/epsilon` over the robot's whole action set.
pub fn lll_distribution(game: &GameInstance, plan: &JointPlan, robot: usize, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(DteError::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(softmax(&game.deviation_utilities(plan, robot)?, epsilon))
}

pub(crate) fn softmax(u: &[Value], epsilon: f64) -> Vec<f64> {
    let top = u.iter().copied().max().unwrap_or(0);
    let w: Vec<f64> = u.iter().map(|&x| ((x - top) as f64 / epsilon).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn initial_plan(game: &GameInstance, config: &LearningConfig) -> Result<JointPlan> {
    match &config.initial {
        InitialPlan::Random => Ok(game.random_plan(&mut stream_rng(config.seed, INIT_STREAM))),
        InitialPlan::Explicit(p) => {
            game.validate_plan(p)?;
            Ok(p.clone())
        }
    }
}

/// Runs the configured algorithm.
pub fn run(game: &GameInstance, config: &LearningConfig) -> Result<RunTrace> {
    config.validate()?;
    if game.n_robots() == 0 {
        return Err(DteError::Domain("learning needs at least one robot".into()));
    }
    let mut plan = initial_plan(game, config)?;
    let initial_plan = plan.clone();
    let initial_value = game.global_value(&plan);
    let mut agents = stream_rng(config.seed, AGENT_STREAM);
    let mut choices = stream_rng(config.seed, ACTION_STREAM);
    let mut records = Vec::with_capacity(config.rounds);
    for k in 1..=config.rounds {
        let i = agents.gen_range(0..game.n_robots());
        let u = game.deviation_utilities(&plan, i)?;
        let next = match config.algorithm {
            Algorithm::BestResponse => {
                let br = argmax(&u);
                if br.contains(&plan.0[i]) {
                    plan.0[i]
                } else {
                    br[choices.gen_range(0..br.len())]
                }
            }
            Algorithm::LogLinear => {
                let dist = WeightedIndex::new(softmax(&u, config.epsilon))
                    .map_err(|e| DteError::Domain(format!("degenerate softmax: {e}")))?;
                dist.sample(&mut choices)
            }
        };
        plan.0[i] = next;
        records.push(RoundRecord {
            round: k,
            robot: i,
            action: next,
            value: game.global_value(&plan),
        });
    }
    Ok(RunTrace {
        initial_plan,
        initial_value,
        records,
        final_plan: plan,
    })
}

pub fn run_best_response(game: &GameInstance, config: &LearningConfig) -> Result<RunTrace> {
    if config.algorithm != Algorithm::BestResponse {
        return Err(DteError::Domain("config is not for best response".into()));
    }
    run(game, config)
}

pub fn run_log_linear(game: &GameInstance, config: &LearningConfig) -> Result<RunTrace> {
    if config.algorithm != Algorithm::LogLinear {
        return Err(DteError::Domain("config is not for log-linear learning".into()));
    }
    run(game, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub round: usize,
    pub min: Value,
    pub avg: f64,
    pub max: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub series: Vec<SeriesRow>,
    /// Terminal value -> number of runs ending there.
    pub histogram: BTreeMap<Value, usize>,
    pub traces: Vec<RunTrace>,
}

impl BatchResult {
    pub fn terminal_mean(&self) -> f64 {
        let n: usize = self.histogram.values().sum();
        let s: i128 = self.histogram.iter().map(|(&v, &k)| v as i128 * k as i128).sum();
        s as f64 / n as f64
    }

    pub fn row(&self, round: usize) -> Option<&SeriesRow> {
        self.series.get(round)
    }
}

/// Independent runs with seeds `base_seed + j`, aggregated per round.
pub fn run_batch(game: &GameInstance, config: &LearningConfig, n_runs: usize, base_seed: u64) -> Result<BatchResult> {
    if n_runs == 0 {
        return Err(DteError::Domain("n_runs must be at least 1".into()));
    }
    let traces: Vec<RunTrace> = (0..n_runs)
        .into_par_iter()
        .map(|j| {
            let cfg = LearningConfig {
                seed: base_seed.wrapping_add(j as u64),
                ..config.clone()
            };
            run(game, &cfg)
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(traces))
}

pub fn aggregate(traces: Vec<RunTrace>) -> BatchResult {
    let rounds = traces.iter().map(|t| t.records.len()).min().unwrap_or(0);
    let columns: Vec<Vec<Value>> = traces.iter().map(|t| t.values().take(rounds + 1).collect()).collect();
    let series = (0..=rounds)
        .map(|k| {
            let vals = columns.iter().map(|c| c[k]);
            let sum: i128 = vals.clone().map(|v| v as i128).sum();
            SeriesRow {
                round: k,
                min: vals.clone().min().unwrap_or(0),
                avg: sum as f64 / columns.len().max(1) as f64,
                max: vals.max().unwrap_or(0),
            }
        })
        .collect();
    let mut histogram = BTreeMap::new();
    for t in &traces {
        *histogram.entry(t.final_value()).or_insert(0) += 1;
    }
    BatchResult {
        series,
        histogram,
        traces,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_closed_form() {
        let p = softmax(&[0, 1], 0.5);
        let e2 = 2f64.exp();
        assert!((p[0] - 1.0 / (1.0 + e2)).abs() < 1e-15);
        assert!((p[1] - e2 / (1.0 + e2)).abs() < 1e-15);
    }

    #[test]
    fn softmax_limits() {
        let flat = softmax(&[3, 3, 3], 0.1);
        assert!(flat.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        let hot = softmax(&[0, 10], 1e6);
        assert!((hot[0] - hot[1]).abs() < 1e-4);
        let cold = softmax(&[0, 10], 0.1);
        assert!(cold[1] > 1.0 - 1e-15 && cold[0] > 0.0);
    }

    #[test]
    fn softmax_survives_huge_utilities() {
        let p = softmax(&[1_000_000, 0], 1e-3);
        assert!(p.iter().all(|x| x.is_finite()));
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(LearningConfig::log_linear(0.0, 10, 1).validate().is_err());
        assert!(LearningConfig::log_linear(0.2, 0, 1).validate().is_err());
        assert!(LearningConfig::best_response(5, 1).validate().is_ok());
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream_rng(7, AGENT_STREAM).gen();
        let b: u64 = stream_rng(7, ACTION_STREAM).gen();
        assert_ne!(a, b);
        assert_eq!(a, stream_rng(7, AGENT_STREAM).gen::<u64>());
    }
}
