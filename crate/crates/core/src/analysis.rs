//! Exhaustive oracles for small games: optimum, pure Nash equilibria, price of
//! anarchy, and the exact stationary distribution of log-linear learning.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{DteError, Result};
use crate::game::{value_of_trajectories, GameInstance, JointPlan};
use crate::grid::{Cell, Grid, Trajectory};
use crate::learning::{softmax, RunTrace};
use crate::task::{Task, Value};

/// Default cap on the number of joint plans an oracle may visit.
pub const DEFAULT_PROFILE_BUDGET: u128 = 10_000_000;

fn profile_count(game: &GameInstance, budget: u128) -> Result<usize> {
    let size = game.profile_count().unwrap_or(u128::MAX);
    if size > budget {
        return Err(DteError::BudgetExceeded {
            what: "joint action space",
            size,
            budget,
        });
    }
    Ok(size as usize)
}

/// Mixed-radix codec between profile indices and joint plans; the last robot varies fastest.
#[derive(Debug, Clone)]
pub struct ProfileIndex {
    radix: Vec<usize>,
}

impl ProfileIndex {
    pub fn new(game: &GameInstance) -> Self {
        ProfileIndex {
            radix: game.action_counts(),
        }
    }

    pub fn len(&self) -> usize {
        self.radix.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plan(&self, mut k: usize) -> JointPlan {
        let mut out = vec![0; self.radix.len()];
        for i in (0..self.radix.len()).rev() {
            out[i] = k % self.radix[i];
            k /= self.radix[i];
        }
        JointPlan(out)
    }

    pub fn index(&self, plan: &JointPlan) -> usize {
        plan.0.iter().zip(&self.radix).fold(0, |acc, (&a, &r)| acc * r + a)
    }

    fn stride(&self, robot: usize) -> usize {
        self.radix[robot + 1..].iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Optimum {
    pub value: Value,
    pub witnesses: Vec<JointPlan>,
}

/// Maximum total value over the joint action space, with every maximizer.
pub fn brute_force_optimum(game: &GameInstance, budget: u128) -> Result<Optimum> {
    let n = profile_count(game, budget)?;
    let idx = ProfileIndex::new(game);
    let mut best = Optimum {
        value: Value::MIN,
        witnesses: Vec::new(),
    };
    for k in 0..n {
        let plan = idx.plan(k);
        let v = game.global_value(&plan);
        if v > best.value {
            best.value = v;
            best.witnesses.clear();
        }
        if v == best.value {
            best.witnesses.push(plan);
        }
    }
    Ok(best)
}

/// Maximum total value over all feasible trajectories of every robot.
///
/// Scores raw trajectories by the counter definition, independently of action sets.
pub fn brute_force_optimum_full(grid: &Grid, stations: &[Cell], horizon: u32, tasks: &[Task], budget: u128) -> Result<Value> {
    let spaces: Vec<Vec<Trajectory>> = stations
        .iter()
        .map(|&s| grid.enumerate_feasible_trajectories(s, horizon, budget))
        .collect::<Result<_>>()?;
    let size = spaces
        .iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
        .unwrap_or(u128::MAX);
    if size > budget {
        return Err(DteError::BudgetExceeded {
            what: "joint trajectory space",
            size,
            budget,
        });
    }
    let mut best = Value::MIN;
    let mut choice = vec![0usize; spaces.len()];
    loop {
        let trajs: Vec<&Trajectory> = choice.iter().zip(&spaces).map(|(&k, s)| &s[k]).collect();
        best = best.max(value_of_trajectories(tasks, &trajs)?);
        // odometer increment
        let mut i = spaces.len();
        loop {
            if i == 0 {
                return Ok(if spaces.is_empty() { value_of_trajectories(tasks, &[])? } else { best });
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < spaces[i].len() {
                break;
            }
            choice[i] = 0;
        }
    }
}

/// Pure Nash equilibrium test: every robot already plays a best response.
pub fn is_nash(game: &GameInstance, plan: &JointPlan) -> Result<bool> {
    game.validate_plan(plan)?;
    for i in 0..game.n_robots() {
        let u = game.deviation_utilities(plan, i)?;
        let best = u.iter().copied().max().unwrap_or(0);
        if u[plan.0[i]] < best {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Ratio of the best to the worst equilibrium value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceOfAnarchy {
    Ratio { best: Value, worst: Value },
    /// The worst equilibrium has value zero while the best does not.
    Infinite,
}

impl PriceOfAnarchy {
    pub fn from_values(best: Value, worst: Value) -> Self {
        if best == worst {
            PriceOfAnarchy::Ratio { best: 1, worst: 1 }
        } else if worst == 0 {
            PriceOfAnarchy::Infinite
        } else {
            PriceOfAnarchy::Ratio { best, worst }
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            PriceOfAnarchy::Ratio { best, worst } => best as f64 / worst as f64,
            PriceOfAnarchy::Infinite => f64::INFINITY,
        }
    }

    /// Exact `PoA <= num/den` for positive `den`.
    pub fn at_most(&self, num: i128, den: i128) -> bool {
        match *self {
            PriceOfAnarchy::Ratio { best, worst } => best as i128 * den <= num * worst as i128,
            PriceOfAnarchy::Infinite => false,
        }
    }
}

impl fmt::Display for PriceOfAnarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriceOfAnarchy::Ratio { best, worst } => write!(f, "{best}/{worst}"),
            PriceOfAnarchy::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for PriceOfAnarchy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PriceOfAnarchy::Ratio { .. } => s.serialize_f64(self.as_f64()),
            PriceOfAnarchy::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub equilibria: Vec<JointPlan>,
    pub values: Vec<Value>,
    pub optimum: Value,
    pub poa: PriceOfAnarchy,
}

/// Enumerates every pure Nash equilibrium of the game.
pub fn enumerate_nash(game: &GameInstance, budget: u128) -> Result<EquilibriumReport> {
    let n = profile_count(game, budget)?;
    let idx = ProfileIndex::new(game);
    let mut equilibria = Vec::new();
    let mut values = Vec::new();
    let mut optimum = Value::MIN;
    for k in 0..n {
        let plan = idx.plan(k);
        let v = game.global_value(&plan);
        optimum = optimum.max(v);
        if is_nash(game, &plan)? {
            equilibria.push(plan);
            values.push(v);
        }
    }
    let poa = price_of_anarchy(&values)?;
    Ok(EquilibriumReport {
        equilibria,
        values,
        optimum,
        poa,
    })
}

pub fn price_of_anarchy(equilibrium_values: &[Value]) -> Result<PriceOfAnarchy> {
    let best = equilibrium_values.iter().copied().max();
    let worst = equilibrium_values.iter().copied().min();
    match (best, worst) {
        (Some(b), Some(w)) => Ok(PriceOfAnarchy::from_values(b, w)),
        _ => Err(DteError::Domain("no equilibria to compare".into())),
    }
}

/// Checks `PoA <= max(m/n, 1)` for single-station games with simple tasks.
pub fn check_theorem3_bound(game: &GameInstance, report: &EquilibriumReport) -> Result<bool> {
    let n = game.n_robots();
    if n == 0 {
        return Err(DteError::Inapplicable("no robots".into()));
    }
    let station = game.robots()[0].station;
    if game.robots().iter().any(|r| r.station != station) {
        return Err(DteError::Inapplicable("robots use more than one station".into()));
    }
    if let Some(t) = game.tasks().iter().find(|t| !t.value.is_simple()) {
        return Err(DteError::Inapplicable(format!("task {} is not simple", t.id)));
    }
    let m = game.tasks().len() as i128;
    let n = n as i128;
    Ok(if m > n {
        report.poa.at_most(m, n)
    } else {
        report.poa.at_most(1, 1)
    })
}

/// Row-major dense transition matrix of the log-linear learning chain.
pub fn lll_transition_matrix(game: &GameInstance, epsilon: f64, budget: u128) -> Result<Vec<Vec<f64>>> {
    if !(epsilon > 0.0) {
        return Err(DteError::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let size = profile_count(game, budget)?;
    let idx = ProfileIndex::new(game);
    let n = game.n_robots() as f64;
    let mut p = vec![vec![0.0; size]; size];
    for (k, row) in p.iter_mut().enumerate() {
        let plan = idx.plan(k);
        for i in 0..game.n_robots() {
            let probs = softmax(&game.deviation_utilities(&plan, i)?, epsilon);
            let stride = idx.stride(i);
            let base = k - plan.0[i] * stride;
            for (a, q) in probs.into_iter().enumerate() {
                row[base + a * stride] += q / n;
            }
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub epsilon: f64,
    pub probabilities: Vec<f64>,
    pub residual: f64,
}

impl StationaryDistribution {
    /// Probability mass on the given profiles, summed directly.
    pub fn mass_on(&self, profiles: impl IntoIterator<Item = usize>) -> f64 {
        profiles.into_iter().map(|k| self.probabilities[k]).sum()
    }
}

const STATIONARY_TOLERANCE: f64 = 1e-12;

/// Exact stationary distribution of the log-linear learning chain.
///
/// Solved with Grassmann–Taksar–Heyman elimination, which stays accurate when
/// small `epsilon` makes some transitions vanishingly rare.
pub fn lll_stationary_distribution(game: &GameInstance, epsilon: f64, budget: u128) -> Result<StationaryDistribution> {
    let mut p = lll_transition_matrix(game, epsilon, budget)?;
    let original = p.clone();
    let pi = gth_solve(&mut p)?;
    let residual = stationary_residual(&original, &pi);
    if !(residual < STATIONARY_TOLERANCE) {
        return Err(DteError::NonConvergence(residual));
    }
    Ok(StationaryDistribution {
        epsilon,
        probabilities: pi,
        residual,
    })
}

/// Stationary vector of an irreducible row-stochastic matrix; `p` is overwritten.
pub fn gth_solve(p: &mut [Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    if n == 0 {
        return Err(DteError::Domain("empty chain".into()));
    }
    for k in (1..n).rev() {
        let s: f64 = p[k][..k].iter().sum();
        if !(s > 0.0) {
            return Err(DteError::Domain("chain is not irreducible".into()));
        }
        for row in p[..k].iter_mut() {
            row[k] /= s;
        }
        let (head, tail) = p.split_at_mut(k);
        let pivot = &tail[0];
        for row in head.iter_mut() {
            let f = row[k];
            if f != 0.0 {
                for (x, &y) in row[..k].iter_mut().zip(&pivot[..k]) {
                    *x += f * y;
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * p[i][k]).sum();
    }
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= z);
    Ok(pi)
}

/// `|| pi P - pi ||_1`.
pub fn stationary_residual(p: &[Vec<f64>], pi: &[f64]) -> f64 {
    let n = pi.len();
    let mut next = vec![0.0; n];
    for (row, &w) in p.iter().zip(pi) {
        for (x, &q) in next.iter_mut().zip(row) {
            *x += w * q;
        }
    }
    next.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

/// Fraction of rounds `0..=K` spent at each joint plan.
pub fn empirical_occupancy(game: &GameInstance, trace: &RunTrace) -> Vec<f64> {
    let idx = ProfileIndex::new(game);
    let mut counts = vec![0u64; idx.len()];
    let mut plan = trace.initial_plan.clone();
    counts[idx.index(&plan)] += 1;
    for r in &trace.records {
        plan.0[r.robot] = r.action;
        counts[idx.index(&plan)] += 1;
    }
    let total = (trace.records.len() + 1) as f64;
    counts.into_iter().map(|c| c as f64 / total).collect()
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
