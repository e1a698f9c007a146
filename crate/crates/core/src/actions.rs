//! Minimal action sets built from service signatures.
//!
//! A trajectory's service signature is the set of `(t, cell)` stays it makes at
//! a task location while some task there is active. A trajectory whose
//! signature is contained in another's can be dropped without losing any
//! optimal joint plan, so a minimal action set holds one representative per
//! maximal achievable signature.
//!
//! Construction is a forward sweep over `(time, cell, partial signature)`.
//! Two partial signatures at the same `(time, cell)` have identical futures,
//! so a partial signature strictly contained in another one there can be
//! discarded without changing the set of maximal final signatures.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::error::{DteError, Result};
use crate::grid::{Cell, Grid, Trajectory};
use crate::task::Task;

/// Limits that keep action-set construction from degrading silently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionBudget {
    /// Maximum number of live `(cell, signature)` states at any time step.
    pub signatures: usize,
    /// Maximum number of extended actions per robot.
    pub extended: usize,
}

impl Default for ActionBudget {
    fn default() -> Self {
        ActionBudget {
            signatures: 1_000_000,
            extended: 100_000,
        }
    }
}

/// Task-serving stays of a trajectory, indexed by time step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ServiceSignature(Vec<Option<Cell>>);

impl ServiceSignature {
    pub fn empty(horizon: u32) -> Self {
        ServiceSignature(vec![None; horizon as usize])
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Option::is_none)
    }

    pub fn len(&self) -> usize {
        self.0.iter().flatten().count()
    }

    pub fn at(&self, t: u32) -> Option<Cell> {
        self.0.get(t as usize).copied().flatten()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, Cell)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(t, c)| c.map(|c| (t as u32, c)))
    }

    pub fn is_subset_of(&self, other: &ServiceSignature) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.is_none() || a == b)
    }

    pub fn is_strict_subset_of(&self, other: &ServiceSignature) -> bool {
        self != other && self.is_subset_of(other)
    }
}

impl fmt::Display for ServiceSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs().map(|(t, c)| format!("{t}@{c}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

fn active_location(tasks: &[Task], t: u32, cell: Cell) -> bool {
    tasks.iter().any(|task| task.location == cell && task.is_active(t))
}

/// Time steps at which `traj` stays at a task location inside that task's window.
pub fn service_times(traj: &Trajectory, tasks: &[Task]) -> BTreeSet<u32> {
    (0..traj.horizon())
        .filter(|&t| matches!(traj.stays_at(t), Some(c) if active_location(tasks, t, c)))
        .collect()
}

pub fn signature(traj: &Trajectory, tasks: &[Task]) -> ServiceSignature {
    ServiceSignature(
        (0..traj.horizon())
            .map(|t| traj.stays_at(t).filter(|&c| active_location(tasks, t, c)))
            .collect(),
    )
}

/// Indices of tasks `traj` can serve at step `t`.
pub fn theta(traj: &Trajectory, tasks: &[Task], t: u32) -> Vec<usize> {
    match traj.stays_at(t) {
        Some(c) => tasks
            .iter()
            .enumerate()
            .filter(|(_, task)| task.location == c && task.is_active(t))
            .map(|(j, _)| j)
            .collect(),
        None => Vec::new(),
    }
}

/// A robot's action set: representatives of the maximal service signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    pub station: Cell,
    pub horizon: u32,
    pub actions: Vec<Trajectory>,
    pub signatures: Vec<ServiceSignature>,
}

impl ActionSet {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// True for the stay-at-station singleton built when nothing can be served.
    pub fn is_degenerate(&self) -> bool {
        self.signatures.len() == 1 && self.signatures[0].is_empty()
    }
}

/// Keeps the maximal elements of `sigs` under inclusion.
fn maximal(sigs: HashSet<ServiceSignature>) -> Vec<ServiceSignature> {
    let mut sorted: Vec<ServiceSignature> = sigs.into_iter().collect();
    // larger first so that any dominating signature is already kept
    sorted.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut kept: Vec<ServiceSignature> = Vec::new();
    for s in sorted {
        if !kept.iter().any(|k| s.is_subset_of(k)) {
            kept.push(s);
        }
    }
    kept
}

/// Builds the minimal action set of a robot stationed at `station`.
pub fn build_minimal_action_set(
    grid: &Grid,
    station: Cell,
    horizon: u32,
    tasks: &[Task],
    budget: &ActionBudget,
) -> Result<ActionSet> {
    let home = grid.distances_from(station)?;
    let adj = grid.adjacency();
    let n = grid.cell_count();
    let alive = |cell: usize, t: u32| matches!(home[cell], Some(d) if d <= horizon - t);
    let active: Vec<Vec<bool>> = (0..horizon)
        .map(|t| (0..n).map(|i| active_location(tasks, t, grid.cell_at(i))).collect())
        .collect();

    let mut layer: HashMap<usize, Vec<ServiceSignature>> = HashMap::new();
    layer.insert(grid.index(station), vec![ServiceSignature::empty(horizon)]);
    for t in 0..horizon {
        let mut next: HashMap<usize, HashSet<ServiceSignature>> = HashMap::new();
        let mut states = 0usize;
        for (&cell, sigs) in &layer {
            for &q in &adj[cell] {
                if !alive(q, t + 1) {
                    continue;
                }
                let serving = q == cell && active[t as usize][cell];
                let bucket = next.entry(q).or_default();
                for sig in sigs {
                    let mut s = sig.clone();
                    if serving {
                        s.0[t as usize] = Some(grid.cell_at(cell));
                    }
                    if bucket.insert(s) {
                        states += 1;
                    }
                }
            }
        }
        if states > budget.signatures {
            return Err(DteError::BudgetExceeded {
                what: "signature states",
                size: states as u128,
                budget: budget.signatures as u128,
            });
        }
        layer = next.into_iter().map(|(c, s)| (c, maximal(s))).collect();
    }

    let finals = layer.remove(&grid.index(station)).unwrap_or_default();
    let mut finals: Vec<ServiceSignature> = finals.into_iter().filter(|s| !s.is_empty()).collect();
    if finals.is_empty() {
        return Ok(ActionSet {
            station,
            horizon,
            actions: vec![Trajectory::stationary(station, horizon)],
            signatures: vec![ServiceSignature::empty(horizon)],
        });
    }
    finals.sort();
    let mut pairs: Vec<(Trajectory, ServiceSignature)> = finals
        .into_iter()
        .map(|sig| {
            let traj = realize(grid, &adj, station, horizon, &sig)
                .ok_or_else(|| DteError::Domain(format!("signature {sig} is not realizable")))?;
            debug_assert_eq!(signature(&traj, tasks), sig);
            Ok((traj, sig))
        })
        .collect::<Result<_>>()?;
    pairs.sort();
    let (actions, signatures) = pairs.into_iter().unzip();
    Ok(ActionSet {
        station,
        horizon,
        actions,
        signatures,
    })
}

/// Lexicographically smallest trajectory making every stay required by `sig`.
fn realize(
    grid: &Grid,
    adj: &[Vec<usize>],
    station: Cell,
    horizon: u32,
    sig: &ServiceSignature,
) -> Option<Trajectory> {
    let n = grid.cell_count();
    let home = grid.index(station);
    let step_ok = |t: usize, from: usize, to: usize| match sig.0[t] {
        Some(c) => {
            let i = grid.index(c);
            from == i && to == i
        }
        None => true,
    };
    // reach[t][c]: from c at time t the station can be reached at the horizon
    let h = horizon as usize;
    let mut reach = vec![vec![false; n]; h + 1];
    reach[h][home] = true;
    for t in (0..h).rev() {
        for c in 0..n {
            reach[t][c] = adj[c].iter().any(|&q| reach[t + 1][q] && step_ok(t, c, q));
        }
    }
    if !reach[0][home] {
        return None;
    }
    let mut cells = vec![station];
    let mut cur = home;
    for t in 0..h {
        // adjacency lists are sorted in row-major order
        let next = *adj[cur]
            .iter()
            .find(|&&q| reach[t + 1][q] && step_ok(t, cur, q))?;
        cells.push(grid.cell_at(next));
        cur = next;
    }
    Some(Trajectory::new(cells))
}

/// Brute-force check that every feasible trajectory is covered by some action.
pub fn verify_cover(
    action_set: &ActionSet,
    grid: &Grid,
    station: Cell,
    horizon: u32,
    tasks: &[Task],
    budget: u128,
) -> Result<bool> {
    let all = grid.enumerate_feasible_trajectories(station, horizon, budget)?;
    let own: Vec<ServiceSignature> = action_set.actions.iter().map(|a| signature(a, tasks)).collect();
    Ok(all.iter().all(|q| {
        let sq = signature(q, tasks);
        own.iter().any(|s| sq.is_subset_of(s))
    }))
}

/// A trajectory together with the task each stay commits to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ExtendedAction {
    pub trajectory: Trajectory,
    /// Task index served at each step `t < T`, if any.
    pub commitments: Vec<Option<usize>>,
}

/// Expands each trajectory into one action per admissible commitment sequence.
pub fn extend_action_set(action_set: &ActionSet, tasks: &[Task], budget: &ActionBudget) -> Result<Vec<ExtendedAction>> {
    let mut out = Vec::new();
    for traj in &action_set.actions {
        let choices: Vec<Vec<Option<usize>>> = (0..traj.horizon())
            .map(|t| {
                let th = theta(traj, tasks, t);
                if th.is_empty() {
                    vec![None]
                } else {
                    th.into_iter().map(Some).collect()
                }
            })
            .collect();
        let size = choices.iter().try_fold(1usize, |acc, c| acc.checked_mul(c.len()));
        match size {
            Some(s) if out.len() + s <= budget.extended => {}
            other => {
                return Err(DteError::BudgetExceeded {
                    what: "extended actions",
                    size: other.map_or(u128::MAX, |s| (out.len() + s) as u128),
                    budget: budget.extended as u128,
                })
            }
        }
        let mut combos: Vec<Vec<Option<usize>>> = vec![Vec::new()];
        for step in &choices {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    step.iter().map(move |&z| {
                        let mut p = prefix.clone();
                        p.push(z);
                        p
                    })
                })
                .collect();
        }
        out.extend(combos.into_iter().map(|commitments| ExtendedAction {
            trajectory: traj.clone(),
            commitments,
        }));
    }
    Ok(out)
}
