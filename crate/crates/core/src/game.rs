//! The task-execution game: joint plans, counters, total value and
//! marginal-contribution utilities.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{build_minimal_action_set, extend_action_set, ActionBudget, ActionSet};
use crate::error::{DteError, Result};
use crate::grid::{Grid, Trajectory};
use crate::task::{check_no_overlap, CounterVector, Task, Value, ValueSpec};

/// Whether actions carry explicit task commitments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Plain,
    Extended,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Robot {
    pub id: String,
    /// Index into the grid's station list.
    pub station: usize,
}

/// One element of a robot's action set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub trajectory: Trajectory,
    pub commitments: Option<Vec<Option<usize>>>,
    /// Counter entries this action adds to, grouped by task: `(task, window offsets)`.
    touched: Vec<(usize, Vec<u32>)>,
}

impl Action {
    fn new(trajectory: Trajectory, commitments: Option<Vec<Option<usize>>>, tasks: &[Task]) -> Self {
        let mut touched: Vec<(usize, Vec<u32>)> = Vec::new();
        for t in 0..trajectory.horizon() {
            let Some(cell) = trajectory.stays_at(t) else { continue };
            for (j, task) in tasks.iter().enumerate() {
                if task.location != cell || !task.is_active(t) {
                    continue;
                }
                if let Some(z) = &commitments {
                    if z[t as usize] != Some(j) {
                        continue;
                    }
                }
                let offset = t - task.arrival;
                match touched.iter_mut().find(|(k, _)| *k == j) {
                    Some((_, offs)) => offs.push(offset),
                    None => touched.push((j, vec![offset])),
                }
            }
        }
        touched.sort();
        Action {
            trajectory,
            commitments,
            touched,
        }
    }

    /// Tasks whose counters this action contributes to.
    pub fn tasks_served(&self) -> impl Iterator<Item = usize> + '_ {
        self.touched.iter().map(|(j, _)| *j)
    }
}

/// Chosen action index per robot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointPlan(pub Vec<usize>);

impl JointPlan {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn with(&self, robot: usize, action: usize) -> JointPlan {
        let mut p = self.clone();
        p.0[robot] = action;
        p
    }
}

/// Counter vectors of every task under some joint plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counters {
    per_task: Vec<CounterVector>,
}

impl Counters {
    fn zero(tasks: &[Task]) -> Self {
        Counters {
            per_task: tasks.iter().map(|t| vec![0; t.window_len()]).collect(),
        }
    }

    fn add(&mut self, action: &Action) {
        for (j, offs) in &action.touched {
            for &o in offs {
                self.per_task[*j][o as usize] += 1;
            }
        }
    }

    fn remove(&mut self, action: &Action) {
        for (j, offs) in &action.touched {
            for &o in offs {
                self.per_task[*j][o as usize] -= 1;
            }
        }
    }

    pub fn task(&self, j: usize) -> &[u32] {
        &self.per_task[j]
    }
}

/// Options for building action sets inside a game.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Force a mode; by default extended mode is used exactly when tasks overlap.
    pub mode: Option<Mode>,
    pub budget: ActionBudget,
}

/// A game instance: environment, robots, tasks and per-robot action sets.
#[derive(Debug, Clone)]
pub struct GameInstance {
    grid: Grid,
    horizon: u32,
    robots: Vec<Robot>,
    tasks: Vec<Task>,
    mode: Mode,
    action_sets: Vec<Arc<ActionSet>>,
    actions: Vec<Arc<Vec<Action>>>,
    station_dist: Vec<Vec<Option<u32>>>,
}

impl GameInstance {
    /// Builds minimal (and, if needed, extended) action sets for every robot.
    pub fn build(grid: Grid, horizon: u32, robots: Vec<Robot>, tasks: Vec<Task>, opts: &BuildOptions) -> Result<Self> {
        let mode = Self::resolve_mode(&tasks, opts.mode)?;
        let mut per_station: Vec<Option<(Arc<ActionSet>, Arc<Vec<Action>>)>> = vec![None; grid.stations().len()];
        let mut action_sets = Vec::with_capacity(robots.len());
        let mut actions = Vec::with_capacity(robots.len());
        for r in &robots {
            let Some(&station) = grid.stations().get(r.station) else {
                return Err(DteError::Domain(format!("robot {}: no station with index {}", r.id, r.station)));
            };
            if per_station[r.station].is_none() {
                let set = build_minimal_action_set(&grid, station, horizon, &tasks, &opts.budget)?;
                let acts: Vec<Action> = match mode {
                    Mode::Plain => set.actions.iter().map(|p| Action::new(p.clone(), None, &tasks)).collect(),
                    Mode::Extended => extend_action_set(&set, &tasks, &opts.budget)?
                        .into_iter()
                        .map(|e| Action::new(e.trajectory, Some(e.commitments), &tasks))
                        .collect(),
                };
                per_station[r.station] = Some((Arc::new(set), Arc::new(acts)));
            }
            if let Some((set, acts)) = &per_station[r.station] {
                action_sets.push(Arc::clone(set));
                actions.push(Arc::clone(acts));
            }
        }
        Self::assemble(grid, horizon, robots, tasks, mode, action_sets, actions)
    }

    /// Uses explicit trajectories as action sets (plain mode only).
    pub fn from_trajectories(
        grid: Grid,
        horizon: u32,
        robots: Vec<Robot>,
        tasks: Vec<Task>,
        trajectories: Vec<Vec<Trajectory>>,
    ) -> Result<Self> {
        let mode = Self::resolve_mode(&tasks, Some(Mode::Plain))?;
        if trajectories.len() != robots.len() {
            return Err(DteError::Domain("one action list per robot required".into()));
        }
        let mut action_sets = Vec::new();
        let mut actions = Vec::new();
        for (r, trajs) in robots.iter().zip(trajectories) {
            let station = *grid
                .stations()
                .get(r.station)
                .ok_or_else(|| DteError::Domain(format!("robot {}: no station {}", r.id, r.station)))?;
            if trajs.is_empty() {
                return Err(DteError::Domain(format!("robot {}: empty action set", r.id)));
            }
            for p in &trajs {
                if p.horizon() != horizon {
                    return Err(DteError::Domain(format!("robot {}: trajectory horizon {} != {horizon}", r.id, p.horizon())));
                }
                grid.check_trajectory(station, p)
                    .map_err(|d| DteError::Domain(format!("robot {}: {d}", r.id)))?;
            }
            let sigs = trajs.iter().map(|p| crate::actions::signature(p, &tasks)).collect();
            actions.push(Arc::new(trajs.iter().map(|p| Action::new(p.clone(), None, &tasks)).collect()));
            action_sets.push(Arc::new(ActionSet {
                station,
                horizon,
                actions: trajs,
                signatures: sigs,
            }));
        }
        Self::assemble(grid, horizon, robots, tasks, mode, action_sets, actions)
    }

    fn resolve_mode(tasks: &[Task], requested: Option<Mode>) -> Result<Mode> {
        let overlapping = !check_no_overlap(tasks).is_empty();
        match (requested, overlapping) {
            (Some(Mode::Plain), true) => Err(DteError::Domain(
                "tasks at one location have overlapping windows; plain mode is not applicable".into(),
            )),
            (Some(m), _) => Ok(m),
            (None, true) => Ok(Mode::Extended),
            (None, false) => Ok(Mode::Plain),
        }
    }

    fn assemble(
        grid: Grid,
        horizon: u32,
        robots: Vec<Robot>,
        tasks: Vec<Task>,
        mode: Mode,
        action_sets: Vec<Arc<ActionSet>>,
        actions: Vec<Arc<Vec<Action>>>,
    ) -> Result<Self> {
        for t in &tasks {
            t.validate(horizon)?;
            grid.check_feasible(t.location)?;
            check_table_total(t, robots.len() as u32)?;
        }
        let station_dist = grid
            .stations()
            .iter()
            .map(|&s| grid.distances_from(s))
            .collect::<Result<_>>()?;
        Ok(GameInstance {
            grid,
            horizon,
            robots,
            tasks,
            mode,
            action_sets,
            actions,
            station_dist,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn robots(&self) -> &[Robot] {
        &self.robots
    }

    pub fn n_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn action_set(&self, robot: usize) -> &ActionSet {
        &self.action_sets[robot]
    }

    pub fn actions(&self, robot: usize) -> &[Action] {
        &self.actions[robot]
    }

    /// `|A_i|` (or `|A_i⁺|` in extended mode) for every robot.
    pub fn action_counts(&self) -> Vec<usize> {
        self.actions.iter().map(|a| a.len()).collect()
    }

    /// Number of joint plans, or `None` on overflow.
    pub fn profile_count(&self) -> Option<u128> {
        self.actions.iter().try_fold(1u128, |acc, a| acc.checked_mul(a.len() as u128))
    }

    /// Index of `traj` in the robot's action list (first match).
    pub fn action_index(&self, robot: usize, traj: &Trajectory) -> Option<usize> {
        self.actions(robot).iter().position(|a| &a.trajectory == traj)
    }

    pub fn validate_plan(&self, plan: &JointPlan) -> Result<()> {
        if plan.len() != self.n_robots() {
            return Err(DteError::Domain(format!(
                "plan has {} entries for {} robots",
                plan.len(),
                self.n_robots()
            )));
        }
        for (i, &a) in plan.0.iter().enumerate() {
            if a >= self.actions(i).len() {
                return Err(DteError::Domain(format!("robot {i}: action {a} out of range")));
            }
        }
        Ok(())
    }

    pub fn counters(&self, plan: &JointPlan) -> Counters {
        let mut c = Counters::zero(&self.tasks);
        for (i, &a) in plan.0.iter().enumerate() {
            c.add(&self.actions(i)[a]);
        }
        c
    }

    /// Counter vector of one task under `plan`.
    pub fn counter(&self, plan: &JointPlan, task: usize) -> Result<CounterVector> {
        if task >= self.tasks.len() {
            return Err(DteError::UnknownTask(task));
        }
        Ok(self.counters(plan).per_task[task].clone())
    }

    /// Counter vector of one task with `robot` disregarded.
    pub fn counter_without(&self, plan: &JointPlan, task: usize, robot: usize) -> Result<CounterVector> {
        if robot >= self.n_robots() {
            return Err(DteError::UnknownRobot(robot));
        }
        let mut c = self.counters(plan);
        c.remove(&self.actions(robot)[plan.0[robot]]);
        c.per_task
            .get(task)
            .cloned()
            .ok_or(DteError::UnknownTask(task))
    }

    fn task_value(&self, j: usize, c: &[u32]) -> Value {
        self.tasks[j]
            .value
            .evaluate(c)
            .expect("table totality is checked when the game is built")
    }

    pub fn value_of_counters(&self, counters: &Counters) -> Value {
        counters
            .per_task
            .iter()
            .enumerate()
            .map(|(j, c)| self.task_value(j, c))
            .sum()
    }

    /// Total value of completed tasks; also the potential of the game.
    pub fn global_value(&self, plan: &JointPlan) -> Value {
        self.value_of_counters(&self.counters(plan))
    }

    /// Marginal contribution of `robot` to the total value.
    pub fn utility(&self, plan: &JointPlan, robot: usize) -> Result<Value> {
        if robot >= self.n_robots() {
            return Err(DteError::UnknownRobot(robot));
        }
        let mut others = self.counters(plan);
        let mine = &self.actions(robot)[plan.0[robot]];
        others.remove(mine);
        Ok(self.gain(&others, mine))
    }

    /// Value `action` adds on top of `others`; only tasks it touches can change.
    fn gain(&self, others: &Counters, action: &Action) -> Value {
        let mut buf = Vec::new();
        action
            .touched
            .iter()
            .map(|(j, offs)| {
                let base = &others.per_task[*j];
                buf.clear();
                buf.extend_from_slice(base);
                for &o in offs {
                    buf[o as usize] += 1;
                }
                self.task_value(*j, &buf) - self.task_value(*j, base)
            })
            .sum()
    }

    /// Utility `robot` would get from each of its actions, the others fixed.
    pub fn deviation_utilities(&self, plan: &JointPlan, robot: usize) -> Result<Vec<Value>> {
        if robot >= self.n_robots() {
            return Err(DteError::UnknownRobot(robot));
        }
        let mut others = self.counters(plan);
        others.remove(&self.actions(robot)[plan.0[robot]]);
        Ok(self.actions(robot).iter().map(|a| self.gain(&others, a)).collect())
    }

    fn station_distance(&self, robot: usize, task: usize) -> Option<u32> {
        let r = &self.robots[robot];
        self.station_dist[r.station][self.grid.index(self.tasks[task].location)]
    }

    /// Tasks the robot can reach, serve for a step and return from: `2·dist < T`.
    pub fn local_tasks(&self, robot: usize) -> Result<Vec<usize>> {
        if robot >= self.n_robots() {
            return Err(DteError::UnknownRobot(robot));
        }
        Ok((0..self.tasks.len())
            .filter(|&j| matches!(self.station_distance(robot, j), Some(d) if 2 * d < self.horizon))
            .collect())
    }

    /// Robots sharing at least one reachable task with `robot` (itself included).
    pub fn local_robots(&self, robot: usize) -> Result<Vec<usize>> {
        let mine: BTreeSet<usize> = self.local_tasks(robot)?.into_iter().collect();
        let mut out = Vec::new();
        for k in 0..self.n_robots() {
            let theirs = self.local_tasks(k)?;
            if theirs.iter().any(|j| mine.contains(j)) {
                out.push(k);
            }
        }
        Ok(out)
    }

    /// Utility recomputed from local information only: the specifications of
    /// reachable tasks and the plans of robots sharing one of them.
    pub fn local_utility(&self, plan: &JointPlan, robot: usize) -> Result<Value> {
        let tasks = self.local_tasks(robot)?;
        let robots = self.local_robots(robot)?;
        let mut total = 0;
        for &j in &tasks {
            let mut with = vec![0u32; self.tasks[j].window_len()];
            let mut without = with.clone();
            for &k in &robots {
                let traj = &self.actions(k)[plan.0[k]];
                for (jj, offs) in &traj.touched {
                    if *jj != j {
                        continue;
                    }
                    for &o in offs {
                        with[o as usize] += 1;
                        if k != robot {
                            without[o as usize] += 1;
                        }
                    }
                }
            }
            total += self.task_value(j, &with) - self.task_value(j, &without);
        }
        Ok(total)
    }

    /// Uniformly random joint plan.
    pub fn random_plan<R: Rng>(&self, rng: &mut R) -> JointPlan {
        JointPlan(self.actions.iter().map(|a| rng.gen_range(0..a.len())).collect())
    }

    /// Samples unilateral deviations and checks `ΔU_i = Δf` exactly.
    pub fn verify_potential_identity(&self, samples: usize, seed: u64) -> bool {
        self.verify_potential_identity_with(samples, seed, |g, p, i| {
            g.utility(p, i).expect("robot index drawn from range")
        })
    }

    /// As [`Self::verify_potential_identity`], with a caller-supplied utility.
    pub fn verify_potential_identity_with<F>(&self, samples: usize, seed: u64, utility: F) -> bool
    where
        F: Fn(&GameInstance, &JointPlan, usize) -> Value,
    {
        if self.n_robots() == 0 {
            return true;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples).all(|_| {
            let plan = self.random_plan(&mut rng);
            let i = rng.gen_range(0..self.n_robots());
            let alt = plan.with(i, rng.gen_range(0..self.actions(i).len()));
            utility(self, &alt, i) - utility(self, &plan, i) == self.global_value(&alt) - self.global_value(&plan)
        })
    }
}

/// Tables without a default must list every counter reachable with `n` robots.
fn check_table_total(task: &Task, n: u32) -> Result<()> {
    let ValueSpec::Table { entries, default: None, .. } = &task.value else {
        return Ok(());
    };
    let w = task.window_len();
    let base = n as u128 + 1;
    let size = (0..w).try_fold(1u128, |acc, _| acc.checked_mul(base)).unwrap_or(u128::MAX);
    const LIMIT: u128 = 1 << 20;
    if size > LIMIT {
        return Err(DteError::BudgetExceeded {
            what: "table totality check",
            size,
            budget: LIMIT,
        });
    }
    for mut code in 0..size {
        let c: Vec<u32> = (0..w)
            .map(|_| {
                let d = (code % base) as u32;
                code /= base;
                d
            })
            .collect();
        if !entries.iter().any(|e| e.counter == c) {
            return Err(DteError::Domain(format!(
                "task {}: value table has no entry for {c:?} and no default",
                task.id
            )));
        }
    }
    Ok(())
}

/// Total value of raw trajectories, straight from the counter definition.
///
/// Ignores action sets entirely, so it also scores trajectories outside them.
pub fn value_of_trajectories(tasks: &[Task], trajectories: &[&Trajectory]) -> Result<Value> {
    tasks
        .iter()
        .map(|task| {
            let c: Vec<u32> = (task.arrival..task.departure)
                .map(|t| {
                    trajectories
                        .iter()
                        .filter(|p| p.stays_at(t) == Some(task.location))
                        .count() as u32
                })
                .collect();
            task.value_of(&c)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;

    fn c(x: u16, y: u16) -> Cell {
        Cell::new(x, y)
    }

    fn robots(stations: &[usize]) -> Vec<Robot> {
        stations
            .iter()
            .enumerate()
            .map(|(i, &s)| Robot { id: format!("r{}", i + 1), station: s })
            .collect()
    }

    fn simple(id: &str, x: u16, y: u16, a: u32, d: u32, v: Value) -> Task {
        Task::new(id, c(x, y), a, d, ValueSpec::Simple { value: v })
    }

    #[test]
    fn empty_plan_counters_are_zero() {
        let g = Grid::new(5, 5, [], vec![c(1, 1)]).unwrap();
        let game = GameInstance::build(g, 4, vec![], vec![simple("a", 2, 2, 0, 4, 1)], &Default::default()).unwrap();
        assert_eq!(game.counter(&JointPlan(vec![]), 0).unwrap(), vec![0, 0, 0, 0]);
        assert_eq!(game.global_value(&JointPlan(vec![])), 0);
        assert!(matches!(game.counter(&JointPlan(vec![]), 3), Err(DteError::UnknownTask(3))));
    }

    #[test]
    fn task_free_game() {
        let g = Grid::new(4, 4, [], vec![c(2, 2)]).unwrap();
        let game = GameInstance::build(g, 4, robots(&[0, 0]), vec![], &Default::default()).unwrap();
        assert_eq!(game.action_counts(), vec![1, 1]);
        let plan = JointPlan(vec![0, 0]);
        assert_eq!(game.global_value(&plan), 0);
        assert_eq!(game.utility(&plan, 0).unwrap(), 0);
        assert!(game.local_robots(0).unwrap().is_empty());
    }

    #[test]
    fn lone_robot_gets_full_value() {
        let g = Grid::new(4, 4, [], vec![c(2, 2)]).unwrap();
        let game = GameInstance::build(g, 2, robots(&[0]), vec![simple("a", 2, 2, 0, 2, 5)], &Default::default()).unwrap();
        let plan = JointPlan(vec![0]);
        assert_eq!(game.global_value(&plan), 5);
        assert_eq!(game.utility(&plan, 0).unwrap(), 5);
        assert!(matches!(game.utility(&plan, 1), Err(DteError::UnknownRobot(1))));
    }

    #[test]
    fn local_tasks_use_strict_half_horizon() {
        let g = Grid::new(7, 5, [], vec![c(1, 1)]).unwrap();
        let tasks = vec![
            simple("home", 1, 1, 0, 4, 1),
            simple("edge", 3, 1, 0, 4, 1), // distance 2 == T/2
            simple("near", 2, 1, 0, 4, 1),
        ];
        let game = GameInstance::build(g, 4, robots(&[0]), tasks, &Default::default()).unwrap();
        assert_eq!(game.local_tasks(0).unwrap(), vec![0, 2]);
    }

    #[test]
    fn local_robot_sets() {
        let g = Grid::new(9, 3, [], vec![c(1, 2), c(1, 2), c(9, 2)]).unwrap();
        let tasks = vec![simple("w", 2, 2, 0, 4, 1), simple("e", 8, 2, 0, 4, 1)];
        let game = GameInstance::build(g, 4, robots(&[0, 1, 2]), tasks, &Default::default()).unwrap();
        assert_eq!(game.local_robots(0).unwrap(), vec![0, 1]);
        assert_eq!(game.local_robots(2).unwrap(), vec![2]);
    }

    #[test]
    fn plain_mode_rejects_overlap() {
        let g = Grid::new(5, 5, [], vec![c(2, 2)]).unwrap();
        let tasks = vec![simple("1", 3, 3, 0, 3, 1), simple("2", 3, 3, 2, 4, 1)];
        let opts = BuildOptions { mode: Some(Mode::Plain), ..Default::default() };
        assert!(GameInstance::build(g.clone(), 4, robots(&[0]), tasks.clone(), &opts).is_err());
        let game = GameInstance::build(g, 4, robots(&[0]), tasks, &Default::default()).unwrap();
        assert_eq!(game.mode(), Mode::Extended);
        assert_eq!(game.action_counts(), vec![2]);
    }

    #[test]
    fn incomplete_table_rejected() {
        let g = Grid::new(3, 3, [], vec![c(2, 2)]).unwrap();
        let task = Task::new(
            "t",
            c(2, 2),
            0,
            1,
            ValueSpec::Table {
                cap: 1,
                entries: vec![crate::task::TableEntry { counter: vec![1], value: 1 }],
                default: None,
            },
        );
        assert!(GameInstance::build(g, 2, robots(&[0]), vec![task], &Default::default()).is_err());
    }
}
