//! Grid environment, motion model and the space of episode trajectories.
//!
//! Cells use 1-based `(x, y)` coordinates. Cells are ordered row-major
//! (by `y`, then `x`), and trajectories compare lexicographically on that
//! order; every "pick one representative" decision in the crate uses it.

use std::cmp::Ordering;
use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DteError, Result};

/// A grid cell with 1-based coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(u16, u16)", into = "(u16, u16)")]
pub struct Cell {
    pub x: u16,
    pub y: u16,
}

impl Cell {
    pub const fn new(x: u16, y: u16) -> Self {
        Cell { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> u16 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<(u16, u16)> for Cell {
    fn from((x, y): (u16, u16)) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for (u16, u16) {
    fn from(c: Cell) -> Self {
        (c.x, c.y)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Rectangular environment with static obstacles and robot stations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    width: u16,
    height: u16,
    obstacles: BTreeSet<Cell>,
    stations: Vec<Cell>,
    blocked: Vec<bool>,
}

impl Grid {
    pub fn new(
        width: u16,
        height: u16,
        obstacles: impl IntoIterator<Item = Cell>,
        stations: Vec<Cell>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(DteError::Domain(format!("grid must be non-empty, got {width}x{height}")));
        }
        let mut grid = Grid {
            width,
            height,
            obstacles: BTreeSet::new(),
            stations: Vec::new(),
            blocked: vec![false; width as usize * height as usize],
        };
        for cell in obstacles {
            grid.check_bounds(cell)?;
            let idx = grid.index(cell);
            grid.blocked[idx] = true;
            grid.obstacles.insert(cell);
        }
        for &s in &stations {
            grid.check_feasible(s)?;
        }
        grid.stations = stations;
        Ok(grid)
    }

    /// Obstacle-free grid without stations.
    pub fn open(width: u16, height: u16) -> Result<Self> {
        Grid::new(width, height, [], Vec::new())
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn obstacles(&self) -> &BTreeSet<Cell> {
        &self.obstacles
    }

    pub fn stations(&self) -> &[Cell] {
        &self.stations
    }

    pub fn cell_count(&self) -> usize {
        self.blocked.len()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        (1..=self.width).contains(&c.x) && (1..=self.height).contains(&c.y)
    }

    pub fn is_feasible(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.blocked[self.index(c)]
    }

    fn check_bounds(&self, c: Cell) -> Result<()> {
        if self.in_bounds(c) {
            Ok(())
        } else {
            Err(DteError::OutOfBounds(c, self.width, self.height))
        }
    }

    pub(crate) fn check_feasible(&self, c: Cell) -> Result<()> {
        self.check_bounds(c)?;
        if self.blocked[self.index(c)] {
            return Err(DteError::Infeasible(c));
        }
        Ok(())
    }

    /// Row-major index; monotone in the `Cell` ordering.
    pub fn index(&self, c: Cell) -> usize {
        (c.y as usize - 1) * self.width as usize + (c.x as usize - 1)
    }

    pub fn cell_at(&self, idx: usize) -> Cell {
        let w = self.width as usize;
        Cell::new((idx % w) as u16 + 1, (idx / w) as u16 + 1)
    }

    /// Feasible cells in row-major order.
    pub fn feasible_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cell_count())
            .filter(|&i| !self.blocked[i])
            .map(|i| self.cell_at(i))
    }

    /// Feasible cells within Chebyshev distance one of `p`, including `p`, sorted.
    pub fn neighborhood(&self, p: Cell) -> Result<Vec<Cell>> {
        self.check_feasible(p)?;
        Ok(self.neighbors_unchecked(p))
    }

    pub(crate) fn neighbors_unchecked(&self, p: Cell) -> Vec<Cell> {
        let mut out = Vec::with_capacity(9);
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                let x = p.x as i32 + dx;
                let y = p.y as i32 + dy;
                if x < 1 || y < 1 {
                    continue;
                }
                let q = Cell::new(x as u16, y as u16);
                if self.is_feasible(q) {
                    out.push(q);
                }
            }
        }
        out
    }

    /// Neighbor lists by cell index; empty for obstacle cells.
    pub(crate) fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.cell_count())
            .map(|i| {
                if self.blocked[i] {
                    Vec::new()
                } else {
                    self.neighbors_unchecked(self.cell_at(i))
                        .into_iter()
                        .map(|q| self.index(q))
                        .collect()
                }
            })
            .collect()
    }

    /// BFS distances (king moves over feasible cells) from `from`, by cell index.
    pub fn distances_from(&self, from: Cell) -> Result<Vec<Option<u32>>> {
        self.check_feasible(from)?;
        let adj = self.adjacency();
        let mut dist = vec![None; self.cell_count()];
        let start = self.index(from);
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    /// Length of a shortest king-move path through feasible cells; `None` if unreachable.
    pub fn shortest_distance(&self, a: Cell, b: Cell) -> Result<Option<u32>> {
        self.check_feasible(b)?;
        let dist = self.distances_from(a)?;
        Ok(dist[self.index(b)])
    }

    /// Checks the feasibility conditions for a trajectory starting and ending at `station`.
    pub fn check_trajectory(
        &self,
        station: Cell,
        traj: &Trajectory,
    ) -> std::result::Result<(), TrajectoryDefect> {
        let cells = traj.cells();
        if cells.len() < 2 {
            return Err(TrajectoryDefect::TooShort(cells.len()));
        }
        if let Some(&c) = cells.iter().find(|&&c| !self.is_feasible(c)) {
            return Err(TrajectoryDefect::InfeasibleCell(c));
        }
        if cells[0] != station {
            return Err(TrajectoryDefect::WrongStart(cells[0]));
        }
        if cells[cells.len() - 1] != station {
            return Err(TrajectoryDefect::WrongEnd(cells[cells.len() - 1]));
        }
        for (t, w) in cells.windows(2).enumerate() {
            if w[0].chebyshev(w[1]) > 1 {
                return Err(TrajectoryDefect::IllegalStep { t: t as u32 });
            }
        }
        Ok(())
    }

    pub fn is_feasible_trajectory(&self, station: Cell, traj: &Trajectory) -> bool {
        self.check_trajectory(station, traj).is_ok()
    }

    /// Exact number of feasible trajectories of horizon `horizon` from `station`.
    pub fn count_feasible_trajectories(&self, station: Cell, horizon: u32) -> Result<u128> {
        self.check_feasible(station)?;
        let adj = self.adjacency();
        let mut ways = vec![0u128; self.cell_count()];
        ways[self.index(station)] = 1;
        for _ in 0..horizon {
            let mut next = vec![0u128; self.cell_count()];
            for (u, &w) in ways.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                for &v in &adj[u] {
                    next[v] = next[v].checked_add(w).ok_or(DteError::CountOverflow)?;
                }
            }
            ways = next;
        }
        Ok(ways[self.index(station)])
    }

    /// Lazily enumerates feasible trajectories in lexicographic order.
    pub fn trajectories(&self, station: Cell, horizon: u32) -> Result<TrajectoryIter<'_>> {
        TrajectoryIter::new(self, station, horizon)
    }

    /// Collects every feasible trajectory, refusing if there are more than `budget`.
    pub fn enumerate_feasible_trajectories(
        &self,
        station: Cell,
        horizon: u32,
        budget: u128,
    ) -> Result<Vec<Trajectory>> {
        let count = self.count_feasible_trajectories(station, horizon)?;
        if count > budget {
            return Err(DteError::BudgetExceeded {
                what: "trajectory enumeration",
                size: count,
                budget,
            });
        }
        let out: Vec<Trajectory> = self.trajectories(station, horizon)?.collect();
        debug_assert_eq!(out.len() as u128, count);
        Ok(out)
    }
}

/// Why a position sequence is not a feasible trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryDefect {
    TooShort(usize),
    InfeasibleCell(Cell),
    WrongStart(Cell),
    WrongEnd(Cell),
    IllegalStep { t: u32 },
}

impl fmt::Display for TrajectoryDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajectoryDefect::TooShort(n) => write!(f, "trajectory has {n} positions, need at least 2"),
            TrajectoryDefect::InfeasibleCell(c) => write!(f, "visits infeasible cell {c}"),
            TrajectoryDefect::WrongStart(c) => write!(f, "starts at {c}, not at the station"),
            TrajectoryDefect::WrongEnd(c) => write!(f, "ends at {c}, not at the station"),
            TrajectoryDefect::IllegalStep { t } => write!(f, "step {t} -> {} is not a neighborhood move", t + 1),
        }
    }
}

/// Positions `p^0 .. p^T` of one robot over an episode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory(Vec<Cell>);

impl Trajectory {
    pub fn new(cells: Vec<Cell>) -> Self {
        Trajectory(cells)
    }

    /// Stays at the station for the whole episode.
    pub fn stationary(station: Cell, horizon: u32) -> Self {
        Trajectory(vec![station; horizon as usize + 1])
    }

    pub fn cells(&self) -> &[Cell] {
        &self.0
    }

    pub fn horizon(&self) -> u32 {
        self.0.len().saturating_sub(1) as u32
    }

    pub fn at(&self, t: u32) -> Cell {
        self.0[t as usize]
    }

    /// True when the robot stays put from `t` to `t + 1`.
    pub fn stays_at(&self, t: u32) -> Option<Cell> {
        let t = t as usize;
        match (self.0.get(t), self.0.get(t + 1)) {
            (Some(a), Some(b)) if a == b => Some(*a),
            _ => None,
        }
    }
}

impl From<Vec<(u16, u16)>> for Trajectory {
    fn from(v: Vec<(u16, u16)>) -> Self {
        Trajectory(v.into_iter().map(Cell::from).collect())
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("}")
    }
}

/// Depth-first enumeration of feasible trajectories, pruned by distance to the station.
pub struct TrajectoryIter<'g> {
    grid: &'g Grid,
    horizon: u32,
    station: usize,
    neighbors: Vec<Vec<usize>>,
    home_dist: Vec<Option<u32>>,
    path: Vec<usize>,
    // next neighbor position to try at each depth
    cursor: Vec<usize>,
    done: bool,
}

impl<'g> TrajectoryIter<'g> {
    fn new(grid: &'g Grid, station: Cell, horizon: u32) -> Result<Self> {
        let home_dist = grid.distances_from(station)?;
        let s = grid.index(station);
        Ok(TrajectoryIter {
            grid,
            horizon,
            station: s,
            neighbors: grid.adjacency(),
            home_dist,
            path: vec![s],
            cursor: vec![0],
            done: false,
        })
    }

    fn can_return(&self, cell: usize, remaining: u32) -> bool {
        matches!(self.home_dist[cell], Some(d) if d <= remaining)
    }
}

impl Iterator for TrajectoryIter<'_> {
    type Item = Trajectory;

    fn next(&mut self) -> Option<Trajectory> {
        if self.done {
            return None;
        }
        if self.horizon == 0 {
            self.done = true;
            return Some(Trajectory(vec![self.grid.cell_at(self.station)]));
        }
        loop {
            let depth = self.path.len() - 1;
            let here = self.path[depth];
            let pos = self.cursor[depth];
            if pos >= self.neighbors[here].len() {
                self.path.pop();
                self.cursor.pop();
                if self.path.is_empty() {
                    self.done = true;
                    return None;
                }
                continue;
            }
            self.cursor[depth] += 1;
            let next = self.neighbors[here][pos];
            let t_next = depth as u32 + 1;
            if !self.can_return(next, self.horizon - t_next) {
                continue;
            }
            if t_next == self.horizon {
                // can_return with zero remaining steps means next == station
                let mut cells: Vec<Cell> = self.path.iter().map(|&i| self.grid.cell_at(i)).collect();
                cells.push(self.grid.cell_at(next));
                return Some(Trajectory(cells));
            }
            self.path.push(next);
            self.cursor.push(0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: u16, y: u16) -> Cell {
        Cell::new(x, y)
    }

    #[test]
    fn interior_neighborhood_has_nine_cells() {
        let g = Grid::open(5, 5).unwrap();
        let n = g.neighborhood(c(3, 3)).unwrap();
        assert_eq!(n.len(), 9);
        assert!(n.contains(&c(3, 3)));
    }

    #[test]
    fn corner_neighborhood() {
        let g = Grid::open(5, 5).unwrap();
        let n = g.neighborhood(c(1, 1)).unwrap();
        assert_eq!(n, vec![c(1, 1), c(2, 1), c(1, 2), c(2, 2)]);
    }

    #[test]
    fn obstacle_removed_from_neighborhood() {
        let g = Grid::new(5, 5, [c(2, 2)], vec![]).unwrap();
        let n = g.neighborhood(c(1, 1)).unwrap();
        assert_eq!(n, vec![c(1, 1), c(2, 1), c(1, 2)]);
    }

    #[test]
    fn neighborhood_rejects_bad_cells() {
        let g = Grid::new(5, 5, [c(2, 2)], vec![]).unwrap();
        assert!(matches!(g.neighborhood(c(2, 2)), Err(DteError::Infeasible(_))));
        assert!(matches!(g.neighborhood(c(6, 1)), Err(DteError::OutOfBounds(..))));
        assert!(matches!(g.neighborhood(c(0, 1)), Err(DteError::OutOfBounds(..))));
    }

    #[test]
    fn station_on_obstacle_rejected() {
        assert!(Grid::new(3, 3, [c(2, 2)], vec![c(2, 2)]).is_err());
    }

    #[test]
    fn trajectory_feasibility() {
        let g = Grid::open(7, 5).unwrap();
        let s = c(6, 3);
        let fig1: Trajectory = vec![(6, 3), (6, 4), (5, 5), (5, 5), (6, 4), (6, 3)].into();
        assert!(g.is_feasible_trajectory(s, &fig1));
        assert!(g.is_feasible_trajectory(s, &Trajectory::stationary(s, 1)));
        let jump: Trajectory = vec![(6, 3), (4, 3), (6, 3)].into();
        assert_eq!(
            g.check_trajectory(s, &jump),
            Err(TrajectoryDefect::IllegalStep { t: 0 })
        );
        let short = Trajectory::new(vec![s]);
        assert_eq!(g.check_trajectory(s, &short), Err(TrajectoryDefect::TooShort(1)));
        let off: Trajectory = vec![(6, 3), (6, 4)].into();
        assert_eq!(g.check_trajectory(s, &off), Err(TrajectoryDefect::WrongEnd(c(6, 4))));
    }

    #[test]
    fn distances() {
        let g = Grid::open(5, 5).unwrap();
        assert_eq!(g.shortest_distance(c(2, 2), c(3, 3)).unwrap(), Some(1));
        assert_eq!(g.shortest_distance(c(1, 1), c(4, 5)).unwrap(), Some(4));
        assert_eq!(g.shortest_distance(c(4, 4), c(4, 4)).unwrap(), Some(0));
        let wall = Grid::new(5, 5, (1..=5).map(|y| c(3, y)), vec![]).unwrap();
        assert_eq!(wall.shortest_distance(c(1, 1), c(5, 5)).unwrap(), None);
    }

    #[test]
    fn detour_around_obstacles() {
        let g = Grid::new(3, 3, [c(2, 1), c(2, 2)], vec![]).unwrap();
        assert_eq!(g.shortest_distance(c(1, 1), c(3, 1)).unwrap(), Some(4));
    }

    #[test]
    fn trajectory_counts_small() {
        let g = Grid::open(5, 5).unwrap();
        assert_eq!(g.count_feasible_trajectories(c(3, 3), 1).unwrap(), 1);
        assert_eq!(g.count_feasible_trajectories(c(3, 3), 2).unwrap(), 9);
        assert_eq!(g.count_feasible_trajectories(c(1, 1), 1).unwrap(), 1);
    }

    #[test]
    fn enumeration_order_and_size() {
        let g = Grid::open(5, 5).unwrap();
        let all = g.enumerate_feasible_trajectories(c(3, 3), 2, 100).unwrap();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], vec![(3, 3), (2, 2), (3, 3)].into());
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        let one = g.enumerate_feasible_trajectories(c(3, 3), 1, 100).unwrap();
        assert_eq!(one, vec![Trajectory::stationary(c(3, 3), 1)]);
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let g = Grid::open(5, 5).unwrap();
        let err = g.enumerate_feasible_trajectories(c(3, 3), 4, 10).unwrap_err();
        assert!(matches!(err, DteError::BudgetExceeded { budget: 10, .. }));
    }

    #[test]
    fn cell_order_is_row_major() {
        assert!(c(5, 1) < c(1, 2));
        assert!(c(1, 2) < c(2, 2));
    }
}
