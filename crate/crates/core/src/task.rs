//! Tasks with time windows and monotone value functions over service counters.

use serde::{Deserialize, Serialize};

use crate::error::{DteError, Result};
use crate::grid::Cell;

/// Task values are integral so that potential-game identities hold exactly.
pub type Value = i64;

/// Robots serving a task at each step of its window.
pub type CounterVector = Vec<u32>;

/// One row of an explicit value table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub counter: Vec<u32>,
    pub value: Value,
}

/// Value function of a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueSpec {
    /// `value` once some step of the window has at least `threshold` robots.
    ThresholdMax { value: Value, threshold: u32 },
    /// `value` once the window accumulates at least `threshold` robot-steps.
    ThresholdSum { value: Value, threshold: u32 },
    /// Completed by one robot in one step.
    Simple { value: Value },
    /// `value` once some step has at least `heavy` robots and the steps after it
    /// accumulate at least `follow` robot-steps.
    SequentialHeavyLight { value: Value, heavy: u32, follow: u32 },
    /// Explicit map from counters to values; `default` covers unlisted counters.
    Table {
        cap: Value,
        entries: Vec<TableEntry>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<Value>,
    },
}

impl ValueSpec {
    /// The maximum value `v̄` of the task.
    pub fn cap(&self) -> Value {
        match *self {
            ValueSpec::ThresholdMax { value, .. }
            | ValueSpec::ThresholdSum { value, .. }
            | ValueSpec::Simple { value }
            | ValueSpec::SequentialHeavyLight { value, .. } => value,
            ValueSpec::Table { cap, .. } => cap,
        }
    }

    /// Single-robot, single-step completion (simple tasks).
    pub fn is_simple(&self) -> bool {
        matches!(
            self,
            ValueSpec::Simple { .. } | ValueSpec::ThresholdMax { threshold: 1, .. }
        )
    }

    pub fn evaluate(&self, c: &[u32]) -> Result<Value> {
        let hit = |ok: bool, v: Value| if ok { v } else { 0 };
        Ok(match self {
            ValueSpec::ThresholdMax { value, threshold } => {
                hit(c.iter().any(|&x| x >= *threshold), *value)
            }
            ValueSpec::ThresholdSum { value, threshold } => {
                hit(c.iter().map(|&x| x as u64).sum::<u64>() >= *threshold as u64, *value)
            }
            ValueSpec::Simple { value } => hit(c.iter().any(|&x| x >= 1), *value),
            ValueSpec::SequentialHeavyLight { value, heavy, follow } => {
                let mut after: u64 = c.iter().map(|&x| x as u64).sum();
                let mut done = false;
                for &x in c {
                    after -= x as u64;
                    if x >= *heavy && after >= *follow as u64 {
                        done = true;
                        break;
                    }
                }
                hit(done, *value)
            }
            ValueSpec::Table { entries, default, .. } => {
                match entries.iter().find(|e| e.counter == c) {
                    Some(e) => e.value,
                    None => default.ok_or_else(|| DteError::MissingTableEntry(c.to_vec()))?,
                }
            }
        })
    }

    fn validate_params(&self) -> Result<()> {
        if self.cap() <= 0 {
            return Err(DteError::Domain(format!("maximum value must be positive, got {}", self.cap())));
        }
        match self {
            ValueSpec::ThresholdMax { threshold, .. } | ValueSpec::ThresholdSum { threshold, .. }
                if *threshold == 0 =>
            {
                Err(DteError::Domain("threshold must be at least 1".into()))
            }
            ValueSpec::SequentialHeavyLight { heavy: 0, .. } => {
                Err(DteError::Domain("heavy threshold must be at least 1".into()))
            }
            ValueSpec::Table { cap, entries, default } => {
                let out_of_range = entries
                    .iter()
                    .map(|e| e.value)
                    .chain(*default)
                    .find(|v| !(0..=*cap).contains(v));
                match out_of_range {
                    Some(v) => Err(DteError::Domain(format!("table value {v} outside [0, {cap}]"))),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}

/// A cooperative task: location, window `[arrival, departure)` and value function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub location: Cell,
    pub arrival: u32,
    pub departure: u32,
    pub value: ValueSpec,
}

impl Task {
    pub fn new(id: impl Into<String>, location: Cell, arrival: u32, departure: u32, value: ValueSpec) -> Self {
        Task {
            id: id.into(),
            location,
            arrival,
            departure,
            value,
        }
    }

    pub fn window_len(&self) -> usize {
        self.departure.saturating_sub(self.arrival) as usize
    }

    pub fn is_active(&self, t: u32) -> bool {
        self.arrival <= t && t < self.departure
    }

    /// Checks the window against the horizon and the value parameters.
    pub fn validate(&self, horizon: u32) -> Result<()> {
        if self.arrival >= self.departure {
            return Err(DteError::Domain(format!(
                "task {}: empty window, arrival {} >= departure {}",
                self.id, self.arrival, self.departure
            )));
        }
        if self.departure > horizon {
            return Err(DteError::Domain(format!(
                "task {}: departure {} exceeds horizon {}",
                self.id, self.departure, horizon
            )));
        }
        self.value
            .validate_params()
            .map_err(|e| DteError::Domain(format!("task {}: {e}", self.id)))
    }

    pub fn value_of(&self, c: &[u32]) -> Result<Value> {
        if c.len() != self.window_len() {
            return Err(DteError::WindowMismatch {
                expected: self.window_len(),
                got: c.len(),
            });
        }
        self.value.evaluate(c)
    }
}

/// Pairs of tasks at the same location whose windows overlap.
pub fn check_no_overlap(tasks: &[Task]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..tasks.len() {
        for j in i + 1..tasks.len() {
            let (a, b) = (&tasks[i], &tasks[j]);
            if a.location == b.location && a.departure.min(b.departure) > a.arrival.max(b.arrival) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Exhaustively checks monotonicity over all counters with entries `<= robot_cap`.
///
/// Also rejects values outside `[0, cap]`. Fails with `BudgetExceeded` when
/// `(robot_cap + 1)^window_len` exceeds `budget`.
pub fn validate_monotonicity(spec: &ValueSpec, window_len: usize, robot_cap: u32, budget: u128) -> Result<bool> {
    let base = robot_cap as u128 + 1;
    let size = (0..window_len).try_fold(1u128, |acc, _| acc.checked_mul(base));
    let size = match size {
        Some(s) if s <= budget => s,
        Some(s) => {
            return Err(DteError::BudgetExceeded {
                what: "monotonicity check",
                size: s,
                budget,
            })
        }
        None => {
            return Err(DteError::BudgetExceeded {
                what: "monotonicity check",
                size: u128::MAX,
                budget,
            })
        }
    };
    let decode = |mut code: u128| -> Vec<u32> {
        (0..window_len)
            .map(|_| {
                let d = (code % base) as u32;
                code /= base;
                d
            })
            .collect()
    };
    let values: Vec<Value> = (0..size).map(|k| spec.evaluate(&decode(k))).collect::<Result<_>>()?;
    let cap = spec.cap();
    if values.iter().any(|v| !(0..=cap).contains(v)) {
        return Ok(false);
    }
    // Increasing any single coordinate by one must not lower the value.
    let mut stride = 1u128;
    for _ in 0..window_len {
        for k in 0..size {
            if (k / stride) % base + 1 < base && values[(k + stride) as usize] < values[k as usize] {
                return Ok(false);
            }
        }
        stride *= base;
    }
    Ok(true)
}
