//! Distributed planning for cooperative tasks with time windows, cast as a
//! potential game between robots.
//!
//! Robots on a grid pick episode trajectories that start and end at their
//! stations. Each robot is paid its marginal contribution to the total task
//! value, so the total value is an exact potential. Action sets are pruned to
//! trajectories with maximal service signatures, and plans are improved with
//! best-response or log-linear learning.

pub mod actions;
pub mod analysis;
pub mod error;
pub mod game;
pub mod grid;
pub mod learning;
pub mod report;
pub mod scenario;
pub mod task;

pub use error::{DteError, Result};
pub use game::{BuildOptions, GameInstance, JointPlan, Mode, Robot};
pub use grid::{Cell, Grid, Trajectory};
pub use task::{Task, Value, ValueSpec};
