//! Scenario files: JSON description of an environment, robots, tasks and
//! named variants, plus loading, validation and game construction.
//!
//! File references (`environment_file`, `tasks_from`) are resolved relative to
//! the referencing file's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::DteError;
use crate::game::{BuildOptions, GameInstance, Robot};
use crate::grid::{Cell, Grid};
use crate::learning::{Algorithm, InitialPlan, LearningConfig};
use crate::task::{validate_monotonicity, Task, ValueSpec};

/// Largest counter space the monotonicity gate will enumerate for one table task.
pub const MONOTONICITY_BUDGET: u128 = 1 << 22;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: at `{field}`: {message}")]
    Syntax {
        origin: String,
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: at `{field}`: {source}")]
    Invalid {
        origin: String,
        field: String,
        #[source]
        source: DteError,
    },
    #[error("{origin}: at `{field}`: {message}")]
    Reference {
        origin: String,
        field: String,
        message: String,
    },
}

pub type ScenarioResult<T> = std::result::Result<T, ScenarioError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    pub id: String,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub width: u16,
    pub height: u16,
    #[serde(default)]
    pub obstacles: Vec<Cell>,
    pub stations: Vec<StationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub id: String,
    pub station: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub name: String,
    /// Task ids to include; all tasks when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tasks: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robots: Option<Vec<RobotSpec>>,
    /// Station id -> robot count; robots are named `r1, r2, ...` in station order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robots_per_station: Option<BTreeMap<String, u32>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningDefaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// On-disk scenario schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment_file: Option<String>,
    pub horizon: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub robots: Vec<RobotSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<Task>,
    /// Another scenario file whose task list is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tasks_from: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<VariantSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning: Option<LearningDefaults>,
}

impl ScenarioFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }
}

fn decode<T: for<'de> Deserialize<'de>>(bytes: &[u8], origin: &str) -> ScenarioResult<T> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let out: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Syntax {
            origin: origin.to_string(),
            field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| ScenarioError::Syntax {
        origin: origin.to_string(),
        field: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(out)
}

/// Parses scenario text without resolving or validating it.
pub fn parse_scenario_file(bytes: &[u8]) -> ScenarioResult<ScenarioFile> {
    decode(bytes, "<input>")
}

/// A robot team and task subset of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub robots: Vec<Robot>,
    /// Indices into `Scenario::tasks`.
    pub tasks: Vec<usize>,
}

/// A parsed, resolved and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    /// Hex SHA-256 over the scenario bytes and every referenced file.
    pub digest: String,
    pub grid: Grid,
    pub station_ids: Vec<String>,
    pub tasks: Vec<Task>,
    pub variants: Vec<Variant>,
}

/// Parses and validates a self-contained scenario (no file references).
pub fn parse_scenario(bytes: &[u8]) -> ScenarioResult<Scenario> {
    resolve(bytes, "<input>", None)
}

/// Loads a scenario from disk, resolving file references.
pub fn load_scenario(path: impl AsRef<Path>) -> ScenarioResult<Scenario> {
    let path = path.as_ref();
    let bytes = read(path)?;
    resolve(&bytes, &path.display().to_string(), path.parent())
}

fn read(path: &Path) -> ScenarioResult<Vec<u8>> {
    fs::read(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn reference(origin: &str, field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Reference {
        origin: origin.into(),
        field: field.into(),
        message: message.into(),
    }
}

fn invalid(origin: &str, field: impl Into<String>, source: DteError) -> ScenarioError {
    ScenarioError::Invalid {
        origin: origin.into(),
        field: field.into(),
        source,
    }
}

fn linked(origin: &str, field: &str, base: Option<&Path>, rel: &str) -> ScenarioResult<PathBuf> {
    match base {
        Some(dir) => Ok(dir.join(rel)),
        None => Err(reference(origin, field, "file references need a scenario loaded from disk")),
    }
}

fn resolve(bytes: &[u8], origin: &str, base: Option<&Path>) -> ScenarioResult<Scenario> {
    let file: ScenarioFile = decode(bytes, origin)?;
    let mut hasher = Sha256::new();
    hasher.update(bytes);

    let env = match (&file.environment, &file.environment_file) {
        (Some(env), None) => env.clone(),
        (None, Some(rel)) => {
            let path = linked(origin, "environment_file", base, rel)?;
            let raw = read(&path)?;
            hasher.update(&raw);
            decode(&raw, &path.display().to_string())?
        }
        _ => return Err(reference(origin, ".", "exactly one of `environment` and `environment_file` is required")),
    };

    let tasks = match (&file.tasks_from, file.tasks.is_empty()) {
        (None, _) => file.tasks.clone(),
        (Some(rel), true) => {
            let path = linked(origin, "tasks_from", base, rel)?;
            let raw = read(&path)?;
            hasher.update(&raw);
            let other = resolve(&raw, &path.display().to_string(), path.parent())?;
            other.tasks
        }
        (Some(_), false) => return Err(reference(origin, ".", "`tasks` and `tasks_from` are mutually exclusive")),
    };

    let mut station_ids = Vec::new();
    for (k, s) in env.stations.iter().enumerate() {
        if station_ids.contains(&s.id) {
            return Err(reference(origin, &format!("environment.stations[{k}].id"), format!("duplicate station id `{}`", s.id)));
        }
        station_ids.push(s.id.clone());
    }
    let grid = Grid::new(
        env.width,
        env.height,
        env.obstacles.iter().copied(),
        env.stations.iter().map(|s| s.cell).collect(),
    )
    .map_err(|e| invalid(origin, "environment", e))?;

    let mut seen = BTreeSet::new();
    for (k, t) in tasks.iter().enumerate() {
        if !seen.insert(t.id.as_str()) {
            return Err(reference(origin, &format!("tasks[{k}].id"), format!("duplicate task id `{}`", t.id)));
        }
        t.validate(file.horizon).map_err(|e| invalid(origin, format!("tasks[{k}]"), e))?;
        if !grid.in_bounds(t.location) {
            return Err(invalid(
                origin,
                format!("tasks[{k}].location"),
                DteError::OutOfBounds(t.location, grid.width(), grid.height()),
            ));
        }
        if !grid.is_feasible(t.location) {
            return Err(invalid(origin, format!("tasks[{k}].location"), DteError::Infeasible(t.location)));
        }
    }

    let station_index = |id: &str, field: &str| -> ScenarioResult<usize> {
        station_ids
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| reference(origin, field, format!("unknown station `{id}`")))
    };
    let robots_from = |specs: &[RobotSpec], field: &str| -> ScenarioResult<Vec<Robot>> {
        let mut ids = BTreeSet::new();
        specs
            .iter()
            .enumerate()
            .map(|(k, r)| {
                if !ids.insert(r.id.as_str()) {
                    return Err(reference(origin, &format!("{field}[{k}].id"), format!("duplicate robot id `{}`", r.id)));
                }
                Ok(Robot {
                    id: r.id.clone(),
                    station: station_index(&r.station, &format!("{field}[{k}].station"))?,
                })
            })
            .collect()
    };

    let mut variants = Vec::new();
    if file.variants.is_empty() {
        variants.push(Variant {
            name: "default".into(),
            robots: robots_from(&file.robots, "robots")?,
            tasks: (0..tasks.len()).collect(),
        });
    }
    for (k, v) in file.variants.iter().enumerate() {
        let field = format!("variants[{k}]");
        if variants.iter().any(|w: &Variant| w.name == v.name) {
            return Err(reference(origin, &format!("{field}.name"), format!("duplicate variant `{}`", v.name)));
        }
        let robots = match (&v.robots, &v.robots_per_station) {
            (Some(_), Some(_)) => {
                return Err(reference(origin, &field, "`robots` and `robots_per_station` are mutually exclusive"))
            }
            (Some(specs), None) => robots_from(specs, &format!("{field}.robots"))?,
            (None, Some(counts)) => {
                for id in counts.keys() {
                    station_index(id, &format!("{field}.robots_per_station"))?;
                }
                let mut out = Vec::new();
                for (s, id) in station_ids.iter().enumerate() {
                    for _ in 0..counts.get(id).copied().unwrap_or(0) {
                        out.push(Robot {
                            id: format!("r{}", out.len() + 1),
                            station: s,
                        });
                    }
                }
                out
            }
            (None, None) => robots_from(&file.robots, "robots")?,
        };
        let task_idx = match &v.tasks {
            None => (0..tasks.len()).collect(),
            Some(ids) => ids
                .iter()
                .enumerate()
                .map(|(j, id)| {
                    tasks
                        .iter()
                        .position(|t| &t.id == id)
                        .ok_or_else(|| reference(origin, &format!("{field}.tasks[{j}]"), format!("unknown task `{id}`")))
                })
                .collect::<ScenarioResult<_>>()?,
        };
        variants.push(Variant {
            name: v.name.clone(),
            robots,
            tasks: task_idx,
        });
    }

    let robot_cap = variants.iter().map(|v| v.robots.len()).max().unwrap_or(0) as u32;
    for (k, t) in tasks.iter().enumerate() {
        if matches!(t.value, ValueSpec::Table { .. }) {
            let ok = validate_monotonicity(&t.value, t.window_len(), robot_cap, MONOTONICITY_BUDGET)
                .map_err(|e| invalid(origin, format!("tasks[{k}].value"), e))?;
            if !ok {
                return Err(invalid(
                    origin,
                    format!("tasks[{k}].value"),
                    DteError::Domain(format!("task {}: value table is not monotone or leaves [0, cap]", t.id)),
                ));
            }
        }
    }

    let digest = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(Scenario {
        file,
        digest,
        grid,
        station_ids,
        tasks,
        variants,
    })
}

impl Scenario {
    /// The named variant, or the only/first one when `name` is `None`.
    pub fn variant(&self, name: Option<&str>) -> ScenarioResult<&Variant> {
        match name {
            None => Ok(&self.variants[0]),
            Some(n) => self.variants.iter().find(|v| v.name == n).ok_or_else(|| {
                let known: Vec<&str> = self.variants.iter().map(|v| v.name.as_str()).collect();
                reference("<scenario>", "variants", format!("unknown variant `{n}` (have: {})", known.join(", ")))
            }),
        }
    }

    pub fn variant_tasks(&self, variant: &Variant) -> Vec<Task> {
        variant.tasks.iter().map(|&k| self.tasks[k].clone()).collect()
    }

    pub fn build(&self, variant: &Variant, opts: &BuildOptions) -> Result<GameInstance, DteError> {
        GameInstance::build(
            self.grid.clone(),
            self.file.horizon,
            variant.robots.clone(),
            self.variant_tasks(variant),
            opts,
        )
    }

    pub fn learning_defaults(&self) -> LearningDefaults {
        self.file.learning.clone().unwrap_or_default()
    }

    /// Learning config from the scenario defaults, with fallbacks for missing fields.
    pub fn learning_config(&self) -> LearningConfig {
        let d = self.learning_defaults();
        LearningConfig {
            algorithm: d.algorithm.unwrap_or(Algorithm::LogLinear),
            epsilon: d.epsilon.unwrap_or(0.2),
            rounds: d.rounds.unwrap_or(300),
            seed: d.seed.unwrap_or(0),
            initial: InitialPlan::Random,
        }
    }

    pub fn station_id(&self, index: usize) -> &str {
        &self.station_ids[index]
    }
}
