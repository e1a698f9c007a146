//! Run reports: aggregated learning series plus traces, written as CSV and JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::error::DteError;
use crate::game::{BuildOptions, GameInstance, Mode};
use crate::grid::Trajectory;
use crate::learning::{run_batch, BatchResult, LearningConfig, RunTrace, SeriesRow};
use crate::scenario::Scenario;
use crate::task::Value;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Dte(#[from] DteError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActionSetSize {
    pub robot: String,
    pub station: String,
    /// Trajectories in the minimal action set.
    pub trajectories: usize,
    /// Actions actually played; larger than `trajectories` in extended mode.
    pub actions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanDump {
    pub run: usize,
    pub value: Value,
    pub trajectories: BTreeMap<String, Trajectory>,
}

/// Wall-clock timings in milliseconds; written separately so reports stay diffable.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Timings {
    pub build_ms: f64,
    pub learn_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub digest: String,
    pub variant: String,
    pub mode: Mode,
    pub config: LearningConfig,
    pub runs: usize,
    pub base_seed: u64,
    pub action_set_sizes: Vec<ActionSetSize>,
    pub series: Vec<SeriesRow>,
    pub histogram: BTreeMap<Value, usize>,
    pub terminal_mean: f64,
    /// First run among those with the highest terminal value.
    pub best: PlanDump,
    pub traces: Vec<RunTrace>,
    #[serde(skip)]
    pub timings: Timings,
}

pub fn action_set_sizes(game: &GameInstance, station_ids: &[String]) -> Vec<ActionSetSize> {
    game.robots()
        .iter()
        .enumerate()
        .map(|(i, r)| ActionSetSize {
            robot: r.id.clone(),
            station: station_ids[r.station].clone(),
            trajectories: game.action_set(i).len(),
            actions: game.actions(i).len(),
        })
        .collect()
}

impl RunReport {
    /// Builds the variant's game and runs `runs` seeded learning runs.
    pub fn generate(
        scenario: &Scenario,
        variant: &str,
        opts: &BuildOptions,
        config: &LearningConfig,
        runs: usize,
        base_seed: u64,
    ) -> Result<(RunReport, GameInstance), ReportError> {
        let v = scenario
            .variant(Some(variant))
            .map_err(|e| DteError::Domain(e.to_string()))?;
        let t0 = Instant::now();
        let game = scenario.build(v, opts)?;
        let build_ms = t0.elapsed().as_secs_f64() * 1e3;
        let t1 = Instant::now();
        let batch = run_batch(&game, config, runs, base_seed)?;
        let learn_ms = t1.elapsed().as_secs_f64() * 1e3;
        let report = Self::from_batch(scenario, &v.name, &game, config, base_seed, batch, Timings { build_ms, learn_ms });
        Ok((report, game))
    }

    pub fn from_batch(
        scenario: &Scenario,
        variant: &str,
        game: &GameInstance,
        config: &LearningConfig,
        base_seed: u64,
        batch: BatchResult,
        timings: Timings,
    ) -> RunReport {
        let terminal_mean = batch.terminal_mean();
        let (run, trace) = batch
            .traces
            .iter()
            .enumerate()
            .max_by_key(|(j, t)| (t.final_value(), std::cmp::Reverse(*j)))
            .expect("batch has at least one run");
        let best = PlanDump {
            run,
            value: trace.final_value(),
            trajectories: game
                .robots()
                .iter()
                .zip(&trace.final_plan.0)
                .enumerate()
                .map(|(i, (r, &a))| (r.id.clone(), game.actions(i)[a].trajectory.clone()))
                .collect(),
        };
        RunReport {
            scenario: scenario.file.name.clone().unwrap_or_default(),
            digest: scenario.digest.clone(),
            variant: variant.to_string(),
            mode: game.mode(),
            config: config.clone(),
            runs: batch.traces.len(),
            base_seed,
            action_set_sizes: action_set_sizes(game, &scenario.station_ids),
            series: batch.series,
            histogram: batch.histogram,
            terminal_mean,
            best,
            traces: batch.traces,
            timings,
        }
    }

    /// `round,min,avg,max` with `avg` at four decimals.
    pub fn series_csv(&self) -> String {
        let mut s = String::from("round,min,avg,max\n");
        for r in &self.series {
            let _ = writeln!(s, "{},{},{:.4},{}", r.round, r.min, r.avg, r.max);
        }
        s
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("value,runs\n");
        for (v, n) in &self.histogram {
            let _ = writeln!(s, "{v},{n}");
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

fn write_file(path: PathBuf, contents: &str) -> Result<(), ReportError> {
    fs::write(&path, contents).map_err(|source| ReportError::Io { path, source })
}

/// Writes `series.csv`, `histogram.csv`, `report.json` and `timings.json` into `dir`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(dir.join("series.csv"), &report.series_csv())?;
    write_file(dir.join("histogram.csv"), &report.histogram_csv())?;
    write_file(dir.join("report.json"), &report.to_json())?;
    let timings = serde_json::to_string_pretty(&report.timings).expect("timings serialize");
    write_file(dir.join("timings.json"), &timings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::aggregate;
    use crate::scenario::parse_scenario;

    const S: &str = r#"{
        "name": "tiny",
        "environment": {"width": 3, "height": 1, "stations": [{"id": "s", "cell": [1, 1]}]},
        "horizon": 4,
        "robots": [{"id": "a", "station": "s"}],
        "tasks": [{"id": "t", "location": [2, 1], "arrival": 0, "departure": 4,
                   "value": {"kind": "simple", "value": 3}}]
    }"#;

    #[test]
    fn single_run_rows_are_flat() {
        let sc = parse_scenario(S.as_bytes()).unwrap();
        let game = sc.build(&sc.variants[0], &BuildOptions::default()).unwrap();
        let cfg = LearningConfig::log_linear(0.5, 20, 3);
        let batch = aggregate(vec![crate::learning::run(&game, &cfg).unwrap()]);
        let rep = RunReport::from_batch(&sc, "default", &game, &cfg, 3, batch, Timings::default());
        for r in &rep.series {
            assert_eq!(r.min as f64, r.avg);
            assert_eq!(r.max, r.min);
        }
        let csv = rep.series_csv();
        assert!(csv.starts_with("round,min,avg,max\n0,"));
        assert_eq!(csv.lines().count(), 22);
        assert!(csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().ends_with(".0000") || csv.contains('.'));
    }
}
