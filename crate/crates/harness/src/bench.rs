//! Benchmark sweeps over planners, transition sample counts, arm counts
//! and seeds; per-trial NDJSON and per-metric CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use handoff_core::budget::{ClockKind, PROGRESS_PERIOD};
use handoff_core::geometry::Scene;

use crate::planners::{run_trial, PlannerId, TrialRecord, TrialSettings};
use crate::scene_io::{load_scene, SceneError};

/// Placeholder in the scene path replaced by each entry of `n_arms`.
pub const ARMS_PLACEHOLDER: &str = "{n}";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    /// Scene file, relative to the spec file. With `{n}` in it, one scene
    /// per entry of `n_arms`; without, `n_arms` is ignored.
    pub scene: String,
    pub planners: Vec<PlannerId>,
    #[serde(default = "default_s_values")]
    pub s_values: Vec<usize>,
    #[serde(default = "default_n_arms")]
    pub n_arms: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_time_limit")]
    pub time_limit_s: f64,
    /// Trial `i` of every cell uses seed `seed + i`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_clock")]
    pub clock: ClockKind,
    #[serde(default = "default_roadmap_vertices")]
    pub roadmap_vertices: usize,
    #[serde(default = "default_composite_vertices")]
    pub composite_vertices: usize,
    #[serde(default = "default_query_budget")]
    pub query_budget_s: f64,
}

fn default_s_values() -> Vec<usize> {
    vec![10, 20, 30, 50]
}
fn default_n_arms() -> Vec<usize> {
    vec![2, 3, 4, 5]
}
fn default_trials() -> usize {
    50
}
fn default_time_limit() -> f64 {
    30.0
}
fn default_clock() -> ClockKind {
    ClockKind::Work
}
fn default_roadmap_vertices() -> usize {
    handoff_core::instance::DEFAULT_ROADMAP_VERTICES
}
fn default_composite_vertices() -> usize {
    handoff_core::baselines::DEFAULT_COMPOSITE_VERTICES
}
fn default_query_budget() -> f64 {
    handoff_core::baselines::DEFAULT_QUERY_BUDGET
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("{path}: {source}")]
    Spec {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid benchmark spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{0}: {1}")]
    Csv(String, csv::Error),
    #[error("{path}:{line}: {source}")]
    Record {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

impl BenchmarkSpec {
    /// Defaults everywhere except the scene and planners.
    pub fn new(scene: impl Into<String>, planners: Vec<PlannerId>) -> Self {
        BenchmarkSpec {
            scene: scene.into(),
            planners,
            s_values: default_s_values(),
            n_arms: default_n_arms(),
            trials: default_trials(),
            time_limit_s: default_time_limit(),
            seed: 0,
            clock: default_clock(),
            roadmap_vertices: default_roadmap_vertices(),
            composite_vertices: default_composite_vertices(),
            query_budget_s: default_query_budget(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let origin = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| BenchError::Io(origin.clone(), e))?;
        let spec: BenchmarkSpec =
            serde_json::from_str(&text).map_err(|source| BenchError::Spec {
                path: origin,
                source,
            })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Invalid(m.into()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if !(self.time_limit_s > 0.0 && self.time_limit_s.is_finite()) {
            return bad("time_limit_s must be positive");
        }
        if self.planners.is_empty() {
            return bad("planners is empty");
        }
        if self.s_values.is_empty() || self.s_values.contains(&0) {
            return bad("s_values must be non-empty and positive");
        }
        if self.scene.contains(ARMS_PLACEHOLDER) && self.n_arms.is_empty() {
            return bad("n_arms is empty");
        }
        Ok(())
    }

    /// Scene files to run, resolved against `base`.
    pub fn scene_paths(&self, base: &Path) -> Vec<PathBuf> {
        if self.scene.contains(ARMS_PLACEHOLDER) {
            self.n_arms
                .iter()
                .map(|n| base.join(self.scene.replace(ARMS_PLACEHOLDER, &n.to_string())))
                .collect()
        } else {
            vec![base.join(&self.scene)]
        }
    }

    fn settings(&self, planner: PlannerId, s: usize, trial: usize) -> TrialSettings {
        TrialSettings {
            planner,
            s,
            seed: self.seed.wrapping_add(trial as u64),
            time_limit_s: self.time_limit_s,
            clock: self.clock,
            roadmap_vertices: self.roadmap_vertices,
            composite_vertices: self.composite_vertices,
            query_budget_s: self.query_budget_s,
        }
    }
}

/// Runs one trial, turning a panic into a failed record.
pub fn guarded_trial(scene: &Scene, settings: &TrialSettings) -> TrialRecord {
    catch_unwind(AssertUnwindSafe(|| run_trial(scene, settings, None))).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        TrialRecord::failed(settings, scene.num_arms(), format!("crashed: {msg}"))
    })
}

pub fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by_key(|r| (r.planner, r.s, r.n, r.seed));
}

/// Every (planner, s, scene, trial) cell, in parallel; the records come
/// back sorted by (planner, s, n, seed).
pub fn run_benchmark(spec: &BenchmarkSpec, base: &Path) -> Result<Vec<TrialRecord>, BenchError> {
    spec.validate()?;
    let scenes = spec
        .scene_paths(base)
        .iter()
        .map(|p| load_scene(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut jobs = Vec::new();
    for &planner in &spec.planners {
        for &s in &spec.s_values {
            for scene in &scenes {
                for trial in 0..spec.trials {
                    jobs.push((scene, spec.settings(planner, s, trial)));
                }
            }
        }
    }
    let mut records: Vec<TrialRecord> = jobs
        .into_par_iter()
        .map(|(scene, settings)| guarded_trial(scene, &settings))
        .collect();
    sort_records(&mut records);
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub planner: PlannerId,
    pub s: usize,
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_ratio: f64,
}

/// Over successful trials only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialTimeRow {
    pub planner: PlannerId,
    pub s: usize,
    pub n: usize,
    pub successes: usize,
    pub mean_s: Option<f64>,
    pub median_s: Option<f64>,
}

/// At the end of the run, over all trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModesRow {
    pub planner: PlannerId,
    pub s: usize,
    pub n: usize,
    pub trials: usize,
    pub mean_modes_expanded: f64,
    pub mean_tree_size: f64,
}

/// Best cost carried forward to `t`, averaged over the trials solved by
/// then; `solved` counts them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub planner: PlannerId,
    pub s: usize,
    pub n: usize,
    pub t: f64,
    pub solved: usize,
    pub mean_cost: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Aggregates {
    pub success: Vec<SuccessRow>,
    pub initial_time: Vec<InitialTimeRow>,
    pub modes: Vec<ModesRow>,
    pub cost: Vec<CostRow>,
}

const SUCCESS_CSV: &str = "success_ratio.csv";
const INITIAL_TIME_CSV: &str = "initial_time.csv";
const MODES_CSV: &str = "modes_expanded.csv";
const COST_CSV: &str = "cost_over_time.csv";

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    })
}

/// Times `0, 0.1, ..` up to `limit`.
pub fn cost_grid(limit: f64) -> Vec<f64> {
    let steps = (limit / PROGRESS_PERIOD + 1e-9).floor() as usize;
    (0..=steps).map(|k| k as f64 * PROGRESS_PERIOD).collect()
}

/// Cell tables computed from the records alone.
pub fn aggregate(records: &[TrialRecord]) -> Aggregates {
    let mut cells: BTreeMap<(PlannerId, usize, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.planner, r.s, r.n)).or_default().push(r);
    }
    let mut agg = Aggregates::default();
    for ((planner, s, n), rs) in cells {
        let trials = rs.len();
        let times: Vec<f64> = rs
            .iter()
            .filter_map(|r| r.initial_solution_time_s)
            .collect();
        let successes = rs.iter().filter(|r| r.success).count();
        agg.success.push(SuccessRow {
            planner,
            s,
            n,
            trials,
            successes,
            success_ratio: successes as f64 / trials as f64,
        });
        agg.initial_time.push(InitialTimeRow {
            planner,
            s,
            n,
            successes,
            mean_s: mean(times.iter().copied()),
            median_s: median(times),
        });
        agg.modes.push(ModesRow {
            planner,
            s,
            n,
            trials,
            mean_modes_expanded: mean(rs.iter().map(|r| r.modes_expanded as f64)).unwrap_or(0.0),
            mean_tree_size: mean(rs.iter().map(|r| r.tree_size as f64)).unwrap_or(0.0),
        });
        let limit = rs.iter().map(|r| r.time_limit_s).fold(0.0, f64::max);
        for t in cost_grid(limit) {
            let costs: Vec<f64> = rs.iter().filter_map(|r| r.cost_at(t)).collect();
            agg.cost.push(CostRow {
                planner,
                s,
                n,
                t,
                solved: costs.len(),
                mean_cost: mean(costs.into_iter()),
            });
        }
    }
    agg
}

impl Aggregates {
    pub fn success_of(&self, planner: PlannerId, s: usize, n: usize) -> Option<&SuccessRow> {
        self.success
            .iter()
            .find(|r| (r.planner, r.s, r.n) == (planner, s, n))
    }
}

pub fn cell_file_name(planner: PlannerId, s: usize, n: usize) -> String {
    format!("trials_{planner}_s{s}_n{n}.ndjson")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |e| BenchError::Io(path.display().to_string(), e)
}

/// One NDJSON file per cell and one CSV per metric.
pub fn write_results(dir: &Path, records: &[TrialRecord]) -> Result<Aggregates, BenchError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut cells: BTreeMap<String, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry(cell_file_name(r.planner, r.s, r.n))
            .or_default()
            .push(r);
    }
    for (name, rs) in cells {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        for r in rs {
            let line = serde_json::to_string(r).expect("records serialize");
            writeln!(w, "{line}").map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    let agg = aggregate(records);
    write_csv(&dir.join(SUCCESS_CSV), &agg.success)?;
    write_csv(&dir.join(INITIAL_TIME_CSV), &agg.initial_time)?;
    write_csv(&dir.join(MODES_CSV), &agg.modes)?;
    write_csv(&dir.join(COST_CSV), &agg.cost)?;
    Ok(agg)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let csv_err = |e| BenchError::Csv(path.display().to_string(), e);
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, BenchError> {
    let csv_err = |e| BenchError::Csv(path.display().to_string(), e);
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

pub fn read_aggregates(dir: &Path) -> Result<Aggregates, BenchError> {
    Ok(Aggregates {
        success: read_csv(&dir.join(SUCCESS_CSV))?,
        initial_time: read_csv(&dir.join(INITIAL_TIME_CSV))?,
        modes: read_csv(&dir.join(MODES_CSV))?,
        cost: read_csv(&dir.join(COST_CSV))?,
    })
}

pub fn read_ndjson(path: &Path) -> Result<Vec<TrialRecord>, BenchError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| BenchError::Record {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

/// Every record under `dir`, sorted.
pub fn read_records(dir: &Path) -> Result<Vec<TrialRecord>, BenchError> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trials_") && n.ends_with(".ndjson"))
        })
        .collect();
    names.sort();
    let mut out = Vec::new();
    for p in names {
        out.extend(read_ndjson(&p)?);
    }
    sort_records(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(planner: PlannerId, seed: u64, curve: Vec<(f64, f64)>) -> TrialRecord {
        let settings = TrialSettings::new(planner, 1, seed, 0.35);
        let mut r = TrialRecord::failed(&settings, 2, "x".into());
        r.error = None;
        r.success = !curve.is_empty();
        r.initial_solution_time_s = curve.first().map(|c| c.0);
        r.final_cost = curve.last().map(|c| c.1);
        r.cost_over_time = curve;
        r.modes_expanded = seed as usize;
        r
    }

    #[test]
    fn spec_defaults_fill_in() {
        let spec: BenchmarkSpec =
            serde_json::from_str(r#"{"scene": "a.json", "planners": ["mmdrrt"]}"#).unwrap();
        assert_eq!(spec, BenchmarkSpec::new("a.json", vec![PlannerId::Mmdrrt]));
        assert_eq!(spec.s_values, vec![10, 20, 30, 50]);
        assert_eq!(spec.n_arms, vec![2, 3, 4, 5]);
        assert_eq!((spec.trials, spec.time_limit_s), (50, 30.0));
        assert_eq!(spec.clock, ClockKind::Work);
    }

    #[test]
    fn spec_rejects_zero_trials_and_unknown_fields() {
        let mut spec = BenchmarkSpec::new("a.json", vec![PlannerId::Mmdrrt]);
        spec.trials = 0;
        assert!(spec.validate().is_err());
        spec.trials = 1;
        spec.time_limit_s = 0.0;
        assert!(spec.validate().is_err());
        assert!(serde_json::from_str::<BenchmarkSpec>(
            r#"{"scene": "a", "planners": [], "trails": 3}"#
        )
        .is_err());
    }

    #[test]
    fn arm_placeholder_expands() {
        let mut spec = BenchmarkSpec::new("scenes/chain_{n}.json", vec![]);
        spec.n_arms = vec![2, 4];
        assert_eq!(
            spec.scene_paths(Path::new("/b")),
            vec![
                PathBuf::from("/b/scenes/chain_2.json"),
                PathBuf::from("/b/scenes/chain_4.json")
            ]
        );
        spec.scene = "x.json".into();
        assert_eq!(spec.scene_paths(Path::new("/b")).len(), 1);
    }

    #[test]
    fn cost_curve_carries_forward_and_averages_solved_only() {
        let records = vec![
            rec(PlannerId::Mmdrrt, 1, vec![(0.05, 10.0), (0.25, 6.0)]),
            rec(PlannerId::Mmdrrt, 2, vec![(0.15, 8.0)]),
            rec(PlannerId::Mmdrrt, 3, vec![]),
        ];
        let agg = aggregate(&records);
        let curve: Vec<(usize, Option<f64>)> =
            agg.cost.iter().map(|c| (c.solved, c.mean_cost)).collect();
        assert_eq!(
            curve,
            vec![(0, None), (1, Some(10.0)), (2, Some(9.0)), (2, Some(7.0))]
        );
        let s = &agg.success[0];
        assert_eq!((s.trials, s.successes), (3, 2));
        assert_eq!(agg.initial_time[0].median_s, Some(0.1));
        assert_eq!(agg.modes[0].mean_modes_expanded, 2.0);
    }

    #[test]
    fn cells_are_split_by_planner() {
        let records = vec![
            rec(PlannerId::TampPrm, 1, vec![]),
            rec(PlannerId::Mmdrrt, 1, vec![(0.1, 1.0)]),
        ];
        let agg = aggregate(&records);
        assert_eq!(agg.success.len(), 2);
        assert_eq!(agg.success[0].planner, PlannerId::Mmdrrt);
        assert_eq!(
            agg.success_of(PlannerId::TampPrm, 1, 2).unwrap().successes,
            0
        );
    }

    #[test]
    fn median_of_even_count_is_the_midpoint() {
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }

    #[test]
    fn grid_includes_the_limit() {
        assert_eq!(cost_grid(0.3).len(), 4);
        assert_eq!(cost_grid(30.0).len(), 301);
    }
}
