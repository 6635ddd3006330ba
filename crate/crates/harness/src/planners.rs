//! One planning trial from a scene and settings to a [`TrialRecord`].

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use handoff_core::baselines::{
    hord_dfs, tamp_sequential, CompositeRoadmap, CompositeRrtStar, LazyPrm, MotionPlanner,
};
use handoff_core::budget::{Budget, ClockKind, Observer};
use handoff_core::geometry::Scene;
use handoff_core::instance::{substream, Instance, InstanceConfig};
use handoff_core::plan::Plan;
use handoff_core::planner::{self, PlanOutcome, PlannerOptions};

#[derive(
    Clone,
    Copy,
    Debug,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerId {
    Mmdrrt,
    TampPrm,
    TampRrt,
    HordPrm,
    HordRrt,
}

impl PlannerId {
    pub const ALL: [PlannerId; 5] = [
        PlannerId::Mmdrrt,
        PlannerId::TampPrm,
        PlannerId::TampRrt,
        PlannerId::HordPrm,
        PlannerId::HordRrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerId::Mmdrrt => "mmdrrt",
            PlannerId::TampPrm => "tamp-prm",
            PlannerId::TampRrt => "tamp-rrt",
            PlannerId::HordPrm => "hord-prm",
            PlannerId::HordRrt => "hord-rrt",
        }
    }

    fn uses_composite_roadmap(self) -> bool {
        matches!(self, PlannerId::TampPrm | PlannerId::HordPrm)
    }
}

impl fmt::Display for PlannerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const COMPOSITE_STREAM: u64 = 3;
const PLANNER_STREAM: u64 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSettings {
    pub planner: PlannerId,
    pub s: usize,
    pub seed: u64,
    pub time_limit_s: f64,
    pub clock: ClockKind,
    /// Vertices per arm roadmap.
    pub roadmap_vertices: usize,
    /// Vertices of the composite roadmap of the PRM baselines.
    pub composite_vertices: usize,
    /// Per-query cap of the depth-first baselines (s).
    pub query_budget_s: f64,
}

impl TrialSettings {
    pub fn new(planner: PlannerId, s: usize, seed: u64, time_limit_s: f64) -> Self {
        TrialSettings {
            planner,
            s,
            seed,
            time_limit_s,
            clock: ClockKind::Work,
            roadmap_vertices: handoff_core::instance::DEFAULT_ROADMAP_VERTICES,
            composite_vertices: handoff_core::baselines::DEFAULT_COMPOSITE_VERTICES,
            query_budget_s: handoff_core::baselines::DEFAULT_QUERY_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub planner: PlannerId,
    pub s: usize,
    /// Number of arms.
    pub n: usize,
    pub seed: u64,
    pub clock: ClockKind,
    pub time_limit_s: f64,
    pub success: bool,
    pub initial_solution_time_s: Option<f64>,
    pub final_cost: Option<f64>,
    /// `(t, cost)` at every improvement.
    pub cost_over_time: Vec<(f64, f64)>,
    pub modes_expanded: usize,
    pub tree_size: usize,
    pub plan: Option<Plan>,
    /// Why the trial produced nothing: setup failure or crash.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn failed(settings: &TrialSettings, n: usize, error: String) -> Self {
        TrialRecord {
            planner: settings.planner,
            s: settings.s,
            n,
            seed: settings.seed,
            clock: settings.clock,
            time_limit_s: settings.time_limit_s,
            success: false,
            initial_solution_time_s: None,
            final_cost: None,
            cost_over_time: Vec::new(),
            modes_expanded: 0,
            tree_size: 0,
            plan: None,
            error: Some(error),
        }
    }

    /// Best cost known at time `t`.
    pub fn cost_at(&self, t: f64) -> Option<f64> {
        self.cost_over_time
            .iter()
            .take_while(|e| e.0 <= t)
            .last()
            .map(|e| e.1)
    }
}

/// Builds the instance for the trial's seed and runs the planner on it.
/// Roadmaps and mode graph are built before the clock starts.
pub fn run_trial(
    scene: &Scene,
    settings: &TrialSettings,
    observer: Option<&mut Observer<'_>>,
) -> TrialRecord {
    let n = scene.num_arms();
    let config = InstanceConfig {
        roadmap_vertices: settings.roadmap_vertices,
        s: settings.s,
        seed: settings.seed,
    };
    let inst = match Instance::build(scene.clone(), config) {
        Ok(i) => i,
        Err(e) => return TrialRecord::failed(settings, n, format!("instance: {e}")),
    };
    run_on_instance(&inst, settings, observer)
}

/// Runs the planner on a ready instance, e.g. a hand-built one.
pub fn run_on_instance(
    inst: &Instance,
    settings: &TrialSettings,
    observer: Option<&mut Observer<'_>>,
) -> TrialRecord {
    let n = inst.num_arms();
    let planner_seed = substream(settings.seed, PLANNER_STREAM).next_u64();
    let map = if settings.planner.uses_composite_roadmap() {
        let seed = substream(settings.seed, COMPOSITE_STREAM).next_u64();
        match CompositeRoadmap::build(&inst.scene, settings.composite_vertices, seed) {
            Ok(m) => Some(m),
            Err(e) => return TrialRecord::failed(settings, n, format!("composite roadmap: {e}")),
        }
    } else {
        None
    };
    let mut budget = Budget::new(settings.clock, settings.time_limit_s);
    let (scene, graph) = (&inst.scene, &inst.graph);
    let out = match settings.planner {
        PlannerId::Mmdrrt => planner::plan(
            inst,
            PlannerOptions::default(),
            &mut budget,
            planner_seed,
            observer,
        ),
        PlannerId::TampPrm | PlannerId::HordPrm => {
            let map = map.as_ref().expect("built above");
            let mut prm = LazyPrm::new(scene, graph, map);
            run_baseline(settings, inst, &mut prm, &mut budget, observer)
        }
        PlannerId::TampRrt | PlannerId::HordRrt => {
            let mut rrt = CompositeRrtStar::new(scene, graph, planner_seed);
            run_baseline(settings, inst, &mut rrt, &mut budget, observer)
        }
    };
    record(settings, n, out)
}

fn run_baseline(
    settings: &TrialSettings,
    inst: &Instance,
    motion: &mut dyn MotionPlanner,
    budget: &mut Budget,
    observer: Option<&mut Observer<'_>>,
) -> PlanOutcome {
    match settings.planner {
        PlannerId::TampPrm | PlannerId::TampRrt => {
            tamp_sequential(&inst.scene, &inst.graph, motion, budget, observer)
        }
        _ => hord_dfs(
            &inst.scene,
            &inst.graph,
            motion,
            settings.query_budget_s,
            budget,
            observer,
        ),
    }
}

fn record(settings: &TrialSettings, n: usize, out: PlanOutcome) -> TrialRecord {
    TrialRecord {
        planner: settings.planner,
        s: settings.s,
        n,
        seed: settings.seed,
        clock: settings.clock,
        time_limit_s: settings.time_limit_s,
        success: out.best.is_some(),
        initial_solution_time_s: out.initial_solution_time,
        final_cost: out.best.as_ref().map(|p| p.cost),
        cost_over_time: out.cost_over_time,
        modes_expanded: out.modes_expanded,
        tree_size: out.tree_size,
        plan: out.best,
        error: None,
    }
}
