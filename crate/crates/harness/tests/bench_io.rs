use std::fs;
use std::path::{Path, PathBuf};

use handoff_core::validate::validate_plan;
use handoff_harness::bench::{
    aggregate, cell_file_name, read_aggregates, read_records, run_benchmark, write_results,
    BenchmarkSpec,
};
use handoff_harness::planners::PlannerId;
use handoff_harness::scene_io::load_scene;

fn scenes() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes")
}

fn small(planners: Vec<PlannerId>, trials: usize) -> BenchmarkSpec {
    let mut spec = BenchmarkSpec::new("tabletop.json", planners);
    spec.s_values = vec![1];
    spec.trials = trials;
    spec.time_limit_s = 0.5;
    spec.roadmap_vertices = 60;
    spec.composite_vertices = 800;
    spec.seed = 11;
    spec
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn one_trial_one_record() {
    let records = run_benchmark(&small(vec![PlannerId::Mmdrrt], 1), &scenes()).unwrap();
    assert_eq!(records.len(), 1);
    let r = &records[0];
    assert_eq!((r.planner, r.s, r.n, r.seed), (PlannerId::Mmdrrt, 1, 2, 11));
}

#[test]
fn same_seed_gives_identical_files_and_they_load_back() {
    let spec = small(vec![PlannerId::TampPrm, PlannerId::Mmdrrt], 2);
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let records = run_benchmark(&spec, &scenes()).unwrap();
    let agg = write_results(&a, &records).unwrap();
    write_results(&b, &run_benchmark(&spec, &scenes()).unwrap()).unwrap();
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
    assert!(a.join(cell_file_name(PlannerId::TampPrm, 1, 2)).exists());

    let keys: Vec<_> = records.iter().map(|r| (r.planner, r.seed)).collect();
    assert_eq!(
        keys,
        vec![
            (PlannerId::Mmdrrt, 11),
            (PlannerId::Mmdrrt, 12),
            (PlannerId::TampPrm, 11),
            (PlannerId::TampPrm, 12)
        ]
    );

    let loaded = read_records(&a).unwrap();
    assert_eq!(loaded, records);
    assert_eq!(aggregate(&loaded), agg);
    assert_eq!(read_aggregates(&a).unwrap(), agg);

    let scene = load_scene(&scenes().join("tabletop.json")).unwrap();
    for r in &loaded {
        if let Some(plan) = &r.plan {
            validate_plan(&scene, plan).unwrap();
        }
        assert!(r
            .cost_over_time
            .windows(2)
            .all(|w| w[1].1 <= w[0].1 && w[0].0 <= w[1].0));
        if r.success {
            assert!(r.initial_solution_time_s.unwrap() <= r.time_limit_s);
        }
    }
}

#[test]
fn arm_count_template_runs_each_scene() {
    let mut spec = small(vec![PlannerId::Mmdrrt], 1);
    spec.scene = "chain_{n}.json".into();
    spec.n_arms = vec![2, 3];
    let records = run_benchmark(&spec, &scenes()).unwrap();
    assert_eq!(records.iter().map(|r| r.n).collect::<Vec<_>>(), vec![2, 3]);
}

#[test]
fn bad_scene_path_fails_the_run() {
    let mut spec = small(vec![PlannerId::Mmdrrt], 1);
    spec.scene = "missing.json".into();
    assert!(run_benchmark(&spec, &scenes()).is_err());
}
