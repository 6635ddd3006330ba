use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use handoff_core::plan::Plan;

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenes")
        .join(name)
}

fn handoff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handoff"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn plan_then_validate_then_render() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let tabletop = scene("tabletop.json");
    let o = handoff(&[
        "plan",
        "--scene",
        s(&tabletop),
        "--planner",
        "mmdrrt",
        "--s",
        "2",
        "--time",
        "2",
        "--seed",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let plan_file = out.join("plan.json");
    assert!(out.join("record.json").exists());

    let o = handoff(&["validate", "--scene", s(&tabletop), "--plan", s(&plan_file)]);
    assert_eq!(o.status.code(), Some(0));

    let frames = tmp.path().join("frames");
    let o = handoff(&[
        "render",
        "--scene",
        s(&tabletop),
        "--plan",
        s(&plan_file),
        "--out",
        s(&frames),
        "--frames",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(&frames).unwrap().count(), 4);

    // a cost that disagrees with the duration is a violation, not bad input
    let mut plan: Plan =
        serde_json::from_str(&std::fs::read_to_string(&plan_file).unwrap()).unwrap();
    plan.cost += 1.0;
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&plan).unwrap()).unwrap();
    let o = handoff(&["validate", "--scene", s(&tabletop), "--plan", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_input_exits_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let broken = tmp.path().join("broken.json");
    std::fs::write(&broken, "{\"schema\": 1, \"arms\": [}").unwrap();
    let o = handoff(&["validate", "--scene", s(&broken), "--plan", s(&broken)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("broken.json:1:"), "{err}");

    let o = handoff(&[
        "plan",
        "--scene",
        s(&scene("tabletop.json")),
        "--planner",
        "nope",
        "--out",
        "x",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn no_plan_in_time_exits_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = handoff(&[
        "plan",
        "--scene",
        s(&scene("tabletop.json")),
        "--time",
        "0.000001",
        "--out",
        s(&tmp.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(tmp.path().join("r/record.json").exists());
    assert!(!tmp.path().join("r/plan.json").exists());
}

#[test]
fn bench_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/smoke.json");
    let o = handoff(&["bench", "--spec", s(&spec), "--out", s(tmp.path())]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "success_ratio.csv",
        "initial_time.csv",
        "modes_expanded.csv",
        "cost_over_time.csv",
    ] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    assert!(tmp.path().join("trials_mmdrrt_s2_n2.ndjson").exists());
}
