use std::path::{Path, PathBuf};

use handoff_core::fixtures;
use handoff_core::geometry::GeometryError;
use handoff_harness::bench::BenchmarkSpec;
use handoff_harness::scene_io::{load_scene, parse_scene, scene_to_json, SceneError};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).to_path_buf()
}

#[test]
fn bundled_scenes_match_the_fixtures() {
    let dir = root().join("scenes");
    let mut pairs = vec![
        ("tabletop.json".to_string(), fixtures::tabletop()),
        (
            "narrow_passage.json".to_string(),
            fixtures::narrow_passage(),
        ),
    ];
    for n in 2..=5 {
        pairs.push((format!("chain_{n}.json"), fixtures::chain(n)));
    }
    for (name, scene) in pairs {
        let path = dir.join(&name);
        assert_eq!(load_scene(&path).unwrap(), scene, "{name}");
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, scene_to_json(&scene), "{name} is stale");
    }
}

#[test]
fn tabletop_has_two_arms_and_no_obstacles() {
    let scene = load_scene(&root().join("scenes/tabletop.json")).unwrap();
    assert_eq!(scene.num_arms(), 2);
    assert!(scene.obstacles.is_empty());
}

#[test]
fn narrow_passage_has_a_wall_with_a_slit() {
    let scene = load_scene(&root().join("scenes/narrow_passage.json")).unwrap();
    assert_eq!(scene.obstacles.len(), 2);
    let slit = fixtures::SLIT;
    let mid = handoff_core::geometry::Pose2::new(0.0, (slit[0] + slit[1]) / 2.0, 0.0);
    assert!(scene.object_pose_free(&mid));
    for y in [slit[0] - 0.2, slit[1] + 0.2] {
        assert!(!scene.object_pose_free(&handoff_core::geometry::Pose2::new(0.0, y, 0.0)));
    }
}

#[test]
fn object_reachable_by_both_arms_is_rejected() {
    let mut scene = fixtures::tabletop();
    scene.object.init.x = 0.0;
    let err = parse_scene(&scene_to_json(&scene), "both.json").unwrap_err();
    assert!(
        matches!(
            err,
            SceneError::Invalid {
                source: GeometryError::DomainViolation(_),
                ..
            }
        ),
        "{err}"
    );
    assert!(err.is_infeasible());
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_scene(&root().join("scenes/nope.json")).unwrap_err();
    assert!(matches!(err, SceneError::Io { .. }));
}

#[test]
fn example_configs_load_and_point_at_scenes() {
    for entry in std::fs::read_dir(root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let spec = BenchmarkSpec::load(&path).unwrap();
        for scene in spec.scene_paths(path.parent().unwrap()) {
            load_scene(&scene).unwrap();
        }
    }
}
