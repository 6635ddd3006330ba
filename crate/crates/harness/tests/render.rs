use handoff_core::fixtures;
use handoff_core::geometry::{Scene, Vec2};
use handoff_core::plan::{Plan, TransitionKind};
use handoff_harness::planners::{run_trial, PlannerId, TrialSettings};
use handoff_harness::render::{arm_points, frame_svg, frame_times, render_plan};

fn solved() -> (Scene, Plan) {
    let scene = fixtures::tabletop();
    let settings = TrialSettings {
        roadmap_vertices: 60,
        ..TrialSettings::new(PlannerId::Mmdrrt, 2, 3, 2.0)
    };
    let plan = run_trial(&scene, &settings, None).plan.expect("solved");
    (scene, plan)
}

fn points(pts: &[Vec2]) -> String {
    pts.iter()
        .map(|p| format!("{:.4},{:.4}", p.x, p.y))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn three_frames_at_start_middle_and_end() {
    let (scene, plan) = solved();
    let end = plan.duration();
    assert_eq!(frame_times(&plan, 3), vec![0.0, end / 2.0, end]);
    let dir = tempfile::tempdir().unwrap();
    let files = render_plan(&scene, &plan, 3, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    for (f, t) in files.iter().zip([0.0, end / 2.0, end]) {
        let svg = std::fs::read_to_string(f).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(&format!("t = {t:.3} / {end:.3} s")));
        assert_eq!(svg.matches("class=\"arm\"").count(), 2);
        assert_eq!(
            svg.matches("class=\"transition\"").count(),
            plan.transitions.len()
        );
    }
}

#[test]
fn handoff_frame_shows_both_arms_at_the_handoff() {
    let (scene, plan) = solved();
    let mark = plan
        .transitions
        .iter()
        .find(|m| matches!(m.kind, TransitionKind::Handoff { .. }))
        .unwrap();
    let TransitionKind::Handoff {
        from,
        to,
        from_grasp,
        to_grasp,
    } = mark.kind
    else {
        unreachable!()
    };
    let q = &plan.waypoints[mark.waypoint].config;
    let svg = frame_svg(&scene, &plan, mark.t);
    for arm in [from, to] {
        let pts = arm_points(&scene, arm, &q.per_arm[arm]).unwrap();
        assert!(svg.contains(&points(&pts)), "arm {arm} not at the handoff");
    }
    let a = scene.held_object_pose(from, &q.per_arm[from].joints, from_grasp);
    let b = scene.held_object_pose(to, &q.per_arm[to].joints, to_grasp);
    let (dp, da) = a.error_to(&b);
    assert!(dp < 1e-5 && da < 1e-5);
}

#[test]
fn carried_object_follows_the_gripper() {
    let (scene, plan) = solved();
    let pick = &plan.transitions[0];
    let next = &plan.transitions[1];
    let TransitionKind::Pick { arm, grasp } = pick.kind else {
        panic!("plans start with a pick")
    };
    let t = (pick.t + next.t) / 2.0;
    let (q, _) = plan.state_at(t);
    let pose = scene.held_object_pose(arm, &q.per_arm[arm].joints, grasp);
    let svg = frame_svg(&scene, &plan, t);
    let poly = scene.object_polygon(&pose);
    assert!(svg.contains(&format!(
        "class=\"object\" points=\"{}\"",
        points(poly.vertices())
    )));
}
