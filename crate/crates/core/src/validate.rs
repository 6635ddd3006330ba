//! Independent plan checker. It uses only the scene: every segment is
//! re-swept at half the planning resolution, and every change of object
//! state must be a physically consistent pick, handoff or place.

use crate::geometry::{ObjectState, Pose2, Scene, COLLISION_STEP};
use crate::plan::{move_duration, Plan, TransitionKind};

/// Object poses on either side of a transition may differ by the two IK
/// tolerances that produced them.
pub const POSE_MATCH_TOL: f64 = 1e-5;
const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct PlanViolation(pub String);

fn fail<T>(msg: impl Into<String>) -> Result<T, PlanViolation> {
    Err(PlanViolation(msg.into()))
}

fn poses_match(a: &Pose2, b: &Pose2) -> bool {
    let (dp, da) = a.error_to(b);
    dp <= POSE_MATCH_TOL && da <= POSE_MATCH_TOL
}

pub fn validate_plan(scene: &Scene, plan: &Plan) -> Result<(), PlanViolation> {
    let w = &plan.waypoints;
    let (Some(first), Some(last)) = (w.first(), w.last()) else {
        return fail("plan has no waypoints");
    };
    if first.t != 0.0
        || first.config != scene.init_config()
        || first.object != ObjectState::Stable(scene.object.init)
    {
        return fail("plan does not start from the initial state");
    }
    if last.config != scene.goal_config() || last.object != ObjectState::Stable(scene.object.goal) {
        return fail("plan does not end in the goal state");
    }
    if (plan.cost - last.t).abs() > TIME_TOL {
        return fail(format!(
            "cost {} differs from duration {}",
            plan.cost, last.t
        ));
    }
    for (k, p) in w.iter().enumerate() {
        if p.config.arity() != scene.num_arms()
            || !scene.is_composite_config_valid(&p.config, &p.object)
        {
            return fail(format!("waypoint {k} is invalid"));
        }
    }
    let mut changes = Vec::new();
    for k in 0..w.len() - 1 {
        let (a, b) = (&w[k], &w[k + 1]);
        let need = move_duration(scene, &a.config, &b.config);
        if b.t - a.t < need - TIME_TOL {
            return fail(format!(
                "segment {k} takes {} s but needs {need} s",
                b.t - a.t
            ));
        }
        if !scene
            .composite_edge_sweep(&a.config, &b.config, &a.object, COLLISION_STEP / 2.0)
            .valid
        {
            return fail(format!("segment {k} collides"));
        }
        if a.object != b.object {
            if a.config != b.config || a.t != b.t {
                return fail(format!(
                    "object state changes during motion at waypoint {}",
                    k + 1
                ));
            }
            changes.push((
                k + 1,
                transition(scene, &a.config, &a.object, &b.object, k + 1)?,
            ));
        }
    }
    let marks: Vec<(usize, TransitionKind)> = plan
        .transitions
        .iter()
        .map(|m| (m.waypoint, m.kind))
        .collect();
    if marks != changes {
        return fail(format!(
            "transition marks {marks:?} do not match object changes {changes:?}"
        ));
    }
    for m in &plan.transitions {
        if m.t != w[m.waypoint].t {
            return fail("transition mark time differs from its waypoint");
        }
    }
    plan.check_order().map_err(|e| PlanViolation(e.to_string()))
}

fn transition(
    scene: &Scene,
    q: &crate::geometry::CompositeConfig,
    before: &ObjectState,
    after: &ObjectState,
    at: usize,
) -> Result<TransitionKind, PlanViolation> {
    let held =
        |arm: usize, grasp: usize| scene.held_object_pose(arm, &q.per_arm[arm].joints, grasp);
    match (*before, *after) {
        (ObjectState::Stable(p), ObjectState::Held { arm, grasp }) => {
            if p != scene.object.init || !poses_match(&held(arm, grasp), &p) {
                return fail(format!(
                    "pick at waypoint {at} does not grasp the resting object"
                ));
            }
            Ok(TransitionKind::Pick { arm, grasp })
        }
        (
            ObjectState::Held {
                arm: from,
                grasp: gf,
            },
            ObjectState::Held { arm: to, grasp: gt },
        ) => {
            let faces = (scene.object.grasps[gf].face, scene.object.grasps[gt].face);
            if from == to || faces.0.opposite() != faces.1 {
                return fail(format!("handoff at waypoint {at} uses incompatible grasps"));
            }
            if !poses_match(&held(from, gf), &held(to, gt)) {
                return fail(format!(
                    "handoff at waypoint {at}: arms disagree on the object pose"
                ));
            }
            Ok(TransitionKind::Handoff {
                from,
                to,
                from_grasp: gf,
                to_grasp: gt,
            })
        }
        (ObjectState::Held { arm, grasp }, ObjectState::Stable(p)) => {
            if p != scene.object.goal || !poses_match(&held(arm, grasp), &p) {
                return fail(format!(
                    "place at waypoint {at} does not put the object at its goal"
                ));
            }
            Ok(TransitionKind::Place { arm, grasp })
        }
        _ => fail(format!("impossible object state change at waypoint {at}")),
    }
}
