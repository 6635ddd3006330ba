//! Task structure: transition sampling and the directed mode graph.
//!
//! A mode constrains some arms to a configuration and grasp and leaves the
//! others free. Moving from one mode to an adjacent one is instantaneous and
//! happens at a composite configuration that satisfies the target mode.

mod graph;
mod sampler;

pub use graph::{ModeGraph, ModeGraphExport};
pub use sampler::{
    sample_transitions, task_domain, TaskDomain, Transitions, HANDOFF_ATTEMPTS_PER_SAMPLE,
};

use serde::{Deserialize, Serialize};

use crate::geometry::{
    ArmConfig, CompositeConfig, GeometryError, ObjectPose, ObjectState, Scene, Support,
};
use crate::roadmap::RoadmapError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaskError {
    #[error("a handoff task needs at least two arms")]
    NotEnoughArms,
    #[error("arms cannot be ordered into a handoff chain: {0}")]
    UnsupportedLayout(String),
    #[error("no valid pick configuration")]
    NoPicks,
    #[error("no valid place configuration")]
    NoPlaces,
    #[error("mode graph has no path from init to goal")]
    InfeasibleModeGraph,
    #[error("invalid mode: {0}")]
    InvalidMode(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Roadmap(#[from] RoadmapError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeKind {
    Init,
    Pick { arm: usize },
    Handoff { from: usize, to: usize },
    Place { arm: usize },
    Goal,
}

/// Constraint on one arm: an exact configuration and, when the arm is in
/// contact with the object, the grasp it uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub config: ArmConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasp: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeNode {
    pub kind: ModeKind,
    pub slots: Vec<Option<Slot>>,
    /// Object pose at the moment the mode is entered.
    pub object: ObjectPose,
    /// Object state for motions made while in this mode.
    pub carry: ObjectState,
}

fn stable(scene: &Scene, pose: crate::geometry::Pose2) -> ObjectPose {
    ObjectPose {
        pose,
        support: Support::Stable(scene.nearest_surface(&pose).unwrap_or(0)),
    }
}

fn picked(scene: &Scene, arm: usize, q: &ArmConfig, grasp: usize) -> ObjectPose {
    ObjectPose {
        pose: scene.held_object_pose(arm, &q.joints, grasp),
        support: Support::Picked { arm, grasp },
    }
}

impl ModeNode {
    pub fn init(scene: &Scene) -> Self {
        ModeNode {
            kind: ModeKind::Init,
            slots: scene
                .arms
                .iter()
                .map(|a| {
                    Some(Slot {
                        config: a.home.clone(),
                        grasp: None,
                    })
                })
                .collect(),
            object: stable(scene, scene.object.init),
            carry: ObjectState::Stable(scene.object.init),
        }
    }

    pub fn goal(scene: &Scene) -> Self {
        ModeNode {
            kind: ModeKind::Goal,
            slots: scene
                .arms
                .iter()
                .map(|a| {
                    Some(Slot {
                        config: a.goal_config().clone(),
                        grasp: None,
                    })
                })
                .collect(),
            object: stable(scene, scene.object.goal),
            carry: ObjectState::Stable(scene.object.goal),
        }
    }

    fn single(scene: &Scene, arm: usize, q: ArmConfig, grasp: usize) -> Vec<Option<Slot>> {
        let mut slots = vec![None; scene.num_arms()];
        slots[arm] = Some(Slot {
            config: q,
            grasp: Some(grasp),
        });
        slots
    }

    pub fn pick(scene: &Scene, arm: usize, q: ArmConfig, grasp: usize) -> Self {
        let object = picked(scene, arm, &q, grasp);
        ModeNode {
            kind: ModeKind::Pick { arm },
            slots: Self::single(scene, arm, q, grasp),
            object,
            carry: ObjectState::Held { arm, grasp },
        }
    }

    pub fn place(scene: &Scene, arm: usize, q: ArmConfig, grasp: usize) -> Self {
        ModeNode {
            kind: ModeKind::Place { arm },
            slots: Self::single(scene, arm, q, grasp),
            object: stable(scene, scene.object.goal),
            carry: ObjectState::Stable(scene.object.goal),
        }
    }

    /// Object passes from `from` (grasp `gf`) to `to` (grasp `gt`); the two
    /// grasps must use opposite faces.
    pub fn handoff(
        scene: &Scene,
        (from, qf, gf): (usize, ArmConfig, usize),
        (to, qt, gt): (usize, ArmConfig, usize),
    ) -> Result<Self, TaskError> {
        if from == to {
            return Err(TaskError::InvalidMode(format!(
                "handoff from arm {from} to itself"
            )));
        }
        let (ff, ft) = (scene.object.grasps[gf].face, scene.object.grasps[gt].face);
        if ff.opposite() != ft {
            return Err(TaskError::InvalidMode(format!(
                "handoff grasps use faces {ff:?} and {ft:?}"
            )));
        }
        let object = picked(scene, from, &qf, gf);
        let mut slots = vec![None; scene.num_arms()];
        slots[from] = Some(Slot {
            config: qf,
            grasp: Some(gf),
        });
        slots[to] = Some(Slot {
            config: qt,
            grasp: Some(gt),
        });
        Ok(ModeNode {
            kind: ModeKind::Handoff { from, to },
            slots,
            object,
            carry: ObjectState::Held { arm: to, grasp: gt },
        })
    }

    pub fn constrains(&self, arm: usize) -> bool {
        self.slots[arm].is_some()
    }

    pub fn constrained_arms(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some())
            .map(|(i, _)| i)
    }

    pub fn config(&self, arm: usize) -> Option<&ArmConfig> {
        self.slots[arm].as_ref().map(|s| &s.config)
    }

    pub fn grasp(&self, arm: usize) -> Option<usize> {
        self.slots[arm].as_ref().and_then(|s| s.grasp)
    }

    /// Exact equality on every constrained arm; free arms are ignored.
    pub fn satisfies(&self, q: &CompositeConfig) -> bool {
        q.arity() == self.slots.len()
            && self
                .slots
                .iter()
                .zip(&q.per_arm)
                .all(|(slot, c)| slot.as_ref().is_none_or(|s| s.config == *c))
    }

    /// Recomputes the entry object pose from the slots.
    pub fn implied_object_pose(&self, scene: &Scene) -> ObjectPose {
        match self.kind {
            ModeKind::Init => stable(scene, scene.object.init),
            ModeKind::Place { .. } | ModeKind::Goal => stable(scene, scene.object.goal),
            ModeKind::Pick { arm } | ModeKind::Handoff { from: arm, .. } => {
                let slot = self.slots[arm].as_ref().expect("holder slot");
                picked(scene, arm, &slot.config, slot.grasp.expect("holder grasp"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn q(v: &[f64]) -> ArmConfig {
        ArmConfig::new(v.to_vec())
    }

    #[test]
    fn pick_satisfaction_ignores_free_arm() {
        let scene = fixtures::tabletop();
        let pick = ModeNode::pick(&scene, 0, q(&[0.1, 0.2, 0.3]), 0);
        assert!(pick.satisfies(&CompositeConfig::new(vec![
            q(&[0.1, 0.2, 0.3]),
            q(&[1.0, 1.0, 1.0])
        ])));
        assert!(pick.satisfies(&CompositeConfig::new(vec![
            q(&[0.1, 0.2, 0.3]),
            q(&[-2.0, 0.0, 0.5])
        ])));
        assert!(!pick.satisfies(&CompositeConfig::new(vec![
            q(&[0.1, 0.2, 0.3 + 1e-12]),
            q(&[1.0, 1.0, 1.0])
        ])));
    }

    #[test]
    fn handoff_needs_both_slots() {
        let scene = fixtures::tabletop();
        let h = ModeNode::handoff(
            &scene,
            (0, q(&[0.1, 0.2, 0.3]), 0),
            (1, q(&[0.4, 0.5, 0.6]), 1),
        )
        .unwrap();
        assert!(h.satisfies(&CompositeConfig::new(vec![
            q(&[0.1, 0.2, 0.3]),
            q(&[0.4, 0.5, 0.6])
        ])));
        assert!(!h.satisfies(&CompositeConfig::new(vec![
            q(&[0.1, 0.2, 0.3]),
            q(&[0.4, 0.5, 0.0])
        ])));
        assert_eq!(h.constrained_arms().count(), 2);
    }

    #[test]
    fn handoff_rejects_same_face() {
        let scene = fixtures::tabletop();
        let r = ModeNode::handoff(&scene, (0, q(&[0.0; 3]), 0), (1, q(&[0.0; 3]), 0));
        assert!(matches!(r, Err(TaskError::InvalidMode(_))));
    }

    #[test]
    fn carry_states_follow_the_object() {
        let scene = fixtures::tabletop();
        let pick = ModeNode::pick(&scene, 0, q(&[0.0; 3]), 1);
        assert_eq!(pick.carry, ObjectState::Held { arm: 0, grasp: 1 });
        let h = ModeNode::handoff(&scene, (0, q(&[0.0; 3]), 0), (1, q(&[0.0; 3]), 1)).unwrap();
        assert_eq!(h.carry, ObjectState::Held { arm: 1, grasp: 1 });
        assert_eq!(
            ModeNode::place(&scene, 1, q(&[0.0; 3]), 1).carry,
            ObjectState::Stable(scene.object.goal)
        );
    }
}
