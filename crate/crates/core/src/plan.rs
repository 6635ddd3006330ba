//! Timed composite trajectories with task transition marks.

use serde::{Deserialize, Serialize};

use crate::geometry::{ArmConfig, CompositeConfig, ObjectState, Scene};
use crate::taskspec::{ModeGraph, ModeKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub config: CompositeConfig,
    /// Object state while moving from this waypoint to the next.
    pub object: ObjectState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransitionKind {
    Pick {
        arm: usize,
        grasp: usize,
    },
    Handoff {
        from: usize,
        to: usize,
        from_grasp: usize,
        to_grasp: usize,
    },
    Place {
        arm: usize,
        grasp: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMark {
    pub t: f64,
    /// First waypoint carrying the new object state.
    pub waypoint: usize,
    #[serde(flatten)]
    pub kind: TransitionKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub waypoints: Vec<Waypoint>,
    pub transitions: Vec<TransitionMark>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("plan has no states")]
    Empty,
    #[error("plan makes no task transitions")]
    NoTransitions,
    #[error("mode {from} -> {to} is not an edge of the mode graph")]
    NotAnEdge { from: usize, to: usize },
    #[error("transitions out of order: {0}")]
    Order(String),
}

/// Synchronized duration of a straight composite move: the slowest arm's
/// largest joint displacement over its speed limit.
pub fn move_duration(scene: &Scene, a: &CompositeConfig, b: &CompositeConfig) -> f64 {
    a.per_arm
        .iter()
        .zip(&b.per_arm)
        .zip(&scene.arms)
        .map(|((x, y), arm)| arm_duration(x, y, arm.vmax))
        .fold(0.0, f64::max)
}

fn arm_duration(a: &ArmConfig, b: &ArmConfig, vmax: f64) -> f64 {
    a.max_displacement(b) / vmax
}

impl Plan {
    /// Times a sequence of (configuration, mode) states. Consecutive states
    /// in the same mode are straight moves; a change of mode happens in
    /// place and takes no time.
    pub fn from_states(
        scene: &Scene,
        graph: &ModeGraph,
        states: &[(CompositeConfig, usize)],
    ) -> Result<Plan, PlanError> {
        let plan = Self::timed(scene, graph, states)?;
        plan.check_order()?;
        Ok(plan)
    }

    /// [`Plan::from_states`] without the transition-order check.
    pub fn timed(
        scene: &Scene,
        graph: &ModeGraph,
        states: &[(CompositeConfig, usize)],
    ) -> Result<Plan, PlanError> {
        let (first, rest) = states.split_first().ok_or(PlanError::Empty)?;
        let mut waypoints = vec![Waypoint {
            t: 0.0,
            config: first.0.clone(),
            object: graph.node(first.1).carry,
        }];
        let mut transitions = Vec::new();
        let mut t = 0.0;
        let mut mode = first.1;
        for (q, m) in rest {
            let prev = &waypoints.last().expect("non-empty").config;
            if *m == mode {
                t += move_duration(scene, prev, q);
                waypoints.push(Waypoint {
                    t,
                    config: q.clone(),
                    object: graph.node(mode).carry,
                });
                continue;
            }
            if !graph.successors(mode).contains(m) {
                return Err(PlanError::NotAnEdge { from: mode, to: *m });
            }
            let node = graph.node(*m);
            let grasp = |arm: usize| node.grasp(arm).expect("constrained arm has a grasp");
            let kind = match node.kind {
                ModeKind::Pick { arm } => Some(TransitionKind::Pick {
                    arm,
                    grasp: grasp(arm),
                }),
                ModeKind::Handoff { from, to } => Some(TransitionKind::Handoff {
                    from,
                    to,
                    from_grasp: grasp(from),
                    to_grasp: grasp(to),
                }),
                ModeKind::Place { arm } => Some(TransitionKind::Place {
                    arm,
                    grasp: grasp(arm),
                }),
                ModeKind::Init | ModeKind::Goal => None,
            };
            let moved = *q != *prev;
            if moved {
                // a mode is entered where the previous state left off
                t += move_duration(scene, prev, q);
                waypoints.push(Waypoint {
                    t,
                    config: q.clone(),
                    object: graph.node(mode).carry,
                });
            }
            if let Some(kind) = kind {
                waypoints.push(Waypoint {
                    t,
                    config: q.clone(),
                    object: node.carry,
                });
                transitions.push(TransitionMark {
                    t,
                    waypoint: waypoints.len() - 1,
                    kind,
                });
            }
            mode = *m;
        }
        Ok(Plan {
            waypoints,
            transitions,
            cost: t,
        })
    }

    /// Pick first, then at least one handoff, then the place, all strictly
    /// inside the plan's time span.
    pub fn check_order(&self) -> Result<(), PlanError> {
        if self.transitions.is_empty() {
            return Err(PlanError::NoTransitions);
        }
        let n = self.transitions.len();
        for (i, m) in self.transitions.iter().enumerate() {
            let ok = match m.kind {
                TransitionKind::Pick { .. } => i == 0,
                TransitionKind::Handoff { .. } => i > 0 && i + 1 < n,
                TransitionKind::Place { .. } => i + 1 == n && i > 0,
            };
            if !ok {
                return Err(PlanError::Order(format!(
                    "{:?} at position {i} of {n}",
                    m.kind
                )));
            }
        }
        let times: Vec<f64> = self.transitions.iter().map(|m| m.t).collect();
        if !(times[0] > 0.0 && times.windows(2).all(|w| w[0] < w[1]) && times[n - 1] < self.cost) {
            return Err(PlanError::Order(format!(
                "times {times:?} in a plan of length {}",
                self.cost
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.waypoints.last().map_or(0.0, |w| w.t)
    }

    /// Configuration and object state at time `t`, interpolating linearly
    /// between waypoints. At a transition instant the later state wins.
    pub fn state_at(&self, t: f64) -> (CompositeConfig, ObjectState) {
        let w = &self.waypoints;
        let k = w.partition_point(|p| p.t <= t).max(1) - 1;
        if k + 1 >= w.len() || w[k + 1].t <= w[k].t {
            return (w[k].config.clone(), w[k].object);
        }
        let s = ((t - w[k].t) / (w[k + 1].t - w[k].t)).clamp(0.0, 1.0);
        let config = CompositeConfig::new(
            w[k].config
                .per_arm
                .iter()
                .zip(&w[k + 1].config.per_arm)
                .map(|(a, b)| {
                    ArmConfig::new(
                        a.joints
                            .iter()
                            .zip(&b.joints)
                            .map(|(x, y)| x + s * (y - x))
                            .collect(),
                    )
                })
                .collect(),
        );
        (config, w[k].object)
    }

    pub fn time_of(&self, pred: impl Fn(&TransitionKind) -> bool) -> Option<f64> {
        self.transitions.iter().find(|m| pred(&m.kind)).map(|m| m.t)
    }
}
