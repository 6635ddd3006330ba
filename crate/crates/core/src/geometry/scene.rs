//! Scene description and composite collision checking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arm::{ArmConfig, ArmModel, CompositeConfig};
use super::pose::{Pose2, Vec2};
use super::shapes::{
    capsule_circle_overlap, capsule_polygon_overlap, capsules_overlap, polygon_circle_overlap,
    polygons_overlap, Capsule, ConvexPolygon, Obstacle,
};
use super::GeometryError;

/// Nominal collision-checking resolution δ: the largest per-joint
/// displacement between two checks along an edge (rad).
pub const COLLISION_STEP: f64 = 0.05;

/// Resolution the planners sweep edges at. Plans are re-checked at δ/2,
/// and dyadic sweeps at this step sample exactly those configurations, so
/// an accepted edge can never be rejected for lack of samples.
pub const PLANNING_STEP: f64 = COLLISION_STEP / 2.0;

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Top,
    Bottom,
}

impl Face {
    pub fn opposite(self) -> Face {
        match self {
            Face::Top => Face::Bottom,
            Face::Bottom => Face::Top,
        }
    }
}

/// Pose of the object relative to the end-effector while grasped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub offset: Pose2,
    pub face: Face,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: ConvexPolygon,
    pub init: Pose2,
    pub goal: Pose2,
    pub grasps: Vec<Grasp>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Resting on the indexed stable surface.
    Stable(usize),
    Picked {
        arm: usize,
        grasp: usize,
    },
}

/// Object pose together with what is holding it up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    pub pose: Pose2,
    pub support: Support,
}

/// What the collision checker should do with the object.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectState {
    /// Ignore the object entirely.
    Absent,
    /// Fixed in the world at this pose.
    Stable(Pose2),
    /// Rigidly attached to `arm`'s end-effector by `grasp`.
    Held { arm: usize, grasp: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub schema: u32,
    pub arms: Vec<ArmModel>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub object: ObjectSpec,
    #[serde(default)]
    pub surfaces: Vec<[Vec2; 2]>,
}

/// Outcome of sweeping an edge: validity and how many configurations were checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepResult {
    pub valid: bool,
    pub checks: usize,
}

/// Checks the straight joint-space segment between `a` and `b` at `2^m + 1`
/// evenly spaced parameters, `m` minimal such that consecutive samples move
/// no joint by more than `step`. The endpoints are put in a canonical order
/// first, so the sampled set is identical for `(a, b)` and `(b, a)`, and
/// halving `step` only ever adds samples.
pub fn dyadic_sweep(
    a: &[f64],
    b: &[f64],
    step: f64,
    mut check: impl FnMut(&[f64]) -> bool,
) -> SweepResult {
    let (lo, hi) = match lexicographic(a, b) {
        std::cmp::Ordering::Greater => (b, a),
        _ => (a, b),
    };
    let span = lo
        .iter()
        .zip(hi)
        .map(|(x, y)| (y - x).abs())
        .fold(0.0, f64::max);
    let mut levels = 0u32;
    while levels < 40 && span / 2f64.powi(levels as i32) > step {
        levels += 1;
    }
    let n: u64 = 1 << levels;
    let mut buf = vec![0.0; lo.len()];
    let mut checks = 0usize;
    let at = |k: u64, buf: &mut Vec<f64>| {
        let t = k as f64 / n as f64;
        for (i, v) in buf.iter_mut().enumerate() {
            *v = lo[i] + t * (hi[i] - lo[i]);
        }
    };
    for k in [0, n] {
        at(k, &mut buf);
        checks += 1;
        if !check(&buf) {
            return SweepResult {
                valid: false,
                checks,
            };
        }
    }
    // coarse-to-fine order finds collisions early
    for level in 1..=levels {
        let stride = n >> level;
        let mut k = stride;
        while k < n {
            at(k, &mut buf);
            checks += 1;
            if !check(&buf) {
                return SweepResult {
                    valid: false,
                    checks,
                };
            }
            k += 2 * stride;
        }
    }
    SweepResult {
        valid: true,
        checks,
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

impl Scene {
    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn arm_dofs(&self) -> Vec<usize> {
        self.arms.iter().map(|a| a.dof()).collect()
    }

    pub fn init_config(&self) -> CompositeConfig {
        CompositeConfig::new(self.arms.iter().map(|a| a.home.clone()).collect())
    }

    pub fn goal_config(&self) -> CompositeConfig {
        CompositeConfig::new(self.arms.iter().map(|a| a.goal_config().clone()).collect())
    }

    pub fn object_polygon(&self, pose: &Pose2) -> ConvexPolygon {
        self.object.shape.transformed(pose)
    }

    /// Object pose implied by `arm` at `q` holding grasp `grasp`.
    pub fn held_object_pose(&self, arm: usize, q: &[f64], grasp: usize) -> Pose2 {
        let ee = self.arms[arm].fk_unchecked(q).end_effector;
        ee.compose(&self.object.grasps[grasp].offset)
    }

    /// End-effector pose that places the object at `object_pose` with `grasp`.
    pub fn grasp_ee_target(&self, object_pose: &Pose2, grasp: usize) -> Pose2 {
        object_pose.compose(&self.object.grasps[grasp].offset.inverse())
    }

    pub fn object_pose(&self, q: &CompositeConfig, state: &ObjectState) -> Option<Pose2> {
        match *state {
            ObjectState::Absent => None,
            ObjectState::Stable(p) => Some(p),
            ObjectState::Held { arm, grasp } => {
                Some(self.held_object_pose(arm, &q.per_arm[arm].joints, grasp))
            }
        }
    }

    /// Index of the surface closest to a resting pose, for bookkeeping.
    pub fn nearest_surface(&self, pose: &Pose2) -> Option<usize> {
        let p = pose.translation();
        self.surfaces
            .iter()
            .enumerate()
            .map(|(i, [a, b])| {
                (
                    i,
                    super::shapes::point_segment_distance(p, &super::shapes::Segment::new(*a, *b)),
                )
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _)| i)
    }

    fn capsule_hits_obstacles(&self, c: &Capsule) -> bool {
        self.obstacles.iter().any(|o| match o {
            Obstacle::Polygon { vertices } => capsule_polygon_overlap(c, vertices),
            Obstacle::Circle(circle) => capsule_circle_overlap(c, circle),
        })
    }

    fn polygon_hits_obstacles(&self, poly: &ConvexPolygon) -> bool {
        self.obstacles.iter().any(|o| match o {
            Obstacle::Polygon { vertices } => polygons_overlap(poly, vertices),
            Obstacle::Circle(circle) => polygon_circle_overlap(poly, circle),
        })
    }

    fn self_collides(capsules: &[Capsule]) -> bool {
        (0..capsules.len()).any(|i| {
            ((i + 2)..capsules.len()).any(|j| capsules_overlap(&capsules[i], &capsules[j]))
        })
    }

    /// Single arm against itself and the static obstacles.
    pub fn arm_valid_alone(&self, arm: usize, joints: &[f64]) -> bool {
        let model = &self.arms[arm];
        if joints.len() != model.dof()
            || !joints
                .iter()
                .zip(&model.limits)
                .all(|(a, [lo, hi])| a >= lo && a <= hi)
        {
            return false;
        }
        let caps = model.capsules(joints);
        !Self::self_collides(&caps) && !caps.iter().any(|c| self.capsule_hits_obstacles(c))
    }

    /// Single arm carrying the object with `grasp`: the arm alone must be
    /// valid, the object must clear the obstacles and every link except the
    /// end-effector link.
    pub fn arm_holding_valid(&self, arm: usize, joints: &[f64], grasp: usize) -> bool {
        if !self.arm_valid_alone(arm, joints) {
            return false;
        }
        let poly = self.object_polygon(&self.held_object_pose(arm, joints, grasp));
        let caps = self.arms[arm].capsules(joints);
        !self.polygon_hits_obstacles(&poly)
            && !caps[..caps.len() - 1]
                .iter()
                .any(|c| capsule_polygon_overlap(c, &poly))
    }

    pub fn object_pose_free(&self, pose: &Pose2) -> bool {
        !self.polygon_hits_obstacles(&self.object_polygon(pose))
    }

    /// Validity of a flattened composite configuration.
    pub fn flat_config_valid(&self, flat: &[f64], object: &ObjectState) -> bool {
        let mut offset = 0;
        let mut arms = Vec::with_capacity(self.arms.len());
        for (i, model) in self.arms.iter().enumerate() {
            arms.push((i, &flat[offset..offset + model.dof()]));
            offset += model.dof();
        }
        self.partial_config_valid(&arms, object)
    }

    /// Whether two arms can touch at all: each stays within its reach plus
    /// link radius of its base.
    fn reach_disks_overlap(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.arms[i], &self.arms[j]);
        let gap = (a.base.translation() - b.base.translation()).norm();
        gap <= a.reach() + a.link_radius() + b.reach() + b.link_radius()
    }

    /// Like [`Scene::flat_config_valid`] for a subset of the arms; arms not
    /// listed are ignored. A held object is only checked when its holder is
    /// listed.
    pub fn partial_config_valid(&self, arms: &[(usize, &[f64])], object: &ObjectState) -> bool {
        let mut all_caps: Vec<Vec<Capsule>> = Vec::with_capacity(arms.len());
        for &(arm, joints) in arms {
            let model = &self.arms[arm];
            if joints.len() != model.dof()
                || !joints
                    .iter()
                    .zip(&model.limits)
                    .all(|(a, [lo, hi])| a >= lo && a <= hi)
            {
                return false;
            }
            let caps = model.capsules(joints);
            if Self::self_collides(&caps) || caps.iter().any(|c| self.capsule_hits_obstacles(c)) {
                return false;
            }
            all_caps.push(caps);
        }
        for i in 0..all_caps.len() {
            for j in (i + 1)..all_caps.len() {
                if !self.reach_disks_overlap(arms[i].0, arms[j].0) {
                    continue;
                }
                if all_caps[i]
                    .iter()
                    .any(|a| all_caps[j].iter().any(|b| capsules_overlap(a, b)))
                {
                    return false;
                }
            }
        }
        let (pose, exempt) = match *object {
            ObjectState::Absent => return true,
            ObjectState::Stable(p) => (p, None),
            ObjectState::Held { arm, grasp } => match arms.iter().find(|(a, _)| *a == arm) {
                Some(&(_, joints)) => (self.held_object_pose(arm, joints, grasp), Some(arm)),
                None => return true,
            },
        };
        let poly = self.object_polygon(&pose);
        if self.polygon_hits_obstacles(&poly) {
            return false;
        }
        for (&(arm, _), caps) in arms.iter().zip(&all_caps) {
            let n = if exempt == Some(arm) {
                caps.len() - 1
            } else {
                caps.len()
            };
            if caps[..n].iter().any(|c| capsule_polygon_overlap(c, &poly)) {
                return false;
            }
        }
        true
    }

    /// True iff no arm collides with itself, an obstacle or another arm, and
    /// the object (if present) overlaps nothing but its holder's
    /// end-effector link.
    pub fn is_composite_config_valid(&self, q: &CompositeConfig, object: &ObjectState) -> bool {
        q.arity() == self.arms.len()
            && q.per_arm
                .iter()
                .zip(&self.arms)
                .all(|(c, a)| c.dof() == a.dof())
            && self.flat_config_valid(&q.flatten(), object)
    }

    pub fn composite_edge_sweep(
        &self,
        a: &CompositeConfig,
        b: &CompositeConfig,
        object: &ObjectState,
        step: f64,
    ) -> SweepResult {
        dyadic_sweep(&a.flatten(), &b.flatten(), step, |f| {
            self.flat_config_valid(f, object)
        })
    }

    /// All arms move simultaneously along the straight joint-space segment.
    pub fn is_composite_edge_valid(
        &self,
        a: &CompositeConfig,
        b: &CompositeConfig,
        object: &ObjectState,
    ) -> bool {
        self.composite_edge_sweep(a, b, object, PLANNING_STEP).valid
    }

    pub fn arm_edge_sweep(
        &self,
        arm: usize,
        a: &ArmConfig,
        b: &ArmConfig,
        step: f64,
    ) -> SweepResult {
        dyadic_sweep(&a.joints, &b.joints, step, |q| self.arm_valid_alone(arm, q))
    }

    /// Structural checks that do not need IK. Reachability (one arm at each
    /// end of the task) is checked by [`Scene::problem_domain`].
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.schema != SCENE_SCHEMA_VERSION {
            return Err(GeometryError::InvalidScene(format!(
                "schema: expected {SCENE_SCHEMA_VERSION}, got {}",
                self.schema
            )));
        }
        if self.arms.is_empty() {
            return Err(GeometryError::InvalidScene(
                "arms: at least one arm is required".into(),
            ));
        }
        for (i, arm) in self.arms.iter().enumerate() {
            arm.validate()
                .map_err(|e| GeometryError::InvalidScene(format!("arms[{i}]: {e}")))?;
        }
        if self.object.grasps.is_empty() {
            return Err(GeometryError::InvalidScene(
                "object.grasps: at least one grasp is required".into(),
            ));
        }
        for (i, g) in self.object.grasps.iter().enumerate() {
            if !g.offset.is_finite() {
                return Err(GeometryError::InvalidScene(format!(
                    "object.grasps[{i}].offset is not finite"
                )));
            }
        }
        for (name, p) in [("init", &self.object.init), ("goal", &self.object.goal)] {
            if !p.is_finite() {
                return Err(GeometryError::InvalidScene(format!(
                    "object.{name} is not finite"
                )));
            }
            if !self.object_pose_free(p) {
                return Err(GeometryError::InvalidScene(format!(
                    "object.{name} overlaps an obstacle"
                )));
            }
        }
        if !self
            .is_composite_config_valid(&self.init_config(), &ObjectState::Stable(self.object.init))
        {
            return Err(GeometryError::InvalidScene(
                "arms[*].home: initial state is in collision".into(),
            ));
        }
        if !self
            .is_composite_config_valid(&self.goal_config(), &ObjectState::Stable(self.object.goal))
        {
            return Err(GeometryError::InvalidScene(
                "arms[*].goal: final state is in collision".into(),
            ));
        }
        Ok(())
    }

    /// Arms with at least one collision-free IK solution holding the object
    /// at `pose` with some grasp.
    pub fn arms_reaching(&self, pose: &Pose2) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        (0..self.arms.len())
            .filter(|&arm| {
                (0..self.object.grasps.len()).any(|g| {
                    let target = self.grasp_ee_target(pose, g);
                    self.arms[arm]
                        .inverse_kinematics(&target, &mut rng)
                        .iter()
                        .any(|q| self.arm_holding_valid(arm, &q.joints, g))
                })
            })
            .collect()
    }

    /// Exactly one arm reaches the initial pose and exactly one (a different
    /// one when there are several arms) reaches the goal pose. Returns
    /// `(picker, placer)`.
    pub fn problem_domain(&self) -> Result<(usize, usize), GeometryError> {
        let at_init = self.arms_reaching(&self.object.init);
        let at_goal = self.arms_reaching(&self.object.goal);
        let picker = match at_init.as_slice() {
            [a] => *a,
            [] => return Err(GeometryError::Unreachable("object.init".into())),
            many => {
                return Err(GeometryError::DomainViolation(format!(
                    "object.init is reachable by arms {many:?}"
                )))
            }
        };
        let placer = match at_goal.as_slice() {
            [a] => *a,
            [] => return Err(GeometryError::Unreachable("object.goal".into())),
            many => {
                return Err(GeometryError::DomainViolation(format!(
                    "object.goal is reachable by arms {many:?}"
                )))
            }
        };
        if self.arms.len() > 1 && picker == placer {
            return Err(GeometryError::DomainViolation(format!(
                "arm {picker} reaches both object.init and object.goal"
            )));
        }
        Ok((picker, placer))
    }
}
