//! Planar serial chains: forward and inverse kinematics.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pose::{wrap_angle, Pose2, Vec2};
use super::shapes::{Capsule, Segment};
use super::GeometryError;

pub const IK_POSITION_TOL: f64 = 1e-6;
pub const IK_ANGLE_TOL: f64 = 1e-6;
pub const IK_MAX_RESTARTS: usize = 32;
pub const DEFAULT_LINK_THICKNESS: f64 = 0.05;

/// Joint angles of one arm (radians).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmConfig {
    pub joints: Vec<f64>,
}

impl ArmConfig {
    pub fn new(joints: Vec<f64>) -> Self {
        ArmConfig { joints }
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// Largest absolute per-joint displacement.
    pub fn max_displacement(&self, other: &ArmConfig) -> f64 {
        self.joints
            .iter()
            .zip(&other.joints)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for ArmConfig {
    fn from(joints: Vec<f64>) -> Self {
        ArmConfig { joints }
    }
}

/// One configuration per arm, in scene order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompositeConfig {
    pub per_arm: Vec<ArmConfig>,
}

impl CompositeConfig {
    pub fn new(per_arm: Vec<ArmConfig>) -> Self {
        CompositeConfig { per_arm }
    }

    pub fn arity(&self) -> usize {
        self.per_arm.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.per_arm
            .iter()
            .flat_map(|q| q.joints.iter().copied())
            .collect()
    }
}

/// A planar kinematic chain rooted at `base`. The scene JSON uses this
/// shape directly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub base: Pose2,
    pub links: Vec<f64>,
    pub limits: Vec<[f64; 2]>,
    /// Uniform per-joint speed limit (rad/s).
    pub vmax: f64,
    /// Full width of the link capsules (m).
    #[serde(default = "default_thickness")]
    pub thickness: f64,
    /// Initial configuration; also the home position of sequential baselines.
    pub home: ArmConfig,
    /// Final configuration; defaults to `home`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<ArmConfig>,
}

fn default_thickness() -> f64 {
    DEFAULT_LINK_THICKNESS
}

/// Link segments and end-effector frame for one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainPose {
    pub segments: Vec<Segment>,
    pub end_effector: Pose2,
}

impl ArmModel {
    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn goal_config(&self) -> &ArmConfig {
        self.goal.as_ref().unwrap_or(&self.home)
    }

    pub fn reach(&self) -> f64 {
        self.links.iter().sum()
    }

    pub fn link_radius(&self) -> f64 {
        self.thickness / 2.0
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidArm(msg));
        if self.links.is_empty() {
            return bad("arm has no links".into());
        }
        if let Some((i, l)) = self
            .links
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return bad(format!("links[{i}] = {l} must be a positive length"));
        }
        if self.limits.len() != self.links.len() {
            return bad(format!(
                "limits has {} entries but the arm has {} links",
                self.limits.len(),
                self.links.len()
            ));
        }
        if let Some((i, [lo, hi])) = self
            .limits
            .iter()
            .enumerate()
            .find(|(_, [lo, hi])| lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less))
        {
            return bad(format!("limits[{i}] = [{lo}, {hi}] needs lo < hi"));
        }
        if !(self.vmax.is_finite() && self.vmax > 0.0) {
            return bad(format!("vmax = {} must be positive", self.vmax));
        }
        if self.thickness.is_nan() || self.thickness < 0.0 {
            return bad(format!(
                "thickness = {} must be non-negative",
                self.thickness
            ));
        }
        if !self.base.is_finite() {
            return bad("base pose is not finite".into());
        }
        self.check_limits(&self.home)
            .map_err(|e| GeometryError::InvalidArm(format!("home: {e}")))?;
        if let Some(goal) = &self.goal {
            self.check_limits(goal)
                .map_err(|e| GeometryError::InvalidArm(format!("goal: {e}")))?;
        }
        Ok(())
    }

    pub fn within_limits(&self, q: &ArmConfig) -> bool {
        q.dof() == self.dof()
            && q.joints
                .iter()
                .zip(&self.limits)
                .all(|(a, [lo, hi])| a >= lo && a <= hi)
    }

    pub fn check_limits(&self, q: &ArmConfig) -> Result<(), GeometryError> {
        if q.dof() != self.dof() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dof(),
                got: q.dof(),
            });
        }
        for (joint, (&value, &[lo, hi])) in q.joints.iter().zip(&self.limits).enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(GeometryError::JointLimit {
                    joint,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Frame reached after the first `k` joints and links, starting at `from`.
    fn chain_frame(&self, from: Pose2, joints: &[f64], links: &[f64]) -> Pose2 {
        let mut frame = from;
        for (q, l) in joints.iter().zip(links) {
            frame = frame
                .compose(&Pose2::new(0.0, 0.0, *q))
                .compose(&Pose2::new(*l, 0.0, 0.0));
        }
        frame
    }

    /// Unchecked forward kinematics; callers guarantee the dimension.
    pub(crate) fn fk_unchecked(&self, joints: &[f64]) -> ChainPose {
        let mut segments = Vec::with_capacity(self.links.len());
        let mut p = self.base.translation();
        let mut heading = self.base.theta;
        for (q, l) in joints.iter().zip(&self.links) {
            heading += q;
            let next = p + Vec2::new(heading.cos(), heading.sin()) * *l;
            segments.push(Segment::new(p, next));
            p = next;
        }
        ChainPose {
            segments,
            end_effector: Pose2::new(p.x, p.y, wrap_angle(heading)),
        }
    }

    pub fn forward_kinematics(&self, q: &ArmConfig) -> Result<ChainPose, GeometryError> {
        self.check_limits(q)?;
        Ok(self.fk_unchecked(&q.joints))
    }

    pub fn end_effector(&self, q: &ArmConfig) -> Result<Pose2, GeometryError> {
        Ok(self.forward_kinematics(q)?.end_effector)
    }

    pub(crate) fn capsules(&self, joints: &[f64]) -> Vec<Capsule> {
        let r = self.link_radius();
        self.fk_unchecked(joints)
            .segments
            .into_iter()
            .map(|seg| Capsule { seg, radius: r })
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ArmConfig {
        ArmConfig::new(
            self.limits
                .iter()
                .map(|[lo, hi]| rng.gen_range(*lo..=*hi))
                .collect(),
        )
    }

    /// Analytic inverse kinematics. Chains with more than three joints fix
    /// the proximal `dof - 3` joints to uniform samples per restart and solve
    /// the distal 3R chain exactly. Every returned configuration is within
    /// joint limits and reproduces `target` to the IK tolerances; an empty
    /// result means unreachable.
    pub fn inverse_kinematics<R: Rng + ?Sized>(
        &self,
        target: &Pose2,
        rng: &mut R,
    ) -> Vec<ArmConfig> {
        let mut out: Vec<ArmConfig> = Vec::new();
        if !target.is_finite() {
            return out;
        }
        let d = self.dof();
        let restarts = if d > 3 { IK_MAX_RESTARTS } else { 1 };
        for _ in 0..restarts {
            let fixed = d.saturating_sub(3);
            let prefix: Vec<f64> = self.limits[..fixed]
                .iter()
                .map(|[lo, hi]| rng.gen_range(*lo..=*hi))
                .collect();
            let frame = self.chain_frame(self.base, &prefix, &self.links[..fixed]);
            let local = frame.inverse().compose(target);
            for tail in solve_tail(&self.links[fixed..], &local) {
                let mut joints = prefix.clone();
                joints.extend(tail);
                if let Some(q) = self.fit_and_verify(joints, target) {
                    if !out.iter().any(|o| o.max_displacement(&q) < 1e-9) {
                        out.push(q);
                    }
                }
            }
        }
        out
    }

    fn fit_and_verify(&self, joints: Vec<f64>, target: &Pose2) -> Option<ArmConfig> {
        let fitted: Option<Vec<f64>> = joints
            .iter()
            .zip(&self.limits)
            .map(|(&a, &[lo, hi])| fit_to_limits(a, lo, hi))
            .collect();
        let q = ArmConfig::new(fitted?);
        let ee = self.fk_unchecked(&q.joints).end_effector;
        let (dp, da) = ee.error_to(target);
        (dp <= IK_POSITION_TOL && da <= IK_ANGLE_TOL).then_some(q)
    }
}

fn fit_to_limits(a: f64, lo: f64, hi: f64) -> Option<f64> {
    const SLACK: f64 = 1e-12;
    let w = wrap_angle(a);
    [w, w - 2.0 * PI, w + 2.0 * PI]
        .into_iter()
        .find(|c| *c >= lo - SLACK && *c <= hi + SLACK)
        .map(|c| c.clamp(lo, hi))
}

/// Closed-form solutions for a chain of at most three links, expressed in
/// the chain's own base frame. The IK position/orientation filter happens
/// afterwards, so the law-of-cosines argument is clamped rather than
/// rejected here.
fn solve_tail(links: &[f64], target: &Pose2) -> Vec<Vec<f64>> {
    match *links {
        [_] => vec![vec![target.y.atan2(target.x)]],
        [l1, l2] => two_link(l1, l2, target.translation())
            .into_iter()
            .map(|(a, b)| vec![a, b])
            .collect(),
        [l1, l2, l3] => {
            let wrist =
                target.translation() - Vec2::new(target.theta.cos(), target.theta.sin()) * l3;
            two_link(l1, l2, wrist)
                .into_iter()
                .map(|(a, b)| vec![a, b, target.theta - a - b])
                .collect()
        }
        _ => Vec::new(),
    }
}

fn two_link(l1: f64, l2: f64, w: Vec2) -> Vec<(f64, f64)> {
    let c = ((w.norm_sq() - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let elbow = c.acos();
    let mut sols = Vec::with_capacity(2);
    for q2 in [elbow, -elbow] {
        let q1 = w.y.atan2(w.x) - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
        sols.push((q1, q2));
    }
    if elbow == 0.0 || elbow == PI {
        sols.truncate(1);
    }
    sols
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn arm(links: &[f64]) -> ArmModel {
        ArmModel {
            base: Pose2::IDENTITY,
            links: links.to_vec(),
            limits: vec![[-PI, PI]; links.len()],
            vmax: 1.0,
            thickness: DEFAULT_LINK_THICKNESS,
            home: ArmConfig::new(vec![0.0; links.len()]),
            goal: None,
        }
    }

    fn close(p: Pose2, x: f64, y: f64, t: f64) -> bool {
        let (dp, da) = p.error_to(&Pose2::new(x, y, t));
        dp < 1e-12 && da < 1e-12
    }

    #[test]
    fn fk_straight_rotated_and_bent() {
        let a = arm(&[1.0, 1.0]);
        let ee = |q: Vec<f64>| a.end_effector(&ArmConfig::new(q)).unwrap();
        assert!(close(ee(vec![0.0, 0.0]), 2.0, 0.0, 0.0));
        assert!(close(ee(vec![FRAC_PI_2, 0.0]), 0.0, 2.0, FRAC_PI_2));
        assert!(close(ee(vec![FRAC_PI_2, -FRAC_PI_2]), 1.0, 1.0, 0.0));
        assert_eq!(
            a.forward_kinematics(&ArmConfig::new(vec![0.0, 0.0]))
                .unwrap()
                .segments
                .len(),
            2
        );
    }

    #[test]
    fn fk_rejects_joint_limit_violation() {
        let mut a = arm(&[1.0, 1.0]);
        a.limits[1] = [-1.0, 1.0];
        let err = a
            .forward_kinematics(&ArmConfig::new(vec![0.0, 1.5]))
            .unwrap_err();
        assert!(matches!(err, GeometryError::JointLimit { joint: 1, .. }));
    }

    #[test]
    fn ik_two_link_boundary_and_outside() {
        let a = arm(&[1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sols = a.inverse_kinematics(&Pose2::new(2.0, 0.0, 0.0), &mut rng);
        assert_eq!(sols.len(), 1);
        assert!(sols[0].max_displacement(&ArmConfig::new(vec![0.0, 0.0])) < 1e-6);
        assert!(a
            .inverse_kinematics(&Pose2::new(3.0, 0.0, 0.0), &mut rng)
            .is_empty());
    }

    #[test]
    fn ik_three_link_two_solutions_round_trip() {
        let a = arm(&[1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let target = Pose2::new(1.5, 0.5, 0.0);
        let sols = a.inverse_kinematics(&target, &mut rng);
        assert!(sols.len() >= 2);
        for q in &sols {
            let (dp, da) = a.end_effector(q).unwrap().error_to(&target);
            assert!(dp <= IK_POSITION_TOL && da <= IK_ANGLE_TOL);
        }
        assert!(sols[0].max_displacement(&sols[1]) > 1e-3);
    }

    #[test]
    fn ik_redundant_chain_yields_distinct_solutions() {
        let a = arm(&[0.6, 0.6, 0.6, 0.6]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target = Pose2::new(1.2, 0.6, 0.3);
        let sols = a.inverse_kinematics(&target, &mut rng);
        assert!(sols.len() > 4, "got {}", sols.len());
        for q in &sols {
            let (dp, da) = a.end_effector(q).unwrap().error_to(&target);
            assert!(dp <= IK_POSITION_TOL && da <= IK_ANGLE_TOL);
        }
    }

    #[test]
    fn ik_respects_limits() {
        let mut a = arm(&[1.0, 1.0, 1.0]);
        a.limits[1] = [0.0, PI];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sols = a.inverse_kinematics(&Pose2::new(1.5, 0.5, 0.0), &mut rng);
        assert_eq!(sols.len(), 1);
        assert!(sols[0].joints[1] >= 0.0);
    }

    #[test]
    fn validate_rejects_zero_length_link() {
        let mut a = arm(&[1.0, 0.0]);
        assert!(a.validate().is_err());
        a.links[1] = 1.0;
        a.validate().unwrap();
    }
}
