//! Planar kinematic chains, SE(2) object poses and exact collision checks.

mod arm;
mod pose;
mod scene;
pub mod shapes;

pub use arm::{
    ArmConfig, ArmModel, ChainPose, CompositeConfig, DEFAULT_LINK_THICKNESS, IK_ANGLE_TOL,
    IK_MAX_RESTARTS, IK_POSITION_TOL,
};
pub use pose::{wrap_angle, Pose2, Vec2};
pub use scene::{
    dyadic_sweep, Face, Grasp, ObjectPose, ObjectSpec, ObjectState, Scene, Support, SweepResult,
    COLLISION_STEP, PLANNING_STEP, SCENE_SCHEMA_VERSION,
};
pub use shapes::{Circle, ConvexPolygon, Obstacle};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("joint {joint} = {value} outside limits [{lo}, {hi}]")]
    JointLimit {
        joint: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("expected {expected} joints, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid arm: {0}")]
    InvalidArm(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("no arm can reach {0}")]
    Unreachable(String),
    #[error("problem domain violated: {0}")]
    DomainViolation(String),
}
