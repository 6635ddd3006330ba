//! Reference scenes. The JSON files shipped with the harness are these
//! scenes serialized.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::RngCore;

use crate::geometry::{
    shapes::ConvexPolygon, ArmConfig, ArmModel, Face, Grasp, ObjectSpec, Obstacle, Pose2, Scene,
    Vec2, DEFAULT_LINK_THICKNESS, SCENE_SCHEMA_VERSION,
};
use crate::instance::{substream, Instance, InstanceConfig, ROADMAP_STREAM, TRANSITION_STREAM};
use crate::roadmap::ArmRoadmap;
use crate::taskspec::{sample_transitions, task_domain, ModeGraph, ModeNode, TaskError};

pub const LINKS: [f64; 3] = [0.6, 0.5, 0.3];
pub const ARM_SPACING: f64 = 1.6;
pub const OBJECT_SIZE: f64 = 0.1;
/// End-effector to object-centre distance for both grasps.
pub const GRASP_DEPTH: f64 = OBJECT_SIZE / 2.0 + 0.04;
/// Horizontal distance from the end arms' bases to the object's poses.
pub const TASK_REACH: f64 = 0.9;
pub const TASK_HEIGHT: f64 = 0.3;
pub const SLIT: [f64; 2] = [0.3, 0.6];
pub const WALL_HALF_WIDTH: f64 = 0.03;
pub const WALL_EXTENT: f64 = 1.3;

pub fn arm(base: Pose2, home: Vec<f64>) -> ArmModel {
    ArmModel {
        base,
        links: LINKS.to_vec(),
        limits: vec![[-PI, PI]; LINKS.len()],
        vmax: 1.0,
        thickness: DEFAULT_LINK_THICKNESS,
        home: ArmConfig::new(home),
        goal: None,
    }
}

fn square(side: f64) -> ConvexPolygon {
    ConvexPolygon::rectangle(Vec2::new(0.0, 0.0), side, side)
}

/// `n` identical 3-link arms in a row, all resting straight down. The first
/// arm alone reaches the object, the last arm alone reaches its goal, which
/// is the initial pose mirrored. Every handoff swaps the held face, so the
/// goal is turned over exactly when the handoff count is odd.
pub fn chain(n: usize) -> Scene {
    let x0 = -ARM_SPACING * (n as f64 - 1.0) / 2.0;
    let arms = (0..n)
        .map(|i| {
            arm(
                Pose2::new(x0 + ARM_SPACING * i as f64, 0.0, 0.0),
                vec![-FRAC_PI_2, 0.0, 0.0],
            )
        })
        .collect();
    let x_end = -x0 + TASK_REACH;
    Scene {
        schema: SCENE_SCHEMA_VERSION,
        arms,
        obstacles: Vec::new(),
        object: ObjectSpec {
            shape: square(OBJECT_SIZE),
            init: Pose2::new(-x_end, TASK_HEIGHT, 0.0),
            goal: Pose2::new(
                x_end,
                TASK_HEIGHT,
                if n.is_multiple_of(2) { PI } else { 0.0 },
            ),
            grasps: vec![
                Grasp {
                    offset: Pose2::new(GRASP_DEPTH, 0.0, FRAC_PI_2),
                    face: Face::Top,
                },
                Grasp {
                    offset: Pose2::new(GRASP_DEPTH, 0.0, -FRAC_PI_2),
                    face: Face::Bottom,
                },
            ],
        },
        surfaces: vec![
            [
                Vec2::new(-x_end - 0.3, TASK_HEIGHT - OBJECT_SIZE / 2.0),
                Vec2::new(-x_end + 0.3, TASK_HEIGHT - OBJECT_SIZE / 2.0),
            ],
            [
                Vec2::new(x_end - 0.3, TASK_HEIGHT - OBJECT_SIZE / 2.0),
                Vec2::new(x_end + 0.3, TASK_HEIGHT - OBJECT_SIZE / 2.0),
            ],
        ],
    }
}

/// Two arms, no obstacles.
pub fn tabletop() -> Scene {
    chain(2)
}

/// The tabletop with a wall between the arms; the object can only change
/// hands through a slit.
pub fn narrow_passage() -> Scene {
    let mut scene = tabletop();
    let w = WALL_HALF_WIDTH;
    for (lo, hi) in [(-WALL_EXTENT, SLIT[0]), (SLIT[1], WALL_EXTENT)] {
        scene.obstacles.push(Obstacle::Polygon {
            vertices: ConvexPolygon::rectangle(Vec2::new(0.0, (lo + hi) / 2.0), 2.0 * w, hi - lo),
        });
    }
    scene
}

/// A tabletop instance with a trap: the scene gets a copy of the grasp of
/// the pick nearest the picker's home, and a pick using the copy at the
/// same configuration is listed first. No handoff starts from the copy, so
/// that pick leads nowhere while its twin still does.
pub fn dead_end(config: InstanceConfig) -> Result<Instance, TaskError> {
    let base = tabletop();
    let domain = task_domain(&base)?;
    let mut rng = substream(config.seed, TRANSITION_STREAM);
    let mut t = sample_transitions(&base, &domain, config.s, &mut rng)?;
    let home = &base.arms[domain.picker].home;
    let picker_config = |m: &ModeNode| {
        m.config(domain.picker)
            .expect("picks fix the picker")
            .clone()
    };
    let nearest = t
        .picks
        .iter()
        .min_by(|a, b| {
            let d = |m: &ModeNode| home.max_displacement(&picker_config(m));
            d(a).total_cmp(&d(b))
        })
        .expect("sampling returns at least one pick");
    let grasp = nearest.grasp(domain.picker).expect("picks hold a grasp");
    let q = picker_config(nearest);
    let mut scene = base;
    scene.object.grasps.push(scene.object.grasps[grasp]);
    let trap = ModeNode::pick(&scene, domain.picker, q, scene.object.grasps.len() - 1);
    t.picks.insert(0, trap);
    let mut seeds = substream(config.seed, ROADMAP_STREAM);
    let roadmaps = (0..scene.num_arms())
        .map(|arm| ArmRoadmap::build(&scene, arm, config.roadmap_vertices, seeds.next_u64()))
        .collect::<Result<Vec<_>, _>>()?;
    let graph = ModeGraph::build(
        ModeNode::init(&scene),
        t,
        ModeNode::goal(&scene),
        &domain.chain,
    )?;
    Instance::from_parts(scene, domain, roadmaps, graph, config)
}
