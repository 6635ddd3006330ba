//! Everything a planner needs for one problem: the scene, one roadmap per
//! arm and the mode graph, with every mode configuration injected into the
//! roadmaps.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{CompositeConfig, Scene};
use crate::roadmap::{ArmRoadmap, TensorVertex};
use crate::taskspec::{
    sample_transitions, task_domain, ModeGraph, ModeNode, TaskDomain, TaskError,
};

pub const DEFAULT_ROADMAP_VERTICES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceConfig {
    pub roadmap_vertices: usize,
    /// Transition samples per category.
    pub s: usize,
    pub seed: u64,
}

impl InstanceConfig {
    pub fn new(s: usize, seed: u64) -> Self {
        InstanceConfig {
            roadmap_vertices: DEFAULT_ROADMAP_VERTICES,
            s,
            seed,
        }
    }
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const ROADMAP_STREAM: u64 = 1;
pub(crate) const TRANSITION_STREAM: u64 = 2;

#[derive(Debug)]
pub struct Instance {
    pub scene: Scene,
    pub domain: TaskDomain,
    pub roadmaps: Vec<ArmRoadmap>,
    pub graph: ModeGraph,
    pub config: InstanceConfig,
}

impl Instance {
    pub fn build(scene: Scene, config: InstanceConfig) -> Result<Self, TaskError> {
        scene.validate()?;
        let domain = task_domain(&scene)?;
        let mut seeds = substream(config.seed, ROADMAP_STREAM);
        let mut roadmaps = (0..scene.num_arms())
            .map(|arm| ArmRoadmap::build(&scene, arm, config.roadmap_vertices, seeds.next_u64()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rng = substream(config.seed, TRANSITION_STREAM);
        let transitions = sample_transitions(&scene, &domain, config.s, &mut rng)?;
        let mut graph = ModeGraph::build(
            ModeNode::init(&scene),
            transitions,
            ModeNode::goal(&scene),
            &domain.chain,
        )?;
        graph.ground(&scene, &mut roadmaps)?;
        Ok(Instance {
            scene,
            domain,
            roadmaps,
            graph,
            config,
        })
    }

    /// Builds from a ready mode graph, e.g. a hand-made one.
    pub fn from_parts(
        scene: Scene,
        domain: TaskDomain,
        mut roadmaps: Vec<ArmRoadmap>,
        mut graph: ModeGraph,
        config: InstanceConfig,
    ) -> Result<Self, TaskError> {
        graph.ground(&scene, &mut roadmaps)?;
        Ok(Instance {
            scene,
            domain,
            roadmaps,
            graph,
            config,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.roadmaps.len()
    }

    pub fn compose(&self, v: &TensorVertex) -> CompositeConfig {
        CompositeConfig::new(
            self.roadmaps
                .iter()
                .zip(v.iter())
                .map(|(m, i)| m.vertex(i).clone())
                .collect(),
        )
    }

    pub fn flatten(&self, v: &TensorVertex) -> Vec<f64> {
        self.roadmaps
            .iter()
            .zip(v.iter())
            .flat_map(|(m, i)| m.vertex(i).joints.iter().copied())
            .collect()
    }

    /// The composite vertex where every arm sits at its slot in `mode`;
    /// `None` when some arm is free in that mode.
    pub fn mode_vertex(&self, mode: usize) -> Option<TensorVertex> {
        (0..self.num_arms())
            .map(|arm| self.graph.slot_vertex(mode, arm))
            .collect::<Option<Vec<usize>>>()
            .map(TensorVertex::new)
    }

    /// Synchronized duration of the tensor edge `a -> b`.
    pub fn duration(&self, a: &TensorVertex, b: &TensorVertex) -> f64 {
        self.roadmaps
            .iter()
            .enumerate()
            .map(|(i, m)| {
                if a.get(i) == b.get(i) {
                    0.0
                } else {
                    m.move_time(m.vertex(a.get(i)), m.vertex(b.get(i)))
                }
            })
            .fold(0.0, f64::max)
    }
}
