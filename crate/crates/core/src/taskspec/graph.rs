use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{ModeKind, ModeNode, TaskError, Transitions};
use crate::geometry::{ObjectState, Scene};
use crate::roadmap::{ArmRoadmap, TensorVertex};

/// Directed acyclic graph of modes. Nodes are stored in topological order:
/// init, picks, handoffs by chain position, places, goal.
#[derive(Clone, Debug)]
pub struct ModeGraph {
    nodes: Vec<ModeNode>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    init: usize,
    goal: usize,
    depth: Vec<usize>,
    carry_class: Vec<usize>,
    vertices: Option<Vec<Vec<Option<u32>>>>,
}

/// JSON view of a mode graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeGraphExport {
    pub init: usize,
    pub goal: usize,
    pub nodes: Vec<ModeNode>,
    pub edges: Vec<[usize; 2]>,
}

impl ModeGraph {
    /// Connects grasp-consistent modes: init to every pick, a pick to each
    /// handoff where the picking arm keeps its grasp, a handoff to the next
    /// handoff down the chain where the shared arm keeps its grasp, a
    /// handoff to each place where the placing arm keeps its grasp, and
    /// every place to the goal. `chain` lists the arms in handoff order.
    pub fn build(
        init: ModeNode,
        transitions: Transitions,
        goal: ModeNode,
        chain: &[usize],
    ) -> Result<Self, TaskError> {
        let position = |arm: usize| chain.iter().position(|&a| a == arm);
        let mut handoffs = transitions.handoffs;
        handoffs.sort_by_key(|h| match h.kind {
            ModeKind::Handoff { from, .. } => position(from).unwrap_or(usize::MAX),
            _ => usize::MAX,
        });
        let mut nodes = vec![init];
        nodes.extend(transitions.picks);
        nodes.extend(handoffs);
        nodes.extend(transitions.places);
        nodes.push(goal);
        let n = nodes.len();
        let goal = n - 1;
        let mut succ = vec![Vec::new(); n];
        for u in 0..n {
            for w in (u + 1)..n {
                if Self::linked(&nodes[u], &nodes[w], &position) {
                    succ[u].push(w);
                }
            }
        }
        let mut pred = vec![Vec::new(); n];
        for (u, list) in succ.iter().enumerate() {
            for &w in list {
                pred[w].push(u);
            }
        }
        let mut depth = vec![usize::MAX; n];
        let mut queue = VecDeque::from([0usize]);
        depth[0] = 0;
        while let Some(u) = queue.pop_front() {
            for &w in &succ[u] {
                if depth[w] == usize::MAX {
                    depth[w] = depth[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        let mut classes: Vec<ObjectState> = Vec::new();
        let carry_class = nodes
            .iter()
            .map(|m| match classes.iter().position(|c| *c == m.carry) {
                Some(i) => i,
                None => {
                    classes.push(m.carry);
                    classes.len() - 1
                }
            })
            .collect();
        let graph = ModeGraph {
            nodes,
            succ,
            pred,
            init: 0,
            goal,
            depth,
            carry_class,
            vertices: None,
        };
        if graph.path_count() == 0.0 {
            return Err(TaskError::InfeasibleModeGraph);
        }
        Ok(graph)
    }

    fn linked(u: &ModeNode, w: &ModeNode, position: &impl Fn(usize) -> Option<usize>) -> bool {
        let same_grasp = |arm: usize| u.grasp(arm).is_some() && u.grasp(arm) == w.grasp(arm);
        match (u.kind, w.kind) {
            (ModeKind::Init, ModeKind::Pick { .. }) => true,
            (ModeKind::Pick { arm }, ModeKind::Handoff { from, .. }) => {
                arm == from && same_grasp(arm)
            }
            (ModeKind::Handoff { to, from }, ModeKind::Handoff { from: next, .. }) => {
                to == next
                    && same_grasp(to)
                    && matches!((position(from), position(to)), (Some(a), Some(b)) if b == a + 1)
            }
            (ModeKind::Handoff { to, .. }, ModeKind::Place { arm }) => to == arm && same_grasp(arm),
            (ModeKind::Place { .. }, ModeKind::Goal) => true,
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn init(&self) -> usize {
        self.init
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn node(&self, m: usize) -> &ModeNode {
        &self.nodes[m]
    }

    pub fn nodes(&self) -> &[ModeNode] {
        &self.nodes
    }

    pub fn successors(&self, m: usize) -> &[usize] {
        &self.succ[m]
    }

    pub fn predecessors(&self, m: usize) -> &[usize] {
        &self.pred[m]
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// Breadth-first depth from init; unreachable modes report `usize::MAX`.
    pub fn depth(&self, m: usize) -> usize {
        self.depth[m]
    }

    /// Modes with equal carry states share a class, so collision results
    /// can be cached per class rather than per mode.
    pub fn carry_class(&self, m: usize) -> usize {
        self.carry_class[m]
    }

    /// Number of distinct init-to-goal paths, as a float to survive large
    /// products.
    pub fn path_count(&self) -> f64 {
        let mut count = vec![0.0f64; self.nodes.len()];
        count[self.goal] = 1.0;
        for u in (0..self.nodes.len()).rev() {
            if u != self.goal {
                count[u] = self.succ[u].iter().map(|&w| count[w]).sum();
            }
        }
        count[self.init]
    }

    /// Cost-to-go over the DAG where moving from `u` to a successor `w`
    /// costs `seg(u, w)`. Modes that cannot reach the goal get `+∞`.
    pub fn cost_to_go(&self, seg: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let mut h = vec![f64::INFINITY; self.nodes.len()];
        h[self.goal] = 0.0;
        for u in (0..self.nodes.len()).rev() {
            if u == self.goal {
                continue;
            }
            h[u] = self.succ[u]
                .iter()
                .map(|&w| seg(u, w) + h[w])
                .fold(f64::INFINITY, f64::min);
        }
        h
    }

    /// Largest synchronized move time, over the arms constrained in both
    /// modes, between their two slot configurations.
    pub fn makespan_between(&self, scene: &Scene, u: usize, w: usize) -> f64 {
        let (a, b) = (&self.nodes[u], &self.nodes[w]);
        (0..scene.num_arms())
            .filter_map(|i| Some(a.config(i)?.max_displacement(b.config(i)?) / scene.arms[i].vmax))
            .fold(0.0, f64::max)
    }

    /// Adds every slot configuration to its arm's roadmap (reusing equal
    /// vertices) and records the vertex indices.
    pub fn ground(&mut self, scene: &Scene, roadmaps: &mut [ArmRoadmap]) -> Result<(), TaskError> {
        let mut vertices = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let mut row = Vec::with_capacity(node.slots.len());
            for (arm, slot) in node.slots.iter().enumerate() {
                row.push(match slot {
                    None => None,
                    Some(s) => Some(match roadmaps[arm].find(&s.config) {
                        Some(v) => v as u32,
                        None => roadmaps[arm].inject_vertex(scene, s.config.clone())? as u32,
                    }),
                });
            }
            vertices.push(row);
        }
        self.vertices = Some(vertices);
        Ok(())
    }

    pub fn is_grounded(&self) -> bool {
        self.vertices.is_some()
    }

    /// Roadmap vertex of arm `arm` in mode `m`; requires [`ModeGraph::ground`].
    pub fn slot_vertex(&self, m: usize, arm: usize) -> Option<usize> {
        self.vertices.as_ref().expect("mode graph is grounded")[m][arm].map(|v| v as usize)
    }

    /// Vertex-identity satisfaction on a grounded graph.
    pub fn satisfied_by(&self, m: usize, v: &TensorVertex) -> bool {
        let row = &self.vertices.as_ref().expect("mode graph is grounded")[m];
        row.iter()
            .enumerate()
            .all(|(arm, slot)| slot.is_none_or(|s| v.0[arm] == s))
    }

    pub fn export(&self) -> ModeGraphExport {
        let mut edges = Vec::with_capacity(self.edge_count());
        for (u, list) in self.succ.iter().enumerate() {
            edges.extend(list.iter().map(|&w| [u, w]));
        }
        ModeGraphExport {
            init: self.init,
            goal: self.goal,
            nodes: self.nodes.clone(),
            edges,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::ArmConfig;

    fn q(x: f64) -> ArmConfig {
        ArmConfig::new(vec![x, 0.0, 0.0])
    }

    /// `s` picks, handoffs and places; the picker uses grasp 0, the placer 1.
    fn synthetic(s: usize, pick_grasp: usize) -> ModeGraph {
        let scene = fixtures::tabletop();
        let t = Transitions {
            picks: (0..s)
                .map(|i| ModeNode::pick(&scene, 0, q(i as f64 * 0.01), pick_grasp))
                .collect(),
            handoffs: (0..s)
                .map(|i| {
                    ModeNode::handoff(&scene, (0, q(0.5 + i as f64 * 0.01), 0), (1, q(0.3), 1))
                        .unwrap()
                })
                .collect(),
            places: (0..s)
                .map(|i| ModeNode::place(&scene, 1, q(-0.5 - i as f64 * 0.01), 1))
                .collect(),
        };
        ModeGraph::build(ModeNode::init(&scene), t, ModeNode::goal(&scene), &[0, 1]).unwrap()
    }

    #[test]
    fn matching_grasp_links_pick_to_handoff() {
        let g = synthetic(1, 0);
        assert_eq!(g.successors(1), &[2]);
        assert_eq!(g.path_count(), 1.0);
    }

    #[test]
    fn grasp_mismatch_leaves_no_path() {
        let scene = fixtures::tabletop();
        let t = Transitions {
            picks: vec![ModeNode::pick(&scene, 0, q(0.0), 1)],
            handoffs: vec![ModeNode::handoff(&scene, (0, q(0.5), 0), (1, q(0.3), 1)).unwrap()],
            places: vec![ModeNode::place(&scene, 1, q(-0.5), 1)],
        };
        let r = ModeGraph::build(ModeNode::init(&scene), t, ModeNode::goal(&scene), &[0, 1]);
        assert!(matches!(r, Err(TaskError::InfeasibleModeGraph)));
    }

    #[test]
    fn path_count_is_cubic_in_samples() {
        for s in 1..=6 {
            let g = synthetic(s, 0);
            assert_eq!(g.path_count(), (s * s * s) as f64);
        }
    }

    #[test]
    fn kinds_follow_the_task_order_on_every_edge() {
        let g = synthetic(3, 0);
        let rank = |k: ModeKind| match k {
            ModeKind::Init => 0,
            ModeKind::Pick { .. } => 1,
            ModeKind::Handoff { .. } => 2,
            ModeKind::Place { .. } => 3,
            ModeKind::Goal => 4,
        };
        for u in 0..g.len() {
            for &w in g.successors(u) {
                let (a, b) = (rank(g.node(u).kind), rank(g.node(w).kind));
                assert!(
                    b == a + 1 || (a == 2 && b == 2),
                    "{:?} -> {:?}",
                    g.node(u).kind,
                    g.node(w).kind
                );
                assert!(w > u);
            }
        }
    }

    #[test]
    fn shared_arms_keep_their_grasp_along_edges() {
        let g = synthetic(4, 0);
        for u in 0..g.len() {
            for &w in g.successors(u) {
                for arm in 0..2 {
                    if let (Some(a), Some(b)) = (g.node(u).grasp(arm), g.node(w).grasp(arm)) {
                        assert_eq!(a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn cost_to_go_follows_cheapest_branch() {
        let g = synthetic(2, 0);
        let h = g.cost_to_go(|u, w| (u + w) as f64);
        assert_eq!(h[g.goal()], 0.0);
        // init(0) -> pick 1 -> handoff 3 -> place 5 -> goal 7
        assert_eq!(h[g.init()], (1 + 4 + 8 + 12) as f64);
    }

    #[test]
    fn export_round_trips_through_json() {
        let g = synthetic(2, 0);
        let e = g.export();
        let back: ModeGraphExport =
            serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
        assert_eq!(e.edges.len(), g.edge_count());
    }
}
