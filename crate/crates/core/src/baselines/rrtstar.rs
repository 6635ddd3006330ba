//! RRT* in the full composite space, grown afresh for every query and
//! stopped as soon as a target is connected. Goal-biased samples are the
//! target itself or a point within one steering step of it, and a target
//! in reach is connected through the cheapest of its nearest tree nodes
//! with a free edge.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    charge_scan, config_valid, edge_valid, k_nearest, CompositeSpace, MotionPath, MotionPlanner,
};
use crate::budget::{Budget, ITERATION_UNITS};
use crate::geometry::{Scene, COLLISION_STEP};
use crate::planner::DEFAULT_GOAL_BIAS;
use crate::roadmap::prm_star_k;
use crate::taskspec::ModeGraph;

struct Node {
    q: Vec<f64>,
    parent: Option<usize>,
    cost: f64,
    children: Vec<usize>,
}

pub struct CompositeRrtStar<'a> {
    scene: &'a Scene,
    graph: &'a ModeGraph,
    space: CompositeSpace,
    rng: ChaCha8Rng,
    goal_bias: f64,
    /// Steering step in move time.
    eta: f64,
    grown: usize,
}

impl<'a> CompositeRrtStar<'a> {
    pub fn new(scene: &'a Scene, graph: &'a ModeGraph, seed: u64) -> Self {
        let space = CompositeSpace::new(scene);
        let vmin = scene
            .arms
            .iter()
            .map(|a| a.vmax)
            .fold(f64::INFINITY, f64::min);
        let eta = COLLISION_STEP * space.dim() as f64 / vmin;
        CompositeRrtStar {
            scene,
            graph,
            space,
            rng: ChaCha8Rng::seed_from_u64(seed),
            goal_bias: DEFAULT_GOAL_BIAS,
            eta,
            grown: 0,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

impl MotionPlanner for CompositeRrtStar<'_> {
    fn query(
        &mut self,
        start: &[f64],
        targets: &[Vec<f64>],
        mode: usize,
        budget: &mut Budget,
    ) -> Option<MotionPath> {
        if budget.exhausted() || targets.is_empty() {
            return None;
        }
        let carry = self.graph.node(mode).carry;
        let space = &self.space;
        let mut nodes = vec![Node {
            q: start.to_vec(),
            parent: None,
            cost: 0.0,
            children: Vec::new(),
        }];
        let mut edge_cost: Vec<f64> = vec![0.0];
        let mut tried: HashSet<(usize, usize)> = HashSet::new();
        while !budget.exhausted() {
            budget.charge(ITERATION_UNITS);
            let sample = if self.rng.gen_bool(self.goal_bias) {
                let t = &targets[self.rng.gen_range(0..targets.len())];
                if self.rng.gen_bool(0.5) {
                    t.clone()
                } else {
                    space.jitter(t, self.eta, &mut self.rng)
                }
            } else {
                space.sample(&mut self.rng)
            };
            let k = prm_star_k(nodes.len() + 1, space.dim()).max(1);
            let near = k_nearest(space, nodes.iter().map(|n| n.q.as_slice()), &sample, 1);
            charge_scan(budget, nodes.len());
            let (nearest, _) = near[0];
            let q = space.steer(&nodes[nearest].q, &sample, self.eta);
            let mut near = k_nearest(space, nodes.iter().map(|n| n.q.as_slice()), &q, k);
            charge_scan(budget, nodes.len());
            if near[0].1 == 0.0 || !config_valid(self.scene, &q, &carry, budget) {
                continue;
            }
            near.sort_by(|a, b| {
                (nodes[a.0].cost + a.1)
                    .total_cmp(&(nodes[b.0].cost + b.1))
                    .then(a.0.cmp(&b.0))
            });
            let Some(&(parent, d)) = near
                .iter()
                .find(|&&(p, _)| edge_valid(self.scene, &nodes[p].q, &q, &carry, budget))
            else {
                continue;
            };
            let id = nodes.len();
            let cost = nodes[parent].cost + d;
            nodes.push(Node {
                q,
                parent: Some(parent),
                cost,
                children: Vec::new(),
            });
            edge_cost.push(d);
            nodes[parent].children.push(id);
            self.grown += 1;

            for &(x, dx) in &near {
                if x == parent || cost + dx >= nodes[x].cost || is_ancestor(&nodes, x, id) {
                    continue;
                }
                if !edge_valid(self.scene, &nodes[id].q, &nodes[x].q, &carry, budget) {
                    continue;
                }
                let old = nodes[x]
                    .parent
                    .expect("only the root has no parent, and it has cost 0");
                nodes[old].children.retain(|&c| c != x);
                nodes[x].parent = Some(id);
                edge_cost[x] = dx;
                nodes[id].children.push(x);
                let mut stack = vec![x];
                while let Some(n) = stack.pop() {
                    let p = nodes[n].parent.expect("non-root");
                    nodes[n].cost = nodes[p].cost + edge_cost[n];
                    stack.extend(nodes[n].children.iter().copied());
                }
            }

            for (ti, t) in targets.iter().enumerate() {
                let dt = space.distance(&nodes[id].q, t);
                if dt > self.eta {
                    continue;
                }
                let end = if dt == 0.0 {
                    Some(id)
                } else {
                    let k = prm_star_k(nodes.len() + 1, space.dim()).max(1);
                    let mut cands = k_nearest(space, nodes.iter().map(|n| n.q.as_slice()), t, k);
                    charge_scan(budget, nodes.len());
                    cands.sort_by(|a, b| {
                        (nodes[a.0].cost + a.1)
                            .total_cmp(&(nodes[b.0].cost + b.1))
                            .then(a.0.cmp(&b.0))
                    });
                    cands
                        .into_iter()
                        .filter(|&(p, _)| tried.insert((p, ti)))
                        .find(|&(p, _)| edge_valid(self.scene, &nodes[p].q, t, &carry, budget))
                        .map(|(p, d)| {
                            nodes.push(Node {
                                q: t.clone(),
                                parent: Some(p),
                                cost: nodes[p].cost + d,
                                children: Vec::new(),
                            });
                            edge_cost.push(d);
                            self.grown += 1;
                            nodes.len() - 1
                        })
                };
                let Some(end) = end else { continue };
                let mut path = vec![end];
                while let Some(p) = nodes[*path.last().expect("non-empty")].parent {
                    path.push(p);
                }
                path.reverse();
                return Some(MotionPath {
                    target: ti,
                    configs: path.into_iter().map(|i| nodes[i].q.clone()).collect(),
                });
            }
        }
        None
    }

    fn randomized(&self) -> bool {
        true
    }

    fn size(&self) -> usize {
        self.grown
    }
}

fn is_ancestor(nodes: &[Node], a: usize, mut b: usize) -> bool {
    loop {
        if a == b {
            return true;
        }
        match nodes[b].parent {
            Some(p) => b = p,
            None => return false,
        }
    }
}
