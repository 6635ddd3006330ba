//! The anytime tree search over (composite vertex, mode) pairs.
//!
//! Each iteration either follows the informed oracle from the node added in
//! the previous iteration, or, when that greedy chain has stalled, picks a
//! tree node and steps to a random tensor neighbor. New nodes choose the
//! cheapest valid same-mode parent among their tensor neighbors and rewire
//! those neighbors through themselves. A node that satisfies an adjacent
//! mode spawns a zero-duration copy in that mode.

mod heuristic;
mod tree;

pub use heuristic::ModeHeuristics;
pub use tree::{NodeId, SearchTree, TreeNode};

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::budget::{Budget, Observer, Progress, Reporter, ITERATION_UNITS};
use crate::geometry::PLANNING_STEP;
use crate::instance::Instance;
use crate::plan::Plan;
use crate::roadmap::TensorVertex;

pub const DEFAULT_GOAL_BIAS: f64 = 0.1;
/// Longest greedy walk tried when connecting a place-mode node straight to
/// the goal.
pub const DIRECT_CONNECT_STEPS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerOptions {
    pub goal_bias: f64,
    pub branch_and_bound: bool,
    pub direct_connect: bool,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions {
            goal_bias: DEFAULT_GOAL_BIAS,
            branch_and_bound: true,
            direct_connect: true,
        }
    }
}

/// Result of one planning run.
#[derive(Clone, Debug, Default)]
pub struct PlanOutcome {
    pub best: Option<Plan>,
    /// `(time, cost)` at every improvement.
    pub cost_over_time: Vec<(f64, f64)>,
    pub initial_solution_time: Option<f64>,
    pub tree_size: usize,
    pub modes_expanded: usize,
    pub iterations: u64,
}

type EdgeKey = (TensorVertex, TensorVertex, usize);

/// Composite edge checks, memoized per carry class.
#[derive(Default)]
pub(crate) struct EdgeChecker {
    cache: HashMap<EdgeKey, bool>,
}

impl EdgeChecker {
    pub(crate) fn valid(
        &mut self,
        inst: &Instance,
        a: &TensorVertex,
        b: &TensorVertex,
        mode: usize,
        budget: &mut Budget,
    ) -> bool {
        let class = inst.graph.carry_class(mode);
        let key = if a <= b {
            (a.clone(), b.clone(), class)
        } else {
            (b.clone(), a.clone(), class)
        };
        if let Some(&v) = self.cache.get(&key) {
            return v;
        }
        let carry = inst.graph.node(mode).carry;
        let (fa, fb) = (inst.flatten(a), inst.flatten(b));
        let sweep = crate::geometry::dyadic_sweep(&fa, &fb, PLANNING_STEP, |f| {
            inst.scene.flat_config_valid(f, &carry)
        });
        budget.charge(sweep.checks as u64);
        self.cache.insert(key, sweep.valid);
        sweep.valid
    }
}

pub struct MmdRrt<'a> {
    inst: &'a Instance,
    opts: PlannerOptions,
    pub(crate) tree: SearchTree,
    heur: ModeHeuristics<'a>,
    rng: ChaCha8Rng,
    last: Option<NodeId>,
    edges: EdgeChecker,
    goal_q: TensorVertex,
    best_cost: f64,
    best: Option<Plan>,
    best_place_bound: f64,
    pending_direct: Option<NodeId>,
}

impl<'a> MmdRrt<'a> {
    pub fn new(inst: &'a Instance, opts: PlannerOptions, seed: u64) -> Self {
        let g = &inst.graph;
        let root = inst
            .mode_vertex(g.init())
            .expect("init constrains every arm");
        let goal_q = inst
            .mode_vertex(g.goal())
            .expect("goal constrains every arm");
        MmdRrt {
            inst,
            opts,
            tree: SearchTree::new(root, g.init(), g.depth(g.init())),
            heur: ModeHeuristics::new(inst),
            rng: ChaCha8Rng::seed_from_u64(seed),
            last: None,
            edges: EdgeChecker::default(),
            goal_q,
            best_cost: f64::INFINITY,
            best: None,
            best_place_bound: f64::INFINITY,
            pending_direct: None,
        }
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn heuristics(&self) -> &ModeHeuristics<'a> {
        &self.heur
    }

    pub fn best(&self) -> Option<&Plan> {
        self.best.as_ref()
    }

    pub fn best_cost(&self) -> f64 {
        self.best_cost
    }

    /// Runs until the budget is spent or the observer stops it. A solution
    /// found by the iteration that overruns the budget is not reported.
    pub fn run(&mut self, budget: &mut Budget, observer: Option<&mut Observer<'_>>) -> PlanOutcome {
        let mut out = PlanOutcome::default();
        let mut reporter = Reporter::new(observer);
        let mut stop = reporter.report(self.progress(budget.elapsed()));
        while !stop && !budget.exhausted() {
            out.iterations += 1;
            let before = self.best_cost;
            self.iterate(budget);
            let now = budget.elapsed();
            if self.best_cost < before {
                if budget.exhausted() {
                    break;
                }
                out.initial_solution_time.get_or_insert(now);
                out.cost_over_time.push((now, self.best_cost));
                out.best = self.best.clone();
            }
            stop = reporter.report(self.progress(now));
        }
        out.tree_size = self.tree.len();
        out.modes_expanded = self.tree.modes_present();
        out
    }

    fn progress(&self, t: f64) -> Progress {
        Progress {
            time_s: t,
            best_cost: self.best.as_ref().map(|_| self.best_cost),
            tree_size: self.tree.len(),
            modes_expanded: self.tree.modes_present(),
        }
    }

    /// One expansion followed by the connection attempt.
    pub fn iterate(&mut self, budget: &mut Budget) {
        budget.charge(ITERATION_UNITS);
        self.last = self.expand(budget);
        self.connect_to_target(budget);
    }

    /// Returns the node to continue greedily from, if any.
    pub fn expand(&mut self, budget: &mut Budget) -> Option<NodeId> {
        let (near, proposal) = match self.last.take() {
            Some(n) => (n, self.oracle(n)),
            None => {
                let n = self.tree.select(&mut self.rng, self.opts.goal_bias);
                (n, Some(self.random_neighbor(n)))
            }
        };
        let q = proposal?;
        let mode = self.tree.node(near).mode;
        let node = match self.tree.get(&q, mode) {
            Some(existing) => {
                self.improve_existing(existing, budget);
                existing
            }
            None => self.add_and_rewire(q.clone(), mode, budget)?,
        };
        let mut advanced: Option<(f64, NodeId)> = None;
        for &w in self.inst.graph.successors(mode) {
            if self.inst.graph.satisfied_by(w, &q) {
                if let Some(id) = self.add_transition(node, w) {
                    let key = self.heur.to_go(w);
                    if advanced.is_none_or(|(k, _)| key < k) {
                        advanced = Some((key, id));
                    }
                }
            }
        }
        if let Some((_, id)) = advanced {
            return Some(id);
        }
        (self.heur.h(&q, mode) < self.heur.h(&self.tree.node(near).q, mode)).then_some(node)
    }

    /// Each arm independently stays or moves to a uniformly chosen roadmap
    /// neighbor; the all-stay outcome is redrawn.
    pub fn random_neighbor(&mut self, id: NodeId) -> TensorVertex {
        let q = &self.tree.node(id).q;
        let maps = &self.inst.roadmaps;
        if maps
            .iter()
            .enumerate()
            .all(|(i, m)| m.degree(q.get(i)) == 0)
        {
            return q.clone();
        }
        loop {
            let mut moved = false;
            let next = TensorVertex::new(maps.iter().enumerate().map(|(i, m)| {
                let nbrs = m.neighbors(q.get(i));
                let k = self.rng.gen_range(0..=nbrs.len());
                if k == 0 {
                    q.get(i)
                } else {
                    moved = true;
                    nbrs[k - 1].0 as usize
                }
            }));
            if moved {
                return next;
            }
        }
    }

    /// Per arm, the adjacent vertex (or staying put) with the smallest
    /// heuristic to the arm's targets. Ties prefer staying, then the lowest
    /// vertex index. `None` when every arm stays.
    pub fn oracle(&self, id: NodeId) -> Option<TensorVertex> {
        let node = self.tree.node(id);
        let field = self.heur.field(node.mode);
        let mut moved = false;
        let next = TensorVertex::new((0..self.inst.num_arms()).map(|arm| {
            let here = node.q.get(arm);
            let Some(f) = &field[arm] else { return here };
            let mut best = (f[here], here);
            for &(v, _) in self.inst.roadmaps[arm].neighbors(here) {
                let v = v as usize;
                if f[v] < best.0 || (f[v] == best.0 && best.1 != here && v < best.1) {
                    best = (f[v], v);
                }
            }
            moved |= best.1 != here;
            best.1
        }));
        moved.then_some(next)
    }

    fn bounded(&self, q: &TensorVertex, mode: usize, cost: f64) -> bool {
        self.opts.branch_and_bound
            && self.best_cost.is_finite()
            && cost + self.heur.lower_bound(q, mode) >= self.best_cost
    }

    /// Candidate parents sorted by the cost they would give `q`. The scan
    /// is charged to the budget.
    fn ranked_neighbors(
        &self,
        q: &TensorVertex,
        mode: usize,
        budget: &mut Budget,
    ) -> Vec<(f64, f64, NodeId)> {
        let (near, scanned) = self.tree.same_mode_neighbors(q, mode, &self.inst.roadmaps);
        budget.charge(scanned as u64);
        let mut c: Vec<(f64, f64, NodeId)> = near
            .into_iter()
            .map(|id| {
                let d = self.inst.duration(&self.tree.node(id).q, q);
                (self.tree.node(id).cost + d, d, id)
            })
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        c
    }

    /// Adds `(q, mode)` under its cheapest valid same-mode neighbor and
    /// rewires the remaining neighbors through it. Rejected when no parent
    /// edge is valid or the bound says it cannot beat the best solution.
    pub fn add_and_rewire(
        &mut self,
        q: TensorVertex,
        mode: usize,
        budget: &mut Budget,
    ) -> Option<NodeId> {
        let ranked = self.ranked_neighbors(&q, mode, budget);
        let &(optimistic, _, _) = ranked.first()?;
        if self.bounded(&q, mode, optimistic) {
            return None;
        }
        let mut chosen = None;
        for &(cost, d, id) in &ranked {
            if self.bounded(&q, mode, cost) {
                return None;
            }
            let pq = self.tree.node(id).q.clone();
            if self.edges.valid(self.inst, &pq, &q, mode, budget) {
                chosen = Some((d, id));
                break;
            }
        }
        let (d, parent) = chosen?;
        let depth = self.inst.graph.depth(mode);
        let new = self.tree.insert(q, mode, depth, parent, d);
        self.rewire(new, &ranked, budget);
        Some(new)
    }

    fn rewire(&mut self, hub: NodeId, neighbors: &[(f64, f64, NodeId)], budget: &mut Budget) {
        let hq = self.tree.node(hub).q.clone();
        for &(_, d, id) in neighbors {
            if id == hub || self.tree.node(hub).parent == Some(id) {
                continue;
            }
            if self.tree.node(hub).cost + d < self.tree.node(id).cost
                && !self.tree.is_ancestor(id, hub)
            {
                let nq = self.tree.node(id).q.clone();
                let mode = self.tree.node(id).mode;
                if self.edges.valid(self.inst, &hq, &nq, mode, budget) {
                    self.tree.reparent(id, hub, d);
                }
            }
        }
    }

    /// A re-proposed node gets the same parent search and rewiring a new
    /// one would, so repeated proposals keep tightening costs.
    fn improve_existing(&mut self, id: NodeId, budget: &mut Budget) {
        if self.tree.node(id).parent.is_none() {
            return;
        }
        let q = self.tree.node(id).q.clone();
        let mode = self.tree.node(id).mode;
        let ranked = self.ranked_neighbors(&q, mode, budget);
        for &(cost, d, p) in &ranked {
            if cost >= self.tree.node(id).cost {
                break;
            }
            if self.tree.is_ancestor(id, p) {
                continue;
            }
            let pq = self.tree.node(p).q.clone();
            if self.edges.valid(self.inst, &pq, &q, mode, budget) {
                self.tree.reparent(id, p, d);
                break;
            }
        }
        self.rewire(id, &ranked, budget);
    }

    /// Zero-duration copy of `from` in the adjacent mode `mode`, or a
    /// cheaper parent for an existing copy.
    fn add_transition(&mut self, from: NodeId, mode: usize) -> Option<NodeId> {
        let q = self.tree.node(from).q.clone();
        let cost = self.tree.node(from).cost;
        if let Some(existing) = self.tree.get(&q, mode) {
            if cost < self.tree.node(existing).cost {
                self.tree.reparent(existing, from, 0.0);
            }
            return Some(existing);
        }
        if self.bounded(&q, mode, cost) {
            return None;
        }
        let id = self
            .tree
            .insert(q, mode, self.inst.graph.depth(mode), from, 0.0);
        if self.opts.direct_connect
            && self
                .inst
                .graph
                .successors(mode)
                .contains(&self.inst.graph.goal())
        {
            let bound = cost + self.heur.lower_bound(&self.tree.node(id).q, mode);
            if bound < self.best_place_bound {
                self.best_place_bound = bound;
                self.pending_direct = Some(id);
            }
        }
        Some(id)
    }

    /// Extracts a better solution if the goal node got cheaper; otherwise
    /// tries walking greedily from the most promising place-mode node to
    /// the goal without growing the tree.
    pub fn connect_to_target(&mut self, budget: &mut Budget) {
        let goal = self.inst.graph.goal();
        if let Some(id) = self.tree.get(&self.goal_q, goal) {
            let cost = self.tree.node(id).cost;
            if cost < self.best_cost {
                if let Ok(plan) = self.trace_path(id, &[]) {
                    self.best_cost = cost;
                    self.best = Some(plan);
                }
            }
        }
        if let Some(start) = self.pending_direct.take() {
            self.direct_connect(start, budget);
        }
    }

    fn direct_connect(&mut self, start: NodeId, budget: &mut Budget) {
        let mode = self.tree.node(start).mode;
        let goal = self.inst.graph.goal();
        let field = self.heur.field(mode);
        let mut q = self.tree.node(start).q.clone();
        let mut cost = self.tree.node(start).cost;
        let mut walk = Vec::new();
        for _ in 0..DIRECT_CONNECT_STEPS {
            if q == self.goal_q {
                break;
            }
            let next = TensorVertex::new((0..self.inst.num_arms()).map(|arm| {
                let here = q.get(arm);
                let Some(f) = &field[arm] else { return here };
                let mut best = (f[here], here);
                for &(v, _) in self.inst.roadmaps[arm].neighbors(here) {
                    if f[v as usize] < best.0 {
                        best = (f[v as usize], v as usize);
                    }
                }
                best.1
            }));
            if next == q {
                return;
            }
            cost += self.inst.duration(&q, &next);
            if cost >= self.best_cost || !self.edges.valid(self.inst, &q, &next, mode, budget) {
                return;
            }
            walk.push(next.clone());
            q = next;
        }
        if q != self.goal_q || cost >= self.best_cost {
            return;
        }
        let mut tail: Vec<(TensorVertex, usize)> = walk.into_iter().map(|v| (v, mode)).collect();
        tail.push((q, goal));
        if let Ok(plan) = self.trace_path(start, &tail) {
            self.best_cost = plan.cost;
            self.best = Some(plan);
        }
    }

    /// Plan along the parent chain of `id`, followed by `tail`.
    pub fn trace_path(
        &self,
        id: NodeId,
        tail: &[(TensorVertex, usize)],
    ) -> Result<Plan, crate::plan::PlanError> {
        let states: Vec<_> = self
            .tree
            .path_to(id)
            .into_iter()
            .map(|n| {
                (
                    self.inst.compose(&self.tree.node(n).q),
                    self.tree.node(n).mode,
                )
            })
            .chain(tail.iter().map(|(q, m)| (self.inst.compose(q), *m)))
            .collect();
        Plan::from_states(&self.inst.scene, &self.inst.graph, &states)
    }
}

/// Plans with a fresh tree; deterministic for a given seed on the work clock.
pub fn plan(
    inst: &Instance,
    opts: PlannerOptions,
    budget: &mut Budget,
    seed: u64,
    observer: Option<&mut Observer<'_>>,
) -> PlanOutcome {
    MmdRrt::new(inst, opts, seed).run(budget, observer)
}
