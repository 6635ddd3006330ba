//! Mode-by-mode strategies on top of a composite motion planner.

use std::collections::BTreeSet;

use super::{MotionPath, MotionPlanner};
use crate::budget::{Budget, Observer, Progress, Reporter};
use crate::geometry::{CompositeConfig, Scene};
use crate::plan::Plan;
use crate::planner::PlanOutcome;
use crate::taskspec::ModeGraph;

/// Time cap on each motion query of [`hord_dfs`] (s).
pub const DEFAULT_QUERY_BUDGET: f64 = 10.0;

/// Composite configuration a stage aims for: the mode's slots, with every
/// arm the mode leaves free sent to its home configuration.
pub fn mode_target(scene: &Scene, graph: &ModeGraph, mode: usize) -> Vec<f64> {
    let node = graph.node(mode);
    let arms = (0..scene.num_arms())
        .map(|i| node.config(i).unwrap_or(&scene.arms[i].home).clone())
        .collect();
    CompositeConfig::new(arms).flatten()
}

/// Bookkeeping shared by both strategies.
struct Run<'s, 'o, 'a> {
    scene: &'s Scene,
    graph: &'s ModeGraph,
    out: PlanOutcome,
    best_cost: f64,
    reached: BTreeSet<usize>,
    reporter: Reporter<'o, 'a>,
    stopped: bool,
}

impl<'s, 'o, 'a> Run<'s, 'o, 'a> {
    fn new(scene: &'s Scene, graph: &'s ModeGraph, observer: Option<&'o mut Observer<'a>>) -> Self {
        let mut reached = BTreeSet::new();
        reached.insert(graph.init());
        Run {
            scene,
            graph,
            out: PlanOutcome::default(),
            best_cost: f64::INFINITY,
            reached,
            reporter: Reporter::new(observer),
            stopped: false,
        }
    }

    fn report(&mut self, budget: &Budget, size: usize) {
        let p = Progress {
            time_s: budget.elapsed(),
            best_cost: self.out.best.as_ref().map(|_| self.best_cost),
            tree_size: size,
            modes_expanded: self.reached.len(),
        };
        self.stopped |= self.reporter.report(p);
    }

    fn done(&self, budget: &Budget) -> bool {
        self.stopped || budget.exhausted()
    }

    /// Keeps the plan if it is cheaper and found within the budget.
    fn offer(&mut self, states: &[(Vec<f64>, usize)], budget: &Budget) {
        let space = super::CompositeSpace::new(self.scene);
        let states: Vec<(CompositeConfig, usize)> =
            states.iter().map(|(q, m)| (space.split(q), *m)).collect();
        let Ok(plan) = Plan::from_states(self.scene, self.graph, &states) else {
            return;
        };
        if plan.cost < self.best_cost && !budget.exhausted() {
            let t = budget.elapsed();
            self.best_cost = plan.cost;
            self.out.initial_solution_time.get_or_insert(t);
            self.out.cost_over_time.push((t, plan.cost));
            self.out.best = Some(plan);
        }
    }

    fn finish(mut self, size: usize) -> PlanOutcome {
        self.out.tree_size = size;
        self.out.modes_expanded = self.reached.len();
        self.out
    }
}

/// Appends a stage's path in `mode` and the zero-time switch into `next`.
fn extend(states: &mut Vec<(Vec<f64>, usize)>, path: &MotionPath, mode: usize, next: usize) {
    states.extend(path.configs[1..].iter().map(|q| (q.clone(), mode)));
    let end = path
        .configs
        .last()
        .expect("path ends at the target")
        .clone();
    states.push((end, next));
}

/// Plans to whichever adjacent mode is reached first, commits to it and
/// repeats until the goal. A randomized motion planner reruns the whole
/// sequence while time remains and the best plan is kept.
pub fn tamp_sequential(
    scene: &Scene,
    graph: &ModeGraph,
    motion: &mut dyn MotionPlanner,
    budget: &mut Budget,
    observer: Option<&mut Observer<'_>>,
) -> PlanOutcome {
    let mut run = Run::new(scene, graph, observer);
    run.report(budget, motion.size());
    while !run.done(budget) {
        let mut mode = graph.init();
        let mut q = mode_target(scene, graph, mode);
        let mut states = vec![(q.clone(), mode)];
        while mode != graph.goal() && !run.done(budget) {
            let succ = graph.successors(mode);
            let targets: Vec<Vec<f64>> =
                succ.iter().map(|&w| mode_target(scene, graph, w)).collect();
            run.out.iterations += 1;
            let Some(path) = motion.query(&q, &targets, mode, budget) else {
                break;
            };
            let next = succ[path.target];
            extend(&mut states, &path, mode, next);
            run.reached.insert(next);
            mode = next;
            q = targets[path.target].clone();
            run.report(budget, motion.size());
        }
        if mode == graph.goal() {
            run.offer(&states, budget);
            run.report(budget, motion.size());
        }
        if !motion.randomized() {
            break;
        }
    }
    let size = motion.size();
    run.finish(size)
}

/// Depth-first search over the mode graph. Successors are tried in order
/// of the synchronized move time to their target plus the makespan
/// cost-to-go from there; each motion query gets at most `query_budget`
/// seconds; a failed query backtracks. The search keeps going after a
/// solution and keeps the best.
pub fn hord_dfs(
    scene: &Scene,
    graph: &ModeGraph,
    motion: &mut dyn MotionPlanner,
    query_budget: f64,
    budget: &mut Budget,
    observer: Option<&mut Observer<'_>>,
) -> PlanOutcome {
    let targets: Vec<Vec<f64>> = (0..graph.len())
        .map(|m| mode_target(scene, graph, m))
        .collect();
    let space = super::CompositeSpace::new(scene);
    let to_go = graph.cost_to_go(|u, w| space.distance(&targets[u], &targets[w]));
    let mut run = Run::new(scene, graph, observer);
    run.report(budget, motion.size());
    let init = graph.init();
    let mut states = vec![(targets[init].clone(), init)];
    let mut ctx = Dfs {
        graph,
        targets: &targets,
        to_go: &to_go,
        space: &space,
        query_budget,
    };
    ctx.visit(&mut run, motion, budget, &mut states);
    let size = motion.size();
    run.finish(size)
}

struct Dfs<'c> {
    graph: &'c ModeGraph,
    targets: &'c [Vec<f64>],
    to_go: &'c [f64],
    space: &'c super::CompositeSpace,
    query_budget: f64,
}

impl Dfs<'_> {
    fn visit(
        &mut self,
        run: &mut Run<'_, '_, '_>,
        motion: &mut dyn MotionPlanner,
        budget: &mut Budget,
        states: &mut Vec<(Vec<f64>, usize)>,
    ) {
        let (q, mode) = states.last().expect("non-empty").clone();
        if mode == self.graph.goal() {
            run.offer(states, budget);
            run.report(budget, motion.size());
            return;
        }
        let mut order: Vec<(f64, usize)> = self
            .graph
            .successors(mode)
            .iter()
            .map(|&w| (self.space.distance(&q, &self.targets[w]) + self.to_go[w], w))
            .filter(|e| e.0.is_finite())
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, w) in order {
            if run.done(budget) {
                return;
            }
            let mut sub = budget.child(self.query_budget);
            run.out.iterations += 1;
            let path = motion.query(&q, std::slice::from_ref(&self.targets[w]), mode, &mut sub);
            budget.absorb(sub);
            run.report(budget, motion.size());
            let Some(path) = path else { continue };
            run.reached.insert(w);
            let mark = states.len();
            extend(states, &path, mode, w);
            self.visit(run, motion, budget, states);
            states.truncate(mark);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{CompositeRoadmap, CompositeRrtStar, LazyPrm};
    use crate::fixtures;
    use crate::instance::{Instance, InstanceConfig};
    use crate::taskspec::ModeKind;
    use crate::validate::validate_plan;

    fn instance(s: usize, seed: u64) -> Instance {
        Instance::build(
            fixtures::tabletop(),
            InstanceConfig {
                roadmap_vertices: 30,
                s,
                seed,
            },
        )
        .unwrap()
    }

    #[test]
    fn targets_send_free_arms_home() {
        let inst = instance(2, 1);
        let space = super::super::CompositeSpace::new(&inst.scene);
        for m in 0..inst.graph.len() {
            let t = space.split(&mode_target(&inst.scene, &inst.graph, m));
            for arm in 0..2 {
                let want = inst
                    .graph
                    .node(m)
                    .config(arm)
                    .unwrap_or(&inst.scene.arms[arm].home);
                assert_eq!(&t.per_arm[arm], want);
            }
        }
    }

    #[test]
    fn sequential_prm_plan_is_valid() {
        let inst = instance(1, 3);
        let map = CompositeRoadmap::build(&inst.scene, 1500, 3).unwrap();
        let mut prm = LazyPrm::new(&inst.scene, &inst.graph, &map);
        let out = tamp_sequential(
            &inst.scene,
            &inst.graph,
            &mut prm,
            &mut Budget::work(60.0),
            None,
        );
        let plan = out.best.expect("solution");
        validate_plan(&inst.scene, &plan).unwrap();
        assert_eq!(out.cost_over_time.len(), 1);
        assert_eq!(out.modes_expanded, inst.graph.len());
    }

    #[test]
    fn sequential_rrt_reruns_and_improves() {
        let inst = instance(1, 3);
        let mut rrt = CompositeRrtStar::new(&inst.scene, &inst.graph, 5);
        let out = tamp_sequential(
            &inst.scene,
            &inst.graph,
            &mut rrt,
            &mut Budget::work(20.0),
            None,
        );
        let plan = out.best.expect("solution");
        validate_plan(&inst.scene, &plan).unwrap();
        assert!(out.cost_over_time.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn hord_prm_plan_is_valid() {
        let inst = instance(2, 3);
        let map = CompositeRoadmap::build(&inst.scene, 1500, 3).unwrap();
        let mut prm = LazyPrm::new(&inst.scene, &inst.graph, &map);
        let out = hord_dfs(
            &inst.scene,
            &inst.graph,
            &mut prm,
            DEFAULT_QUERY_BUDGET,
            &mut Budget::work(60.0),
            None,
        );
        validate_plan(&inst.scene, &out.best.expect("solution")).unwrap();
        assert!(out.cost_over_time.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn zero_query_budget_fails_at_once() {
        let inst = instance(1, 3);
        let mut rrt = CompositeRrtStar::new(&inst.scene, &inst.graph, 5);
        let mut b = Budget::work(10.0);
        let out = hord_dfs(&inst.scene, &inst.graph, &mut rrt, 0.0, &mut b, None);
        assert!(out.best.is_none());
        assert_eq!(b.units(), 0);
        assert_eq!(out.modes_expanded, 1);
    }

    /// Jumps straight to the first target it is not told to fail on, and
    /// logs the mode it lands in. Modes sharing a target configuration are
    /// logged as the first of them.
    struct Teleport<'g> {
        scene: &'g Scene,
        graph: &'g ModeGraph,
        blocked: Option<usize>,
        landed: Vec<usize>,
    }

    impl MotionPlanner for Teleport<'_> {
        fn query(
            &mut self,
            start: &[f64],
            targets: &[Vec<f64>],
            mode: usize,
            budget: &mut Budget,
        ) -> Option<MotionPath> {
            budget.charge(1);
            for (i, t) in targets.iter().enumerate() {
                let w = self
                    .graph
                    .successors(mode)
                    .iter()
                    .copied()
                    .find(|&w| &mode_target(self.scene, self.graph, w) == t)
                    .expect("targets belong to successors");
                if Some(w) != self.blocked {
                    self.landed.push(w);
                    return Some(MotionPath {
                        target: i,
                        configs: vec![start.to_vec(), t.clone()],
                    });
                }
            }
            None
        }

        fn randomized(&self) -> bool {
            false
        }

        fn size(&self) -> usize {
            0
        }
    }

    #[test]
    fn hord_backtracks_past_a_failed_query() {
        let inst = instance(2, 1);
        let g = &inst.graph;
        let mut tele = Teleport {
            scene: &inst.scene,
            graph: g,
            blocked: None,
            landed: Vec::new(),
        };
        let free = hord_dfs(&inst.scene, g, &mut tele, 1.0, &mut Budget::work(1.0), None);
        assert!(free.best.is_some());
        let handoff = tele.landed[1];
        assert!(matches!(g.node(handoff).kind, ModeKind::Handoff { .. }));
        let pick = tele.landed[0];
        assert!(g.successors(pick).len() >= 2, "seed gives a second handoff");

        tele.blocked = Some(handoff);
        tele.landed.clear();
        let out = hord_dfs(&inst.scene, g, &mut tele, 1.0, &mut Budget::work(1.0), None);
        assert!(out.best.is_some());
        assert!(!tele.landed.contains(&handoff));
        assert_eq!(tele.landed[0], pick);
    }

    #[test]
    fn sequential_commits_to_a_dead_end_and_search_avoids_it() {
        let inst = fixtures::dead_end(InstanceConfig {
            roadmap_vertices: 30,
            s: 2,
            seed: 1,
        })
        .unwrap();
        let g = &inst.graph;
        let trap = g.successors(g.init())[0];
        let mut tele = Teleport {
            scene: &inst.scene,
            graph: g,
            blocked: None,
            landed: Vec::new(),
        };
        let out = tamp_sequential(&inst.scene, g, &mut tele, &mut Budget::work(1.0), None);
        assert!(out.best.is_none());
        assert_eq!(tele.landed, vec![trap]);

        tele.landed.clear();
        let out = hord_dfs(&inst.scene, g, &mut tele, 1.0, &mut Budget::work(1.0), None);
        assert!(out.best.is_some());
    }
}
