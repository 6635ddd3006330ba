use std::collections::{BTreeSet, VecDeque};
use std::sync::OnceLock;

use crate::instance::Instance;
use crate::roadmap::{HeuristicTarget, TensorVertex};

/// Per-mode heuristic data, computed on first use.
pub struct ModeHeuristics<'a> {
    inst: &'a Instance,
    /// Admissible time from entering a mode to reaching the goal.
    to_go: Vec<f64>,
    targets: Vec<OnceLock<Vec<Vec<usize>>>>,
    /// Per mode and arm, heuristic time from every roadmap vertex to the
    /// nearest target; `None` leaves the arm free.
    fields: Vec<OnceLock<Vec<Option<Vec<f64>>>>>,
}

impl<'a> ModeHeuristics<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let g = &inst.graph;
        let to_go = g.cost_to_go(|u, w| Self::segment(inst, u, w));
        let n = g.len();
        ModeHeuristics {
            inst,
            to_go,
            targets: (0..n).map(|_| OnceLock::new()).collect(),
            fields: (0..n).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Lower bound on the time between two adjacent modes: every arm
    /// constrained in both must travel between its two slots on its roadmap.
    pub fn segment(inst: &Instance, u: usize, w: usize) -> f64 {
        let g = &inst.graph;
        (0..inst.num_arms())
            .filter_map(|arm| {
                Some(inst.roadmaps[arm].shortest(g.slot_vertex(u, arm)?, g.slot_vertex(w, arm)?))
            })
            .fold(0.0, f64::max)
    }

    pub fn to_go(&self, mode: usize) -> f64 {
        self.to_go[mode]
    }

    /// Per-arm target vertices for motions made in `mode`. Arms constrained
    /// by the best successor modes head for those slots; other arms look
    /// ahead breadth-first to the nearest modes that constrain them. The goal
    /// mode targets the final configurations.
    pub fn targets(&self, mode: usize) -> &[Vec<usize>] {
        self.targets[mode].get_or_init(|| self.compute_targets(mode))
    }

    fn compute_targets(&self, mode: usize) -> Vec<Vec<usize>> {
        let g = &self.inst.graph;
        let arms = self.inst.num_arms();
        let succ = g.successors(mode);
        if succ.is_empty() {
            return (0..arms)
                .map(|a| g.slot_vertex(mode, a).into_iter().collect())
                .collect();
        }
        let score = |w: usize| Self::segment(self.inst, mode, w) + self.to_go[w];
        let best_score = succ.iter().map(|&w| score(w)).fold(f64::INFINITY, f64::min);
        let best: Vec<usize> = succ
            .iter()
            .copied()
            .filter(|&w| score(w) == best_score)
            .collect();
        (0..arms)
            .map(|arm| {
                let direct: BTreeSet<usize> =
                    best.iter().filter_map(|&w| g.slot_vertex(w, arm)).collect();
                if !direct.is_empty() {
                    return direct.into_iter().collect();
                }
                self.lookahead(&best, arm)
            })
            .collect()
    }

    fn lookahead(&self, start: &[usize], arm: usize) -> Vec<usize> {
        let g = &self.inst.graph;
        let mut seen = vec![false; g.len()];
        let mut frontier: VecDeque<usize> = start.iter().copied().collect();
        for &s in start {
            seen[s] = true;
        }
        while !frontier.is_empty() {
            let mut next = VecDeque::new();
            let mut found = BTreeSet::new();
            for u in frontier {
                for &w in g.successors(u) {
                    if seen[w] {
                        continue;
                    }
                    seen[w] = true;
                    match g.slot_vertex(w, arm) {
                        Some(v) => {
                            found.insert(v);
                        }
                        None => next.push_back(w),
                    }
                }
            }
            if !found.is_empty() {
                return found.into_iter().collect();
            }
            frontier = next;
        }
        Vec::new()
    }

    #[cfg(test)]
    pub(crate) fn set_field(&mut self, mode: usize, field: Vec<Option<Vec<f64>>>) {
        self.fields[mode] = OnceLock::from(field);
    }

    pub fn field(&self, mode: usize) -> &[Option<Vec<f64>>] {
        self.fields[mode].get_or_init(|| {
            self.targets(mode)
                .iter()
                .enumerate()
                .map(|(arm, ts)| {
                    if ts.is_empty() {
                        return None;
                    }
                    let map = &self.inst.roadmaps[arm];
                    Some(
                        (0..map.len())
                            .map(|v| {
                                ts.iter()
                                    .map(|&t| map.heuristic_time(v, HeuristicTarget::Vertex(t)))
                                    .fold(f64::INFINITY, f64::min)
                            })
                            .collect(),
                    )
                })
                .collect()
        })
    }

    /// Heuristic of a composite vertex: the slowest arm's estimate to its
    /// nearest target.
    pub fn h(&self, q: &TensorVertex, mode: usize) -> f64 {
        self.field(mode)
            .iter()
            .enumerate()
            .map(|(arm, f)| f.as_ref().map_or(0.0, |f| f[q.get(arm)]))
            .fold(0.0, f64::max)
    }

    /// Admissible time still needed from `q` in `mode` to the goal.
    pub fn lower_bound(&self, q: &TensorVertex, mode: usize) -> f64 {
        let g = &self.inst.graph;
        if mode == g.goal() {
            return 0.0;
        }
        g.successors(mode)
            .iter()
            .map(|&w| {
                let reach = (0..self.inst.num_arms())
                    .filter_map(|arm| {
                        Some(self.inst.roadmaps[arm].shortest(q.get(arm), g.slot_vertex(w, arm)?))
                    })
                    .fold(0.0, f64::max);
                reach + self.to_go[w]
            })
            .fold(f64::INFINITY, f64::min)
    }
}
