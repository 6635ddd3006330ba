use std::collections::HashMap;

use rand::Rng;

use crate::roadmap::{tensor_adjacent, ArmRoadmap, TensorVertex};

pub type NodeId = usize;

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub q: TensorVertex,
    pub mode: usize,
    pub parent: Option<NodeId>,
    /// Duration of the edge from the parent; zero across a mode change.
    pub edge: f64,
    pub cost: f64,
    pub children: Vec<NodeId>,
}

/// Tree over (composite vertex, mode) pairs with at most one node per pair.
#[derive(Clone, Debug, Default)]
pub struct SearchTree {
    nodes: Vec<TreeNode>,
    index: HashMap<(TensorVertex, usize), NodeId>,
    /// Same-mode nodes keyed by their first arm's vertex, for neighbor
    /// lookups without enumerating the tensor neighborhood.
    buckets: HashMap<(usize, u32), Vec<NodeId>>,
    by_depth: Vec<Vec<NodeId>>,
    modes: HashMap<usize, usize>,
}

impl SearchTree {
    pub fn new(root: TensorVertex, mode: usize, depth: usize) -> Self {
        let mut t = SearchTree::default();
        t.push(
            TreeNode {
                q: root,
                mode,
                parent: None,
                edge: 0.0,
                cost: 0.0,
                children: Vec::new(),
            },
            depth,
        );
        t
    }

    fn push(&mut self, node: TreeNode, depth: usize) -> NodeId {
        let id = self.nodes.len();
        self.index.insert((node.q.clone(), node.mode), id);
        self.buckets
            .entry((node.mode, node.q.0[0]))
            .or_default()
            .push(id);
        if self.by_depth.len() <= depth {
            self.by_depth.resize(depth + 1, Vec::new());
        }
        self.by_depth[depth].push(id);
        *self.modes.entry(node.mode).or_default() += 1;
        if let Some(p) = node.parent {
            self.nodes[p].children.push(id);
        }
        self.nodes.push(node);
        id
    }

    pub fn insert(
        &mut self,
        q: TensorVertex,
        mode: usize,
        depth: usize,
        parent: NodeId,
        edge: f64,
    ) -> NodeId {
        debug_assert!(!self.index.contains_key(&(q.clone(), mode)));
        let cost = self.nodes[parent].cost + edge;
        self.push(
            TreeNode {
                q,
                mode,
                parent: Some(parent),
                edge,
                cost,
                children: Vec::new(),
            },
            depth,
        )
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn get(&self, q: &TensorVertex, mode: usize) -> Option<NodeId> {
        self.index.get(&(q.clone(), mode)).copied()
    }

    /// Number of distinct modes with at least one node.
    pub fn modes_present(&self) -> usize {
        self.modes.len()
    }

    pub fn max_depth(&self) -> usize {
        self.by_depth.len().saturating_sub(1)
    }

    /// Tree nodes in `mode` whose vertex is tensor-adjacent to `q`.
    /// Also returns how many tree nodes were scanned.
    pub fn same_mode_neighbors(
        &self,
        q: &TensorVertex,
        mode: usize,
        roadmaps: &[ArmRoadmap],
    ) -> (Vec<NodeId>, usize) {
        let first = q.get(0);
        let keys =
            std::iter::once(first as u32).chain(roadmaps[0].neighbors(first).iter().map(|e| e.0));
        let mut out = Vec::new();
        let mut scanned = 0;
        for key in keys {
            if let Some(ids) = self.buckets.get(&(mode, key)) {
                scanned += ids.len();
                out.extend(
                    ids.iter()
                        .copied()
                        .filter(|&id| tensor_adjacent(roadmaps, &self.nodes[id].q, q)),
                );
            }
        }
        out.sort_unstable();
        (out, scanned)
    }

    /// Moves `id` under `parent` and refreshes the costs of its subtree.
    pub fn reparent(&mut self, id: NodeId, parent: NodeId, edge: f64) {
        debug_assert!(!self.is_ancestor(id, parent));
        if let Some(old) = self.nodes[id].parent {
            self.nodes[old].children.retain(|&c| c != id);
        }
        self.nodes[parent].children.push(id);
        self.nodes[id].parent = Some(parent);
        self.nodes[id].edge = edge;
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            let p = self.nodes[n].parent.expect("non-root");
            self.nodes[n].cost = self.nodes[p].cost + self.nodes[n].edge;
            stack.extend(self.nodes[n].children.iter().copied());
        }
    }

    pub fn is_ancestor(&self, a: NodeId, mut b: NodeId) -> bool {
        loop {
            if a == b {
                return true;
            }
            match self.nodes[b].parent {
                Some(p) => b = p,
                None => return false,
            }
        }
    }

    /// With probability `1 - goal_bias` a uniform node, otherwise a uniform
    /// node among those at the deepest mode level reached so far.
    pub fn select<R: Rng>(&self, rng: &mut R, goal_bias: f64) -> NodeId {
        if goal_bias > 0.0 && rng.gen_bool(goal_bias.min(1.0)) {
            let deepest = &self.by_depth[self.max_depth()];
            deepest[rng.gen_range(0..deepest.len())]
        } else {
            rng.gen_range(0..self.nodes.len())
        }
    }

    /// Root-to-`id` chain of nodes.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut n = id;
        while let Some(p) = self.nodes[n].parent {
            path.push(p);
            n = p;
        }
        path.reverse();
        path
    }

    /// Cost recomputed by summing edges along the parent chain.
    pub fn chain_cost(&self, id: NodeId) -> f64 {
        self.path_to(id).iter().map(|&n| self.nodes[n].edge).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tv(i: usize) -> TensorVertex {
        TensorVertex::new([i])
    }

    #[test]
    fn single_node_selects_root() {
        let t = SearchTree::new(tv(0), 0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for bias in [0.0, 0.5, 1.0] {
            assert_eq!(t.select(&mut rng, bias), 0);
        }
    }

    #[test]
    fn full_bias_picks_deepest_level() {
        let mut t = SearchTree::new(tv(0), 0, 0);
        t.insert(tv(1), 0, 0, 0, 1.0);
        let deep = t.insert(tv(1), 1, 1, 1, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(t.select(&mut rng, 1.0), deep);
        }
    }

    #[test]
    fn unbiased_selection_is_uniform() {
        let mut t = SearchTree::new(tv(0), 0, 0);
        for i in 1..10 {
            t.insert(tv(i), 0, i % 3, i - 1, 1.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 10_000;
        let mut counts = [0usize; 10];
        for _ in 0..draws {
            counts[t.select(&mut rng, 0.0)] += 1;
        }
        let expected = draws as f64 / 10.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 9 degrees of freedom, 0.999 quantile
        assert!(chi2 < 27.88, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn reparent_updates_the_subtree() {
        let mut t = SearchTree::new(tv(0), 0, 0);
        let a = t.insert(tv(1), 0, 0, 0, 5.0);
        let b = t.insert(tv(2), 0, 0, a, 1.0);
        let c = t.insert(tv(3), 0, 0, b, 2.0);
        let d = t.insert(tv(4), 0, 0, 0, 1.0);
        t.reparent(a, d, 1.0);
        assert_eq!(t.node(a).cost, 2.0);
        assert_eq!(t.node(c).cost, 5.0);
        for id in 0..t.len() {
            assert_eq!(t.node(id).cost, t.chain_cost(id));
        }
        assert!(t.node(0).children.contains(&d) && !t.node(0).children.contains(&a));
    }
}
