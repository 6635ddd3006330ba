//! PRM* over the full composite space, searched lazily: edges and vertices
//! are only collision-checked once a shortest path uses them, and the
//! results are kept per carry class.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    charge_scan, config_valid, edge_valid, k_nearest, CompositeSpace, MotionPath, MotionPlanner,
};
use crate::budget::Budget;
use crate::geometry::{ObjectState, Scene};
use crate::roadmap::{prm_star_k, OrdF64, RoadmapError};
use crate::taskspec::ModeGraph;

pub const DEFAULT_COMPOSITE_VERTICES: usize = 5000;

/// k-nearest roadmap over composite configurations that are collision-free
/// with the object ignored. Edges are not collision-checked at build time.
#[derive(Clone, Debug)]
pub struct CompositeRoadmap {
    space: CompositeSpace,
    k: usize,
    vertices: Vec<Vec<f64>>,
    adjacency: Vec<Vec<(u32, f64)>>,
}

impl CompositeRoadmap {
    pub fn build(scene: &Scene, n: usize, seed: u64) -> Result<Self, RoadmapError> {
        if n < 2 {
            return Err(RoadmapError::TooFewVertices(n));
        }
        let space = CompositeSpace::new(scene);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let attempts = 100 * n;
        let mut vertices = Vec::with_capacity(n);
        for _ in 0..attempts {
            if vertices.len() == n {
                break;
            }
            let q = space.sample(&mut rng);
            if scene.flat_config_valid(&q, &ObjectState::Absent) {
                vertices.push(q);
            }
        }
        if vertices.len() < n {
            return Err(RoadmapError::CompositeSamplingFailed {
                found: vertices.len(),
                attempts,
            });
        }
        let k = prm_star_k(n, space.dim());
        let mut adjacency: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (i, q) in vertices.iter().enumerate() {
            let others = vertices.iter().enumerate().filter(|&(j, _)| j != i);
            let mut near = k_nearest(&space, others.clone().map(|(_, p)| p.as_slice()), q, k);
            let index: Vec<usize> = others.map(|(j, _)| j).collect();
            for (pos, d) in near.drain(..) {
                let j = index[pos];
                adjacency[i].push((j as u32, d));
                adjacency[j].push((i as u32, d));
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|e| e.0);
            list.dedup_by_key(|e| e.0);
        }
        Ok(CompositeRoadmap {
            space,
            k,
            vertices,
            adjacency,
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.vertices[v]
    }

    pub fn neighbors(&self, v: usize) -> &[(u32, f64)] {
        &self.adjacency[v]
    }
}

/// Lazy shortest-path queries on a shared [`CompositeRoadmap`]. Start and
/// targets are attached per query to their `k` nearest vertices and to
/// each other.
pub struct LazyPrm<'a> {
    scene: &'a Scene,
    graph: &'a ModeGraph,
    map: &'a CompositeRoadmap,
    vertex_ok: HashMap<(u32, usize), bool>,
    edge_ok: HashMap<(u32, u32, usize), bool>,
    memo: HashMap<(Vec<u64>, usize), Option<MotionPath>>,
}

impl<'a> LazyPrm<'a> {
    pub fn new(scene: &'a Scene, graph: &'a ModeGraph, map: &'a CompositeRoadmap) -> Self {
        LazyPrm {
            scene,
            graph,
            map,
            vertex_ok: HashMap::new(),
            edge_ok: HashMap::new(),
            memo: HashMap::new(),
        }
    }

    fn search(
        &mut self,
        start: &[f64],
        targets: &[Vec<f64>],
        mode: usize,
        budget: &mut Budget,
    ) -> Result<Option<MotionPath>, ()> {
        let map = self.map;
        let space = &map.space;
        let n = map.len();
        let class = self.graph.carry_class(mode);
        let carry = self.graph.node(mode).carry;
        let locals: Vec<&[f64]> = std::iter::once(start)
            .chain(targets.iter().map(|t| t.as_slice()))
            .collect();
        let config = |v: usize| if v < n { map.vertex(v) } else { locals[v - n] };

        let mut extra: HashMap<usize, Vec<(u32, f64)>> = HashMap::new();
        for (j, q) in locals.iter().enumerate() {
            let id = (n + j) as u32;
            for (v, d) in k_nearest(space, map.vertices.iter().map(|p| p.as_slice()), q, map.k) {
                extra.entry(n + j).or_default().push((v as u32, d));
                extra.entry(v).or_default().push((id, d));
            }
        }
        charge_scan(budget, n * locals.len());
        for (j, &q) in locals.iter().enumerate().skip(1) {
            let d = space.distance(start, q);
            extra.entry(n).or_default().push(((n + j) as u32, d));
            extra.entry(n + j).or_default().push((n as u32, d));
        }
        let mut local_edge_ok: HashMap<(u32, u32), bool> = HashMap::new();
        let h = |v: usize| {
            targets
                .iter()
                .map(|t| space.distance(config(v), t))
                .fold(f64::INFINITY, f64::min)
        };

        loop {
            if budget.exhausted() {
                return Err(());
            }
            let total = n + locals.len();
            let mut g = vec![f64::INFINITY; total];
            let mut parent = vec![u32::MAX; total];
            let mut heap = BinaryHeap::new();
            g[n] = 0.0;
            heap.push(Reverse((OrdF64(h(n)), n as u32)));
            let mut reached = None;
            while let Some(Reverse((OrdF64(f), u))) = heap.pop() {
                let u = u as usize;
                budget.charge(1);
                if f > g[u] + h(u) {
                    continue;
                }
                if u > n {
                    reached = Some(u);
                    break;
                }
                let base: &[(u32, f64)] = if u < n { map.neighbors(u) } else { &[] };
                let more = extra.get(&u).map(Vec::as_slice).unwrap_or(&[]);
                for &(w, d) in base.iter().chain(more) {
                    let wi = w as usize;
                    if wi < n && self.vertex_ok.get(&(w, class)) == Some(&false) {
                        continue;
                    }
                    let (a, b) = (u.min(wi) as u32, u.max(wi) as u32);
                    let known = if (b as usize) < n {
                        self.edge_ok.get(&(a, b, class))
                    } else {
                        local_edge_ok.get(&(a, b))
                    };
                    if known == Some(&false) {
                        continue;
                    }
                    let cand = g[u] + d;
                    if cand < g[wi] {
                        g[wi] = cand;
                        parent[wi] = u as u32;
                        heap.push(Reverse((OrdF64(cand + h(wi)), w)));
                    }
                }
            }
            let Some(goal) = reached else { return Ok(None) };
            let mut path = vec![goal];
            while *path.last().expect("non-empty") != n {
                path.push(parent[*path.last().expect("non-empty")] as usize);
            }
            path.reverse();

            let mut broken = false;
            for &v in &path[1..path.len() - 1] {
                let ok = *self
                    .vertex_ok
                    .entry((v as u32, class))
                    .or_insert_with(|| config_valid(self.scene, map.vertex(v), &carry, budget));
                if !ok {
                    broken = true;
                    break;
                }
            }
            if broken {
                continue;
            }
            for w in path.windows(2) {
                let (a, b) = (w[0].min(w[1]) as u32, w[0].max(w[1]) as u32);
                let scene = self.scene;
                let mut check = || edge_valid(scene, config(w[0]), config(w[1]), &carry, budget);
                let ok = if (b as usize) < n {
                    *self.edge_ok.entry((a, b, class)).or_insert_with(&mut check)
                } else {
                    *local_edge_ok.entry((a, b)).or_insert_with(&mut check)
                };
                if !ok {
                    broken = true;
                    break;
                }
            }
            if !broken {
                return Ok(Some(MotionPath {
                    target: goal - n - 1,
                    configs: path.iter().map(|&v| config(v).to_vec()).collect(),
                }));
            }
        }
    }
}

impl MotionPlanner for LazyPrm<'_> {
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
        let key: Vec<u64> = start
            .iter()
            .chain(targets.iter().flatten())
            .map(|x| x.to_bits())
            .collect();
        let key = (key, self.graph.carry_class(mode));
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        // a search cut short by the budget is not remembered
        let out = self.search(start, targets, mode, budget).ok()?;
        self.memo.insert(key, out.clone());
        out
    }

    fn randomized(&self) -> bool {
        false
    }

    fn size(&self) -> usize {
        self.map.len()
    }
}
