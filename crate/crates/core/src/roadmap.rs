//! Per-arm PRM* roadmaps with cached shortest-path heuristics, and the
//! implicit tensor product over them.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{ArmConfig, Scene, PLANNING_STEP};

/// Tables above this size are filled one source at a time on demand.
pub const FULL_APSP_MAX_VERTICES: usize = 1000;
pub const ROADMAP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RoadmapError {
    #[error("roadmap needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("arm {arm}: only {found} valid samples after {attempts} attempts")]
    SamplingFailed {
        arm: usize,
        found: usize,
        attempts: usize,
    },
    #[error("composite space: only {found} valid samples after {attempts} attempts")]
    CompositeSamplingFailed { found: usize, attempts: usize },
    #[error("arm {arm}: configuration is in collision or outside limits")]
    InvalidVertex { arm: usize },
    #[error("roadmap file: {0}")]
    Format(String),
}

/// `⌈e (1 + 1/d) ln n⌉`, the PRM* connection count.
pub fn prm_star_k(n: usize, dim: usize) -> usize {
    if n < 2 {
        return 0;
    }
    (std::f64::consts::E * (1.0 + 1.0 / dim as f64) * (n as f64).ln()).ceil() as usize
}

/// Time for one arm to move between two configurations with all joints
/// synchronized: the largest joint displacement over the speed limit.
pub fn arm_move_time(a: &ArmConfig, b: &ArmConfig, vmax: f64) -> f64 {
    a.max_displacement(b) / vmax
}

#[derive(Debug)]
enum ShortestPaths {
    Full { n: usize, table: Vec<f64> },
    Lazy(Vec<OnceLock<Vec<f64>>>),
}

/// Something the heuristic can measure towards.
#[derive(Clone, Copy, Debug)]
pub enum HeuristicTarget<'a> {
    Vertex(usize),
    Free(&'a ArmConfig),
}

#[derive(Debug)]
pub struct ArmRoadmap {
    arm: usize,
    dof: usize,
    vmax: f64,
    seed: u64,
    vertices: Vec<ArmConfig>,
    /// Sorted by neighbor index.
    adjacency: Vec<Vec<(u32, f64)>>,
    paths: ShortestPaths,
}

impl ArmRoadmap {
    /// Samples `n_vertices` collision-free configurations uniformly within
    /// the joint limits and joins each to its PRM* nearest neighbors with
    /// collision-free edges (arm against itself and static obstacles only).
    pub fn build(
        scene: &Scene,
        arm: usize,
        n_vertices: usize,
        seed: u64,
    ) -> Result<Self, RoadmapError> {
        if n_vertices < 2 {
            return Err(RoadmapError::TooFewVertices(n_vertices));
        }
        let model = &scene.arms[arm];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let max_attempts = 100 * n_vertices;
        let mut vertices = Vec::with_capacity(n_vertices);
        let mut attempts = 0;
        while vertices.len() < n_vertices {
            if attempts == max_attempts {
                return Err(RoadmapError::SamplingFailed {
                    arm,
                    found: vertices.len(),
                    attempts,
                });
            }
            attempts += 1;
            let q = model.sample_uniform(&mut rng);
            if scene.arm_valid_alone(arm, &q.joints) {
                vertices.push(q);
            }
        }
        let mut map = ArmRoadmap {
            arm,
            dof: model.dof(),
            vmax: model.vmax,
            seed,
            adjacency: vec![Vec::new(); vertices.len()],
            vertices,
            paths: ShortestPaths::Full {
                n: 0,
                table: Vec::new(),
            },
        };
        let k = prm_star_k(n_vertices, map.dof);
        for u in 0..n_vertices {
            for v in map.nearest(&map.vertices[u].clone(), k, Some(u)) {
                if map.has_edge(u, v) {
                    continue;
                }
                if scene
                    .arm_edge_sweep(arm, &map.vertices[u], &map.vertices[v], PLANNING_STEP)
                    .valid
                {
                    map.link(u, v);
                }
            }
        }
        map.recompute_paths();
        Ok(map)
    }

    pub fn arm(&self) -> usize {
        self.arm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, v: usize) -> &ArmConfig {
        &self.vertices[v]
    }

    pub fn vertices(&self) -> &[ArmConfig] {
        &self.vertices
    }

    pub fn neighbors(&self, v: usize) -> &[(u32, f64)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u]
            .binary_search_by_key(&(v as u32), |e| e.0)
            .is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn move_time(&self, a: &ArmConfig, b: &ArmConfig) -> f64 {
        arm_move_time(a, b, self.vmax)
    }

    fn link(&mut self, u: usize, v: usize) {
        let w = arm_move_time(&self.vertices[u], &self.vertices[v], self.vmax);
        for (a, b) in [(u, v), (v, u)] {
            let list = &mut self.adjacency[a];
            if let Err(pos) = list.binary_search_by_key(&(b as u32), |e| e.0) {
                list.insert(pos, (b as u32, w));
            }
        }
    }

    /// Up to `k` nearest vertices by synchronized move time, ties by index.
    fn nearest(&self, q: &ArmConfig, k: usize, skip: Option<usize>) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .vertices
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(i, v)| (q.max_displacement(v), i))
            .collect();
        let k = k.min(d.len());
        if k == 0 {
            return Vec::new();
        }
        d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k);
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Nearest vertex that has at least one edge.
    pub fn nearest_connected(&self, q: &ArmConfig) -> Option<usize> {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.adjacency[*i].is_empty())
            .map(|(i, v)| (q.max_displacement(v), i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, i)| i)
    }

    /// Index of a vertex equal to `q`, if any.
    pub fn find(&self, q: &ArmConfig) -> Option<usize> {
        self.vertices.iter().position(|v| v == q)
    }

    fn dijkstra(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.vertices.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Reverse((OrdF64(0.0), source)));
        while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    heap.push(Reverse((OrdF64(nd), v as usize)));
                }
            }
        }
        dist
    }

    fn recompute_paths(&mut self) {
        let n = self.vertices.len();
        self.paths = if n <= FULL_APSP_MAX_VERTICES {
            let mut table = vec![f64::INFINITY; n * n];
            for s in 0..n {
                table[s * n..(s + 1) * n].copy_from_slice(&self.dijkstra(s));
            }
            // Sums along a path can differ in the last bit depending on
            // the search direction; the lower-index source is canonical.
            for u in 0..n {
                for v in (u + 1)..n {
                    table[v * n + u] = table[u * n + v];
                }
            }
            ShortestPaths::Full { n, table }
        } else {
            ShortestPaths::Lazy((0..n).map(|_| OnceLock::new()).collect())
        };
    }

    /// Adds `q` and joins it to its nearest neighbors. Shortest-path entries
    /// for the new vertex come from one single-source search; older entries
    /// only ever decrease (when the new vertex opens a shortcut).
    pub fn inject_vertex(&mut self, scene: &Scene, q: ArmConfig) -> Result<usize, RoadmapError> {
        if !scene.arm_valid_alone(self.arm, &q.joints) {
            return Err(RoadmapError::InvalidVertex { arm: self.arm });
        }
        let k = prm_star_k(self.vertices.len() + 1, self.dof);
        let near = self.nearest(&q, k, None);
        let id = self.vertices.len();
        self.vertices.push(q);
        self.adjacency.push(Vec::new());
        for v in near {
            if scene
                .arm_edge_sweep(
                    self.arm,
                    &self.vertices[id],
                    &self.vertices[v],
                    PLANNING_STEP,
                )
                .valid
            {
                self.link(id, v);
            }
        }
        let n = self.vertices.len();
        match &mut self.paths {
            ShortestPaths::Full { .. } if n > FULL_APSP_MAX_VERTICES => self.recompute_paths(),
            ShortestPaths::Full { n: old_n, table } => {
                let old_n = *old_n;
                let mut grown = vec![f64::INFINITY; n * n];
                for r in 0..old_n {
                    grown[r * n..r * n + old_n].copy_from_slice(&table[r * old_n..(r + 1) * old_n]);
                }
                let through = self.dijkstra(id);
                for u in 0..n {
                    grown[u * n + id] = through[u];
                    grown[id * n + u] = through[u];
                }
                if !self.adjacency[id].is_empty() {
                    for u in 0..old_n {
                        if !through[u].is_finite() {
                            continue;
                        }
                        for w in 0..old_n {
                            let via = through[u] + through[w];
                            if via < grown[u * n + w] {
                                grown[u * n + w] = via;
                            }
                        }
                    }
                }
                self.paths = ShortestPaths::Full { n, table: grown };
            }
            ShortestPaths::Lazy(_) => self.recompute_paths(),
        }
        Ok(id)
    }

    /// Shortest roadmap travel time between two vertices; `+∞` when they
    /// lie in different components.
    pub fn shortest(&self, u: usize, v: usize) -> f64 {
        match &self.paths {
            ShortestPaths::Full { n, table } => table[u * n + v],
            ShortestPaths::Lazy(cache) => {
                let (a, b) = if u <= v { (u, v) } else { (v, u) };
                cache[a].get_or_init(|| self.dijkstra(a))[b]
            }
        }
    }

    /// Admissible-on-roadmap time estimate from vertex `u`. For an isolated
    /// target vertex the estimate goes through its nearest connected vertex.
    pub fn heuristic_time(&self, u: usize, target: HeuristicTarget<'_>) -> f64 {
        match target {
            HeuristicTarget::Free(q) => self.move_time(&self.vertices[u], q),
            HeuristicTarget::Vertex(v) => {
                if u == v {
                    return 0.0;
                }
                let d = self.shortest(u, v);
                if d.is_finite() {
                    return d;
                }
                if self.adjacency[v].is_empty() {
                    return self.via_nearest(u, &self.vertices[v]);
                }
                if self.adjacency[u].is_empty() {
                    return self.via_nearest(v, &self.vertices[u]);
                }
                f64::INFINITY
            }
        }
    }

    /// Roadmap distance from `u` to the nearest connected vertex of `q`, plus
    /// the direct move time from there to `q`.
    pub fn via_nearest(&self, u: usize, q: &ArmConfig) -> f64 {
        match self.nearest_connected(q) {
            Some(n) if n == u => self.move_time(&self.vertices[n], q),
            Some(n) => self.shortest(u, n) + self.move_time(&self.vertices[n], q),
            None => self.move_time(&self.vertices[u], q),
        }
    }

    /// Connected component label per vertex.
    pub fn components(&self) -> Vec<usize> {
        let n = self.vertices.len();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = next;
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v as usize] == usize::MAX {
                        label[v as usize] = next;
                        stack.push(v as usize);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn to_file(&self, scene: &Scene) -> RoadmapFile {
        let mut edges = Vec::with_capacity(self.edge_count());
        for (u, list) in self.adjacency.iter().enumerate() {
            for &(v, _) in list {
                if (v as usize) > u {
                    edges.push([u, v as usize]);
                }
            }
        }
        RoadmapFile {
            version: ROADMAP_FORMAT_VERSION,
            arm: self.arm,
            seed: self.seed,
            scene_hash: scene_hash(scene),
            vmax: self.vmax,
            vertices: self.vertices.clone(),
            edges,
        }
    }

    pub fn from_file(file: RoadmapFile, scene: &Scene) -> Result<Self, RoadmapError> {
        if file.version != ROADMAP_FORMAT_VERSION {
            return Err(RoadmapError::Format(format!(
                "unsupported version {}",
                file.version
            )));
        }
        if file.scene_hash != scene_hash(scene) {
            return Err(RoadmapError::Format("scene hash does not match".into()));
        }
        let model = scene
            .arms
            .get(file.arm)
            .ok_or_else(|| RoadmapError::Format(format!("arm {} not in scene", file.arm)))?;
        let n = file.vertices.len();
        let mut map = ArmRoadmap {
            arm: file.arm,
            dof: model.dof(),
            vmax: model.vmax,
            seed: file.seed,
            adjacency: vec![Vec::new(); n],
            vertices: file.vertices,
            paths: ShortestPaths::Full {
                n: 0,
                table: Vec::new(),
            },
        };
        for [u, v] in file.edges {
            if u >= n || v >= n || u == v {
                return Err(RoadmapError::Format(format!("bad edge ({u}, {v})")));
            }
            map.link(u, v);
        }
        map.recompute_paths();
        Ok(map)
    }
}

/// Versioned on-disk roadmap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadmapFile {
    pub version: u32,
    pub arm: usize,
    pub seed: u64,
    pub scene_hash: String,
    pub vmax: f64,
    pub vertices: Vec<ArmConfig>,
    pub edges: Vec<[usize; 2]>,
}

/// SHA-256 of the scene's canonical JSON.
pub fn scene_hash(scene: &Scene) -> String {
    let bytes = serde_json::to_vec(scene).expect("scene serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// One vertex index per arm roadmap.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TensorVertex(pub Box<[u32]>);

impl TensorVertex {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        TensorVertex(indices.into_iter().map(|i| i as u32).collect())
    }

    pub fn get(&self, arm: usize) -> usize {
        self.0[arm] as usize
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&i| i as usize)
    }
}

/// Every combination in which each arm stays or moves to an adjacent vertex
/// of its own roadmap, except the one where all arms stay.
pub fn tensor_neighbors(roadmaps: &[ArmRoadmap], v: &TensorVertex) -> Vec<TensorVertex> {
    let options: Vec<Vec<u32>> = roadmaps
        .iter()
        .enumerate()
        .map(|(arm, map)| {
            let here = v.0[arm];
            std::iter::once(here)
                .chain(map.neighbors(here as usize).iter().map(|e| e.0))
                .collect()
        })
        .collect();
    let total: usize = options.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total.saturating_sub(1));
    let mut cursor = vec![0usize; options.len()];
    loop {
        if cursor.iter().any(|&c| c != 0) {
            out.push(TensorVertex(
                cursor.iter().zip(&options).map(|(&c, o)| o[c]).collect(),
            ));
        }
        let mut arm = options.len();
        loop {
            if arm == 0 {
                return out;
            }
            arm -= 1;
            cursor[arm] += 1;
            if cursor[arm] < options[arm].len() {
                break;
            }
            cursor[arm] = 0;
        }
    }
}

/// Whether `a` and `b` are distinct and adjacent in the tensor product.
pub fn tensor_adjacent(roadmaps: &[ArmRoadmap], a: &TensorVertex, b: &TensorVertex) -> bool {
    let mut moved = false;
    for (arm, map) in roadmaps.iter().enumerate() {
        let (x, y) = (a.get(arm), b.get(arm));
        if x != y {
            if !map.has_edge(x, y) {
                return false;
            }
            moved = true;
        }
    }
    moved
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::{Circle, Obstacle, Pose2, Vec2};
    use proptest::prelude::*;
    use std::collections::BTreeSet;
    use std::f64::consts::PI;

    /// A single arm with `links` at the origin and the given obstacles.
    fn one_arm(links: &[f64], obstacles: Vec<Obstacle>) -> Scene {
        let mut scene = fixtures::tabletop();
        let mut arm = fixtures::arm(Pose2::IDENTITY, vec![0.0; links.len()]);
        arm.links = links.to_vec();
        arm.limits = vec![[-PI, PI]; links.len()];
        scene.arms = vec![arm];
        scene.obstacles = obstacles;
        scene
    }

    fn circle_at_angle(angle: f64, dist: f64, r: f64) -> Obstacle {
        Obstacle::Circle(Circle {
            center: Vec2::new(dist * angle.cos(), dist * angle.sin()),
            radius: r,
        })
    }

    /// Path sums accumulate in different orders in different searches.
    fn same_time(a: f64, b: f64) -> bool {
        a == b || (a - b).abs() <= 1e-12 * a.abs().max(1.0)
    }

    fn from_parts(vertices: Vec<f64>, edges: &[(usize, usize, f64)]) -> ArmRoadmap {
        let n = vertices.len();
        let mut map = ArmRoadmap {
            arm: 0,
            dof: 1,
            vmax: 1.0,
            seed: 0,
            vertices: vertices
                .into_iter()
                .map(|x| ArmConfig::new(vec![x]))
                .collect(),
            adjacency: vec![Vec::new(); n],
            paths: ShortestPaths::Full {
                n: 0,
                table: Vec::new(),
            },
        };
        for &(u, v, w) in edges {
            map.adjacency[u].push((v as u32, w));
            map.adjacency[v].push((u as u32, w));
        }
        for list in &mut map.adjacency {
            list.sort_by_key(|e| e.0);
        }
        map.recompute_paths();
        map
    }

    fn random_graph(n: usize, p: f64, seed: u64) -> ArmRoadmap {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen_bool(p) {
                    edges.push((u, v, rng.gen_range(0.1..2.0)));
                }
            }
        }
        from_parts((0..n).map(|i| i as f64).collect(), &edges)
    }

    #[test]
    fn prm_star_constant() {
        assert_eq!(prm_star_k(200, 3), 20);
        assert_eq!(prm_star_k(10, 3), 9);
        assert_eq!(prm_star_k(1, 3), 0);
    }

    #[test]
    fn two_vertices_share_one_edge() {
        let scene = one_arm(&[1.0, 1.0, 0.5], Vec::new());
        let map = ArmRoadmap::build(&scene, 0, 2, 7).unwrap();
        assert_eq!(map.edge_count(), 1);
        assert!(map.shortest(0, 1).is_finite());
        assert_eq!(map.shortest(0, 1), map.shortest(1, 0));
        assert_eq!(
            map.shortest(0, 1),
            map.move_time(map.vertex(0), map.vertex(1))
        );
    }

    #[test]
    fn too_few_vertices_rejected() {
        let scene = one_arm(&[1.0], Vec::new());
        assert_eq!(
            ArmRoadmap::build(&scene, 0, 1, 0).unwrap_err(),
            RoadmapError::TooFewVertices(1)
        );
    }

    #[test]
    fn blocked_joint_space_splits_components() {
        // A one-link arm with obstacles straight up and straight down: the
        // joint interval [-pi, pi] falls apart into three pieces.
        let scene = one_arm(
            &[1.0],
            vec![
                circle_at_angle(PI / 2.0, 0.8, 0.1),
                circle_at_angle(-PI / 2.0, 0.8, 0.1),
            ],
        );
        let map = ArmRoadmap::build(&scene, 0, 60, 3).unwrap();
        let label = map.components();
        let region = |v: usize| {
            let a = map.vertex(v).joints[0];
            if a > PI / 2.0 {
                2
            } else if a < -PI / 2.0 {
                0
            } else {
                1
            }
        };
        for u in 0..map.len() {
            for v in 0..map.len() {
                if region(u) != region(v) {
                    assert_ne!(label[u], label[v]);
                    assert_eq!(map.shortest(u, v), f64::INFINITY);
                    assert_eq!(
                        map.heuristic_time(u, HeuristicTarget::Vertex(v)),
                        f64::INFINITY
                    );
                } else if label[u] == label[v] {
                    assert!(map.shortest(u, v).is_finite());
                }
            }
        }
        assert!(label.iter().collect::<BTreeSet<_>>().len() >= 3);
    }

    #[test]
    fn triangle_takes_the_two_hop_path() {
        let map = from_parts(
            vec![0.0, 1.0, 2.0],
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)],
        );
        assert_eq!(map.heuristic_time(0, HeuristicTarget::Vertex(2)), 2.0);
        assert_eq!(map.heuristic_time(1, HeuristicTarget::Vertex(1)), 0.0);
    }

    #[test]
    fn off_roadmap_target_uses_scaled_displacement() {
        let scene = one_arm(&[1.0, 1.0, 0.5], Vec::new());
        let map = ArmRoadmap::build(&scene, 0, 10, 1).unwrap();
        let mut q = map.vertex(4).clone();
        q.joints[0] += 0.5;
        assert!((map.heuristic_time(4, HeuristicTarget::Free(&q)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tensor_neighbor_count_is_product_minus_one() {
        let a = from_parts(
            vec![0.0, 1.0, 2.0, 3.0],
            &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)],
        );
        let b = from_parts(
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0)],
        );
        let maps = [a, b];
        let nbrs = tensor_neighbors(&maps, &TensorVertex::new([0, 0]));
        assert_eq!(nbrs.len(), 19);
        assert!(!nbrs.contains(&TensorVertex::new([0, 0])));
        let single = tensor_neighbors(&maps[..1], &TensorVertex::new([0]));
        assert_eq!(single.len(), 3);
    }

    fn explicit_product(maps: &[ArmRoadmap]) -> Vec<(TensorVertex, BTreeSet<TensorVertex>)> {
        let mut all = vec![Vec::<usize>::new()];
        for m in maps {
            all = all
                .into_iter()
                .flat_map(|p| (0..m.len()).map(move |v| [p.clone(), vec![v]].concat()))
                .collect();
        }
        let all: Vec<TensorVertex> = all.into_iter().map(TensorVertex::new).collect();
        all.iter()
            .map(|a| {
                let adj = all
                    .iter()
                    .filter(|b| {
                        *b != a
                            && maps.iter().enumerate().all(|(i, m)| {
                                a.get(i) == b.get(i) || m.has_edge(a.get(i), b.get(i))
                            })
                    })
                    .cloned()
                    .collect();
                (a.clone(), adj)
            })
            .collect()
    }

    #[test]
    fn implicit_adjacency_matches_materialized_product() {
        for arms in [2, 3] {
            for seed in 0..5 {
                let maps: Vec<ArmRoadmap> = (0..arms)
                    .map(|i| random_graph(5, 0.5, seed * 10 + i as u64))
                    .collect();
                for (v, expected) in explicit_product(&maps) {
                    let got: BTreeSet<TensorVertex> =
                        tensor_neighbors(&maps, &v).into_iter().collect();
                    assert_eq!(got, expected);
                    for w in &expected {
                        assert!(tensor_adjacent(&maps, &v, w));
                    }
                }
            }
        }
    }

    #[test]
    fn injecting_a_copy_adds_a_zero_weight_edge() {
        let scene = one_arm(&[1.0, 1.0, 0.5], Vec::new());
        let mut map = ArmRoadmap::build(&scene, 0, 30, 2).unwrap();
        let q = map.vertex(5).clone();
        let id = map.inject_vertex(&scene, q).unwrap();
        assert!(map.neighbors(id).iter().any(|&(v, w)| v == 5 && w == 0.0));
        assert_eq!(map.shortest(id, 5), 0.0);
    }

    #[test]
    fn injected_heuristic_matches_fresh_search() {
        let scene = one_arm(
            &[1.0],
            vec![
                circle_at_angle(PI / 2.0, 0.8, 0.1),
                circle_at_angle(-PI / 2.0, 0.8, 0.1),
            ],
        );
        let mut map = ArmRoadmap::build(&scene, 0, 40, 9).unwrap();
        let id = map
            .inject_vertex(&scene, ArmConfig::new(vec![0.3]))
            .unwrap();
        let fresh = map.dijkstra(id);
        for (u, &f) in fresh.iter().enumerate() {
            assert!(same_time(map.shortest(u, id), f));
            let connected = map.components()[u] == map.components()[id];
            assert_eq!(
                map.heuristic_time(u, HeuristicTarget::Vertex(id))
                    .is_finite(),
                connected
            );
        }
    }

    #[test]
    fn injection_in_collision_is_rejected() {
        let scene = one_arm(&[1.0], vec![circle_at_angle(0.0, 0.8, 0.1)]);
        let mut map = ArmRoadmap::build(&scene, 0, 20, 1).unwrap();
        assert_eq!(
            map.inject_vertex(&scene, ArmConfig::new(vec![0.0]))
                .unwrap_err(),
            RoadmapError::InvalidVertex { arm: 0 }
        );
    }

    #[test]
    fn isolated_injection_falls_back_to_nearest_neighbor() {
        // Free pocket of joint angles between two obstacles, with every
        // roadmap vertex outside it.
        let scene = one_arm(
            &[1.0],
            vec![
                circle_at_angle(0.2, 0.8, 0.02),
                circle_at_angle(0.6, 0.8, 0.02),
            ],
        );
        let outside: Vec<f64> = vec![-2.0, -1.0, -0.5, 0.0, 1.0, 2.0];
        let edges: Vec<(usize, usize, f64)> = (0..outside.len() - 1)
            .filter(|&i| !(outside[i] < 0.4 && outside[i + 1] > 0.4))
            .map(|i| (i, i + 1, outside[i + 1] - outside[i]))
            .collect();
        let mut map = from_parts(outside, &edges);
        let id = map
            .inject_vertex(&scene, ArmConfig::new(vec![0.4]))
            .unwrap();
        assert_eq!(map.degree(id), 0);
        let q = map.vertex(id).clone();
        let nearest = map.nearest_connected(&q).unwrap();
        assert_eq!(nearest, 3);
        let h = map.heuristic_time(0, HeuristicTarget::Vertex(id));
        assert!((h - (map.shortest(0, 3) + 0.4)).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_bytes() {
        let scene = one_arm(&[0.6, 0.5, 0.3], vec![circle_at_angle(0.5, 0.9, 0.2)]);
        let a = ArmRoadmap::build(&scene, 0, 50, 11).unwrap();
        let b = ArmRoadmap::build(&scene, 0, 50, 11).unwrap();
        let ja = serde_json::to_string(&a.to_file(&scene)).unwrap();
        assert_eq!(ja, serde_json::to_string(&b.to_file(&scene)).unwrap());
        let c = ArmRoadmap::build(&scene, 0, 50, 12).unwrap();
        assert_ne!(ja, serde_json::to_string(&c.to_file(&scene)).unwrap());
    }

    #[test]
    fn file_round_trip_and_scene_check() {
        let scene = one_arm(&[0.6, 0.5, 0.3], Vec::new());
        let a = ArmRoadmap::build(&scene, 0, 40, 5).unwrap();
        let file: RoadmapFile =
            serde_json::from_str(&serde_json::to_string(&a.to_file(&scene)).unwrap()).unwrap();
        let b = ArmRoadmap::from_file(file.clone(), &scene).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        for u in 0..a.len() {
            assert_eq!(a.neighbors(u), b.neighbors(u));
            for v in 0..a.len() {
                assert_eq!(a.shortest(u, v), b.shortest(u, v));
            }
        }
        let other = one_arm(&[0.6, 0.5, 0.31], Vec::new());
        assert!(matches!(
            ArmRoadmap::from_file(file, &other),
            Err(RoadmapError::Format(_))
        ));
    }

    #[test]
    fn lazy_table_agrees_with_full_table() {
        let full = random_graph(30, 0.15, 4);
        let mut lazy = random_graph(30, 0.15, 4);
        lazy.paths = ShortestPaths::Lazy((0..30).map(|_| OnceLock::new()).collect());
        for u in 0..30 {
            for v in 0..30 {
                assert_eq!(full.shortest(u, v), lazy.shortest(u, v));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn shortest_paths_are_symmetric_and_edge_admissible(seed in 0u64..1000, p in 0.05f64..0.6) {
            let map = random_graph(12, p, seed);
            for u in 0..map.len() {
                prop_assert_eq!(map.shortest(u, u), 0.0);
                for v in 0..map.len() {
                    prop_assert_eq!(map.shortest(u, v), map.shortest(v, u));
                    for &(w, weight) in map.neighbors(v) {
                        prop_assert!(map.shortest(u, w as usize) <= map.shortest(u, v) + weight + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn injection_never_increases_and_stays_exact(seed in 0u64..1000, angles in prop::collection::vec(-3.0f64..3.0, 1..5)) {
            let scene = one_arm(&[1.0, 0.5], vec![circle_at_angle(1.0, 0.7, 0.15)]);
            let mut map = ArmRoadmap::build(&scene, 0, 25, seed).unwrap();
            for a in angles {
                let before: Vec<f64> = (0..map.len()).flat_map(|u| (0..map.len()).map(move |v| (u, v))).map(|(u, v)| map.shortest(u, v)).collect();
                let n = map.len();
                if map.inject_vertex(&scene, ArmConfig::new(vec![a, 0.0])).is_err() {
                    continue;
                }
                for u in 0..n {
                    let fresh = map.dijkstra(u);
                    for v in 0..n {
                        prop_assert!(map.shortest(u, v) <= before[u * n + v]);
                        prop_assert!(same_time(map.shortest(u, v), fresh[v]));
                    }
                }
            }
        }
    }
}
