//! Comparison planners that search the full composite space: sequential
//! task planning that commits to the first reachable mode, and a
//! depth-first search over the mode graph that backtracks on failure. Both
//! run over either a lazy composite PRM* or a composite RRT*.

mod composite;
mod rrtstar;
mod sequential;

pub use composite::{CompositeRoadmap, LazyPrm, DEFAULT_COMPOSITE_VERTICES};
pub use rrtstar::CompositeRrtStar;
pub use sequential::{hord_dfs, mode_target, tamp_sequential, DEFAULT_QUERY_BUDGET};

use rand::Rng;

use crate::budget::Budget;
use crate::geometry::{
    dyadic_sweep, ArmConfig, CompositeConfig, ObjectState, Scene, PLANNING_STEP,
};

/// A collision-free straight-line path in composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionPath {
    /// Index into the query's target list.
    pub target: usize,
    /// From the start to the reached target, both included.
    pub configs: Vec<Vec<f64>>,
}

/// Single-mode motion queries in the full composite space.
pub trait MotionPlanner {
    /// Plans from `start` to whichever of `targets` it reaches first while
    /// the object is carried as in `mode`. `None` on failure or when the
    /// budget runs out.
    fn query(
        &mut self,
        start: &[f64],
        targets: &[Vec<f64>],
        mode: usize,
        budget: &mut Budget,
    ) -> Option<MotionPath>;

    /// Whether repeating a failed query can succeed.
    fn randomized(&self) -> bool;

    /// Roadmap size, or total tree nodes grown so far.
    fn size(&self) -> usize;
}

/// Layout of flattened composite configurations.
#[derive(Clone, Debug)]
pub struct CompositeSpace {
    /// Owning arm of each coordinate.
    owner: Vec<usize>,
    inv_vmax: Vec<f64>,
    limits: Vec<[f64; 2]>,
    dofs: Vec<usize>,
}

impl CompositeSpace {
    pub fn new(scene: &Scene) -> Self {
        let mut owner = Vec::new();
        let mut limits = Vec::new();
        for (i, arm) in scene.arms.iter().enumerate() {
            owner.extend(std::iter::repeat_n(i, arm.dof()));
            limits.extend(arm.limits.iter().copied());
        }
        CompositeSpace {
            owner,
            inv_vmax: scene.arms.iter().map(|a| 1.0 / a.vmax).collect(),
            limits,
            dofs: scene.arm_dofs(),
        }
    }

    pub fn dim(&self) -> usize {
        self.owner.len()
    }

    /// Synchronized move time: the largest joint displacement over its
    /// arm's speed limit.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut d = 0.0f64;
        for (k, (x, y)) in a.iter().zip(b).enumerate() {
            d = d.max((x - y).abs() * self.inv_vmax[self.owner[k]]);
        }
        d
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.limits
            .iter()
            .map(|[lo, hi]| rng.gen_range(*lo..=*hi))
            .collect()
    }

    /// Uniform point within `radius` of move time around `q`, clamped to
    /// the joint limits.
    pub fn jitter<R: Rng + ?Sized>(&self, q: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
        q.iter()
            .enumerate()
            .map(|(k, x)| {
                let r = radius / self.inv_vmax[self.owner[k]];
                let [lo, hi] = self.limits[k];
                (x + rng.gen_range(-r..=r)).clamp(lo, hi)
            })
            .collect()
    }

    /// Moves from `from` towards `to` by at most `eta` of move time.
    pub fn steer(&self, from: &[f64], to: &[f64], eta: f64) -> Vec<f64> {
        let d = self.distance(from, to);
        if d <= eta {
            return to.to_vec();
        }
        let t = eta / d;
        from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
    }

    pub fn split(&self, flat: &[f64]) -> CompositeConfig {
        let mut offset = 0;
        let mut arms = Vec::with_capacity(self.dofs.len());
        for &d in &self.dofs {
            arms.push(ArmConfig::new(flat[offset..offset + d].to_vec()));
            offset += d;
        }
        CompositeConfig::new(arms)
    }
}

/// Sweeps a composite edge under `carry` and charges the checks.
pub(crate) fn edge_valid(
    scene: &Scene,
    a: &[f64],
    b: &[f64],
    carry: &ObjectState,
    budget: &mut Budget,
) -> bool {
    let sweep = dyadic_sweep(a, b, PLANNING_STEP, |f| scene.flat_config_valid(f, carry));
    budget.charge(sweep.checks as u64);
    sweep.valid
}

pub(crate) fn config_valid(
    scene: &Scene,
    q: &[f64],
    carry: &ObjectState,
    budget: &mut Budget,
) -> bool {
    budget.charge(1);
    scene.flat_config_valid(q, carry)
}

/// Work units charged per this many distance evaluations in nearest
/// neighbor scans.
pub(crate) const SCAN_PER_UNIT: usize = 16;

pub(crate) fn charge_scan(budget: &mut Budget, scanned: usize) {
    budget.charge(scanned.div_ceil(SCAN_PER_UNIT) as u64);
}

/// Indices of the `k` entries of `points` closest to `q`, ties broken by
/// index, with their distances, closest first.
pub(crate) fn k_nearest<'p>(
    space: &CompositeSpace,
    points: impl Iterator<Item = &'p [f64]>,
    q: &[f64],
    k: usize,
) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points
        .enumerate()
        .map(|(i, p)| (i, space.distance(p, q)))
        .collect();
    let by = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < all.len() {
        all.select_nth_unstable_by(k, by);
        all.truncate(k);
    }
    all.sort_unstable_by(by);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn distance_is_scaled_by_speed() {
        let mut scene = fixtures::tabletop();
        scene.arms[1].vmax = 2.0;
        let s = CompositeSpace::new(&scene);
        assert_eq!(s.dim(), 6);
        let a = vec![0.0; 6];
        let b = vec![0.0, 0.5, 0.0, 0.0, 0.0, 1.6];
        assert_eq!(s.distance(&a, &b), 0.8);
    }

    #[test]
    fn steer_stops_at_eta_or_target() {
        let s = CompositeSpace::new(&fixtures::tabletop());
        let a = vec![0.0; 6];
        let b = vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.0];
        let c = s.steer(&a, &b, 0.25);
        assert_eq!(c, vec![0.25, 0.125, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.steer(&a, &b, 2.0), b);
    }

    #[test]
    fn split_inverts_flatten() {
        let scene = fixtures::chain(3);
        let s = CompositeSpace::new(&scene);
        let q = scene.init_config();
        assert_eq!(s.split(&q.flatten()), q);
    }

    #[test]
    fn k_nearest_breaks_ties_by_index() {
        let s = CompositeSpace::new(&fixtures::tabletop());
        let pts: Vec<Vec<f64>> = [3.0, 1.0, 2.0, 1.0, 0.5]
            .iter()
            .map(|&x| vec![x, 0.0, 0.0, 0.0, 0.0, 0.0])
            .collect();
        let near = k_nearest(&s, pts.iter().map(|p| p.as_slice()), &[0.0; 6], 3);
        assert_eq!(near.iter().map(|e| e.0).collect::<Vec<_>>(), vec![4, 1, 3]);
    }
}
