use rand::seq::SliceRandom;
use rand::Rng;

use super::{ModeKind, ModeNode, TaskError};
use crate::geometry::{ArmConfig, ObjectState, Pose2, Scene};

/// Handoff sampling gives up after this many holder samples per requested
/// handoff.
pub const HANDOFF_ATTEMPTS_PER_SAMPLE: usize = 500;

/// Which arm picks, which places, and the order the object travels in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskDomain {
    pub picker: usize,
    pub placer: usize,
    pub chain: Vec<usize>,
}

/// Two arms hand over directly. Longer chains must run along the arm
/// indices from one end to the other.
pub fn task_domain(scene: &Scene) -> Result<TaskDomain, TaskError> {
    let n = scene.num_arms();
    if n < 2 {
        return Err(TaskError::NotEnoughArms);
    }
    let (picker, placer) = scene.problem_domain()?;
    let chain = if n == 2 {
        vec![picker, placer]
    } else if picker == 0 && placer == n - 1 {
        (0..n).collect()
    } else if picker == n - 1 && placer == 0 {
        (0..n).rev().collect()
    } else {
        return Err(TaskError::UnsupportedLayout(format!(
            "picker {picker} and placer {placer} are not the two ends of arms 0..{n}"
        )));
    };
    Ok(TaskDomain {
        picker,
        placer,
        chain,
    })
}

#[derive(Clone, Debug, Default)]
pub struct Transitions {
    pub picks: Vec<ModeNode>,
    pub handoffs: Vec<ModeNode>,
    pub places: Vec<ModeNode>,
}

impl Transitions {
    pub fn handoffs_between(&self, from: usize, to: usize) -> usize {
        self.handoffs
            .iter()
            .filter(|h| h.kind == ModeKind::Handoff { from, to })
            .count()
    }
}

/// Every collision-free IK solution holding the object at `pose`, over all
/// grasps, at most `s` of them chosen at random.
fn grasp_configs<R: Rng>(
    scene: &Scene,
    arm: usize,
    pose: &Pose2,
    s: usize,
    rng: &mut R,
) -> Vec<(ArmConfig, usize)> {
    let mut found = Vec::new();
    for g in 0..scene.object.grasps.len() {
        let target = scene.grasp_ee_target(pose, g);
        for q in scene.arms[arm].inverse_kinematics(&target, rng) {
            if scene.arm_holding_valid(arm, &q.joints, g) {
                found.push((q, g));
            }
        }
    }
    if found.len() > s {
        let mut idx: Vec<usize> = (0..found.len()).collect();
        idx.shuffle(rng);
        idx.truncate(s);
        idx.sort_unstable();
        found = idx.into_iter().map(|i| found[i].clone()).collect();
    }
    found
}

/// One handoff from `from` to `to`: a random holding configuration for
/// `from`, then IK for `to` on the opposite face.
fn grasp_set(grasps: impl Iterator<Item = Option<usize>>) -> Vec<usize> {
    let mut v: Vec<usize> = grasps.flatten().collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn sample_handoff<R: Rng>(
    scene: &Scene,
    (from, held): (usize, &[usize]),
    (to, wanted): (usize, Option<&[usize]>),
    rng: &mut R,
) -> Option<ModeNode> {
    let grasps = &scene.object.grasps;
    let gf = held[rng.gen_range(0..held.len())];
    let qf = scene.arms[from].sample_uniform(rng);
    if !scene.arm_holding_valid(from, &qf.joints, gf) {
        return None;
    }
    let pose = scene.held_object_pose(from, &qf.joints, gf);
    let face = grasps[gf].face.opposite();
    for gt in (0..grasps.len())
        .filter(|&g| grasps[g].face == face && wanted.is_none_or(|w| w.contains(&g)))
    {
        let target = scene.grasp_ee_target(&pose, gt);
        for qt in scene.arms[to].inverse_kinematics(&target, rng) {
            let pair = [(from, qf.joints.as_slice()), (to, qt.joints.as_slice())];
            if scene.arm_valid_alone(to, &qt.joints)
                && scene.partial_config_valid(
                    &pair,
                    &ObjectState::Held {
                        arm: from,
                        grasp: gf,
                    },
                )
                && scene.partial_config_valid(&pair, &ObjectState::Held { arm: to, grasp: gt })
            {
                return ModeNode::handoff(scene, (from, qf, gf), (to, qt, gt)).ok();
            }
        }
    }
    None
}

/// Samples up to `s` picks at the initial pose, `s` handoffs per
/// consecutive pair of the chain and `s` places at the goal pose. Every
/// configuration is collision-checked on its own and, for handoffs, as a
/// pair. Handoffs are drawn in chain order so that the giver holds the
/// object with a grasp it can actually have, and the last receiver ends
/// with a grasp some place uses.
pub fn sample_transitions<R: Rng>(
    scene: &Scene,
    domain: &TaskDomain,
    s: usize,
    rng: &mut R,
) -> Result<Transitions, TaskError> {
    let s = s.max(1);
    let picks: Vec<ModeNode> = grasp_configs(scene, domain.picker, &scene.object.init, s, rng)
        .into_iter()
        .map(|(q, g)| ModeNode::pick(scene, domain.picker, q, g))
        .collect();
    if picks.is_empty() {
        return Err(TaskError::NoPicks);
    }
    let places: Vec<ModeNode> = grasp_configs(scene, domain.placer, &scene.object.goal, s, rng)
        .into_iter()
        .map(|(q, g)| ModeNode::place(scene, domain.placer, q, g))
        .collect();
    if places.is_empty() {
        return Err(TaskError::NoPlaces);
    }
    let place_grasps = grasp_set(places.iter().map(|m| m.grasp(domain.placer)));
    let mut held = grasp_set(picks.iter().map(|m| m.grasp(domain.picker)));
    let mut handoffs = Vec::new();
    let last = domain.chain.len().saturating_sub(2);
    for (i, pair) in domain.chain.windows(2).enumerate() {
        let (from, to) = (pair[0], pair[1]);
        let wanted = (i == last).then_some(place_grasps.as_slice());
        let mut got = Vec::new();
        for _ in 0..HANDOFF_ATTEMPTS_PER_SAMPLE * s {
            if got.len() == s || held.is_empty() {
                break;
            }
            if let Some(h) = sample_handoff(scene, (from, &held), (to, wanted), rng) {
                got.push(h);
            }
        }
        held = grasp_set(got.iter().map(|m| m.grasp(to)));
        handoffs.extend(got);
    }
    Ok(Transitions {
        picks,
        handoffs,
        places,
    })
}
