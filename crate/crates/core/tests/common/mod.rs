//! Independent reference implementations shared by the integration tests
//! and the acceptance suite.
#![allow(dead_code)]

use ccge_core::coverage::CoverageCounter;
use ccge_core::geometry::{OrientedBox, RegionMap, SurfacePoint};
use ccge_core::nn::{Activation, DenseNet};
use ccge_core::ppo::{compute_gae, ppo_update, ObsNormalizer, Policy, PpoConfig, PpoOptimizer, RolloutBatch};
use ccge_core::state_hash::HashIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative error `‖a − b‖ / (‖a‖ + ‖b‖)` with a tiny floor.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

/// Central differences of `f` around `x`, one coordinate at a time.
pub fn finite_difference<F: FnMut(&[f64]) -> f64>(x: &[f64], h: f64, mut f: F) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn set_net_parameters(net: &mut DenseNet, values: &[f64]) {
    for (p, v) in net.parameters_mut().zip(values) {
        *p = *v;
    }
}

pub fn random_activation<R: Rng>(rng: &mut R) -> Activation {
    [Activation::Tanh, Activation::Relu, Activation::Sigmoid, Activation::Identity][rng.random_range(0..4)]
}

/// Brute-force closest pair scan: `(keypoint, point, distance)`.
pub fn brute_contact<const D: usize>(kps: &[SurfacePoint<D>], pts: &[SurfacePoint<D>]) -> (usize, usize, f64) {
    let mut all = Vec::new();
    for (l, k) in kps.iter().enumerate() {
        for (m, p) in pts.iter().enumerate() {
            let d2: f64 = (0..D).map(|i| (k.position[i] - p.position[i]).powi(2)).sum();
            all.push((d2.sqrt(), l, m));
        }
    }
    // stable sort keeps the lexicographically first index pair among ties
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    (all[0].1, all[0].2, all[0].0)
}

/// Energy by a literal loop with the weights written out.
#[allow(clippy::too_many_arguments)]
pub fn naive_energy<const D: usize>(
    kp: &SurfacePoint<D>,
    pts: &[SurfacePoint<D>],
    regions: &RegionMap<D>,
    counter: &CoverageCounter,
    s: HashIndex,
    finger: usize,
    decay: f64,
    directional: bool,
    occluders: &[OrientedBox<D>],
) -> f64 {
    let mut total = 0.0;
    for (m, p) in pts.iter().enumerate() {
        let c = counter.get(s, finger, regions.labels[m]) as f64;
        let g = (c + 1.0).powf(-0.5);
        let mut w = 1.0;
        if directional {
            let v: Vec<f64> = (0..D).map(|i| kp.position[i] - p.position[i]).collect();
            let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nn = p.normal.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dn = kp.normal.iter().map(|x| x * x).sum::<f64>().sqrt();
            if vn == 0.0 {
                w = 0.0;
            } else {
                let cos_obj: f64 = (0..D).map(|i| v[i] * p.normal[i]).sum::<f64>() / (vn * nn);
                let cos_kp: f64 = -(0..D).map(|i| kp.normal[i] * p.normal[i]).sum::<f64>() / (dn * nn);
                w = cos_obj.clamp(0.0, 1.0) * cos_kp.clamp(0.0, 1.0);
            }
        }
        if ccge_core::geometry::segment_occluded(&kp.position, &p.position, occluders) {
            w = 0.0;
        }
        let dist: f64 = (0..D).map(|i| (kp.position[i] - p.position[i]).powi(2)).sum::<f64>().sqrt();
        total += g * w * (-dist / decay).exp();
    }
    total
}

/// `max_i (|local_i| − h_i)` at parameter `t`; ≤ 0 inside the closed box.
pub fn box_excess<const D: usize>(a: &[f64; D], b: &[f64; D], obb: &OrientedBox<D>, t: f64) -> f64 {
    let p: [f64; D] = std::array::from_fn(|i| a[i] + t * (b[i] - a[i]));
    let local = obb.to_local(&p);
    (0..D).map(|i| local[i].abs() - obb.half_extents[i]).fold(f64::NEG_INFINITY, f64::max)
}

/// Dense sampling of the open segment. Returns whether any sample lies in
/// the closed box, and the minimum excess found by ternary refinement of the
/// convex excess function (used to detect boundary-grazing cases).
pub fn dense_segment_hits<const D: usize>(a: &[f64; D], b: &[f64; D], obb: &OrientedBox<D>, samples: usize) -> (bool, f64) {
    let mut hit = false;
    for i in 1..samples {
        let t = i as f64 / samples as f64;
        if box_excess(a, b, obb, t) <= 0.0 {
            hit = true;
            break;
        }
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if box_excess(a, b, obb, m1) <= box_excess(a, b, obb, m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let min_excess = box_excess(a, b, obb, 0.5 * (lo + hi));
    (hit, min_excess)
}

/// Advantages from the explicit discounted sum of TD residuals.
pub fn unrolled_gae(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    let delta: Vec<f64> =
        (0..n).map(|t| rewards[t] + if dones[t] { 0.0 } else { gamma * next_value(t) } - values[t]).collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for (l, d) in delta.iter().enumerate().skip(t) {
                sum += weight * d;
                if dones[l] {
                    break;
                }
                weight *= gamma * lambda;
            }
            sum
        })
        .collect()
}

/// 1D point reach: move a scalar toward a random target. Reward is the
/// negative distance after each move; 20-step episodes.
pub struct PointReach {
    pub x: f64,
    pub target: f64,
    pub t: usize,
}

pub const POINT_REACH_HORIZON: usize = 20;

impl PointReach {
    pub fn reset<R: Rng>(rng: &mut R) -> Self {
        Self { x: rng.random_range(-1.0..1.0), target: rng.random_range(-1.0..1.0), t: 0 }
    }

    pub fn observation(&self) -> [f64; 2] {
        [self.x, self.target]
    }

    /// Returns `(reward, done)`.
    pub fn step(&mut self, action: f64) -> (f64, bool) {
        self.x = (self.x + 0.1 * action.clamp(-1.0, 1.0)).clamp(-2.0, 2.0);
        self.t += 1;
        (-(self.x - self.target).abs(), self.t >= POINT_REACH_HORIZON)
    }
}

/// Trains PPO on [`PointReach`] and returns `(initial mean return, final mean return)`,
/// each measured over 100 stochastic-policy episodes.
pub fn point_reach_improvement(seed: u64, updates: usize) -> (f64, f64) {
    let cfg = PpoConfig { hidden: vec![32, 32], learning_rate: 1e-3, entropy_coef: 0.0, ..Default::default() };
    let mut policy = Policy::init(2, 1, &cfg, seed).unwrap();
    let mut opt = PpoOptimizer::new(&policy, &cfg);
    let norm = ObsNormalizer::new(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let measure = |policy: &Policy, rng: &mut ChaCha8Rng| {
        let mut total = 0.0;
        for _ in 0..100 {
            let mut env = PointReach::reset(rng);
            loop {
                let (a, _, _) = policy.act(&norm.normalize(&env.observation()), rng);
                let (r, done) = env.step(a[0]);
                total += r;
                if done {
                    break;
                }
            }
        }
        total / 100.0
    };
    let before = measure(&policy, &mut rng);
    let n_envs = 8;
    let horizon = 16;
    let mut envs: Vec<PointReach> = (0..n_envs).map(|_| PointReach::reset(&mut rng)).collect();
    for _ in 0..updates {
        let mut obs = vec![vec![]; n_envs];
        let mut acts = vec![vec![]; n_envs];
        let mut lps = vec![vec![]; n_envs];
        let mut rews = vec![vec![]; n_envs];
        let mut vals = vec![vec![]; n_envs];
        let mut dones = vec![vec![]; n_envs];
        for _ in 0..horizon {
            for (e, env) in envs.iter_mut().enumerate() {
                let o = norm.normalize(&env.observation());
                let (a, lp, v) = policy.act(&o, &mut rng);
                let (r, done) = env.step(a[0]);
                obs[e].push(o);
                acts[e].push(a);
                lps[e].push(lp);
                rews[e].push(r);
                vals[e].push(v);
                dones[e].push(done);
                if done {
                    *env = PointReach::reset(&mut rng);
                }
            }
        }
        let mut batch = RolloutBatch::new(2, 1);
        for e in 0..n_envs {
            let boot = policy.value(&norm.normalize(&envs[e].observation()));
            let (adv, ret) = compute_gae(&rews[e], &vals[e], &dones[e], boot, cfg.gamma, cfg.gae_lambda).unwrap();
            for t in 0..horizon {
                batch.push(&obs[e][t], &acts[e][t], lps[e][t], adv[t], ret[t]);
            }
        }
        ppo_update(&mut policy, &mut opt, &batch, &cfg, &mut rng).unwrap();
    }
    (before, measure(&policy, &mut rng))
}
