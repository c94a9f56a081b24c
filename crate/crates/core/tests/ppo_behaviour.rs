mod common;

use ccge_core::ppo::{gaussian_log_prob, loss_and_grads, ppo_update, Policy, PpoConfig, PpoOptimizer, RolloutBatch};
use common::point_reach_improvement;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn point_reach_improves_by_half() {
    let started = std::time::Instant::now();
    let mut gains = Vec::new();
    for seed in 0..5 {
        let (before, after) = point_reach_improvement(seed, 200);
        gains.push((after - before) / before.abs());
    }
    let mean = gains.iter().sum::<f64>() / 5.0;
    assert!(mean >= 0.5, "gains {gains:?}");
    assert!(started.elapsed().as_secs() < 120);
}

#[test]
fn tiny_std_samples_the_mean() {
    let cfg = PpoConfig { log_std_init: -5.0, hidden: vec![4], ..Default::default() };
    let policy = Policy::init(2, 2, &cfg, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let obs = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let (a, _, _) = policy.act(&obs, &mut rng);
        let m = policy.mean_action(&obs);
        for j in 0..2 {
            assert!((a[j] - m[j]).abs() < 3.0 * (-5.0f64).exp() * 2.0);
        }
    }
}

#[test]
fn log_prob_at_mean_is_density_peak() {
    let ls = [0.3, -0.7];
    let lp = gaussian_log_prob(&[0.1, 0.2], &ls, &[0.1, 0.2]);
    let peak: f64 = ls.iter().map(|l| -(l + 0.5 * (2.0 * std::f64::consts::PI).ln())).sum();
    assert!((lp - peak).abs() < 1e-14);
}

#[test]
fn seeded_actions_are_reproducible() {
    let cfg = PpoConfig::default();
    let policy = Policy::init(3, 2, &cfg, 4).unwrap();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        (0..10).map(|_| policy.act(&[0.1, 0.2, 0.3], &mut rng).0).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

fn batch(policy: &Policy, adv: f64, lp_shift: f64) -> RolloutBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut b = RolloutBatch::new(3, 2);
    for _ in 0..16 {
        let obs: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, lp, _) = policy.act(&obs, &mut rng);
        b.push(&obs, &a, lp + lp_shift, adv, 0.5);
    }
    b
}

#[test]
fn zero_advantages_leave_actor_mean_untouched() {
    let cfg = PpoConfig { hidden: vec![5], normalize_advantages: false, ..Default::default() };
    let policy = Policy::init(3, 2, &cfg, 2).unwrap();
    let b = batch(&policy, 0.0, 0.0);
    let idx: Vec<usize> = (0..16).collect();
    let (_, g) = loss_and_grads(&policy, &b, &idx, &cfg).unwrap();
    assert!(g.actor.iter().all(|&x| x == 0.0));
    assert!(g.log_std.iter().all(|&x| x == -cfg.entropy_coef));
    assert!(g.critic.iter().any(|&x| x != 0.0));
}

#[test]
fn clipped_branch_blocks_the_surrogate_gradient() {
    let cfg = PpoConfig { hidden: vec![5], entropy_coef: 0.0, ..Default::default() };
    let policy = Policy::init(3, 2, &cfg, 2).unwrap();
    // stored log-probs lowered so every ratio equals 1 + 2ε
    let b = batch(&policy, 1.0, -(1.0 + 2.0 * cfg.clip_range).ln());
    let idx: Vec<usize> = (0..16).collect();
    let (stats, g) = loss_and_grads(&policy, &b, &idx, &cfg).unwrap();
    assert!(g.actor.iter().all(|&x| x == 0.0));
    assert!(g.log_std.iter().all(|&x| x == 0.0));
    assert_eq!(stats.clip_fraction, 1.0);
}

#[test]
fn advantage_normalisation_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut b = RolloutBatch::new(1, 1);
    for _ in 0..257 {
        b.push(&[0.0], &[0.0], 0.0, rng.random_range(-30.0..50.0), 0.0);
    }
    b.normalize_advantages();
    let n = b.advantages.len() as f64;
    let mean = b.advantages.iter().sum::<f64>() / n;
    let std = (b.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 1e-8);
    assert!((std - 1.0).abs() < 1e-6);
}

#[test]
fn updates_are_deterministic() {
    let cfg = PpoConfig { hidden: vec![8], ..Default::default() };
    let run = || {
        let mut policy = Policy::init(3, 2, &cfg, 7).unwrap();
        let mut opt = PpoOptimizer::new(&policy, &cfg);
        let b = batch(&policy, 1.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        ppo_update(&mut policy, &mut opt, &b, &cfg, &mut rng).unwrap();
        policy.flat_parameters()
    };
    assert_eq!(run(), run());
}
