use ccge_core::coverage::{count_weight, ContactEvent, CoverageCounter};
use ccge_core::geometry::{transform_points, Pose, RegionMap, SurfacePoint};
use ccge_core::rewards::{contact_reward, finger_energy, scale_progress, EpisodeRewardTracker, RewardConfig};
use ccge_core::state_hash::HashIndex;
use proptest::prelude::*;

fn event(region: usize, in_contact: bool, finger: usize) -> ContactEvent {
    ContactEvent { finger, keypoint: 0, surface_point: 0, region, distance: 0.0, force_magnitude: 1.0, in_contact }
}

fn unit(angle: f64) -> [f64; 2] {
    [angle.cos(), angle.sin()]
}

proptest! {
    #[test]
    fn scaled_rewards_are_nonnegative_and_bounded(raw in prop::collection::vec(0.0f64..1.0, 1..60), alpha in 0.0f64..500.0) {
        let mut max = 0.0;
        let mut paid = 0.0;
        let mut peak: f64 = 0.0;
        for &r in &raw {
            let (s, m) = scale_progress(r, max, alpha);
            prop_assert!(s >= 0.0);
            prop_assert!(m >= max);
            max = m;
            paid += s;
            peak = peak.max(r);
        }
        // telescoping: total payout never exceeds alpha times the episode peak
        prop_assert!(paid <= alpha * peak + 1e-9);
    }

    #[test]
    fn tracker_maxima_are_monotone_and_reset(
        episodes in prop::collection::vec(prop::collection::vec((0.0f64..1.0, 0.0f64..3.0), 1..30), 1..5)
    ) {
        let cfg = RewardConfig::default();
        let mut tracker = EpisodeRewardTracker::default();
        for ep in &episodes {
            tracker.reset();
            prop_assert_eq!(tracker, EpisodeRewardTracker::default());
            let mut paid = 0.0;
            for &(c, e) in ep {
                let before = tracker;
                let (sc, se) = tracker.apply(c, e, &cfg);
                prop_assert!(sc >= 0.0 && se >= 0.0);
                prop_assert!(tracker.contact_max >= before.contact_max);
                prop_assert!(tracker.energy_max >= before.energy_max);
                paid += sc;
            }
            let peak = ep.iter().map(|p| p.0).fold(0.0, f64::max);
            prop_assert!(paid <= cfg.contact_scale * peak + 1e-9);
        }
    }

    #[test]
    fn count_weight_strictly_decreasing(c in 0u64..1_000_000) {
        prop_assert!(count_weight(c + 1) < count_weight(c));
        prop_assert!(count_weight(c) > 0.0 && count_weight(c) <= 1.0);
    }

    #[test]
    fn contact_reward_in_unit_interval(
        fingers in 1usize..4,
        increments in prop::collection::vec((0usize..3, 0usize..4), 0..40),
        flags in prop::collection::vec((0usize..4, any::<bool>()), 0..4),
    ) {
        let mut counter = CoverageCounter::new(fingers, 4);
        let s = HashIndex(1);
        for &(f, k) in &increments {
            if f < fingers {
                counter.increment(s, f, k).unwrap();
            }
        }
        let events: Vec<ContactEvent> =
            flags.iter().enumerate().take(fingers).map(|(f, &(k, c))| event(k, c, f)).collect();
        let r = contact_reward(&events, &counter, s, fingers);
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn counters_only_grow(ops in prop::collection::vec((0u32..5, 0usize..2, 0usize..3), 1..200)) {
        let mut counter = CoverageCounter::new(2, 3);
        let mut snapshot = counter.clone();
        for &(s, f, k) in &ops {
            counter.increment(HashIndex(s), f, k).unwrap();
            for (hs, ff, kk, c) in snapshot.entries() {
                prop_assert!(counter.get(hs, ff, kk) >= c);
            }
            snapshot = counter.clone();
        }
        prop_assert_eq!(counter.total(), ops.len() as u64);
    }

    #[test]
    fn energy_monotone_in_counts(
        pts in prop::collection::vec(((-1.0f64..1.0, -1.0f64..1.0), 0.0f64..6.3, 0usize..3), 1..20),
        kp in (-1.0f64..1.0, -1.0f64..1.0),
        bump in (0usize..3, 1u64..10),
        directional in any::<bool>(),
    ) {
        let points: Vec<SurfacePoint<2>> =
            pts.iter().map(|&((x, y), a, _)| SurfacePoint { position: [x, y], normal: unit(a) }).collect();
        let regions = RegionMap { centers: vec![[0.0; 2]; 3], mean_normals: vec![[1.0, 0.0]; 3], labels: pts.iter().map(|p| p.2).collect() };
        let key = SurfacePoint { position: [kp.0, kp.1], normal: [0.0, 1.0] };
        let cfg = RewardConfig { use_directional: directional, use_occlusion: false, ..Default::default() };
        let mut counter = CoverageCounter::new(1, 3);
        let before = finger_energy(&key, &points, &regions, &counter, HashIndex(0), 0, &cfg, &[]);
        for _ in 0..bump.1 {
            counter.increment(HashIndex(0), 0, bump.0).unwrap();
        }
        let after = finger_energy(&key, &points, &regions, &counter, HashIndex(0), 0, &cfg, &[]);
        prop_assert!(after <= before);
    }

    #[test]
    fn energy_invariant_under_rigid_motion(
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20),
        kp in (-1.0f64..1.0, -1.0f64..1.0),
        motion in (-2.0f64..2.0, -2.0f64..2.0, -3.2f64..3.2),
    ) {
        let points: Vec<SurfacePoint<2>> =
            pts.iter().map(|&(x, y)| SurfacePoint { position: [x, y], normal: [1.0, 0.0] }).collect();
        let regions = RegionMap { centers: vec![[0.0; 2]], mean_normals: vec![[1.0, 0.0]], labels: vec![0; points.len()] };
        let key = [SurfacePoint { position: [kp.0, kp.1], normal: [0.0, 1.0] }];
        let cfg = RewardConfig { use_directional: false, use_occlusion: false, ..Default::default() };
        let counter = CoverageCounter::new(1, 1);
        let pose = Pose::planar(motion.0, motion.1, motion.2);
        let before = finger_energy(&key[0], &points, &regions, &counter, HashIndex(0), 0, &cfg, &[]);
        let moved_key = transform_points(&key, &pose);
        let moved = transform_points(&points, &pose);
        let after = finger_energy(&moved_key[0], &moved, &regions, &counter, HashIndex(0), 0, &cfg, &[]);
        prop_assert!((before - after).abs() < 1e-9 * before.max(1.0));
    }
}

#[test]
fn count_weight_anchor_values() {
    assert_eq!(count_weight(0), 1.0);
    assert_eq!(count_weight(3), 0.5);
}
