use ccge_core::pushbox::{PushBoxConfig, PushBoxEnv, Side, VecEnv};
use ccge_core::seed;
use proptest::prelude::*;

#[test]
fn reset_sides_are_balanced() {
    let mut env = PushBoxEnv::new(PushBoxConfig::default(), 42).unwrap();
    let n = 10_000;
    let left = (0..n).filter(|_| {
        env.reset();
        env.state().init_side == Side::Left
    });
    let frac = left.count() as f64 / n as f64;
    // 3σ of a fair binomial is 0.015
    assert!((frac - 0.5).abs() <= 0.02, "{frac}");
}

#[test]
fn spawn_is_in_the_lower_half_and_away_from_the_box() {
    let c = PushBoxConfig::default();
    let mut env = PushBoxEnv::new(c, 1).unwrap();
    for _ in 0..2000 {
        env.reset();
        let s = env.state();
        assert!(s.ball[1] <= 0.5 && s.ball[1] >= c.ball_radius);
        assert!(s.ball[0] >= c.ball_radius && s.ball[0] <= 1.0 - c.ball_radius);
        assert!(s.box_x == c.box_x_min || s.box_x == c.box_x_max);
        assert_eq!(s.goal_x, 0.5);
    }
}

fn action_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.05f64..0.05, -0.05f64..0.05), 1..300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariants_hold_every_step(actions in action_strategy(), seed in any::<u64>(), bias in -0.03f64..0.03) {
        let c = PushBoxConfig::default();
        let mut env = PushBoxEnv::new(c, seed).unwrap();
        for &(dx, dy) in &actions {
            if env.state().done {
                env.reset();
            }
            let before = *env.state();
            let out = env.step([dx + bias, dy + 0.01]).unwrap();
            let s = env.state();
            prop_assert!(s.ball.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!(s.ball[0] >= c.ball_radius - 1e-12 && s.ball[0] <= 1.0 - c.ball_radius + 1e-12);
            prop_assert!(s.ball[1] <= c.wall_y - c.ball_radius + 1e-12);
            prop_assert!(s.box_x >= c.box_x_min && s.box_x <= c.box_x_max);
            prop_assert!(s.step_index <= c.horizon);
            prop_assert!(out.observation.iter().all(|v| v.is_finite()));
            if s.box_x != before.box_x {
                prop_assert!(out.info.force > 0.0);
            }
            // ball never ends up inside the box
            let h = c.box_half();
            let inside_x = (s.ball[0] - s.box_x).abs() < h + c.ball_radius - 1e-9;
            let inside_y = (s.ball[1] - c.box_center_y()).abs() < h + c.ball_radius - 1e-9;
            prop_assert!(!(inside_x && inside_y), "ball {:?} box {}", s.ball, s.box_x);
        }
    }

    #[test]
    fn physics_is_deterministic(actions in action_strategy(), seed in any::<u64>()) {
        let run = || {
            let mut env = PushBoxEnv::new(PushBoxConfig::default(), seed).unwrap();
            let mut trace = Vec::new();
            for &(dx, dy) in &actions {
                if env.state().done {
                    env.reset();
                }
                let out = env.step([dx, dy]).unwrap();
                trace.push((out.observation.map(f64::to_bits), out.task_reward.to_bits()));
            }
            trace
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn vector_env_matches_scalar_instances() {
    let c = PushBoxConfig::default();
    let mut vec_env = VecEnv::new(c, 5, 9).unwrap();
    let mut scalars: Vec<PushBoxEnv> =
        (0..5).map(|n| PushBoxEnv::new(c, seed::derive_seed(9, seed::ENV_BASE + n)).unwrap()).collect();
    for t in 0..400 {
        let actions: Vec<[f64; 2]> =
            (0..5).map(|n| [((t * 7 + n * 3) % 11) as f64 * 0.004 - 0.02, ((t + n) % 5) as f64 * 0.01 - 0.015]).collect();
        let outs = vec_env.step(&actions).unwrap();
        for (n, env) in scalars.iter_mut().enumerate() {
            let out = env.step(actions[n]).unwrap();
            assert_eq!(out, outs[n]);
            if out.done {
                env.reset();
                vec_env.envs[n].reset();
            }
            assert_eq!(env.state(), vec_env.envs[n].state());
        }
    }
}
