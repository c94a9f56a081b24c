//! Push-Box: a point-mass ball pushes a box that slides along a wall.
//!
//! The workspace is the unit square. A wall occupies `y ∈ [0.95, 1]` and the
//! 0.1 m box rests against it, sliding in `x` between end stops at 0.15 and
//! 0.85. Each episode starts with the box at one end stop; success means
//! bringing it within 3 cm of the centre. The ball is a quasi-static pusher:
//! its commanded motion into a side face becomes box motion along the wall.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coverage::{contact_match, detect_contact};
use crate::error::{Error, Result};
use crate::geometry::{
    cluster_regions, sample_surface_points, transform_points, ClusterOptions, OrientedBox, Pose,
    RegionMap, Sampling, ShapeSpec, SurfacePoint,
};
use crate::seed;
use crate::vector::{self, Vector};

pub const OBSERVATION_SIZE: usize = 7;
pub const ACTION_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PushBoxConfig {
    pub ball_radius: f64,
    /// Per-step displacement cap, meters.
    pub max_step: f64,
    pub horizon: usize,
    /// N/m, converts penetration depth into the contact force proxy.
    pub stiffness: f64,
    pub success_radius: f64,
    /// Lower face of the wall.
    pub wall_y: f64,
    pub box_size: f64,
    /// End stops for the box centre.
    pub box_x_min: f64,
    pub box_x_max: f64,
    pub goal_x: f64,
    /// Balls spawn with `y` below this.
    pub spawn_y_max: f64,
    pub surface_points: usize,
    pub regions: usize,
    pub region_normal_weight: f64,
    /// Gap between the ball surface and the nearest surface sample.
    pub contact_distance: f64,
    pub contact_force: f64,
}

impl Default for PushBoxConfig {
    fn default() -> Self {
        Self {
            ball_radius: 0.02,
            max_step: 0.02,
            horizon: 150,
            stiffness: 10.0,
            success_radius: 0.03,
            wall_y: 0.95,
            box_size: 0.1,
            box_x_min: 0.15,
            box_x_max: 0.85,
            goal_x: 0.5,
            spawn_y_max: 0.5,
            surface_points: 16,
            regions: 4,
            region_normal_weight: 0.5,
            contact_distance: 0.005,
            contact_force: 0.01,
        }
    }
}

impl PushBoxConfig {
    pub fn box_half(&self) -> f64 {
        self.box_size / 2.0
    }

    pub fn box_center_y(&self) -> f64 {
        self.wall_y - self.box_half()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.ball_radius > 0.0
            && self.max_step > 0.0
            && self.horizon > 0
            && self.stiffness > 0.0
            && self.box_size > 0.0
            && self.box_x_min <= self.box_x_max
            && self.box_x_min - self.box_half() >= 0.0
            && self.box_x_max + self.box_half() <= 1.0
            && self.spawn_y_max > self.ball_radius
            && self.spawn_y_max + self.ball_radius < self.box_center_y() - self.box_half()
            && self.surface_points >= self.regions
            && self.regions > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Configuration("inconsistent push-box geometry".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

/// Face of the box the ball pressed into on a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum BoxFace {
    Left,
    Right,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PushBoxState {
    pub ball: [f64; 2],
    pub box_x: f64,
    pub init_side: Side,
    pub goal_x: f64,
    pub step_index: usize,
    pub done: bool,
    /// Last applied displacement divided by the step cap.
    pub previous_action: [f64; 2],
    pub contact: bool,
}

impl PushBoxState {
    pub fn observation(&self) -> [f64; OBSERVATION_SIZE] {
        [
            self.ball[0],
            self.ball[1],
            self.box_x,
            self.goal_x,
            self.previous_action[0],
            self.previous_action[1],
            if self.contact { 1.0 } else { 0.0 },
        ]
    }
}

/// Physics side-channel for the exploration machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepInfo {
    /// Stiffness × commanded penetration depth, newtons.
    pub force: f64,
    pub face: Option<BoxFace>,
    pub box_displacement: f64,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: [f64; OBSERVATION_SIZE],
    pub task_reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Box perimeter samples, region labels and the (fixed) goal pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSurface {
    /// Canonical points: box centred at `x = 0`, resting against the wall.
    pub canonical: Vec<SurfacePoint<2>>,
    pub regions: RegionMap<2>,
    pub goal_pose: Pose<2>,
}

impl ObjectSurface {
    pub fn new(config: &PushBoxConfig, cluster_seed: u64) -> Result<Self> {
        let shape = ShapeSpec::Rectangle { width: config.box_size, height: config.box_size };
        let local: Vec<SurfacePoint<2>> =
            sample_surface_points(&shape, config.surface_points, Sampling::Stratified, cluster_seed)?;
        let canonical = transform_points(&local, &Pose::from_translation([0.0, config.box_center_y()]));
        let regions = cluster_regions(
            &canonical,
            ClusterOptions::new(config.regions, config.region_normal_weight, cluster_seed),
        )?;
        Ok(Self { canonical, regions, goal_pose: Pose::from_translation([config.goal_x, 0.0]) })
    }

    pub fn pose_at(box_x: f64) -> Pose<2> {
        Pose::from_translation([box_x, 0.0])
    }

    pub fn canonical_positions(&self) -> Vec<Vector<2>> {
        self.canonical.iter().map(|p| p.position).collect()
    }

    pub fn points_at(&self, box_x: f64) -> Vec<SurfacePoint<2>> {
        transform_points(&self.canonical, &Self::pose_at(box_x))
    }
}

/// `10 · (|x_prev − g| − |x_next − g|)`, plus 10 on the success step.
pub fn task_reward(prev: &PushBoxState, next: &PushBoxState, config: &PushBoxConfig) -> f64 {
    let progress = (prev.box_x - prev.goal_x).abs() - (next.box_x - next.goal_x).abs();
    let bonus = if is_success(next, config) { 10.0 } else { 0.0 };
    10.0 * progress + bonus
}

pub fn is_success(state: &PushBoxState, config: &PushBoxConfig) -> bool {
    (state.box_x - state.goal_x).abs() < config.success_radius
}

#[derive(Debug, Clone)]
pub struct PushBoxEnv {
    config: PushBoxConfig,
    state: PushBoxState,
    rng: ChaCha8Rng,
    /// Perimeter samples with the box centred at `x = 0`.
    surface: Vec<SurfacePoint<2>>,
}

impl PushBoxEnv {
    pub fn new(config: PushBoxConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let shape = ShapeSpec::Rectangle { width: config.box_size, height: config.box_size };
        let local = sample_surface_points::<2>(&shape, config.surface_points, Sampling::Stratified, 0)?;
        let surface = transform_points(&local, &Pose::from_translation([0.0, config.box_center_y()]));
        let mut env = Self {
            config,
            state: PushBoxState {
                ball: [0.5, 0.25],
                box_x: config.box_x_min,
                init_side: Side::Left,
                goal_x: config.goal_x,
                step_index: 0,
                done: false,
                previous_action: [0.0; 2],
                contact: false,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
            surface,
        };
        env.reset();
        Ok(env)
    }

    pub fn config(&self) -> &PushBoxConfig {
        &self.config
    }

    pub fn state(&self) -> &PushBoxState {
        &self.state
    }

    /// Replaces the state wholesale (tests and scripted setups).
    pub fn set_state(&mut self, state: PushBoxState) {
        self.state = state;
    }

    pub fn reset(&mut self) -> [f64; OBSERVATION_SIZE] {
        let side = if self.rng.random::<bool>() { Side::Right } else { Side::Left };
        self.reset_side(side)
    }

    pub fn reset_seeded(&mut self, seed: u64) -> [f64; OBSERVATION_SIZE] {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.reset()
    }

    /// Reset with a chosen initialisation; the ball position is still random.
    pub fn reset_side(&mut self, side: Side) -> [f64; OBSERVATION_SIZE] {
        let c = &self.config;
        let r = c.ball_radius;
        let ball = [self.rng.random_range(r..1.0 - r), self.rng.random_range(r..c.spawn_y_max)];
        self.state = PushBoxState {
            ball,
            box_x: match side {
                Side::Left => c.box_x_min,
                Side::Right => c.box_x_max,
            },
            init_side: side,
            goal_x: c.goal_x,
            step_index: 0,
            done: false,
            previous_action: [0.0; 2],
            contact: false,
        };
        self.state.observation()
    }

    pub fn object_pose(&self) -> Pose<2> {
        ObjectSurface::pose_at(self.state.box_x)
    }

    /// The wall and the box itself, as occluders for reaching rewards.
    pub fn occluders(&self) -> [OrientedBox<2>; 2] {
        occluders_at(&self.config, self.state.box_x)
    }

    /// Ball-centre keypoint facing along the last displacement.
    pub fn keypoint(&self) -> SurfacePoint<2> {
        let normal = vector::normalize(&self.state.previous_action).unwrap_or([0.0, 1.0]);
        SurfacePoint { position: self.state.ball, normal }
    }

    /// Moves the ball by `action` (meters, norm-clamped to the step cap).
    pub fn step(&mut self, action: [f64; ACTION_SIZE]) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("push-box action".into()));
        }
        let c = self.config;
        let prev = self.state;
        let norm = vector::norm(&action);
        let d = if norm > c.max_step { vector::scale(&action, c.max_step / norm) } else { action };

        let r = c.ball_radius;
        let h = c.box_half();
        let old = prev.ball;
        let mut ball = [
            (old[0] + d[0]).clamp(r, 1.0 - r),
            (old[1] + d[1]).clamp(r, c.wall_y - r),
        ];
        let mut box_x = prev.box_x;
        let (lo_x, hi_x) = (box_x - h - r, box_x + h + r);
        let lo_y = c.box_center_y() - h - r;
        let hi_y = c.box_center_y() + h + r;

        let mut face = None;
        let mut depth = 0.0;
        if ball[0] > lo_x && ball[0] < hi_x && ball[1] > lo_y && ball[1] < hi_y {
            let depths = [
                (BoxFace::Left, ball[0] - lo_x, old[0] <= lo_x),
                (BoxFace::Right, hi_x - ball[0], old[0] >= hi_x),
                (BoxFace::Bottom, ball[1] - lo_y, old[1] <= lo_y),
            ];
            let entered = depths.iter().filter(|d| d.2);
            let pick = entered
                .clone()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .or_else(|| depths.iter().min_by(|a, b| a.1.total_cmp(&b.1)))
                .copied()
                .expect("three candidate faces");
            face = Some(pick.0);
            depth = pick.1;
            match pick.0 {
                BoxFace::Left => {
                    box_x = (box_x + depth).min(c.box_x_max);
                    ball[0] = box_x - h - r;
                }
                BoxFace::Right => {
                    box_x = (box_x - depth).max(c.box_x_min);
                    ball[0] = box_x + h + r;
                }
                BoxFace::Bottom => {
                    ball[1] = lo_y;
                }
            }
        }
        let force = c.stiffness * depth;

        let mut next = PushBoxState {
            ball,
            box_x,
            init_side: prev.init_side,
            goal_x: prev.goal_x,
            step_index: prev.step_index + 1,
            done: false,
            previous_action: [d[0] / c.max_step, d[1] / c.max_step],
            contact: false,
        };
        next.contact = self.contact_flag(&next, force);
        let success = is_success(&next, &c);
        next.done = success || next.step_index >= c.horizon;
        let reward = task_reward(&prev, &next, &c);
        self.state = next;
        Ok(StepOutcome {
            observation: next.observation(),
            task_reward: reward,
            done: next.done,
            info: StepInfo { force, face, box_displacement: box_x - prev.box_x, success },
        })
    }

    fn contact_flag(&self, state: &PushBoxState, force: f64) -> bool {
        if force <= self.config.contact_force {
            return false;
        }
        let world = transform_points(&self.surface, &ObjectSurface::pose_at(state.box_x));
        let kp = [SurfacePoint { position: state.ball, normal: [0.0, 1.0] }];
        contact_match(&kp, &world).is_ok_and(|pair| {
            detect_contact(
                (pair.distance - self.config.ball_radius).max(0.0),
                force,
                self.config.contact_distance,
                self.config.contact_force,
            )
        })
    }
}

pub fn occluders_at(config: &PushBoxConfig, box_x: f64) -> [OrientedBox<2>; 2] {
    let wall_half = (1.0 - config.wall_y) / 2.0;
    [
        OrientedBox { center: [0.5, config.wall_y + wall_half], half_extents: [0.5, wall_half], rotation: vector::identity() },
        OrientedBox {
            center: [box_x, config.box_center_y()],
            half_extents: [config.box_half(); 2],
            rotation: vector::identity(),
        },
    ]
}

/// Hand-written controller: go around below the box to its far side, rise
/// to the box centre line and push toward the goal.
pub fn scripted_action(state: &PushBoxState, config: &PushBoxConfig) -> [f64; 2] {
    scripted_push(state, config, (state.goal_x - state.box_x).signum())
}

/// Like [`scripted_action`] but pushes toward `direction` (`+1` means the
/// ball presses on the left face).
pub fn scripted_push(state: &PushBoxState, config: &PushBoxConfig, direction: f64) -> [f64; 2] {
    let h = config.box_half();
    let r = config.ball_radius;
    let cy = config.box_center_y();
    let behind_x = state.box_x - direction * (h + r + 0.005);
    let safe_y = cy - h - r - 0.03;
    let [bx, by] = state.ball;
    let toward = |target: [f64; 2]| {
        let delta = vector::sub(&target, &state.ball);
        let n = vector::norm(&delta);
        if n > config.max_step {
            vector::scale(&delta, config.max_step / n)
        } else {
            delta
        }
    };
    let gap = direction * (state.box_x - bx) - (h + r);
    let beside = (-1e-9..0.02).contains(&gap);
    if !beside {
        if by > safe_y + 1e-9 && (bx - state.box_x).abs() < h + r + 0.004 {
            return toward([bx, safe_y]);
        }
        return toward([behind_x, by.min(safe_y)]);
    }
    if (by - cy).abs() > 0.005 {
        return toward([behind_x, cy]);
    }
    [direction * config.max_step, 0.0]
}

/// `N` independent environments stepped in lockstep.
#[derive(Debug, Clone)]
pub struct VecEnv {
    pub envs: Vec<PushBoxEnv>,
}

impl VecEnv {
    /// Instance `n` is seeded from stream `ENV_BASE + n` of `root_seed`.
    pub fn new(config: PushBoxConfig, count: usize, root_seed: u64) -> Result<Self> {
        let envs = (0..count)
            .map(|n| PushBoxEnv::new(config, seed::derive_seed(root_seed, seed::ENV_BASE + n as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { envs })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn observations(&self) -> Vec<[f64; OBSERVATION_SIZE]> {
        self.envs.iter().map(|e| e.state().observation()).collect()
    }

    pub fn step(&mut self, actions: &[[f64; ACTION_SIZE]]) -> Result<Vec<StepOutcome>> {
        if actions.len() != self.envs.len() {
            return Err(crate::error::arg_err!("{} actions for {} environments", actions.len(), self.envs.len()));
        }
        self.envs.iter_mut().zip(actions).map(|(e, a)| e.step(*a)).collect()
    }
}
