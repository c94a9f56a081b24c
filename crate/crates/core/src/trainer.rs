//! The exploration training loop on Push-Box: rollouts, contact matching,
//! state hashing, counter updates, reward assembly, PPO and autoencoder
//! updates, plus evaluation and cluster reports.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::coverage::{contact_match, detect_contact, ContactEvent, CoverageCounter};
use crate::error::{Error, Result};
use crate::pushbox::{
    occluders_at, scripted_action, ObjectSurface, PushBoxConfig, PushBoxEnv, PushBoxState, Side, StepInfo,
    VecEnv, ACTION_SIZE, OBSERVATION_SIZE,
};
use crate::ppo::{compute_gae, ppo_update, LossStats, ObsNormalizer, Policy, PpoConfig, PpoOptimizer, RolloutBatch};
use crate::rewards::{contact_reward, energy_reward, finger_energy, EpisodeRewardTracker, RewardBreakdown, RewardConfig};
use crate::seed;
use crate::state_hash::{build_object_state, forced_index, sample_batch, HashIndex, HasherConfig, HasherOptimizer, ObjectState, StateHasher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Variant {
    Ccge,
    SingleState,
    TaskOnly,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ccge, Variant::SingleState, Variant::TaskOnly];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ccge => "ccge",
            Variant::SingleState => "single_state",
            Variant::TaskOnly => "task_only",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }
}

/// Everything that determines a single training run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub variant: Variant,
    pub seed: u64,
    pub total_steps: u64,
    pub num_envs: usize,
    /// Environment steps between updates.
    pub rollout_steps: usize,
    /// Multiplies both exploration coefficients.
    pub exploration_multiplier: f64,
    /// Episodes in the trailing success-rate window.
    pub success_window: usize,
    pub env: PushBoxConfig,
    pub reward: RewardConfig,
    pub hasher: HasherConfig,
    pub ppo: PpoConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Ccge,
            seed: 0,
            total_steps: 2_000_000,
            num_envs: 32,
            rollout_steps: 16,
            exploration_multiplier: 1.0,
            success_window: 100,
            env: PushBoxConfig::default(),
            // Push-Box spawns the ball up to ~0.8 m from the box; the 1.4 cm
            // bounding-box decay gives no reaching signal at that range.
            reward: RewardConfig { energy_decay: 0.1, ..Default::default() },
            hasher: HasherConfig::default(),
            ppo: PpoConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 || self.num_envs == 0 || self.rollout_steps == 0 {
            return Err(Error::Configuration("total_steps, num_envs and rollout_steps must be positive".into()));
        }
        if !(self.exploration_multiplier >= 0.0) {
            return Err(Error::Configuration("exploration_multiplier must be nonnegative".into()));
        }
        if self.success_window == 0 {
            return Err(Error::Configuration("success_window must be positive".into()));
        }
        self.env.validate()?;
        self.reward.validate().map_err(|e| Error::Configuration(alloc::format!("{e}")))?;
        self.ppo.validate()?;
        if self.hasher.bits == 0 || self.hasher.bits > self.hasher.latent || self.hasher.bits > 31 {
            return Err(Error::Configuration("hash bits must be in 1..=min(latent, 31)".into()));
        }
        Ok(())
    }

    /// Number of updates; the step budget is rounded down to whole updates.
    pub fn updates(&self) -> u64 {
        self.total_steps / (self.num_envs * self.rollout_steps) as u64
    }

    /// Reward coefficients actually paid out under this variant.
    pub fn effective_reward(&self) -> RewardConfig {
        let mut r = self.reward;
        let m = if self.variant == Variant::TaskOnly { 0.0 } else { self.exploration_multiplier };
        r.contact_scale *= m;
        r.energy_scale *= m;
        r
    }
}

/// Per-update metrics record.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UpdateRecord {
    pub update: u64,
    pub steps: u64,
    pub episodes: u64,
    pub success_rate: f64,
    pub success_left: f64,
    pub success_right: f64,
    pub mean_episode_return: f64,
    pub mean_task_reward: f64,
    pub mean_exploration_reward: f64,
    pub mean_contact_raw: f64,
    pub mean_energy_raw: f64,
    pub contact_rate: f64,
    pub counter_occupancy: usize,
    pub distinct_hashes: usize,
    pub hasher_loss: f64,
    pub ppo: LossStats,
}

/// One environment's view of one interaction step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub env: usize,
    /// Post-step state (before any auto-reset).
    pub state: PushBoxState,
    /// Displacement command sent to the environment, meters.
    pub action: [f64; ACTION_SIZE],
    pub reward: RewardBreakdown,
    pub contact: ContactEvent,
    pub hash: HashIndex,
    /// `C[s][0][k]` as read by the contact reward.
    pub count: u64,
    pub info: StepInfo,
}

/// A step record plus what PPO needs from the acting policy.
#[derive(Debug, Clone)]
pub struct Transition {
    pub record: StepRecord,
    /// Unclipped Gaussian sample.
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeOutcome {
    pub side: Side,
    pub success: bool,
    pub steps: usize,
    pub episode_return: f64,
}

/// Hashing and contact machinery shared by training and offline inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub env: PushBoxConfig,
    pub surface: ObjectSurface,
    pub canonical: Vec<[f64; 2]>,
}

impl Probe {
    pub fn new(env: PushBoxConfig, root_seed: u64) -> Result<Self> {
        let surface = ObjectSurface::new(&env, seed::derive_seed(root_seed, seed::REGION_CLUSTERING))?;
        let canonical = surface.canonical_positions();
        Ok(Self { env, surface, canonical })
    }

    pub fn object_state(&self, box_x: f64) -> Result<ObjectState> {
        build_object_state(&self.canonical, &ObjectSurface::pose_at(box_x), &self.surface.goal_pose)
    }

    pub fn hash(&self, hasher: &StateHasher, variant: Variant, box_x: f64) -> Result<HashIndex> {
        if variant == Variant::SingleState {
            return Ok(forced_index());
        }
        hasher.hash_state(&self.object_state(box_x)?)
    }

    /// Contact matching and detection for the single ball keypoint.
    pub fn contact(&self, state: &PushBoxState, force: f64) -> Result<ContactEvent> {
        let keypoint = [self.keypoint(state)];
        let points = self.surface.points_at(state.box_x);
        let pair = contact_match(&keypoint, &points)?;
        let gap = (pair.distance - self.env.ball_radius).max(0.0);
        Ok(ContactEvent {
            finger: 0,
            keypoint: pair.keypoint,
            surface_point: pair.surface_point,
            region: self.surface.regions.labels[pair.surface_point],
            distance: gap,
            force_magnitude: force,
            in_contact: detect_contact(gap, force, self.env.contact_distance, self.env.contact_force),
        })
    }

    pub fn keypoint(&self, state: &PushBoxState) -> crate::geometry::SurfacePoint<2> {
        let normal = crate::vector::normalize(&state.previous_action).unwrap_or([0.0, 1.0]);
        crate::geometry::SurfacePoint { position: state.ball, normal }
    }

    /// Raw contact and energy rewards against a counter snapshot.
    pub fn raw_rewards(
        &self,
        state: &PushBoxState,
        event: &ContactEvent,
        counter: &CoverageCounter,
        s: HashIndex,
        reward: &RewardConfig,
    ) -> Result<(f64, f64)> {
        let contact = contact_reward(core::slice::from_ref(event), counter, s, 1);
        let points = self.surface.points_at(state.box_x);
        let occluders = occluders_at(&self.env, state.box_x);
        let phi = finger_energy(&self.keypoint(state), &points, &self.surface.regions, counter, s, 0, reward, &occluders);
        Ok((contact, energy_reward(&[phi])?))
    }
}

/// Checkpointable training state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainerState {
    pub config: TrainConfig,
    pub policy: Policy,
    pub optimizer: PpoOptimizer,
    pub normalizer: ObsNormalizer,
    pub hasher: StateHasher,
    pub hasher_optimizer: HasherOptimizer,
    pub counter: CoverageCounter,
    pub steps: u64,
    pub updates: u64,
}

pub struct Trainer {
    pub state: TrainerState,
    pub probe: Probe,
    envs: VecEnv,
    trackers: Vec<EpisodeRewardTracker>,
    returns: Vec<f64>,
    action_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    hasher_rng: ChaCha8Rng,
    recent: VecDeque<EpisodeOutcome>,
    episodes: u64,
    seen: BTreeSet<HashIndex>,
}

/// Transitions of one rollout, laid out `[t][env]`.
struct Rollout {
    observations: Vec<Vec<f64>>,
    raw_observations: Vec<[f64; OBSERVATION_SIZE]>,
    actions: Vec<Vec<f64>>,
    log_probs: Vec<f64>,
    values: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    states: Vec<ObjectState>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let root = config.seed;
        let probe = Probe::new(config.env, root)?;
        let envs = VecEnv::new(config.env, config.num_envs, root)?;
        let policy = Policy::init(OBSERVATION_SIZE, ACTION_SIZE, &config.ppo, root)?;
        let optimizer = PpoOptimizer::new(&policy, &config.ppo);
        let hasher = StateHasher::new(
            2 * probe.canonical.len() * 2,
            &config.hasher,
            seed::derive_seed(root, seed::HASHER_INIT),
            seed::derive_seed(root, seed::HASH_PROJECTION),
        )?;
        let hasher_optimizer = HasherOptimizer::new(&hasher, config.hasher.learning_rate);
        let n = config.num_envs;
        let state = TrainerState {
            policy,
            optimizer,
            normalizer: ObsNormalizer::new(OBSERVATION_SIZE),
            hasher,
            hasher_optimizer,
            counter: CoverageCounter::new(1, config.env.regions),
            steps: 0,
            updates: 0,
            config,
        };
        Ok(Self {
            state,
            probe,
            envs,
            trackers: vec![EpisodeRewardTracker::default(); n],
            returns: vec![0.0; n],
            action_rng: seed::stream_rng(root, seed::ACTION_NOISE),
            shuffle_rng: seed::stream_rng(root, seed::PPO_SHUFFLE),
            hasher_rng: seed::stream_rng(root, seed::HASHER_BATCH),
            recent: VecDeque::new(),
            episodes: 0,
            seen: BTreeSet::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.state.config
    }

    pub fn envs(&self) -> &VecEnv {
        &self.envs
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn recent_outcomes(&self) -> impl Iterator<Item = &EpisodeOutcome> {
        self.recent.iter()
    }

    pub fn is_finished(&self) -> bool {
        self.state.updates >= self.state.config.updates()
    }

    /// Acts in every environment once: physics and hashing first, then all
    /// counter increments, then reward reads against the updated counter.
    pub fn interaction_step(&mut self) -> Result<Vec<Transition>> {
        let cfg = self.state.config.clone();
        let reward_cfg = cfg.effective_reward();
        let n = self.envs.len();
        let mut pending = Vec::with_capacity(n);
        for i in 0..n {
            let raw = self.envs.envs[i].state().observation();
            let obs = self.state.normalizer.normalize(&raw);
            let (action, log_prob, value) = self.state.policy.act(&obs, &mut self.action_rng);
            let command = [
                action[0].clamp(-1.0, 1.0) * cfg.env.max_step,
                action[1].clamp(-1.0, 1.0) * cfg.env.max_step,
            ];
            let out = self.envs.envs[i].step(command)?;
            let next = *self.envs.envs[i].state();
            let s = self.probe.hash(&self.state.hasher, cfg.variant, next.box_x)?;
            let event = self.probe.contact(&next, out.info.force)?;
            pending.push((next, command, out, s, event, action, log_prob, value));
        }
        for (_, _, _, s, event, ..) in &pending {
            if event.in_contact {
                self.state.counter.increment(*s, event.finger, event.region)?;
            }
        }
        let mut records = Vec::with_capacity(n);
        for (i, (next, command, out, s, event, action, log_prob, value)) in pending.into_iter().enumerate() {
            self.seen.insert(s);
            let (contact_raw, energy_raw) =
                self.probe.raw_rewards(&next, &event, &self.state.counter, s, &reward_cfg)?;
            let (contact_scaled, energy_scaled) = self.trackers[i].apply(contact_raw, energy_raw, &reward_cfg);
            let reward = RewardBreakdown {
                task: out.task_reward,
                contact_raw,
                energy_raw,
                contact_scaled,
                energy_scaled,
                total: crate::rewards::total_reward(out.task_reward, contact_scaled, energy_scaled),
            };
            if !reward.total.is_finite() {
                return Err(Error::NonFinite(alloc::format!("reward at env {i}: {reward:?}")));
            }
            self.returns[i] += reward.task;
            let count = self.state.counter.get(s, event.finger, event.region);
            records.push(Transition {
                record: StepRecord { env: i, state: next, action: command, reward, contact: event, hash: s, count, info: out.info },
                action,
                log_prob,
                value,
            });
            if out.done {
                self.finish_episode(i, &next, out.info.success);
            }
        }
        self.state.steps += n as u64;
        Ok(records)
    }

    fn finish_episode(&mut self, i: usize, last: &PushBoxState, success: bool) {
        self.recent.push_back(EpisodeOutcome {
            side: last.init_side,
            success,
            steps: last.step_index,
            episode_return: self.returns[i],
        });
        while self.recent.len() > self.state.config.success_window {
            self.recent.pop_front();
        }
        self.episodes += 1;
        self.returns[i] = 0.0;
        self.trackers[i].reset();
        self.envs.envs[i].reset();
    }

    /// One rollout of `rollout_steps` interaction steps followed by a PPO
    /// update and one autoencoder step. `sink` sees every step record.
    pub fn update<F: FnMut(&StepRecord)>(&mut self, mut sink: F) -> Result<UpdateRecord> {
        let t_len = self.state.config.rollout_steps;
        let n = self.envs.len();
        let mut ro = Rollout {
            observations: Vec::with_capacity(t_len * n),
            raw_observations: Vec::with_capacity(t_len * n),
            actions: Vec::with_capacity(t_len * n),
            log_probs: Vec::with_capacity(t_len * n),
            values: Vec::with_capacity(t_len * n),
            rewards: Vec::with_capacity(t_len * n),
            dones: Vec::with_capacity(t_len * n),
            states: Vec::with_capacity(t_len * n),
        };
        let mut sums = [0.0f64; 5];
        for _ in 0..t_len {
            let before: Vec<[f64; OBSERVATION_SIZE]> = self.envs.observations();
            let records = self.interaction_step()?;
            for (i, Transition { record: rec, action, log_prob, value }) in records.into_iter().enumerate() {
                sink(&rec);
                ro.raw_observations.push(before[i]);
                ro.observations.push(self.state.normalizer.normalize(&before[i]));
                ro.actions.push(action);
                ro.log_probs.push(log_prob);
                ro.values.push(value);
                ro.rewards.push(rec.reward.total);
                ro.dones.push(rec.state.done);
                ro.states.push(self.probe.object_state(rec.state.box_x)?);
                sums[0] += rec.reward.task;
                sums[1] += rec.reward.exploration();
                sums[2] += rec.reward.contact_raw;
                sums[3] += rec.reward.energy_raw;
                sums[4] += if rec.contact.in_contact { 1.0 } else { 0.0 };
            }
        }

        let cfg = self.state.config.ppo.clone();
        let mut batch = RolloutBatch::new(OBSERVATION_SIZE, ACTION_SIZE);
        let mut per_env: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(n);
        for e in 0..n {
            let rewards: Vec<f64> = (0..t_len).map(|t| ro.rewards[t * n + e]).collect();
            let values: Vec<f64> = (0..t_len).map(|t| ro.values[t * n + e]).collect();
            let dones: Vec<bool> = (0..t_len).map(|t| ro.dones[t * n + e]).collect();
            let obs = self.state.normalizer.normalize(&self.envs.envs[e].state().observation());
            let bootstrap = self.state.policy.value(&obs);
            per_env.push(compute_gae(&rewards, &values, &dones, bootstrap, cfg.gamma, cfg.gae_lambda)?);
        }
        for t in 0..t_len {
            for (e, (adv, ret)) in per_env.iter().enumerate() {
                let k = t * n + e;
                batch.push(&ro.observations[k], &ro.actions[k], ro.log_probs[k], adv[t], ret[t]);
            }
        }
        let st = &mut self.state;
        let ppo = ppo_update(&mut st.policy, &mut st.optimizer, &batch, &cfg, &mut self.shuffle_rng)?;
        let hasher_loss = if st.config.variant == Variant::SingleState {
            0.0
        } else {
            let sample = sample_batch(&ro.states, st.config.hasher.batch_size, &mut self.hasher_rng);
            st.hasher.train_step(&sample, &mut st.hasher_optimizer)?
        };
        let raw: Vec<&[f64]> = ro.raw_observations.iter().map(|r| r.as_slice()).collect();
        st.normalizer.update(&raw);
        st.updates += 1;

        let samples = (t_len * n) as f64;
        Ok(UpdateRecord {
            update: st.updates,
            steps: st.steps,
            episodes: self.episodes,
            success_rate: rate(self.recent.iter().map(|o| o.success)),
            success_left: rate(self.recent.iter().filter(|o| o.side == Side::Left).map(|o| o.success)),
            success_right: rate(self.recent.iter().filter(|o| o.side == Side::Right).map(|o| o.success)),
            mean_episode_return: mean(self.recent.iter().map(|o| o.episode_return)),
            mean_task_reward: sums[0] / samples,
            mean_exploration_reward: sums[1] / samples,
            mean_contact_raw: sums[2] / samples,
            mean_energy_raw: sums[3] / samples,
            contact_rate: sums[4] / samples,
            counter_occupancy: st.counter.occupancy(),
            distinct_hashes: self.seen.len(),
            hasher_loss,
            ppo,
        })
    }

    /// Runs every remaining update, handing each record to `on_update`.
    pub fn run<F: FnMut(&UpdateRecord)>(&mut self, mut on_update: F) -> Result<Vec<UpdateRecord>> {
        let mut out = Vec::new();
        while !self.is_finished() {
            let rec = self.update(|_| {})?;
            on_update(&rec);
            out.push(rec);
        }
        Ok(out)
    }
}

fn rate<I: Iterator<Item = bool>>(it: I) -> f64 {
    mean(it.map(|b| if b { 1.0 } else { 0.0 }))
}

fn mean<I: Iterator<Item = f64>>(it: I) -> f64 {
    let (s, c) = it.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if c == 0 {
        0.0
    } else {
        s / c as f64
    }
}

/// Something that picks displacement commands in evaluation.
pub trait Controller {
    fn command(&mut self, state: &PushBoxState, config: &PushBoxConfig) -> [f64; ACTION_SIZE];
}

/// Deterministic mean action of a trained policy.
pub struct PolicyController<'a> {
    pub policy: &'a Policy,
    pub normalizer: &'a ObsNormalizer,
}

impl Controller for PolicyController<'_> {
    fn command(&mut self, state: &PushBoxState, config: &PushBoxConfig) -> [f64; ACTION_SIZE] {
        let mean = self.policy.mean_action(&self.normalizer.normalize(&state.observation()));
        [mean[0].clamp(-1.0, 1.0) * config.max_step, mean[1].clamp(-1.0, 1.0) * config.max_step]
    }
}

pub struct ScriptedController;

impl Controller for ScriptedController {
    fn command(&mut self, state: &PushBoxState, config: &PushBoxConfig) -> [f64; ACTION_SIZE] {
        scripted_action(state, config)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalEpisode {
    pub index: usize,
    pub side: Side,
    pub success: bool,
    pub steps: usize,
    pub final_box_x: f64,
    pub task_return: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub success_rate: f64,
    pub success_left: f64,
    pub success_right: f64,
    pub episodes: Vec<EvalEpisode>,
}

/// Runs `episodes` episodes alternating left/right initialisations. `on_step`
/// sees `(episode, state before, command, state after, info)`.
pub fn evaluate<C, F>(controller: &mut C, env: &PushBoxConfig, episodes: usize, seed: u64, mut on_step: F) -> Result<EvalReport>
where
    C: Controller,
    F: FnMut(usize, &PushBoxState, [f64; ACTION_SIZE], &PushBoxState, &StepInfo),
{
    let mut sim = PushBoxEnv::new(*env, seed::derive_seed(seed, seed::EVALUATION))?;
    let mut report = EvalReport::default();
    for index in 0..episodes {
        let side = if index % 2 == 0 { Side::Left } else { Side::Right };
        sim.reset_side(side);
        let mut task_return = 0.0;
        let mut success = false;
        while !sim.state().done {
            let before = *sim.state();
            let command = controller.command(&before, env);
            let out = sim.step(command)?;
            task_return += out.task_reward;
            success = out.info.success;
            on_step(index, &before, command, sim.state(), &out.info);
        }
        report.episodes.push(EvalEpisode {
            index,
            side,
            success,
            steps: sim.state().step_index,
            final_box_x: sim.state().box_x,
            task_return,
        });
    }
    report.success_rate = rate(report.episodes.iter().map(|e| e.success));
    report.success_left = rate(report.episodes.iter().filter(|e| e.side == Side::Left).map(|e| e.success));
    report.success_right = rate(report.episodes.iter().filter(|e| e.side == Side::Right).map(|e| e.success));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterSample {
    pub side: Side,
    pub episode: usize,
    pub step: usize,
    pub box_x: f64,
    pub hash: HashIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SideStats {
    pub side: Side,
    pub samples: usize,
    pub modal: HashIndex,
    pub purity: f64,
    pub distinct: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterReport {
    pub samples: Vec<ClusterSample>,
    pub sides: Vec<SideStats>,
}

impl ClusterReport {
    pub fn side(&self, side: Side) -> Option<&SideStats> {
        self.sides.iter().find(|s| s.side == side)
    }

    /// Both sides reach `purity` with different modal indices.
    pub fn separated(&self, purity: f64) -> bool {
        match (self.side(Side::Left), self.side(Side::Right)) {
            (Some(l), Some(r)) => l.modal != r.modal && l.purity >= purity && r.purity >= purity,
            _ => false,
        }
    }
}

/// Hashes the object states visited by `controller` over `episodes`
/// evaluation episodes (alternating sides, every step of every episode).
pub fn cluster_report<C: Controller>(
    controller: &mut C,
    probe: &Probe,
    hasher: &StateHasher,
    variant: Variant,
    episodes: usize,
    seed: u64,
) -> Result<ClusterReport> {
    let mut samples = Vec::new();
    let mut failure = None;
    evaluate(controller, &probe.env, episodes, seed, |episode, before, _, _, _| {
        match probe.hash(hasher, variant, before.box_x) {
            Ok(hash) => samples.push(ClusterSample {
                side: before.init_side,
                episode,
                step: before.step_index,
                box_x: before.box_x,
                hash,
            }),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut sides = Vec::new();
    for side in [Side::Left, Side::Right] {
        let mut counts: BTreeMap<HashIndex, usize> = BTreeMap::new();
        for s in samples.iter().filter(|s| s.side == side) {
            *counts.entry(s.hash).or_default() += 1;
        }
        let total: usize = counts.values().sum();
        // BTreeMap order makes the lowest index win ties
        let (modal, top) = counts.iter().fold((HashIndex(0), 0), |acc, (&h, &c)| if c > acc.1 { (h, c) } else { acc });
        sides.push(SideStats {
            side,
            samples: total,
            modal,
            purity: if total == 0 { 0.0 } else { top as f64 / total as f64 },
            distinct: counts.len(),
        });
    }
    Ok(ClusterReport { samples, sides })
}

/// Fraction of `episodes` uniformly random rollouts that succeed (sanity baseline).
pub fn random_policy_success<R: Rng>(env: &PushBoxConfig, episodes: usize, rng: &mut R) -> Result<f64> {
    struct Random<'a, R>(&'a mut R);
    impl<R: Rng> Controller for Random<'_, R> {
        fn command(&mut self, _: &PushBoxState, config: &PushBoxConfig) -> [f64; 2] {
            [self.0.random_range(-1.0..1.0) * config.max_step, self.0.random_range(-1.0..1.0) * config.max_step]
        }
    }
    let seed = rng.random();
    Ok(evaluate(&mut Random(rng), env, episodes, seed, |_, _, _, _, _| {})?.success_rate)
}
