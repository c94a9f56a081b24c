//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use ccge_core::coverage::ContactEvent;
use ccge_core::pushbox::PushBoxState;
use ccge_core::rewards::{total_reward, EpisodeRewardTracker, RewardBreakdown};
use ccge_core::state_hash::HashIndex;
use ccge_core::trainer::{
    cluster_report, evaluate, ClusterReport, EvalReport, PolicyController, Probe, Trainer, TrainerState, UpdateRecord,
    Variant,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::io::{self, Checkpoint, JsonLines};

/// Metrics line: the update record tagged with its run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsLine {
    pub variant: Variant,
    pub seed: u64,
    #[serde(flatten)]
    pub record: UpdateRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: Variant,
    pub seed: u64,
    pub steps: u64,
    pub updates: u64,
    pub final_success: f64,
    pub success_left: f64,
    pub success_right: f64,
    pub train_success: f64,
}

/// Trains one run into `out` and evaluates the final policy.
pub fn train(cfg: &ExperimentConfig, out: &Path, verbose: bool) -> Result<RunSummary> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    io::write_text(&out.join(io::CONFIG_FILE), &cfg.to_toml()?)?;
    let started = Instant::now();
    let tc = &cfg.train;
    let mut trainer = Trainer::new(tc.clone()).map_err(|e| anyhow!("{e}"))?;
    let mut metrics = JsonLines::create(&out.join(io::METRICS_FILE))?;
    let total = tc.updates();
    let mut last = UpdateRecord::default();
    while !trainer.is_finished() {
        let rec = match trainer.update(|_| {}) {
            Ok(r) => r,
            Err(e) => {
                let dump = out.join("failure.json");
                Checkpoint::new(trainer.state.clone()).save(&dump)?;
                return Err(anyhow!("training aborted at update {}: {e} (state dumped to {})", trainer.state.updates, dump.display()));
            }
        };
        metrics.write(&MetricsLine { variant: tc.variant, seed: tc.seed, record: rec })?;
        if verbose && (rec.update % 50 == 0 || rec.update == total) {
            eprintln!(
                "[{} seed {}] update {}/{} steps {} success {:.2} (L {:.2} R {:.2}) task {:.4} explore {:.4} hashes {}",
                tc.variant.name(),
                tc.seed,
                rec.update,
                total,
                rec.steps,
                rec.success_rate,
                rec.success_left,
                rec.success_right,
                rec.mean_task_reward,
                rec.mean_exploration_reward,
                rec.distinct_hashes
            );
        }
        last = rec;
    }
    metrics.finish()?;
    Checkpoint::new(trainer.state.clone()).save(&out.join(io::CHECKPOINT_FILE))?;
    let report = evaluate_state(&trainer.state, cfg.eval_episodes, tc.seed)?;
    io::write_text(&out.join("eval.json"), &serde_json::to_string_pretty(&report)?)?;
    io::write_text(&out.join("timing.txt"), &format!("wall_clock_seconds {:.3}\n", started.elapsed().as_secs_f64()))?;
    Ok(RunSummary {
        variant: tc.variant,
        seed: tc.seed,
        steps: trainer.state.steps,
        updates: trainer.state.updates,
        final_success: report.success_rate,
        success_left: report.success_left,
        success_right: report.success_right,
        train_success: last.success_rate,
    })
}

pub fn evaluate_state(state: &TrainerState, episodes: usize, seed: u64) -> Result<EvalReport> {
    let mut ctl = PolicyController { policy: &state.policy, normalizer: &state.normalizer };
    evaluate(&mut ctl, &state.config.env, episodes, seed, |_, _, _, _, _| {}).map_err(|e| anyhow!("{e}"))
}

/// One line of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode: usize,
    pub step: usize,
    pub state: PushBoxState,
    pub action: [f64; 2],
    pub reward: RewardBreakdown,
    pub contact: ContactEvent,
    pub hash: HashIndex,
}

/// Deterministic evaluation of a checkpoint; optionally dumps every step.
/// Exploration rewards in the dump are read against the frozen counter.
pub fn eval(checkpoint: &Path, episodes: usize, seed: u64, out: &Path, dump: bool) -> Result<EvalReport> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let st = &ckpt.state;
    let probe = Probe::new(st.config.env, st.config.seed).map_err(|e| anyhow!("{e}"))?;
    let reward_cfg = st.config.effective_reward();
    let mut records = Vec::new();
    let mut tracker = EpisodeRewardTracker::default();
    let mut current = usize::MAX;
    let mut failure = None;
    let mut ctl = PolicyController { policy: &st.policy, normalizer: &st.normalizer };
    let report = evaluate(&mut ctl, &st.config.env, episodes, seed, |episode, before, action, after, info| {
        if !dump || failure.is_some() {
            return;
        }
        if episode != current {
            tracker.reset();
            current = episode;
        }
        let mut step = || -> ccge_core::Result<TrajectoryRecord> {
            let hash = probe.hash(&st.hasher, st.config.variant, after.box_x)?;
            let contact = probe.contact(after, info.force)?;
            let (contact_raw, energy_raw) = probe.raw_rewards(after, &contact, &st.counter, hash, &reward_cfg)?;
            let (cs, es) = tracker.apply(contact_raw, energy_raw, &reward_cfg);
            let task = ccge_core::pushbox::task_reward(before, after, &st.config.env);
            Ok(TrajectoryRecord {
                episode,
                step: after.step_index,
                state: *after,
                action,
                reward: RewardBreakdown {
                    task,
                    contact_raw,
                    energy_raw,
                    contact_scaled: cs,
                    energy_scaled: es,
                    total: total_reward(task, cs, es),
                },
                contact,
                hash,
            })
        };
        match step() {
            Ok(r) => records.push(r),
            Err(e) => failure = Some(e),
        }
    })
    .map_err(|e| anyhow!("{e}"))?;
    if let Some(e) = failure {
        return Err(anyhow!("{e}"));
    }
    fs::create_dir_all(out)?;
    io::write_text(&out.join("eval.json"), &serde_json::to_string_pretty(&report)?)?;
    if dump {
        let mut w = JsonLines::create(&out.join("trajectory.jsonl"))?;
        for r in &records {
            w.write(r)?;
        }
        w.finish()?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub runs: Vec<RunSummary>,
}

impl AblationSummary {
    pub fn variant_runs(&self, v: Variant) -> impl Iterator<Item = &RunSummary> {
        self.runs.iter().filter(move |r| r.variant == v)
    }

    /// Mean and sample standard deviation of final success for `v`.
    pub fn stats(&self, v: Variant) -> (f64, f64) {
        mean_std(&self.variant_runs(v).map(|r| r.final_success).collect::<Vec<_>>())
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<14} {:>18}   per-seed success", "Method", "Success Rate (%)").unwrap();
        for v in [Variant::SingleState, Variant::Ccge, Variant::TaskOnly] {
            if self.variant_runs(v).next().is_none() {
                continue;
            }
            let (m, sd) = self.stats(v);
            let per: Vec<String> = self.variant_runs(v).map(|r| format!("{}:{:.2}", r.seed, r.final_success)).collect();
            let label = match v {
                Variant::SingleState => "Single-State",
                Variant::Ccge => "CCGE",
                Variant::TaskOnly => "Task-Only",
            };
            writeln!(s, "{:<14} {:>11.0} ± {:<4.0}   {}", label, 100.0 * m, 100.0 * sd, per.join(" ")).unwrap();
        }
        s
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Trains every `variants × seeds` combination under `out/<variant>/seed_<n>`
/// and writes `summary.txt` / `summary.json`.
pub fn ablate(cfg: &ExperimentConfig, variants: &[Variant], out: &Path, verbose: bool) -> Result<AblationSummary> {
    fs::create_dir_all(out)?;
    io::write_text(&out.join(io::CONFIG_FILE), &cfg.to_toml()?)?;
    let jobs: Vec<(Variant, u64)> = variants.iter().flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(variant, seed)| {
            let mut c = cfg.clone();
            c.train.variant = variant;
            c.train.seed = seed;
            train(&c, &run_dir(out, variant, seed), verbose)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = AblationSummary { runs };
    io::write_text(&out.join("summary.txt"), &summary.table())?;
    io::write_text(&out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

pub fn run_dir(out: &Path, variant: Variant, seed: u64) -> PathBuf {
    out.join(variant.name()).join(format!("seed_{seed}"))
}

/// Hash report over evaluation rollouts of a checkpoint, plus the region map
/// and counter table alongside.
pub fn export_clusters(checkpoint: &Path, episodes: usize, seed: u64, out: &Path) -> Result<ClusterReport> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let st = &ckpt.state;
    let probe = Probe::new(st.config.env, st.config.seed).map_err(|e| anyhow!("{e}"))?;
    let mut ctl = PolicyController { policy: &st.policy, normalizer: &st.normalizer };
    let report = cluster_report(&mut ctl, &probe, &st.hasher, st.config.variant, episodes, seed).map_err(|e| anyhow!("{e}"))?;
    fs::create_dir_all(out)?;
    io::write_text(&out.join("clusters.txt"), &cluster_text(&report))?;
    io::write_regions(&out.join("regions.jsonl"), &probe.surface.canonical, &probe.surface.regions)?;
    io::write_counter(&out.join("counter.tsv"), &st.counter)?;
    Ok(report)
}

pub fn cluster_text(report: &ClusterReport) -> String {
    let mut s = String::new();
    for side in &report.sides {
        writeln!(
            s,
            "# side {:?} samples {} modal {} purity {:.4} distinct {}",
            side.side, side.samples, side.modal.0, side.purity, side.distinct
        )
        .unwrap();
    }
    writeln!(s, "# separated_at_0.90 {}", report.separated(0.9)).unwrap();
    writeln!(s, "side\tepisode\tstep\tbox_x\thash").unwrap();
    for r in &report.samples {
        writeln!(s, "{:?}\t{}\t{}\t{:.6}\t{}", r.side, r.episode, r.step, r.box_x, r.hash.0).unwrap();
    }
    s
}
