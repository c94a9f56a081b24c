//! Count-based contact reward, energy-based reaching reward and the
//! episodic-progress scaling applied to both.

use alloc::vec::Vec;

use crate::coverage::{count_weight, ContactEvent, CoverageCounter};
use crate::error::{arg_err, Result};
use crate::geometry::{directional_weight, segment_occluded, OrientedBox, RegionMap, SurfacePoint};
use crate::state_hash::HashIndex;
use crate::vector;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RewardConfig {
    /// α
    pub contact_scale: f64,
    /// β
    pub energy_scale: f64,
    /// δ, meters.
    pub energy_decay: f64,
    pub use_directional: bool,
    pub use_occlusion: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            contact_scale: 200.0,
            energy_scale: 1.28,
            // 0.1 × the diagonal of a 0.1 m square
            energy_decay: 0.1 * core::f64::consts::SQRT_2 * 0.1,
            use_directional: false,
            use_occlusion: true,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.contact_scale >= 0.0 && self.energy_scale >= 0.0) {
            return Err(arg_err!("reward scales must be nonnegative"));
        }
        if !(self.energy_decay > 0.0) {
            return Err(arg_err!("energy decay must be positive"));
        }
        Ok(())
    }
}

/// Running per-episode maxima of the raw exploration rewards.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeRewardTracker {
    pub contact_max: f64,
    pub energy_max: f64,
}

impl EpisodeRewardTracker {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Scales both raw rewards against their running maxima and advances the maxima.
    pub fn apply(&mut self, raw_contact: f64, raw_energy: f64, config: &RewardConfig) -> (f64, f64) {
        let (c, cmax) = scale_progress(raw_contact, self.contact_max, config.contact_scale);
        let (e, emax) = scale_progress(raw_energy, self.energy_max, config.energy_scale);
        self.contact_max = cmax;
        self.energy_max = emax;
        (c, e)
    }
}

/// `(1/F) Σ_f 𝕀(f) g(C[s][f][k_f])`, read after this step's increments.
pub fn contact_reward(events: &[ContactEvent], counter: &CoverageCounter, s: HashIndex, fingers: usize) -> f64 {
    if fingers == 0 {
        return 0.0;
    }
    let sum: f64 = events
        .iter()
        .filter(|e| e.in_contact)
        .map(|e| count_weight(counter.get(s, e.finger, e.region)))
        .sum();
    sum / fingers as f64
}

/// Contact energy of one finger keypoint:
/// `Φ_f = Σ_m g(C[s][f][ξ(m)]) · w_dir · w_occ · exp(−‖p_l − p_m‖ / δ)`.
///
/// `w_dir` and `w_occ` are 1 when disabled in `config`.
#[allow(clippy::too_many_arguments)]
pub fn finger_energy<const D: usize>(
    keypoint: &SurfacePoint<D>,
    object_points: &[SurfacePoint<D>],
    regions: &RegionMap<D>,
    counter: &CoverageCounter,
    s: HashIndex,
    finger: usize,
    config: &RewardConfig,
    occluders: &[OrientedBox<D>],
) -> f64 {
    let region_weight: Vec<f64> =
        (0..regions.region_count()).map(|k| count_weight(counter.get(s, finger, k))).collect();
    object_points
        .iter()
        .zip(&regions.labels)
        .map(|(point, &k)| {
            let mut w = region_weight[k];
            if config.use_directional {
                w *= directional_weight(&keypoint.position, &keypoint.normal, &point.position, &point.normal);
            }
            if w == 0.0 {
                return 0.0;
            }
            if config.use_occlusion && segment_occluded(&keypoint.position, &point.position, occluders) {
                return 0.0;
            }
            w * libm::exp(-vector::distance(&keypoint.position, &point.position) / config.energy_decay)
        })
        .sum()
}

/// Mean of the per-finger energies.
pub fn energy_reward(finger_energies: &[f64]) -> Result<f64> {
    if finger_energies.is_empty() {
        return Err(arg_err!("energy reward needs at least one finger"));
    }
    Ok(finger_energies.iter().sum::<f64>() / finger_energies.len() as f64)
}

/// `coefficient · [r − max]₊` together with the updated running max.
#[inline]
pub fn scale_progress(reward: f64, running_max: f64, coefficient: f64) -> (f64, f64) {
    (coefficient * (reward - running_max).max(0.0), running_max.max(reward))
}

#[inline]
pub fn total_reward(task: f64, scaled_contact: f64, scaled_energy: f64) -> f64 {
    task + scaled_contact + scaled_energy
}

/// Per-step reward decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardBreakdown {
    pub task: f64,
    pub contact_raw: f64,
    pub energy_raw: f64,
    pub contact_scaled: f64,
    pub energy_scaled: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn exploration(&self) -> f64 {
        self.contact_scaled + self.energy_scaled
    }
}
