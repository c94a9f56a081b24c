//! Keypoint/surface contact matching and the state-conditioned contact
//! coverage counter `C[s][f][k]`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{arg_err, Result};
use crate::geometry::SurfacePoint;
use crate::state_hash::HashIndex;
use crate::vector;

/// Closest keypoint/object-point pair for one finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPair {
    pub keypoint: usize,
    pub surface_point: usize,
    pub distance: f64,
}

/// Outcome of contact matching and detection for one finger at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContactEvent {
    pub finger: usize,
    pub keypoint: usize,
    pub surface_point: usize,
    pub region: usize,
    pub distance: f64,
    pub force_magnitude: f64,
    pub in_contact: bool,
}

/// Argmin of Euclidean distance over all keypoint/object-point pairs.
/// Ties resolve to the lowest keypoint index, then the lowest point index.
pub fn contact_match<const D: usize>(
    finger_keypoints: &[SurfacePoint<D>],
    object_points: &[SurfacePoint<D>],
) -> Result<ContactPair> {
    if finger_keypoints.is_empty() || object_points.is_empty() {
        return Err(arg_err!("contact matching needs keypoints and object points"));
    }
    let mut best = ContactPair { keypoint: 0, surface_point: 0, distance: f64::INFINITY };
    for (l, kp) in finger_keypoints.iter().enumerate() {
        for (m, op) in object_points.iter().enumerate() {
            let d = vector::distance(&kp.position, &op.position);
            if d < best.distance {
                best = ContactPair { keypoint: l, surface_point: m, distance: d };
            }
        }
    }
    Ok(best)
}

/// Contact requires both proximity (`distance < δ_dist`) and force (`|F| > δ_force`).
#[inline]
pub fn detect_contact(distance: f64, force_magnitude: f64, distance_threshold: f64, force_threshold: f64) -> bool {
    distance < distance_threshold && force_magnitude > force_threshold
}

/// `g(c) = 1 / sqrt(c + 1)`
#[inline]
pub fn count_weight(count: u64) -> f64 {
    1.0 / libm::sqrt(count as f64 + 1.0)
}

/// Contact counts per hash cluster, finger and surface region.
///
/// Slices are created on first increment; an absent cluster reads as zeros.
/// Counts only ever grow.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageCounter {
    fingers: usize,
    regions: usize,
    table: BTreeMap<HashIndex, Vec<u64>>,
}

impl CoverageCounter {
    pub fn new(fingers: usize, regions: usize) -> Self {
        Self { fingers, regions, table: BTreeMap::new() }
    }

    pub fn fingers(&self) -> usize {
        self.fingers
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    fn check(&self, finger: usize, region: usize) -> Result<()> {
        if finger >= self.fingers || region >= self.regions {
            return Err(arg_err!(
                "counter index (f={finger}, k={region}) outside {}x{}",
                self.fingers,
                self.regions
            ));
        }
        Ok(())
    }

    pub fn get(&self, s: HashIndex, finger: usize, region: usize) -> u64 {
        if finger >= self.fingers || region >= self.regions {
            return 0;
        }
        self.table.get(&s).map_or(0, |slice| slice[finger * self.regions + region])
    }

    /// The `F × K` slice for cluster `s` (all zeros when never touched).
    pub fn slice(&self, s: HashIndex) -> Vec<u64> {
        self.table.get(&s).cloned().unwrap_or_else(|| vec![0; self.fingers * self.regions])
    }

    /// Adds one to `C[s][f][k]` and returns the new value.
    pub fn increment(&mut self, s: HashIndex, finger: usize, region: usize) -> Result<u64> {
        self.check(finger, region)?;
        let width = self.fingers * self.regions;
        let slice = self.table.entry(s).or_insert_with(|| vec![0; width]);
        let entry = &mut slice[finger * self.regions + region];
        *entry += 1;
        Ok(*entry)
    }

    /// Clusters with a materialised slice.
    pub fn clusters(&self) -> impl Iterator<Item = HashIndex> + '_ {
        self.table.keys().copied()
    }

    /// Number of nonzero `(s, f, k)` entries.
    pub fn occupancy(&self) -> usize {
        self.table.values().map(|s| s.iter().filter(|&&c| c > 0).count()).sum()
    }

    pub fn total(&self) -> u64 {
        self.table.values().flat_map(|s| s.iter()).sum()
    }

    /// Every stored `(s, f, k, count)`, ordered by cluster then finger then region.
    pub fn entries(&self) -> Vec<(HashIndex, usize, usize, u64)> {
        let mut out = Vec::new();
        for (&s, slice) in &self.table {
            for f in 0..self.fingers {
                for k in 0..self.regions {
                    out.push((s, f, k, slice[f * self.regions + k]));
                }
            }
        }
        out
    }
}
