//! Surface sampling, region clustering, rigid transforms, directional
//! weighting and segment/box occlusion.
//!
//! Everything here is generic over the spatial dimension `D` (2 or 3) and
//! operates on plain `[f64; D]` arrays.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, Error, Result};
use crate::vector::{self, Matrix, Vector};

const UNIT_TOLERANCE: f64 = 1e-6;

/// A sample on an object (or keypoint on a finger) with its outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint<const D: usize> {
    pub position: Vector<D>,
    pub normal: Vector<D>,
}

impl<const D: usize> SurfacePoint<D> {
    pub fn new(position: Vector<D>, normal: Vector<D>) -> Result<Self> {
        if position.iter().any(|v| !v.is_finite()) {
            return Err(arg_err!("surface point position is not finite"));
        }
        if (vector::norm(&normal) - 1.0).abs() > UNIT_TOLERANCE {
            return Err(arg_err!("surface normal is not unit length"));
        }
        Ok(Self { position, normal })
    }
}

/// Clustering of surface samples into `K` labelled regions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap<const D: usize> {
    pub centers: Vec<Vector<D>>,
    pub mean_normals: Vec<Vector<D>>,
    /// Region index (0-based) of every sample.
    pub labels: Vec<usize>,
}

impl<const D: usize> RegionMap<D> {
    pub fn region_count(&self) -> usize {
        self.centers.len()
    }

    pub fn label(&self, sample: usize) -> usize {
        self.labels[sample]
    }

    /// Number of samples per region.
    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.region_count()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Rigid transform `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<const D: usize> {
    pub translation: Vector<D>,
    pub rotation: Matrix<D>,
}

impl<const D: usize> Pose<D> {
    pub fn new(translation: Vector<D>, rotation: Matrix<D>) -> Result<Self> {
        if vector::orthonormality_error(&rotation) > UNIT_TOLERANCE {
            return Err(arg_err!("pose rotation is not orthonormal"));
        }
        Ok(Self { translation, rotation })
    }

    pub fn identity() -> Self {
        Self { translation: [0.0; D], rotation: vector::identity() }
    }

    pub fn from_translation(translation: Vector<D>) -> Self {
        Self { translation, rotation: vector::identity() }
    }

    pub fn apply_point(&self, p: &Vector<D>) -> Vector<D> {
        vector::add(&vector::mat_vec(&self.rotation, p), &self.translation)
    }

    pub fn apply_vector(&self, v: &Vector<D>) -> Vector<D> {
        vector::mat_vec(&self.rotation, v)
    }
}

impl Pose<2> {
    pub fn planar(x: f64, y: f64, angle: f64) -> Self {
        Self { translation: [x, y], rotation: vector::rotation_2d(angle) }
    }
}

/// Box with arbitrary orientation: local frame columns are the rotation's columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox<const D: usize> {
    pub center: Vector<D>,
    pub half_extents: Vector<D>,
    pub rotation: Matrix<D>,
}

impl<const D: usize> OrientedBox<D> {
    pub fn new(center: Vector<D>, half_extents: Vector<D>, rotation: Matrix<D>) -> Result<Self> {
        if half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(arg_err!("box half extents must be positive"));
        }
        if vector::orthonormality_error(&rotation) > UNIT_TOLERANCE {
            return Err(arg_err!("box rotation is not orthonormal"));
        }
        Ok(Self { center, half_extents, rotation })
    }

    pub fn axis_aligned(center: Vector<D>, half_extents: Vector<D>) -> Result<Self> {
        Self::new(center, half_extents, vector::identity())
    }

    /// Coordinates of `p` in the box frame.
    pub fn to_local(&self, p: &Vector<D>) -> Vector<D> {
        vector::mat_t_vec(&self.rotation, &vector::sub(p, &self.center))
    }

    pub fn contains(&self, p: &Vector<D>) -> bool {
        let local = self.to_local(p);
        local.iter().zip(&self.half_extents).all(|(x, h)| x.abs() <= *h)
    }
}

/// Parametric primitives whose boundary can be sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeSpec {
    /// Perimeter of an axis-aligned rectangle centred at the origin.
    Rectangle { width: f64, height: f64 },
    /// Surface of an axis-aligned box centred at the origin.
    Cuboid { size: [f64; 3] },
}

impl ShapeSpec {
    pub fn dimension(&self) -> usize {
        match self {
            ShapeSpec::Rectangle { .. } => 2,
            ShapeSpec::Cuboid { .. } => 3,
        }
    }
}

/// Placement of samples inside each arc-length (or area) stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Stratum centres; the seed is unused.
    #[default]
    Stratified,
    /// Uniform position inside each stratum, drawn from the seed.
    Jittered,
}

/// Samples `m` points with outward normals on the boundary of `shape`.
///
/// The boundary measure (arc length in 2D, area in 3D) is split into `m`
/// equal strata with one point per stratum.
pub fn sample_surface_points<const D: usize>(
    shape: &ShapeSpec,
    m: usize,
    sampling: Sampling,
    seed: u64,
) -> Result<Vec<SurfacePoint<D>>> {
    if shape.dimension() != D {
        return Err(Error::Configuration(alloc::format!(
            "{shape:?} cannot be sampled into {D}-dimensional points"
        )));
    }
    if m == 0 {
        return Err(arg_err!("sample count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offset = || match sampling {
        Sampling::Stratified => 0.5,
        Sampling::Jittered => rng.random::<f64>(),
    };
    let mut out = Vec::with_capacity(m);
    match *shape {
        ShapeSpec::Rectangle { width, height } => {
            if !(width > 0.0 && height > 0.0) {
                return Err(Error::Configuration("rectangle sides must be positive".into()));
            }
            let perimeter = 2.0 * (width + height);
            for j in 0..m {
                let s = (j as f64 + offset()) * perimeter / m as f64;
                let (p, n) = rectangle_point(width, height, s);
                out.push(lift(&p, &n));
            }
        }
        ShapeSpec::Cuboid { size } => {
            if size.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::Configuration("cuboid sides must be positive".into()));
            }
            let faces = cuboid_faces(size);
            let areas: Vec<f64> = faces.iter().map(|f| f.extent[0] * f.extent[1]).collect();
            let counts = largest_remainder(&areas, m);
            for (face, &count) in faces.iter().zip(&counts) {
                if count == 0 {
                    continue;
                }
                let ratio = face.extent[0] / face.extent[1];
                let cols = (libm::ceil(libm::sqrt(count as f64 * ratio)) as usize).max(1);
                let rows = count.div_ceil(cols);
                let cells = rows * cols;
                for i in 0..count {
                    // spread the used cells evenly when the grid is not full
                    let cell = i * cells / count;
                    let (r, c) = (cell / cols, cell % cols);
                    let u = (c as f64 + offset()) / cols as f64 - 0.5;
                    let v = (r as f64 + offset()) / rows as f64 - 0.5;
                    let mut p = face.center;
                    for (a, x) in p.iter_mut().enumerate() {
                        *x += u * face.extent[0] * face.u[a] + v * face.extent[1] * face.v[a];
                    }
                    out.push(lift(&p, &face.normal));
                }
            }
        }
    }
    Ok(out)
}

fn lift<const D: usize, const E: usize>(p: &[f64; E], n: &[f64; E]) -> SurfacePoint<D> {
    let mut position = [0.0; D];
    let mut normal = [0.0; D];
    position.copy_from_slice(p);
    normal.copy_from_slice(n);
    SurfacePoint { position, normal }
}

/// Point at arc length `s` walking counter-clockwise from the bottom-left corner.
fn rectangle_point(width: f64, height: f64, s: f64) -> ([f64; 2], [f64; 2]) {
    let (hw, hh) = (width / 2.0, height / 2.0);
    if s < width {
        ([-hw + s, -hh], [0.0, -1.0])
    } else if s < width + height {
        ([hw, -hh + (s - width)], [1.0, 0.0])
    } else if s < 2.0 * width + height {
        ([hw - (s - width - height), hh], [0.0, 1.0])
    } else {
        ([-hw, (hh - (s - 2.0 * width - height)).max(-hh)], [-1.0, 0.0])
    }
}

struct Face {
    center: [f64; 3],
    normal: [f64; 3],
    u: [f64; 3],
    v: [f64; 3],
    extent: [f64; 2],
}

fn cuboid_faces(size: [f64; 3]) -> Vec<Face> {
    let mut faces = Vec::with_capacity(6);
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        for sign in [1.0, -1.0] {
            let mut center = [0.0; 3];
            center[axis] = sign * size[axis] / 2.0;
            let mut normal = [0.0; 3];
            normal[axis] = sign;
            let mut u = [0.0; 3];
            u[a] = 1.0;
            let mut v = [0.0; 3];
            v[b] = 1.0;
            faces.push(Face { center, normal, u, v, extent: [size[a], size[b]] });
        }
    }
    faces
}

/// Apportions `total` items proportionally to `weights` (Hamilton's method).
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| libm::floor(*q) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (quotas[i] - counts[i] as f64, quotas[j] - counts[j] as f64);
        rj.partial_cmp(&ri).unwrap_or(core::cmp::Ordering::Equal).then(i.cmp(&j))
    });
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Greedy max-min selection of `k` indices, with the first index drawn from `seed`.
pub fn farthest_point_sample<const D: usize>(
    points: &[Vector<D>],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(arg_err!("cannot sample from an empty point set"));
    }
    let start = ChaCha8Rng::seed_from_u64(seed).random_range(0..points.len());
    farthest_point_sample_from(points, k, start)
}

/// Farthest-point sampling from an explicit start index. Ties go to the lowest index.
pub fn farthest_point_sample_from<const D: usize>(
    points: &[Vector<D>],
    k: usize,
    start: usize,
) -> Result<Vec<usize>> {
    if k > points.len() {
        return Err(arg_err!("requested {k} samples from {} points", points.len()));
    }
    if start >= points.len() {
        return Err(arg_err!("start index {start} out of range"));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut selected = Vec::with_capacity(k);
    selected.push(start);
    let mut nearest: Vec<f64> = points.iter().map(|p| vector::distance(p, &points[start])).collect();
    while selected.len() < k {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in nearest.iter().enumerate() {
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        selected.push(best);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(vector::distance(p, &points[best]));
        }
    }
    Ok(selected)
}

/// Options for [`cluster_regions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    pub regions: usize,
    /// Weight of the normal-disagreement term, in `[0, 1]`.
    pub normal_weight: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl ClusterOptions {
    pub fn new(regions: usize, normal_weight: f64, seed: u64) -> Self {
        Self { regions, normal_weight, max_iters: 100, seed }
    }
}

/// Region clustering plus the total assignment cost after every assignment pass.
#[derive(Debug, Clone)]
pub struct ClusterResult<const D: usize> {
    pub map: RegionMap<D>,
    pub cost_history: Vec<f64>,
    pub iterations: usize,
}

/// `d(m,k) = (1−λ)‖p − μ‖ + λ(1 − nᵀ n̄)`
#[inline]
pub fn region_distance<const D: usize>(
    point: &SurfacePoint<D>,
    center: &Vector<D>,
    mean_normal: &Vector<D>,
    normal_weight: f64,
) -> f64 {
    (1.0 - normal_weight) * vector::distance(&point.position, center)
        + normal_weight * (1.0 - vector::dot(&point.normal, mean_normal))
}

pub fn cluster_regions<const D: usize>(
    points: &[SurfacePoint<D>],
    options: ClusterOptions,
) -> Result<RegionMap<D>> {
    cluster_regions_traced(points, options).map(|r| r.map)
}

/// Lloyd-style clustering with a position + normal assignment metric.
///
/// Centers start at farthest-point samples. The positional update takes a
/// Weiszfeld step toward the geometric median (the minimiser of the unsquared
/// distance sum) and is only accepted when it does not raise the cluster
/// cost, so the total assignment cost never increases between passes.
pub fn cluster_regions_traced<const D: usize>(
    points: &[SurfacePoint<D>],
    options: ClusterOptions,
) -> Result<ClusterResult<D>> {
    let ClusterOptions { regions: k, normal_weight: lambda, max_iters, seed } = options;
    if k == 0 || k > points.len() {
        return Err(arg_err!("region count {k} must be in 1..={}", points.len()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(arg_err!("normal weight {lambda} outside [0, 1]"));
    }
    let positions: Vec<Vector<D>> = points.iter().map(|p| p.position).collect();
    let seeds = farthest_point_sample(&positions, k, seed)?;
    let mut centers: Vec<Vector<D>> = seeds.iter().map(|&i| points[i].position).collect();
    let mut normals: Vec<Vector<D>> = seeds.iter().map(|&i| points[i].normal).collect();
    let mut labels: Vec<usize> = vec![usize::MAX; points.len()];
    let mut cost_history = Vec::new();
    let mut iterations = 0;

    loop {
        let (new_labels, cost) = assign(points, &centers, &normals, lambda);
        let (new_labels, cost, reseeded) =
            reseed_empty(points, new_labels, cost, &mut centers, &mut normals, lambda);
        cost_history.push(cost);
        let converged = !reseeded && new_labels == labels;
        labels = new_labels;
        if converged || iterations >= max_iters {
            break;
        }
        iterations += 1;
        update_centers(points, &labels, &mut centers, &mut normals, lambda);
    }

    Ok(ClusterResult {
        map: RegionMap { centers, mean_normals: normals, labels },
        cost_history,
        iterations,
    })
}

fn assign<const D: usize>(
    points: &[SurfacePoint<D>],
    centers: &[Vector<D>],
    normals: &[Vector<D>],
    lambda: f64,
) -> (Vec<usize>, f64) {
    let mut total = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (mut best, mut best_d) = (0, f64::INFINITY);
            for (k, (c, n)) in centers.iter().zip(normals.iter()).enumerate() {
                let d = region_distance(p, c, n, lambda);
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            total += best_d;
            best
        })
        .collect();
    (labels, total)
}

/// Moves each empty region onto the currently worst-assigned point.
fn reseed_empty<const D: usize>(
    points: &[SurfacePoint<D>],
    mut labels: Vec<usize>,
    mut cost: f64,
    centers: &mut [Vector<D>],
    normals: &mut [Vector<D>],
    lambda: f64,
) -> (Vec<usize>, f64, bool) {
    let k = centers.len();
    let mut reseeded = false;
    loop {
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return (labels, cost, reseeded);
        };
        let mut worst = None;
        let mut worst_d = f64::NEG_INFINITY;
        for (m, p) in points.iter().enumerate() {
            if sizes[labels[m]] < 2 {
                continue;
            }
            let d = region_distance(p, &centers[labels[m]], &normals[labels[m]], lambda);
            if d > worst_d {
                worst = Some(m);
                worst_d = d;
            }
        }
        let Some(m) = worst else {
            return (labels, cost, reseeded);
        };
        reseeded = true;
        centers[empty] = points[m].position;
        normals[empty] = points[m].normal;
        cost -= worst_d;
        labels[m] = empty;
    }
}

fn update_centers<const D: usize>(
    points: &[SurfacePoint<D>],
    labels: &[usize],
    centers: &mut [Vector<D>],
    normals: &mut [Vector<D>],
    lambda: f64,
) {
    for k in 0..centers.len() {
        let members: Vec<&SurfacePoint<D>> =
            points.iter().zip(labels).filter(|(_, &l)| l == k).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        let mut normal_sum = [0.0; D];
        for p in &members {
            normal_sum = vector::add(&normal_sum, &p.normal);
        }
        if let Some(n) = vector::normalize(&normal_sum) {
            normals[k] = n;
        }
        if lambda < 1.0 {
            let spread = |c: &Vector<D>| -> f64 {
                members.iter().map(|p| vector::distance(&p.position, c)).sum()
            };
            let candidate = weiszfeld_step(&members, &centers[k]);
            if spread(&candidate) <= spread(&centers[k]) {
                centers[k] = candidate;
            }
        }
    }
}

fn weiszfeld_step<const D: usize>(members: &[&SurfacePoint<D>], current: &Vector<D>) -> Vector<D> {
    let mut num = [0.0; D];
    let mut den = 0.0;
    for p in members {
        let d = vector::distance(&p.position, current);
        if d < 1e-12 {
            continue;
        }
        num = vector::add(&num, &vector::scale(&p.position, 1.0 / d));
        den += 1.0 / d;
    }
    if den == 0.0 {
        *current
    } else {
        vector::scale(&num, 1.0 / den)
    }
}

/// Applies `pose` to positions and normals.
pub fn transform_points<const D: usize>(
    points: &[SurfacePoint<D>],
    pose: &Pose<D>,
) -> Vec<SurfacePoint<D>> {
    points
        .iter()
        .map(|p| SurfacePoint {
            position: pose.apply_point(&p.position),
            normal: pose.apply_vector(&p.normal),
        })
        .collect()
}

#[inline]
fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Product of the back-face term `[cos∠(p_kp − p_s, n_s)]₊` and the
/// palm-facing term `[−cos∠(d_kp, n_s)]₊`, with `[·]₊` clamping to `[0, 1]`.
///
/// Coincident keypoint and surface point give 0.
pub fn directional_weight<const D: usize>(
    keypoint: &Vector<D>,
    keypoint_direction: &Vector<D>,
    surface: &Vector<D>,
    surface_normal: &Vector<D>,
) -> f64 {
    let Some(v) = vector::normalize(&vector::sub(keypoint, surface)) else {
        return 0.0;
    };
    let n_norm = vector::norm(surface_normal);
    let d_norm = vector::norm(keypoint_direction);
    if n_norm == 0.0 || d_norm == 0.0 {
        return 0.0;
    }
    let w_obj = clamp_unit(vector::dot(&v, surface_normal) / n_norm);
    let w_kp = clamp_unit(-vector::dot(keypoint_direction, surface_normal) / (d_norm * n_norm));
    w_obj * w_kp
}

/// Shrinks the segment's parameter interval at both ends; endpoints on a
/// box face are therefore never reported as occluded.
pub const SEGMENT_EPSILON: f64 = 1e-9;

/// True iff the open segment `origin + t (target − origin)`, `t ∈ (0, 1)`,
/// meets the box. Slab test in the box frame.
pub fn ray_box_occluded<const D: usize>(
    origin: &Vector<D>,
    target: &Vector<D>,
    obb: &OrientedBox<D>,
) -> bool {
    let o = obb.to_local(origin);
    let dir = vector::mat_t_vec(&obb.rotation, &vector::sub(target, origin));
    let mut t_enter = SEGMENT_EPSILON;
    let mut t_exit = 1.0 - SEGMENT_EPSILON;
    for axis in 0..D {
        let h = obb.half_extents[axis];
        if dir[axis] == 0.0 {
            if o[axis].abs() > h {
                return false;
            }
            continue;
        }
        let inv = 1.0 / dir[axis];
        let mut t0 = (-h - o[axis]) * inv;
        let mut t1 = (h - o[axis]) * inv;
        if t0 > t1 {
            core::mem::swap(&mut t0, &mut t1);
        }
        t_enter = t_enter.max(t0);
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return false;
        }
    }
    true
}

/// Occlusion against any of several boxes.
pub fn segment_occluded<const D: usize>(
    origin: &Vector<D>,
    target: &Vector<D>,
    occluders: &[OrientedBox<D>],
) -> bool {
    occluders.iter().any(|b| ray_box_occluded(origin, target, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::rotation_2d;

    fn sp2(p: [f64; 2], n: [f64; 2]) -> SurfacePoint<2> {
        SurfacePoint::new(p, n).unwrap()
    }

    #[test]
    fn four_point_square_puts_one_point_on_each_side() {
        let pts: Vec<SurfacePoint<2>> = sample_surface_points(
            &ShapeSpec::Rectangle { width: 1.0, height: 1.0 },
            4,
            Sampling::Stratified,
            0,
        )
        .unwrap();
        let normals: Vec<[f64; 2]> = pts.iter().map(|p| p.normal).collect();
        assert_eq!(normals, vec![[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]);
        assert_eq!(pts[0].position, [0.0, -0.5]);
        assert_eq!(pts[1].position, [0.5, 0.0]);
    }

    #[test]
    fn sixteen_points_split_four_per_side() {
        // Oracle: each side owns the arc-length interval [i, i+1) of the unit
        // square perimeter; stratum j has its centre at (j + 0.5) / 4.
        let mut expected = [0usize; 4];
        for j in 0..16 {
            let s = (j as f64 + 0.5) / 4.0;
            expected[libm::floor(s) as usize] += 1;
        }
        for sampling in [Sampling::Stratified, Sampling::Jittered] {
            let pts: Vec<SurfacePoint<2>> = sample_surface_points(
                &ShapeSpec::Rectangle { width: 1.0, height: 1.0 },
                16,
                sampling,
                11,
            )
            .unwrap();
            let mut per_side = [0usize; 4];
            for p in &pts {
                let side = match p.normal {
                    [x, y] if y < -0.5 && x.abs() < 0.5 => 0,
                    [x, _] if x > 0.5 => 1,
                    [_, y] if y > 0.5 => 2,
                    _ => 3,
                };
                per_side[side] += 1;
                // point lies on its side
                assert!((vector::dot(&p.position, &p.normal) - 0.5).abs() < 1e-12);
            }
            assert_eq!(per_side, expected);
            assert_eq!(per_side, [4, 4, 4, 4]);
        }
    }

    #[test]
    fn cube_faces_get_equal_counts() {
        let pts: Vec<SurfacePoint<3>> = sample_surface_points(
            &ShapeSpec::Cuboid { size: [1.0, 1.0, 1.0] },
            600,
            Sampling::Jittered,
            5,
        )
        .unwrap();
        assert_eq!(pts.len(), 600);
        let mut per_face = [0usize; 6];
        for p in &pts {
            let axis = (0..3).find(|&a| p.normal[a] != 0.0).unwrap();
            let idx = axis * 2 + usize::from(p.normal[axis] < 0.0);
            per_face[idx] += 1;
            assert!((vector::dot(&p.position, &p.normal) - 0.5).abs() < 1e-12);
            assert!(p.position.iter().all(|c| c.abs() <= 0.5 + 1e-12));
        }
        assert_eq!(per_face, [100; 6]);
    }

    #[test]
    fn sampling_is_deterministic_and_dimension_checked() {
        let shape = ShapeSpec::Rectangle { width: 0.3, height: 0.1 };
        let a: Vec<SurfacePoint<2>> = sample_surface_points(&shape, 10, Sampling::Jittered, 9).unwrap();
        let b: Vec<SurfacePoint<2>> = sample_surface_points(&shape, 10, Sampling::Jittered, 9).unwrap();
        assert_eq!(a, b);
        let err = sample_surface_points::<3>(&shape, 10, Sampling::Stratified, 0).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
        let bad = ShapeSpec::Rectangle { width: 0.0, height: 1.0 };
        assert!(matches!(
            sample_surface_points::<2>(&bad, 4, Sampling::Stratified, 0),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn fps_collinear() {
        let pts = [[0.0], [1.0], [10.0]];
        assert_eq!(farthest_point_sample_from(&pts, 2, 0).unwrap(), vec![0, 2]);
        let mut all = farthest_point_sample_from(&pts, 3, 1).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
        assert!(farthest_point_sample(&pts, 4, 0).is_err());
    }

    #[test]
    fn fps_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<[f64; 2]> = (0..50).map(|_| [rng.random(), rng.random()]).collect();
        let chosen = farthest_point_sample(&pts, 5, 42).unwrap();
        for step in 1..chosen.len() {
            let selected = &chosen[..step];
            let min_to_set = |i: usize| {
                selected.iter().map(|&s| vector::distance(&pts[i], &pts[s])).fold(f64::INFINITY, f64::min)
            };
            let best = (0..pts.len()).map(min_to_set).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(min_to_set(chosen[step]), best);
        }
        assert_eq!(chosen, farthest_point_sample(&pts, 5, 42).unwrap());
    }

    #[test]
    fn positional_kmeans_on_separated_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = Vec::new();
        for blob in [[0.0, 0.0], [5.0, 5.0]] {
            for _ in 0..20 {
                let p = [blob[0] + rng.random::<f64>() * 0.5, blob[1] + rng.random::<f64>() * 0.5];
                let a: f64 = rng.random::<f64>() * core::f64::consts::TAU;
                pts.push(sp2(p, [libm::cos(a), libm::sin(a)]));
            }
        }
        let map = cluster_regions(&pts, ClusterOptions::new(2, 0.0, 3)).unwrap();
        assert!(map.labels[..20].iter().all(|&l| l == map.labels[0]));
        assert!(map.labels[20..].iter().all(|&l| l == map.labels[20]));
        assert_ne!(map.labels[0], map.labels[20]);
    }

    #[test]
    fn pure_normal_metric_splits_by_sign() {
        let pts: Vec<SurfacePoint<2>> = (0..10)
            .map(|i| sp2([0.3, 0.3], if i % 2 == 0 { [1.0, 0.0] } else { [-1.0, 0.0] }))
            .collect();
        let map = cluster_regions(&pts, ClusterOptions::new(2, 1.0, 0)).unwrap();
        for (i, &l) in map.labels.iter().enumerate() {
            assert_eq!(l, map.labels[i % 2]);
        }
        assert_ne!(map.labels[0], map.labels[1]);
    }

    #[test]
    fn empty_cluster_gets_reseeded() {
        // duplicate points force FPS to pick coincident seeds for K=3
        let pts = vec![
            sp2([0.0, 0.0], [1.0, 0.0]),
            sp2([0.0, 0.0], [1.0, 0.0]),
            sp2([0.0, 0.0], [1.0, 0.0]),
            sp2([1.0, 0.0], [1.0, 0.0]),
        ];
        let map = cluster_regions(&pts, ClusterOptions::new(3, 0.0, 0)).unwrap();
        assert!(map.region_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn cluster_rejects_bad_arguments() {
        let pts = vec![sp2([0.0, 0.0], [1.0, 0.0])];
        assert!(cluster_regions(&pts, ClusterOptions::new(2, 0.5, 0)).is_err());
        assert!(cluster_regions(&pts, ClusterOptions::new(1, 1.5, 0)).is_err());
    }

    #[test]
    fn transforms() {
        let pts = vec![sp2([0.2, -0.1], [1.0, 0.0])];
        assert_eq!(transform_points(&pts, &Pose::identity()), pts);
        let moved = transform_points(&pts, &Pose::from_translation([1.0, 2.0]));
        assert_eq!(moved[0].normal, [1.0, 0.0]);
        assert!((moved[0].position[0] - 1.2).abs() < 1e-15 && (moved[0].position[1] - 1.9).abs() < 1e-15);
        let rotated = transform_points(&pts, &Pose::planar(0.0, 0.0, core::f64::consts::FRAC_PI_2));
        assert!((rotated[0].normal[0]).abs() < 1e-9 && (rotated[0].normal[1] - 1.0).abs() < 1e-9);
        assert!(Pose::new([0.0, 0.0], [[1.0, 0.0], [0.0, 2.0]]).is_err());
    }

    #[test]
    fn directional_weight_examples() {
        let n = [0.0, 0.0, 1.0];
        let s = [0.0, 0.0, 0.0];
        assert_eq!(directional_weight(&[0.0, 0.0, 1.0], &[0.0, 0.0, -1.0], &s, &n), 1.0);
        assert_eq!(directional_weight(&[0.0, 0.0, -1.0], &[0.0, 0.0, -1.0], &s, &n), 0.0);
        let sixty = core::f64::consts::FRAC_PI_3;
        let kp = [libm::sin(sixty), 0.0, libm::cos(sixty)];
        assert!((directional_weight(&kp, &[0.0, 0.0, -1.0], &s, &n) - 0.5).abs() < 1e-12);
        assert_eq!(directional_weight(&s, &[0.0, 0.0, -1.0], &s, &n), 0.0);
    }

    #[test]
    fn occlusion_examples() {
        let b = OrientedBox::new([0.0, 0.0], [0.5, 0.25], rotation_2d(0.3)).unwrap();
        assert!(ray_box_occluded(&[-2.0, 0.0], &[2.0, 0.0], &b));
        assert!(!ray_box_occluded(&[-2.0, 2.0], &[2.0, 2.0], &b));
        // ends on the surface: not occluded
        let aabb = OrientedBox::axis_aligned([0.0, 0.0], [0.5, 0.5]).unwrap();
        assert!(!ray_box_occluded(&[-2.0, 0.0], &[-0.5, 0.0], &aabb));
        assert!(!ray_box_occluded(&[-0.5, 0.0], &[-2.0, 0.0], &aabb));
        // into the far face goes through the interior
        assert!(ray_box_occluded(&[-2.0, 0.0], &[0.5, 0.0], &aabb));
        assert!(OrientedBox::axis_aligned([0.0, 0.0], [0.0, 1.0]).is_err());
    }
}
