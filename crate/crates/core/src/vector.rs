//! Fixed-dimension vector and matrix helpers over plain arrays.

pub type Vector<const D: usize> = [f64; D];
pub type Matrix<const D: usize> = [[f64; D]; D];

#[inline]
pub fn dot<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sub<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> Vector<D> {
    core::array::from_fn(|i| a[i] - b[i])
}

#[inline]
pub fn add<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> Vector<D> {
    core::array::from_fn(|i| a[i] + b[i])
}

#[inline]
pub fn scale<const D: usize>(a: &Vector<D>, s: f64) -> Vector<D> {
    core::array::from_fn(|i| a[i] * s)
}

#[inline]
pub fn norm<const D: usize>(a: &Vector<D>) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn distance<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> f64 {
    norm(&sub(a, b))
}

/// Returns `a / |a|`, or `None` for a zero (or non-finite) vector.
pub fn normalize<const D: usize>(a: &Vector<D>) -> Option<Vector<D>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

pub fn identity<const D: usize>() -> Matrix<D> {
    core::array::from_fn(|i| core::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }))
}

#[inline]
pub fn mat_vec<const D: usize>(m: &Matrix<D>, v: &Vector<D>) -> Vector<D> {
    core::array::from_fn(|i| dot(&m[i], v))
}

/// `mᵀ v`
#[inline]
pub fn mat_t_vec<const D: usize>(m: &Matrix<D>, v: &Vector<D>) -> Vector<D> {
    core::array::from_fn(|j| (0..D).map(|i| m[i][j] * v[i]).sum())
}

pub fn mat_mul<const D: usize>(a: &Matrix<D>, b: &Matrix<D>) -> Matrix<D> {
    core::array::from_fn(|i| core::array::from_fn(|j| (0..D).map(|k| a[i][k] * b[k][j]).sum()))
}

pub fn transpose<const D: usize>(m: &Matrix<D>) -> Matrix<D> {
    core::array::from_fn(|i| core::array::from_fn(|j| m[j][i]))
}

/// Max absolute deviation of `mᵀ m` from the identity.
pub fn orthonormality_error<const D: usize>(m: &Matrix<D>) -> f64 {
    let mtm = mat_mul(&transpose(m), m);
    let mut worst: f64 = 0.0;
    for (i, row) in mtm.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

/// Counter-clockwise planar rotation by `angle` radians.
pub fn rotation_2d(angle: f64) -> Matrix<2> {
    let (s, c) = libm::sincos(angle);
    [[c, -s], [s, c]]
}

/// Rotation about a unit `axis` by `angle` radians (Rodrigues).
pub fn rotation_3d(axis: &Vector<3>, angle: f64) -> Matrix<3> {
    let [x, y, z] = normalize(axis).unwrap_or([0.0, 0.0, 1.0]);
    let (s, c) = libm::sincos(angle);
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}
