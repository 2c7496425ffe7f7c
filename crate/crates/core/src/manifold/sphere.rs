//! The unit hypersphere in R^m under the arc-length metric.
//!
//! Distance is `arccos(<x, y>)` with the inner product clamped to [-1, 1],
//! geodesics are spherical linear interpolation, and tangent vectors at `x`
//! live in the hyperplane orthogonal to `x`. Antipodal pairs have no unique
//! geodesic and are rejected.

use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::ManifoldOps;

/// Max deviation of |x| from 1 accepted at construction.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Pairs closer than this to angle pi are treated as antipodal.
pub const ANTIPODAL_TOL: f64 = 1e-9;

/// A point on the unit sphere, stored as its ambient coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl SpherePoint {
    /// Validates |x| = 1 within `UNIT_NORM_TOL`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("sphere point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("sphere point has non-finite coordinates"));
        }
        let n = norm(&coords);
        if (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::domain(format!(
                "sphere point norm {n} deviates from 1 by more than {UNIT_NORM_TOL}"
            )));
        }
        Ok(SpherePoint { coords })
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn project(coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::domain("cannot project a zero or non-finite vector"));
        }
        Ok(SpherePoint { coords: coords.into_iter().map(|c| c / n).collect() })
    }

    /// First basis vector e1, the canonical base point.
    pub fn canonical(dim: usize) -> Self {
        let mut coords = vec![0.0; dim];
        coords[0] = 1.0;
        SpherePoint { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

fn check_same_dim(x: &SpherePoint, y: &SpherePoint) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::domain(format!(
            "sphere points have different dimensions: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

/// Arc-length distance `arccos(<x, y>)`, in [0, pi].
///
/// Computed from chord lengths (`2 asin(|x - y| / 2)` on the near side,
/// reflected through pi on the far side) rather than `acos` of the dot
/// product, which cannot resolve angles below sqrt(machine epsilon).
pub fn sphere_dist(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    check_same_dim(x, y)?;
    let chord = |sign: f64| -> f64 {
        x.coords
            .iter()
            .zip(&y.coords)
            .map(|(a, b)| (a + sign * b) * (a + sign * b))
            .sum::<f64>()
            .sqrt()
    };
    if dot(&x.coords, &y.coords) >= 0.0 {
        Ok(2.0 * ((chord(-1.0) / 2.0).clamp(-1.0, 1.0)).asin())
    } else {
        Ok(std::f64::consts::PI - 2.0 * ((chord(1.0) / 2.0).clamp(-1.0, 1.0)).asin())
    }
}

/// Spherical linear interpolation from `x` (t = 0) to `y` (t = 1).
///
/// Coincident inputs return `x`; antipodal inputs are a degenerate-geodesic
/// error since every great circle through them is minimizing.
pub fn sphere_geodesic(x: &SpherePoint, y: &SpherePoint, t: f64) -> Result<SpherePoint> {
    check_same_dim(x, y)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("geodesic parameter {t} outside [0, 1]")));
    }
    let theta = sphere_dist(x, y)?;
    if theta > std::f64::consts::PI - ANTIPODAL_TOL {
        return Err(Error::DegenerateGeodesic(format!(
            "points are antipodal (angle {theta}), geodesic is not unique"
        )));
    }
    if theta < 1e-12 {
        return Ok(x.clone());
    }
    let s = theta.sin();
    let a = ((1.0 - t) * theta).sin() / s;
    let b = (t * theta).sin() / s;
    let coords: Vec<f64> =
        x.coords.iter().zip(&y.coords).map(|(xi, yi)| a * xi + b * yi).collect();
    SpherePoint::project(coords)
}

/// Tangent vector at `x` pointing to `y`, with `|v| = d(x, y)`.
pub fn sphere_log(x: &SpherePoint, y: &SpherePoint) -> Result<Vec<f64>> {
    check_same_dim(x, y)?;
    let theta = sphere_dist(x, y)?;
    if theta > std::f64::consts::PI - ANTIPODAL_TOL {
        return Err(Error::DegenerateGeodesic(format!(
            "points are antipodal (angle {theta}), log map is undefined"
        )));
    }
    if theta < 1e-12 {
        return Ok(vec![0.0; x.dim()]);
    }
    let c = theta.cos();
    let coef = theta / theta.sin();
    Ok(x.coords.iter().zip(&y.coords).map(|(xi, yi)| coef * (yi - c * xi)).collect())
}

/// Exponential map at `x` of a tangent vector `v` orthogonal to `x`.
pub fn sphere_exp(x: &SpherePoint, v: &[f64]) -> Result<SpherePoint> {
    if v.len() != x.dim() {
        return Err(Error::domain("tangent dimension does not match the base point"));
    }
    let r = norm(v);
    if r < 1e-300 {
        return Ok(x.clone());
    }
    let c = r.cos();
    let s = r.sin() / r;
    let coords: Vec<f64> = x.coords.iter().zip(v).map(|(xi, vi)| c * xi + s * vi).collect();
    SpherePoint::project(coords)
}

pub(super) fn check_rotation(q: &Mat) -> Result<()> {
    if !q.is_square() {
        return Err(Error::domain("rotation matrix must be square"));
    }
    let qtq = q.transpose().matmul(q);
    let err = qtq.sub(&Mat::identity(q.rows())).frob_norm();
    if err > 1e-10 {
        return Err(Error::domain(format!(
            "rotation matrix is not orthogonal (|Q^T Q - I|_F = {err:.3e})"
        )));
    }
    Ok(())
}

/// Rotation action `Q x` of an orthogonal matrix on a sphere point.
pub fn sphere_act(q: &Mat, x: &SpherePoint) -> Result<SpherePoint> {
    check_rotation(q)?;
    if q.rows() != x.dim() {
        return Err(Error::domain("rotation dimension does not match the point"));
    }
    let mut coords = vec![0.0; x.dim()];
    for i in 0..x.dim() {
        let mut acc = 0.0;
        for j in 0..x.dim() {
            acc += q[(i, j)] * x.coords[j];
        }
        coords[i] = acc;
    }
    SpherePoint::project(coords)
}

impl ManifoldOps for SpherePoint {
    type Tangent = Vec<f64>;

    fn distance(&self, other: &Self) -> Result<f64> {
        sphere_dist(self, other)
    }

    fn geodesic(&self, other: &Self, t: f64) -> Result<Self> {
        sphere_geodesic(self, other, t)
    }

    fn log_map(&self, other: &Self) -> Result<Vec<f64>> {
        sphere_log(self, other)
    }

    fn exp_map(&self, v: &Vec<f64>) -> Result<Self> {
        sphere_exp(self, v)
    }

    fn zero_tangent(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn tangent_add_scaled(acc: &mut Vec<f64>, w: f64, v: &Vec<f64>) {
        for (a, b) in acc.iter_mut().zip(v) {
            *a += w * b;
        }
    }

    fn tangent_norm(&self, v: &Vec<f64>) -> f64 {
        norm(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit(coords: &[f64]) -> SpherePoint {
        SpherePoint::project(coords.to_vec()).unwrap()
    }

    #[test]
    fn dist_between_basis_vectors_is_right_angle() {
        let x = unit(&[1.0, 0.0, 0.0]);
        let y = unit(&[0.0, 1.0, 0.0]);
        assert!((sphere_dist(&x, &y).unwrap() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn dist_of_identical_points_is_zero() {
        let x = unit(&[0.6, 0.8]);
        assert_eq!(sphere_dist(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn geodesic_of_coincident_points_is_the_point() {
        let x = unit(&[0.6, 0.0, 0.8]);
        let g = sphere_geodesic(&x, &x, 0.7).unwrap();
        assert_eq!(g, x);
    }

    #[test]
    fn geodesic_endpoints_and_midpoint() {
        let x = unit(&[1.0, 0.0]);
        let y = unit(&[0.0, 1.0]);
        let g0 = sphere_geodesic(&x, &y, 0.0).unwrap();
        let g1 = sphere_geodesic(&x, &y, 1.0).unwrap();
        let gm = sphere_geodesic(&x, &y, 0.5).unwrap();
        assert!(norm(&g0.coords.iter().zip(&x.coords).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-15);
        assert!(norm(&g1.coords.iter().zip(&y.coords).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-15);
        let s = 1.0 / 2.0_f64.sqrt();
        assert!((gm.coords[0] - s).abs() < 1e-15 && (gm.coords[1] - s).abs() < 1e-15);
    }

    #[test]
    fn geodesic_distance_scales_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = sample::random_unit(5, &mut rng);
        let y = sample::random_unit(5, &mut rng);
        let d = sphere_dist(&x, &y).unwrap();
        for t in [0.2, 0.5, 0.9] {
            let g = sphere_geodesic(&x, &y, t).unwrap();
            assert!((sphere_dist(&x, &g).unwrap() - t * d).abs() < 1e-12);
        }
    }

    #[test]
    fn antipodal_pairs_are_degenerate() {
        let x = unit(&[1.0, 0.0, 0.0]);
        let y = unit(&[-1.0, 0.0, 0.0]);
        assert!(matches!(sphere_geodesic(&x, &y, 0.5), Err(Error::DegenerateGeodesic(_))));
        assert!(matches!(sphere_log(&x, &y), Err(Error::DegenerateGeodesic(_))));
        // Distance itself is still defined.
        assert!((sphere_dist(&x, &y).unwrap() - PI).abs() < 1e-15);
    }

    #[test]
    fn log_exp_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..10 {
            let x = sample::random_unit(4, &mut rng);
            let y = sample::random_unit(4, &mut rng);
            let v = sphere_log(&x, &y).unwrap();
            let y2 = sphere_exp(&x, &v).unwrap();
            let err: f64 = y2
                .coords
                .iter()
                .zip(&y.coords)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "roundtrip error {err}");
        }
    }

    #[test]
    fn log_is_tangent_and_has_distance_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x = sample::random_unit(6, &mut rng);
        let y = sample::random_unit(6, &mut rng);
        let v = sphere_log(&x, &y).unwrap();
        assert!(dot(&v, x.coords()).abs() < 1e-12);
        assert!((norm(&v) - sphere_dist(&x, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rotation_preserves_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..10 {
            let x = sample::random_unit(4, &mut rng);
            let y = sample::random_unit(4, &mut rng);
            let q = sample::random_orthogonal(4, &mut rng);
            let qx = sphere_act(&q, &x).unwrap();
            let qy = sphere_act(&q, &y).unwrap();
            let d = sphere_dist(&x, &y).unwrap();
            let dq = sphere_dist(&qx, &qy).unwrap();
            assert!((d - dq).abs() < 1e-10);
        }
    }

    #[test]
    fn non_orthogonal_rotation_is_rejected() {
        let q = Mat::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        let x = SpherePoint::canonical(2);
        assert!(matches!(sphere_act(&q, &x), Err(Error::Domain(_))));
    }

    #[test]
    fn non_unit_vectors_are_rejected() {
        assert!(matches!(SpherePoint::new(vec![1.0, 1.0]), Err(Error::Domain(_))));
        assert!(matches!(SpherePoint::new(vec![]), Err(Error::Domain(_))));
    }
}
