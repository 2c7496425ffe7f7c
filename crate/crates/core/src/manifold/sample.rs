//! Seeded random generators for points, tangents and isometries.
//!
//! Used by the synthetic data generators, the gradient checker and the
//! equivariance test suites. Everything is deterministic given the RNG
//! state.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{assemble_sym_fn, sym_eig, Mat};

use super::sphere::SpherePoint;
use super::spd::SpdPoint;
use super::ManifoldOps;

fn gaussian_mat(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Mat::from_vec(rows, cols, data)
}

/// Random symmetric matrix with Gaussian entries scaled by `scale`.
pub fn random_symmetric(n: usize, rng: &mut impl Rng, scale: f64) -> Mat {
    let mut a = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x: f64 = rng.sample(StandardNormal);
            a[(i, j)] = scale * x;
            a[(j, i)] = scale * x;
        }
    }
    a
}

/// Random orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
///
/// Two orthogonalization passes keep the columns orthogonal to well below
/// the 1e-10 acceptance threshold for rotations.
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> Mat {
    'retry: loop {
        let g = gaussian_mat(n, n, rng);
        let mut q = Mat::zeros(n, n);
        for j in 0..n {
            let mut v: Vec<f64> = (0..n).map(|i| g[(i, j)]).collect();
            for _ in 0..2 {
                for prev in 0..j {
                    let proj: f64 = (0..n).map(|i| v[i] * q[(i, prev)]).sum();
                    for i in 0..n {
                        v[i] -= proj * q[(i, prev)];
                    }
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-6 {
                continue 'retry;
            }
            for i in 0..n {
                q[(i, j)] = v[i] / norm;
            }
        }
        return q;
    }
}

/// Rotation by `theta` in the coordinate plane (i, j), identity elsewhere.
pub fn plane_rotation(n: usize, i: usize, j: usize, theta: f64) -> Mat {
    assert!(i < n && j < n && i != j);
    let mut r = Mat::identity(n);
    let (s, c) = theta.sin_cos();
    r[(i, i)] = c;
    r[(j, j)] = c;
    r[(i, j)] = -s;
    r[(j, i)] = s;
    r
}

/// Random spd matrix with eigenvalues drawn uniformly from [lo, hi].
pub fn random_spd(n: usize, rng: &mut impl Rng, lo: f64, hi: f64) -> SpdPoint {
    assert!(0.0 < lo && lo <= hi);
    let q = random_orthogonal(n, rng);
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    let mut qd = q.clone();
    for i in 0..n {
        for j in 0..n {
            qd[(i, j)] *= values[j];
        }
    }
    SpdPoint::new(qd.matmul(&q.transpose()).sym_part()).expect("constructed spd matrix is valid")
}

/// Random well-conditioned invertible matrix for congruence actions:
/// Q1 diag(u) Q2 with u in [0.5, 1.5].
pub fn random_congruence(n: usize, rng: &mut impl Rng) -> Mat {
    let q1 = random_orthogonal(n, rng);
    let q2 = random_orthogonal(n, rng);
    let mut m = q1.clone();
    for j in 0..n {
        let u: f64 = rng.random_range(0.5..=1.5);
        for i in 0..n {
            m[(i, j)] *= u;
        }
    }
    m.matmul(&q2)
}

/// Uniformly random point on the unit sphere in R^n.
pub fn random_unit(n: usize, rng: &mut impl Rng) -> SpherePoint {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(p) = SpherePoint::project(v) {
            return p;
        }
    }
}

/// Random spd point within geodesic distance `radius` of `center`.
pub fn random_spd_in_ball(center: &SpdPoint, radius: f64, rng: &mut impl Rng) -> SpdPoint {
    let n = center.dim();
    let w = random_symmetric(n, rng, 1.0);
    let wn = w.frob_norm();
    let r: f64 = rng.random_range(0.0..=radius);
    // d(C, Exp_C(C^{1/2} W C^{1/2})) = |W|_F, so scaling W sets the distance.
    let w = if wn < 1e-300 { w } else { w.scale(r / wn) };
    let e = sym_eig(center.mat()).expect("spd center has an eigendecomposition");
    let sq: Vec<f64> = e.values.iter().map(|&l| l.max(1e-12).sqrt()).collect();
    let csq = assemble_sym_fn(&e, &sq);
    let v = csq.matmul(&w).matmul(&csq).sym_part();
    center.exp_map(&v).expect("exp of a finite tangent stays spd")
}

/// Random sphere point within geodesic distance `radius` of `center`.
/// `radius` must stay below pi so the result is never antipodal.
pub fn random_unit_in_ball(center: &SpherePoint, radius: f64, rng: &mut impl Rng) -> SpherePoint {
    assert!(radius < std::f64::consts::PI);
    let n = center.dim();
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let proj = super::sphere::dot(&v, center.coords());
        for (vi, ci) in v.iter_mut().zip(center.coords()) {
            *vi -= proj * ci;
        }
        let vn = super::sphere::norm(&v);
        if vn < 1e-12 {
            continue;
        }
        let r: f64 = rng.random_range(0.0..=radius);
        let v: Vec<f64> = v.into_iter().map(|x| x * r / vn).collect();
        return center.exp_map(&v).expect("exp of a proper tangent stays on the sphere");
    }
}
