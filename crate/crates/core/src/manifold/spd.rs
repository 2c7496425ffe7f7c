//! Symmetric positive definite matrices under the affine-invariant metric.
//!
//! With `G = X^{-1/2} Y X^{-1/2}` the key closed forms are
//!
//! * distance:  `d(X, Y) = |log G|_F`
//! * geodesic:  `gamma(t) = X^{1/2} G^t X^{1/2}`
//! * log map:   `Log_X(Y) = X^{1/2} log(G) X^{1/2}`
//! * exp map:   `Exp_X(V) = X^{1/2} exp(X^{-1/2} V X^{-1/2}) X^{1/2}`
//!
//! and congruence by any invertible `A`, `X -> A X A^T`, is an isometry.
//! All matrix functions go through the symmetric eigensolver; eigenvalues
//! are clamped below at `EIG_FLOOR` before logs and inverse powers.

use crate::error::{Error, Result};
use crate::linalg::{assemble_sym_fn, det, sym_eig, Mat, SYMMETRY_TOL};

use super::ManifoldOps;

/// Eigenvalue clamp applied before logarithms and inverse powers.
pub const EIG_FLOOR: f64 = 1e-12;

/// A point on the SPD manifold: a symmetric matrix with strictly positive
/// eigenvalues. Construction validates both properties.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdPoint {
    mat: Mat,
}

impl SpdPoint {
    /// Validates symmetry (within `SYMMETRY_TOL` relative to the largest
    /// entry) and positive definiteness, then stores the symmetrized matrix.
    pub fn new(mat: Mat) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::domain(format!(
                "spd point must be square, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        if !mat.is_finite() {
            return Err(Error::domain("spd point has non-finite entries"));
        }
        if mat.asymmetry() > SYMMETRY_TOL * mat.max_abs().max(1e-300) {
            return Err(Error::domain(format!(
                "spd point is not symmetric (asymmetry {:.3e})",
                mat.asymmetry()
            )));
        }
        let sym = mat.sym_part();
        let eig = sym_eig(&sym)?;
        if eig.values[0] <= 0.0 {
            return Err(Error::domain(format!(
                "spd point is not positive definite (smallest eigenvalue {:.3e})",
                eig.values[0]
            )));
        }
        Ok(SpdPoint { mat: sym })
    }

    /// Wraps a matrix that is already known to be symmetric positive
    /// definite, for internal fast paths. Only the symmetrization runs.
    pub(crate) fn new_unchecked(mat: Mat) -> Self {
        SpdPoint { mat: mat.sym_part() }
    }

    pub fn identity(dim: usize) -> Self {
        SpdPoint { mat: Mat::identity(dim) }
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn into_mat(self) -> Mat {
        self.mat
    }
}

fn check_same_dim(x: &SpdPoint, y: &SpdPoint) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::domain(format!(
            "spd points have different dimensions: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

/// Matrix logarithm of a symmetric positive (semi)definite matrix.
pub fn mat_log(a: &Mat) -> Result<Mat> {
    let e = sym_eig(a)?;
    let f: Vec<f64> = e.values.iter().map(|&l| l.max(EIG_FLOOR).ln()).collect();
    Ok(assemble_sym_fn(&e, &f))
}

/// Matrix exponential of a symmetric matrix.
pub fn mat_exp(a: &Mat) -> Result<Mat> {
    let e = sym_eig(a)?;
    let f: Vec<f64> = e.values.iter().map(|&l| l.exp()).collect();
    Ok(assemble_sym_fn(&e, &f))
}

/// Fractional power of a symmetric positive definite matrix.
pub fn mat_pow(a: &Mat, t: f64) -> Result<Mat> {
    let e = sym_eig(a)?;
    let f: Vec<f64> = e.values.iter().map(|&l| l.max(EIG_FLOOR).powf(t)).collect();
    Ok(assemble_sym_fn(&e, &f))
}

/// `(X^{1/2}, X^{-1/2})` from a single eigendecomposition.
pub fn sqrt_pair(x: &SpdPoint) -> Result<(Mat, Mat)> {
    let e = sym_eig(x.mat())?;
    let sq: Vec<f64> = e.values.iter().map(|&l| l.max(EIG_FLOOR).sqrt()).collect();
    let isq: Vec<f64> = sq.iter().map(|&s| 1.0 / s).collect();
    Ok((assemble_sym_fn(&e, &sq), assemble_sym_fn(&e, &isq)))
}

/// Affine-invariant distance between two spd points.
pub fn spd_dist(x: &SpdPoint, y: &SpdPoint) -> Result<f64> {
    check_same_dim(x, y)?;
    let (_, xisq) = sqrt_pair(x)?;
    let g = xisq.matmul(y.mat()).matmul(&xisq);
    let e = sym_eig(&g.sym_part())?;
    let mut sum = 0.0;
    for &l in &e.values {
        let ll = l.max(EIG_FLOOR).ln();
        sum += ll * ll;
    }
    Ok(sum.sqrt())
}

/// Point at parameter `t` on the geodesic from `x` (t = 0) to `y` (t = 1).
pub fn spd_geodesic(x: &SpdPoint, y: &SpdPoint, t: f64) -> Result<SpdPoint> {
    check_same_dim(x, y)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("geodesic parameter {t} outside [0, 1]")));
    }
    let (xsq, xisq) = sqrt_pair(x)?;
    let g = xisq.matmul(y.mat()).matmul(&xisq).sym_part();
    let gt = mat_pow(&g, t)?;
    Ok(SpdPoint::new_unchecked(xsq.matmul(&gt).matmul(&xsq)))
}

/// Tangent vector at `x` pointing to `y`: a symmetric matrix.
pub fn spd_log(x: &SpdPoint, y: &SpdPoint) -> Result<Mat> {
    check_same_dim(x, y)?;
    let (xsq, xisq) = sqrt_pair(x)?;
    let g = xisq.matmul(y.mat()).matmul(&xisq).sym_part();
    let lg = mat_log(&g)?;
    Ok(xsq.matmul(&lg).matmul(&xsq).sym_part())
}

/// Exponential map at `x` of the symmetric tangent matrix `v`.
pub fn spd_exp(x: &SpdPoint, v: &Mat) -> Result<SpdPoint> {
    if v.rows() != x.dim() || v.cols() != x.dim() {
        return Err(Error::domain("tangent dimension does not match the base point"));
    }
    let (xsq, xisq) = sqrt_pair(x)?;
    let w = xisq.matmul(v).matmul(&xisq).sym_part();
    let ew = mat_exp(&w)?;
    Ok(SpdPoint::new_unchecked(xsq.matmul(&ew).matmul(&xsq)))
}

pub(super) fn check_congruence(a: &Mat) -> Result<()> {
    if !a.is_square() {
        return Err(Error::domain("congruence matrix must be square"));
    }
    let d = det(a);
    if d.abs() <= 1e-10 {
        return Err(Error::domain(format!(
            "congruence matrix is singular (|det| = {:.3e} <= 1e-10)",
            d.abs()
        )));
    }
    Ok(())
}

/// Congruence action `A X A^T` of an invertible matrix on an spd point.
pub fn spd_act(a: &Mat, x: &SpdPoint) -> Result<SpdPoint> {
    check_congruence(a)?;
    if a.rows() != x.dim() {
        return Err(Error::domain("congruence dimension does not match the point"));
    }
    Ok(SpdPoint::new_unchecked(a.matmul(x.mat()).matmul(&a.transpose())))
}

impl ManifoldOps for SpdPoint {
    type Tangent = Mat;

    fn distance(&self, other: &Self) -> Result<f64> {
        spd_dist(self, other)
    }

    fn geodesic(&self, other: &Self, t: f64) -> Result<Self> {
        spd_geodesic(self, other, t)
    }

    fn log_map(&self, other: &Self) -> Result<Mat> {
        spd_log(self, other)
    }

    fn exp_map(&self, v: &Mat) -> Result<Self> {
        spd_exp(self, v)
    }

    fn zero_tangent(&self) -> Mat {
        Mat::zeros(self.dim(), self.dim())
    }

    fn tangent_add_scaled(acc: &mut Mat, w: f64, v: &Mat) {
        let a = acc.data_mut();
        let b = v.data();
        for i in 0..a.len() {
            a[i] += w * b[i];
        }
    }

    fn tangent_norm(&self, v: &Mat) -> f64 {
        // Metric norm at X: |X^{-1/2} V X^{-1/2}|_F.
        let (_, xisq) = match sqrt_pair(self) {
            Ok(p) => p,
            Err(_) => return f64::NAN,
        };
        xisq.matmul(v).matmul(&xisq).frob_norm()
    }
}
