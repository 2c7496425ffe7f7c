//! Small dense matrices and a self-contained symmetric eigensolver.
//!
//! All matrices in this crate are tiny (dimensions in the tens), so the
//! representation is a flat row-major `Vec<f64>` and the eigensolver is a
//! cyclic Jacobi iteration. Nothing here allocates per element or calls out
//! to an external linear-algebra backend.

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Mat::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    /// Builds from a flat row-major buffer. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length does not match shape");
        Mat { rows, cols, data }
    }

    /// 1x1 matrix holding one scalar.
    pub fn scalar(x: f64) -> Self {
        Mat { rows: 1, cols: 1, data: vec![x] }
    }

    /// Column vector.
    pub fn col(data: Vec<f64>) -> Self {
        Mat { rows: data.len(), cols: 1, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|a| a * s).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, a| m.max(a.abs()))
    }

    /// (A + A^T) / 2. Square matrices only.
    pub fn sym_part(&self) -> Mat {
        assert!(self.is_square());
        let n = self.rows;
        let mut s = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    /// Max absolute asymmetry, `max_ij |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Determinant by LU decomposition with partial pivoting.
pub fn det(a: &Mat) -> f64 {
    assert!(a.is_square());
    let n = a.rows();
    let mut lu = a.clone();
    let mut sign = 1.0_f64;
    for k in 0..n {
        let mut pivot = k;
        for i in (k + 1)..n {
            if lu[(i, k)].abs() > lu[(pivot, k)].abs() {
                pivot = i;
            }
        }
        if lu[(pivot, k)] == 0.0 {
            return 0.0;
        }
        if pivot != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(pivot, j)];
                lu[(pivot, j)] = tmp;
            }
            sign = -sign;
        }
        for i in (k + 1)..n {
            let f = lu[(i, k)] / lu[(k, k)];
            lu[(i, k)] = f;
            for j in (k + 1)..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
        }
    }
    let mut d = sign;
    for k in 0..n {
        d *= lu[(k, k)];
    }
    d
}

/// Eigendecomposition of a symmetric matrix: `values` ascending, `vectors`
/// holding the matching eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

/// Hard cap on Jacobi sweeps before reporting non-convergence.
pub const JACOBI_SWEEP_CAP: usize = 100;

/// Convergence threshold on the off-diagonal Frobenius norm, relative to
/// the Frobenius norm of the input.
pub const JACOBI_OFF_TOL: f64 = 1e-14;

/// Relative asymmetry above which an input is rejected as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps rotate every off-diagonal pair per pass, with the usual threshold
/// schedule on early sweeps to skip negligible entries. Converges when the
/// off-diagonal Frobenius norm drops to `JACOBI_OFF_TOL` times the input
/// norm; more than `JACOBI_SWEEP_CAP` sweeps is a numerical error. Inputs
/// whose asymmetry exceeds `SYMMETRY_TOL * max_abs` are rejected.
pub fn sym_eig(a: &Mat) -> Result<SymEig> {
    if !a.is_square() {
        return Err(Error::domain(format!(
            "sym_eig expects a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Err(Error::domain("sym_eig expects a non-empty matrix"));
    }
    if !a.is_finite() {
        return Err(Error::domain("sym_eig input has non-finite entries"));
    }
    if a.asymmetry() > SYMMETRY_TOL * a.max_abs().max(1e-300) {
        return Err(Error::domain(format!(
            "sym_eig input is not symmetric (asymmetry {:.3e})",
            a.asymmetry()
        )));
    }

    let norm_a = a.frob_norm();
    let mut w = a.sym_part();
    let mut v = Mat::identity(n);
    // d tracks the evolving diagonal; b/z implement the deferred diagonal
    // update that keeps accumulated rounding out of the rotations.
    let mut d: Vec<f64> = (0..n).map(|i| w[(i, i)]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0_f64; n];

    if n == 1 {
        return Ok(SymEig { values: d, vectors: v });
    }

    let mut converged = false;
    for sweep in 0..JACOBI_SWEEP_CAP {
        let mut off_sq = 0.0_f64;
        let mut sm = 0.0_f64;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                off_sq += w[(p, q)] * w[(p, q)];
                sm += w[(p, q)].abs();
            }
        }
        if (2.0 * off_sq).sqrt() <= JACOBI_OFF_TOL * norm_a {
            converged = true;
            break;
        }

        let tresh = if sweep < 3 { 0.2 * sm / ((n * n) as f64) } else { 0.0 };

        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let g = 100.0 * w[(p, q)].abs();
                // Entries that no longer perturb the diagonal at machine
                // precision are zeroed outright on later sweeps.
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    w[(p, q)] = 0.0;
                    continue;
                }
                if w[(p, q)].abs() <= tresh {
                    continue;
                }

                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    w[(p, q)] / h
                } else {
                    let theta = 0.5 * h / w[(p, q)];
                    let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * w[(p, q)];

                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                w[(p, q)] = 0.0;

                let rot = |w: &mut Mat, i: usize, j: usize, k: usize, l: usize| {
                    let g = w[(i, j)];
                    let hh = w[(k, l)];
                    w[(i, j)] = g - s * (hh + g * tau);
                    w[(k, l)] = hh + s * (g - hh * tau);
                };
                for j in 0..p {
                    rot(&mut w, j, p, j, q);
                }
                for j in (p + 1)..q {
                    rot(&mut w, p, j, j, q);
                }
                for j in (q + 1)..n {
                    rot(&mut w, p, j, q, j);
                }
                for j in 0..n {
                    let g = v[(j, p)];
                    let hh = v[(j, q)];
                    v[(j, p)] = g - s * (hh + g * tau);
                    v[(j, q)] = hh + s * (g - hh * tau);
                }
            }
        }

        for i in 0..n {
            b[i] += z[i];
            d[i] = b[i];
            z[i] = 0.0;
        }
    }

    if !converged {
        // A final check catches the case where the last sweep finished the job.
        let mut off_sq = 0.0_f64;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                off_sq += w[(p, q)] * w[(p, q)];
            }
        }
        if (2.0 * off_sq).sqrt() > JACOBI_OFF_TOL * norm_a {
            return Err(Error::numerical(format!(
                "jacobi eigensolver did not converge within {} sweeps",
                JACOBI_SWEEP_CAP
            )));
        }
    }

    // Ascending eigenvalue order, eigenvector columns permuted to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new_col)] = v[(r, old_col)];
        }
    }

    Ok(SymEig { values, vectors })
}

/// V f(Lambda) V^T for the eigendecomposition `e` and per-eigenvalue values
/// `f_of_values`.
pub fn assemble_sym_fn(e: &SymEig, f_of_values: &[f64]) -> Mat {
    let n = e.values.len();
    let v = &e.vectors;
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += v[(i, k)] * f_of_values[k] * v[(j, k)];
            }
            out[(i, j)] = acc;
            out[(j, i)] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Mat {
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-2.0..2.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    #[test]
    fn eig_of_diag_3_1_is_sorted_ascending() {
        let a = Mat::diag(&[3.0, 1.0]);
        let e = sym_eig(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        // First eigenvector is +-e2, second +-e1.
        assert!(e.vectors[(1, 0)].abs() > 1.0 - 1e-12);
        assert!(e.vectors[(0, 1)].abs() > 1.0 - 1e-12);
        assert!(e.vectors[(0, 0)].abs() < 1e-12);
        assert!(e.vectors[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn eig_of_identity() {
        let e = sym_eig(&Mat::identity(4)).unwrap();
        for v in &e.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eig_handles_1x1() {
        let e = sym_eig(&Mat::diag(&[-2.5])).unwrap();
        assert_eq!(e.values, vec![-2.5]);
        assert_eq!(e.vectors[(0, 0)], 1.0);
    }

    #[test]
    fn eig_known_2x2() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3 with eigenvectors (1,-1)/sqrt2, (1,1)/sqrt2.
        let a = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = sym_eig(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-13);
        assert!((e.values[1] - 3.0).abs() < 1e-13);
        let s = 1.0 / 2.0_f64.sqrt();
        assert!((e.vectors[(0, 0)].abs() - s).abs() < 1e-12);
        assert!((e.vectors[(1, 0)].abs() - s).abs() < 1e-12);
        assert!((e.vectors[(0, 0)] * e.vectors[(1, 0)] + s * s).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3, 5, 8, 16] {
            for _ in 0..20 {
                let a = random_symmetric(n, &mut rng);
                let e = sym_eig(&a).unwrap();
                let recon = assemble_sym_fn(&e, &e.values);
                let err = recon.sub(&a).frob_norm();
                assert!(
                    err <= 1e-10 * a.frob_norm().max(1.0),
                    "reconstruction error {err} for n={n}"
                );
                // Orthogonality of the eigenvector matrix.
                let vtv = e.vectors.transpose().matmul(&e.vectors);
                let ortho_err = vtv.sub(&Mat::identity(n)).frob_norm();
                assert!(ortho_err <= 1e-10, "orthogonality error {ortho_err} for n={n}");
                // Ascending order.
                for w in e.values.windows(2) {
                    assert!(w[0] <= w[1] + 1e-15);
                }
            }
        }
    }

    #[test]
    fn eig_rejects_non_symmetric() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        match sym_eig(&a) {
            Err(Error::Domain(_)) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn eig_handles_repeated_eigenvalues() {
        let a = Mat::diag(&[2.0, 2.0, 5.0]);
        let e = sym_eig(&a).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-14);
        assert!((e.values[1] - 2.0).abs() < 1e-14);
        assert!((e.values[2] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn det_known_values() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert!((det(&a) + 2.0).abs() < 1e-12);
        let b = Mat::from_rows(&[&[2.0, 0.0, 1.0], &[0.0, 3.0, 0.0], &[1.0, 0.0, 2.0]]);
        assert!((det(&b) - 9.0).abs() < 1e-12);
        assert!((det(&Mat::identity(5)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn det_of_singular_matrix_is_zero() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(det(&a), 0.0);
    }

    #[test]
    fn matmul_and_transpose() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Mat::from_rows(&[&[5.0, 6.0], &[7.0, 8.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[19.0, 22.0, 43.0, 50.0]);
        let t = a.transpose();
        assert_eq!(t.data(), &[1.0, 3.0, 2.0, 4.0]);
    }
}
