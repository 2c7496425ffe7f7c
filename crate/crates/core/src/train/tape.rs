//! Reverse-mode differentiation over matrix-level operations.
//!
//! A [`Tape`] is an append-only arena of nodes. Builder methods compute the
//! forward value immediately (caching eigendecompositions where one is
//! needed), so a node's value is available as soon as it is created.
//! [`Tape::backward`] then walks the arena in reverse, accumulating adjoints.
//!
//! Differentiating through a symmetric eigendecomposition uses the divided
//! difference kernel: with `S = V diag(l) V^T` and `C = V h(l) V^T`,
//!
//! ```text
//! S_bar = V (D .* (V^T sym(C_bar) V)) V^T,
//! D_ij  = (h(l_i) - h(l_j)) / (l_i - l_j),   D_ii = h'(l_i).
//! ```
//!
//! When the spectrum is nearly degenerate (minimum eigenvalue gap below
//! `EIG_GAP_GUARD * ||S||_F`) the divided differences are ill-conditioned, so
//! the node falls back to a symmetrized central finite-difference adjoint and
//! bumps the tape's `fd_fallbacks` diagnostic counter.

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Mat, SymEig};
use crate::manifold::spd::EIG_FLOOR;

/// Relative eigenvalue-gap threshold below which the analytic divided
/// difference adjoint is replaced by a finite-difference one.
pub const EIG_GAP_GUARD: f64 = 1e-8;

/// Step used by the per-node finite-difference fallback.
const FD_FALLBACK_STEP: f64 = 1e-6;

/// Inputs closer to +-1 than this get a zero `acos` derivative.
const ACOS_GUARD: f64 = 1e-12;

/// Arguments smaller than this get a zero guarded-sqrt derivative.
const SQRT_GUARD: f64 = 1e-30;

/// Handle to a node on a [`Tape`].
pub type NodeId = usize;

/// Spectral functions applied through a symmetric eigendecomposition.
///
/// `Log`, `Sqrt` and `InvSqrt` clamp eigenvalues to `EIG_FLOOR` before the
/// scalar map, matching the primal-side matrix functions; the derivative is
/// zero in the clamped region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymFnKind {
    Log,
    Exp,
    Sqrt,
    InvSqrt,
}

impl SymFnKind {
    fn value(self, lam: f64) -> f64 {
        match self {
            SymFnKind::Log => lam.max(EIG_FLOOR).ln(),
            SymFnKind::Exp => lam.exp(),
            SymFnKind::Sqrt => lam.max(EIG_FLOOR).sqrt(),
            SymFnKind::InvSqrt => lam.max(EIG_FLOOR).powf(-0.5),
        }
    }

    fn deriv(self, lam: f64) -> f64 {
        if self == SymFnKind::Exp {
            return lam.exp();
        }
        if lam <= EIG_FLOOR {
            return 0.0;
        }
        match self {
            SymFnKind::Log => 1.0 / lam,
            SymFnKind::Sqrt => 0.5 / lam.sqrt(),
            SymFnKind::InvSqrt => -0.5 * lam.powf(-1.5),
            SymFnKind::Exp => unreachable!(),
        }
    }
}

enum Op {
    /// Input, constant or parameter; no upstream dependencies.
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Tensor times scalar node.
    Scale(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    /// `V h(l) V^T` of the symmetrized input, with the decomposition cached.
    SymFn { a: NodeId, kind: SymFnKind, eig: SymEig },
    /// Symmetrized input raised to a differentiable scalar power.
    SymPow { a: NodeId, t: NodeId, eig: SymEig },
    /// Frobenius inner product of two equally shaped tensors.
    Dot(NodeId, NodeId),
    /// One entry of a tensor, as a scalar.
    Index { a: NodeId, idx: usize },
    /// Column vectors and scalars stacked into one column vector.
    ConcatCol(Vec<NodeId>),
    /// Sum of squared entries.
    SumSquares(NodeId),
    /// `sqrt(max(x, 0))` with a zero derivative near zero.
    SqrtGuard(NodeId),
    SMul(NodeId, NodeId),
    SDiv(NodeId, NodeId),
    Sin(NodeId),
    Cos(NodeId),
    /// `acos` of a scalar clamped to [-1, 1].
    Acos(NodeId),
    /// Softmax cross-entropy of a logit column against a class index.
    CrossEntropy { logits: NodeId, label: usize },
}

/// Adjoints produced by [`Tape::backward`]; absent entries mean the node
/// does not influence the root.
pub struct Adjoints {
    grads: Vec<Option<Mat>>,
}

impl Adjoints {
    /// Adjoint of `id`, if it received one.
    pub fn get(&self, id: NodeId) -> Option<&Mat> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }

    /// Adjoint of `id`, or zeros of the given shape when absent.
    pub fn get_or_zeros(&self, id: NodeId, rows: usize, cols: usize) -> Mat {
        match self.get(id) {
            Some(g) => g.clone(),
            None => Mat::zeros(rows, cols),
        }
    }
}

/// Append-only computation record; see the module docs.
pub struct Tape {
    ops: Vec<Op>,
    vals: Vec<Mat>,
    fd_fallbacks: usize,
}

impl Tape {
    pub fn new() -> Self {
        Tape { ops: Vec::new(), vals: Vec::new(), fd_fallbacks: 0 }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Nodes whose eigendecomposition adjoint fell back to finite
    /// differences because of a near-degenerate spectrum.
    pub fn fd_fallbacks(&self) -> usize {
        self.fd_fallbacks
    }

    /// Forward value of a node.
    pub fn val(&self, id: NodeId) -> &Mat {
        &self.vals[id]
    }

    /// Forward value of a scalar (1x1) node.
    pub fn scalar_val(&self, id: NodeId) -> f64 {
        let v = &self.vals[id];
        debug_assert!(v.rows == 1 && v.cols == 1, "scalar_val on {}x{} node", v.rows, v.cols);
        v.data[0]
    }

    fn push(&mut self, op: Op, val: Mat) -> Result<NodeId> {
        if !val.is_finite() {
            return Err(Error::numerical(format!(
                "non-finite value produced at tape node {}",
                self.ops.len()
            )));
        }
        self.ops.push(op);
        self.vals.push(val);
        Ok(self.ops.len() - 1)
    }

    /// New leaf holding an arbitrary tensor.
    pub fn leaf(&mut self, val: Mat) -> Result<NodeId> {
        self.push(Op::Leaf, val)
    }

    /// New scalar leaf.
    pub fn scalar(&mut self, x: f64) -> Result<NodeId> {
        self.push(Op::Leaf, Mat::scalar(x))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let val = self.vals[a].add(&self.vals[b]);
        self.push(Op::Add(a, b), val)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let val = self.vals[a].sub(&self.vals[b]);
        self.push(Op::Sub(a, b), val)
    }

    /// Tensor `a` scaled by scalar node `s`.
    pub fn scale(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let sv = self.scalar_val(s);
        let val = self.vals[a].scale(sv);
        self.push(Op::Scale(a, s), val)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let val = self.vals[a].matmul(&self.vals[b]);
        self.push(Op::MatMul(a, b), val)
    }

    fn sym_fn(&mut self, a: NodeId, kind: SymFnKind) -> Result<NodeId> {
        let s = self.vals[a].sym_part();
        let eig = sym_eig(&s)?;
        let mapped: Vec<f64> = eig.values.iter().map(|&l| kind.value(l)).collect();
        let val = crate::linalg::assemble_sym_fn(&eig, &mapped);
        self.push(Op::SymFn { a, kind, eig }, val)
    }

    /// Matrix logarithm of the symmetrized input.
    pub fn sym_log(&mut self, a: NodeId) -> Result<NodeId> {
        self.sym_fn(a, SymFnKind::Log)
    }

    /// Matrix exponential of the symmetrized input.
    pub fn sym_exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.sym_fn(a, SymFnKind::Exp)
    }

    /// Matrix square root of the symmetrized input.
    pub fn sym_sqrt(&mut self, a: NodeId) -> Result<NodeId> {
        self.sym_fn(a, SymFnKind::Sqrt)
    }

    /// Inverse matrix square root of the symmetrized input.
    pub fn sym_invsqrt(&mut self, a: NodeId) -> Result<NodeId> {
        self.sym_fn(a, SymFnKind::InvSqrt)
    }

    /// Symmetrized input raised to the power held by scalar node `t`.
    pub fn sym_pow(&mut self, a: NodeId, t: NodeId) -> Result<NodeId> {
        let s = self.vals[a].sym_part();
        let tv = self.scalar_val(t);
        let eig = sym_eig(&s)?;
        let mapped: Vec<f64> =
            eig.values.iter().map(|&l| l.max(EIG_FLOOR).powf(tv)).collect();
        let val = crate::linalg::assemble_sym_fn(&eig, &mapped);
        self.push(Op::SymPow { a, t, eig }, val)
    }

    /// Frobenius inner product, yielding a scalar node.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.vals[a], &self.vals[b]);
        assert_eq!((va.rows, va.cols), (vb.rows, vb.cols), "dot shape mismatch");
        let x: f64 = va.data.iter().zip(&vb.data).map(|(p, q)| p * q).sum();
        self.push(Op::Dot(a, b), Mat::scalar(x))
    }

    /// Entry `idx` (row-major) of a tensor, as a scalar node.
    pub fn index(&mut self, a: NodeId, idx: usize) -> Result<NodeId> {
        let x = self.vals[a].data[idx];
        self.push(Op::Index { a, idx }, Mat::scalar(x))
    }

    /// Stack column vectors / scalars into one column vector.
    pub fn concat_col(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut data = Vec::new();
        for &p in parts {
            let v = &self.vals[p];
            assert_eq!(v.cols, 1, "concat_col expects column vectors");
            data.extend_from_slice(&v.data);
        }
        let n = data.len();
        self.push(Op::ConcatCol(parts.to_vec()), Mat { rows: n, cols: 1, data })
    }

    /// Sum of squared entries, as a scalar node.
    pub fn sum_squares(&mut self, a: NodeId) -> Result<NodeId> {
        let x: f64 = self.vals[a].data.iter().map(|v| v * v).sum();
        self.push(Op::SumSquares(a), Mat::scalar(x))
    }

    /// `sqrt(max(x, 0))` with derivative zero when `x` is at or below zero.
    pub fn sqrt_guard(&mut self, a: NodeId) -> Result<NodeId> {
        let x = self.scalar_val(a).max(0.0).sqrt();
        self.push(Op::SqrtGuard(a), Mat::scalar(x))
    }

    pub fn smul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let x = self.scalar_val(a) * self.scalar_val(b);
        self.push(Op::SMul(a, b), Mat::scalar(x))
    }

    pub fn sdiv(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let x = self.scalar_val(a) / self.scalar_val(b);
        self.push(Op::SDiv(a, b), Mat::scalar(x))
    }

    pub fn sin(&mut self, a: NodeId) -> Result<NodeId> {
        let x = self.scalar_val(a).sin();
        self.push(Op::Sin(a), Mat::scalar(x))
    }

    pub fn cos(&mut self, a: NodeId) -> Result<NodeId> {
        let x = self.scalar_val(a).cos();
        self.push(Op::Cos(a), Mat::scalar(x))
    }

    /// `acos` of a scalar clamped to [-1, 1]; derivative is zero within
    /// `ACOS_GUARD` of the endpoints.
    pub fn acos(&mut self, a: NodeId) -> Result<NodeId> {
        let x = self.scalar_val(a).clamp(-1.0, 1.0).acos();
        self.push(Op::Acos(a), Mat::scalar(x))
    }

    /// Softmax cross-entropy `-log softmax(logits)[label]`, computed with
    /// the running maximum subtracted (the maximum is treated as constant).
    pub fn cross_entropy(&mut self, logits: NodeId, label: usize) -> Result<NodeId> {
        let l = &self.vals[logits];
        assert_eq!(l.cols, 1, "cross_entropy expects a logit column");
        assert!(label < l.rows, "label {} out of range for {} classes", label, l.rows);
        let m = l.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = l.data.iter().map(|&v| (v - m).exp()).sum();
        let loss = m + z.ln() - l.data[label];
        self.push(Op::CrossEntropy { logits, label }, Mat::scalar(loss))
    }

    /// Accumulate adjoints for every node the root depends on.
    ///
    /// The root must be a scalar node; its adjoint is seeded with 1. Every
    /// produced adjoint is checked to be finite.
    pub fn backward(&mut self, root: NodeId) -> Result<Adjoints> {
        let rv = &self.vals[root];
        assert!(rv.rows == 1 && rv.cols == 1, "backward root must be scalar");
        let mut grads: Vec<Option<Mat>> = vec![None; self.ops.len()];
        grads[root] = Some(Mat::scalar(1.0));
        let mut fallbacks = 0usize;

        for id in (0..=root).rev() {
            // Detach this node's adjoint while its inputs accumulate (no
            // node can be its own input), then store it back for the caller.
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            if !g.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite adjoint at tape node {id}"
                )));
            }
            match &self.ops[id] {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g.clone());
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g.scale(-1.0));
                }
                Op::Scale(a, s) => {
                    let (a, s) = (*a, *s);
                    let sv = self.vals[s].data[0];
                    let ga = g.scale(sv);
                    let gs: f64 =
                        g.data.iter().zip(&self.vals[a].data).map(|(p, q)| p * q).sum();
                    accumulate(&mut grads, a, ga);
                    accumulate(&mut grads, s, Mat::scalar(gs));
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let ga = g.matmul(&self.vals[b].transpose());
                    let gb = self.vals[a].transpose().matmul(&g);
                    accumulate(&mut grads, a, ga);
                    accumulate(&mut grads, b, gb);
                }
                Op::SymFn { a, kind, eig } => {
                    let a = *a;
                    let s = self.vals[a].sym_part();
                    let kind = *kind;
                    let ga = if spectrum_degenerate(eig, &s) {
                        fallbacks += 1;
                        fd_sym_adjoint(&s, &g, |m| {
                            let e = sym_eig(m)?;
                            let mapped: Vec<f64> =
                                e.values.iter().map(|&l| kind.value(l)).collect();
                            Ok(crate::linalg::assemble_sym_fn(&e, &mapped))
                        })?
                    } else {
                        let vals: Vec<f64> =
                            eig.values.iter().map(|&l| kind.value(l)).collect();
                        let ders: Vec<f64> =
                            eig.values.iter().map(|&l| kind.deriv(l)).collect();
                        eig_adjoint(eig, &vals, &ders, &g)
                    };
                    accumulate(&mut grads, a, ga);
                }
                Op::SymPow { a, t, eig } => {
                    let (a, t) = (*a, *t);
                    let s = self.vals[a].sym_part();
                    let tv = self.vals[t].data[0];
                    // Exponent adjoint: sum_i M_ii * cl(l_i)^t * ln cl(l_i),
                    // with M = V^T sym(g) V. Well-conditioned even when the
                    // spectrum is degenerate, so it is always analytic.
                    let gsym = g.sym_part();
                    let vt_g_v = eig.vectors.transpose().matmul(&gsym).matmul(&eig.vectors);
                    let n = eig.values.len();
                    let mut gt = 0.0;
                    for i in 0..n {
                        let cl = eig.values[i].max(EIG_FLOOR);
                        gt += vt_g_v[(i, i)] * cl.powf(tv) * cl.ln();
                    }
                    let ga = if spectrum_degenerate(eig, &s) {
                        fallbacks += 1;
                        fd_sym_adjoint(&s, &g, |m| {
                            let e = sym_eig(m)?;
                            let mapped: Vec<f64> =
                                e.values.iter().map(|&l| l.max(EIG_FLOOR).powf(tv)).collect();
                            Ok(crate::linalg::assemble_sym_fn(&e, &mapped))
                        })?
                    } else {
                        let vals: Vec<f64> =
                            eig.values.iter().map(|&l| l.max(EIG_FLOOR).powf(tv)).collect();
                        let ders: Vec<f64> = eig
                            .values
                            .iter()
                            .map(|&l| {
                                if l <= EIG_FLOOR {
                                    0.0
                                } else {
                                    tv * l.powf(tv - 1.0)
                                }
                            })
                            .collect();
                        eig_adjoint(eig, &vals, &ders, &g)
                    };
                    accumulate(&mut grads, a, ga);
                    accumulate(&mut grads, t, Mat::scalar(gt));
                }
                Op::Dot(a, b) => {
                    let (a, b) = (*a, *b);
                    let gv = g.data[0];
                    let ga = self.vals[b].scale(gv);
                    let gb = self.vals[a].scale(gv);
                    accumulate(&mut grads, a, ga);
                    accumulate(&mut grads, b, gb);
                }
                Op::Index { a, idx } => {
                    let (a, idx) = (*a, *idx);
                    let v = &self.vals[a];
                    let mut ga = Mat::zeros(v.rows, v.cols);
                    ga.data[idx] = g.data[0];
                    accumulate(&mut grads, a, ga);
                }
                Op::ConcatCol(parts) => {
                    let parts = parts.clone();
                    let mut off = 0;
                    for p in parts {
                        let v = &self.vals[p];
                        let mut gp = Mat::zeros(v.rows, 1);
                        gp.data.copy_from_slice(&g.data[off..off + v.rows]);
                        off += v.rows;
                        accumulate(&mut grads, p, gp);
                    }
                }
                Op::SumSquares(a) => {
                    let a = *a;
                    let ga = self.vals[a].scale(2.0 * g.data[0]);
                    accumulate(&mut grads, a, ga);
                }
                Op::SqrtGuard(a) => {
                    let a = *a;
                    let x = self.vals[a].data[0];
                    let d = if x > SQRT_GUARD { 0.5 / x.sqrt() } else { 0.0 };
                    accumulate(&mut grads, a, Mat::scalar(g.data[0] * d));
                }
                Op::SMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let (av, bv) = (self.vals[a].data[0], self.vals[b].data[0]);
                    let gv = g.data[0];
                    accumulate(&mut grads, a, Mat::scalar(gv * bv));
                    accumulate(&mut grads, b, Mat::scalar(gv * av));
                }
                Op::SDiv(a, b) => {
                    let (a, b) = (*a, *b);
                    let (av, bv) = (self.vals[a].data[0], self.vals[b].data[0]);
                    let gv = g.data[0];
                    accumulate(&mut grads, a, Mat::scalar(gv / bv));
                    accumulate(&mut grads, b, Mat::scalar(-gv * av / (bv * bv)));
                }
                Op::Sin(a) => {
                    let a = *a;
                    let x = self.vals[a].data[0];
                    accumulate(&mut grads, a, Mat::scalar(g.data[0] * x.cos()));
                }
                Op::Cos(a) => {
                    let a = *a;
                    let x = self.vals[a].data[0];
                    accumulate(&mut grads, a, Mat::scalar(-g.data[0] * x.sin()));
                }
                Op::Acos(a) => {
                    let a = *a;
                    let x = self.vals[a].data[0];
                    let d = if x.abs() < 1.0 - ACOS_GUARD {
                        -1.0 / (1.0 - x * x).sqrt()
                    } else {
                        0.0
                    };
                    accumulate(&mut grads, a, Mat::scalar(g.data[0] * d));
                }
                Op::CrossEntropy { logits, label } => {
                    let (logits, label) = (*logits, *label);
                    let l = &self.vals[logits];
                    let m = l.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = l.data.iter().map(|&v| (v - m).exp()).sum();
                    let gv = g.data[0];
                    let mut gl = Mat::zeros(l.rows, 1);
                    for j in 0..l.rows {
                        let p = (l.data[j] - m).exp() / z;
                        gl.data[j] = gv * (p - if j == label { 1.0 } else { 0.0 });
                    }
                    accumulate(&mut grads, logits, gl);
                }
            }
            grads[id] = Some(g);
        }

        self.fd_fallbacks += fallbacks;
        for (id, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if !g.is_finite() {
                    return Err(Error::numerical(format!(
                        "non-finite adjoint at tape node {id}"
                    )));
                }
            }
        }
        Ok(Adjoints { grads })
    }
}

fn accumulate(grads: &mut [Option<Mat>], id: NodeId, g: Mat) {
    match &mut grads[id] {
        Some(acc) => {
            debug_assert_eq!((acc.rows, acc.cols), (g.rows, g.cols));
            for (a, b) in acc.data.iter_mut().zip(&g.data) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

/// True when the minimum gap between adjacent (ascending) eigenvalues falls
/// below `EIG_GAP_GUARD` relative to the matrix scale.
fn spectrum_degenerate(eig: &SymEig, s: &Mat) -> bool {
    let n = eig.values.len();
    if n < 2 {
        return false;
    }
    let mut min_gap = f64::INFINITY;
    for i in 0..n - 1 {
        min_gap = min_gap.min(eig.values[i + 1] - eig.values[i]);
    }
    min_gap < EIG_GAP_GUARD * s.frob_norm().max(EIG_FLOOR)
}

/// Analytic eigendecomposition adjoint via divided differences.
fn eig_adjoint(eig: &SymEig, vals: &[f64], ders: &[f64], g: &Mat) -> Mat {
    let n = eig.values.len();
    let gsym = g.sym_part();
    let m = eig.vectors.transpose().matmul(&gsym).matmul(&eig.vectors);
    let mut p = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = if i == j {
                ders[i]
            } else {
                (vals[i] - vals[j]) / (eig.values[i] - eig.values[j])
            };
            p.data[i * n + j] = m[(i, j)] * d;
        }
    }
    eig.vectors.matmul(&p).matmul(&eig.vectors.transpose())
}

/// Symmetrized central finite-difference adjoint of `m -> f(m)` at `s`,
/// contracted against the upstream adjoint `g`.
fn fd_sym_adjoint<F>(s: &Mat, g: &Mat, f: F) -> Result<Mat>
where
    F: Fn(&Mat) -> Result<Mat>,
{
    let n = s.rows;
    let h = FD_FALLBACK_STEP * s.frob_norm().max(1.0);
    let gsym = g.sym_part();
    let mut out = Mat::zeros(n, n);
    for p in 0..n {
        for q in p..n {
            let mut plus = s.clone();
            let mut minus = s.clone();
            let step = if p == q { h } else { 0.5 * h };
            plus.data[p * n + q] += step;
            minus.data[p * n + q] -= step;
            if p != q {
                plus.data[q * n + p] += step;
                minus.data[q * n + p] -= step;
            }
            let fp = f(&plus)?;
            let fm = f(&minus)?;
            let mut d = 0.0;
            for k in 0..n * n {
                d += gsym.data[k] * (fp.data[k] - fm.data[k]) / (2.0 * h);
            }
            out.data[p * n + q] = d;
            out.data[q * n + p] = d;
        }
    }
    Ok(out)
}
