//! Weighted Frechet means of manifold-valued samples.
//!
//! The mean of points P_0..P_{L-1} with convex weights w minimizes
//! `sum_i w(i) d^2(P_i, M)`. Two estimators are provided:
//!
//! * `recursive_wfm`: a single sweep of geodesic steps,
//!   `M_0 = P_0`, `M_n = geodesic(M_{n-1}, P_n, w(n) / sum_{j<=n} w(j))`,
//!   which is exact for L <= 2 and for commuting spd inputs, and a close
//!   approximation otherwise;
//! * `exact_wfm_oracle`: fixed-point iteration of the first-order condition,
//!   `M <- Exp_M(sum_i w(i) Log_M(P_i))`, run to tolerance.
//!
//! Weights use a square-root parameterization: the stored `raw` vector is
//! unconstrained apart from a magnitude floor, and the normalized weights
//! are `raw(i)^2 / sum_j raw(j)^2`, so they are always convex coefficients.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::{Error, Result};
use crate::manifold::ManifoldOps;

/// Smallest allowed magnitude of a raw weight entry.
pub const RAW_FLOOR: f64 = 1e-6;

/// Default tolerance on the tangent update norm in `exact_wfm_oracle`.
pub const ORACLE_TOL: f64 = 1e-10;

/// Default iteration cap in `exact_wfm_oracle`.
pub const ORACLE_MAX_ITER: usize = 200;

/// Sphere means are only guaranteed unique for inputs of diameter below
/// pi/2; larger spreads trigger a one-time warning on stderr.
pub const SPHERE_SPREAD_WARN: f64 = std::f64::consts::FRAC_PI_2;

static SPREAD_WARNED: AtomicBool = AtomicBool::new(false);

fn warn_spread(diameter: f64) {
    if !SPREAD_WARNED.swap(true, Ordering::Relaxed) {
        eprintln!(
            "warning: sphere input spread {diameter:.3} exceeds pi/2; \
             the weighted Frechet mean may not be unique"
        );
    }
}

#[cfg(test)]
pub(crate) fn spread_warning_emitted() -> bool {
    SPREAD_WARNED.load(Ordering::Relaxed)
}

/// Square-root parameterized convex weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexWeights {
    raw: Vec<f64>,
}

impl ConvexWeights {
    /// Validates that every raw entry is finite with magnitude at least
    /// `RAW_FLOOR`.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::domain("convex weights need at least one entry"));
        }
        for (i, &r) in raw.iter().enumerate() {
            if !r.is_finite() {
                return Err(Error::domain(format!("raw weight {i} is not finite")));
            }
            if r.abs() < RAW_FLOOR {
                return Err(Error::domain(format!(
                    "raw weight {i} has magnitude {:.3e} below the floor {RAW_FLOOR}",
                    r.abs()
                )));
            }
        }
        Ok(ConvexWeights { raw })
    }

    /// Uniform weights: every raw entry 1, so w(i) = 1/len.
    pub fn uniform(len: usize) -> Self {
        assert!(len > 0);
        ConvexWeights { raw: vec![1.0; len] }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Normalized weights `raw(i)^2 / sum_j raw(j)^2`; they sum to 1.
    pub fn normalized(&self) -> Vec<f64> {
        let total: f64 = self.raw.iter().map(|r| r * r).sum();
        self.raw.iter().map(|r| r * r / total).collect()
    }

    /// Weights over the first `len` entries only, renormalized implicitly.
    pub fn prefix(&self, len: usize) -> ConvexWeights {
        assert!(0 < len && len <= self.raw.len());
        ConvexWeights { raw: self.raw[..len].to_vec() }
    }
}

fn check_inputs<P: ManifoldOps>(points: &[P], weights: &ConvexWeights) -> Result<()> {
    if points.is_empty() {
        return Err(Error::domain("weighted Frechet mean of an empty point list"));
    }
    if points.len() != weights.len() {
        return Err(Error::domain(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    Ok(())
}

/// One-sweep recursive estimator of the weighted Frechet mean.
///
/// `points[0]` is the head of the recursion (the most recent sample when
/// the list is a temporal window) and later entries are folded in by
/// geodesic steps whose lengths depend only on ratios of the squared raw
/// weights, so any rescaling of `raw` leaves the result unchanged.
pub fn recursive_wfm<P: ManifoldOps>(points: &[P], weights: &ConvexWeights) -> Result<P> {
    let refs: Vec<&P> = points.iter().collect();
    recursive_wfm_refs(&refs, weights)
}

/// `recursive_wfm` over borrowed points, for callers that assemble windows
/// out of larger storage without cloning.
pub fn recursive_wfm_refs<P: ManifoldOps>(points: &[&P], weights: &ConvexWeights) -> Result<P> {
    if points.is_empty() {
        return Err(Error::domain("weighted Frechet mean of an empty point list"));
    }
    if points.len() != weights.len() {
        return Err(Error::domain(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    let threshold = spread_threshold::<P>();
    let mut mean = points[0].clone();
    let mut partial = weights.raw[0] * weights.raw[0];
    for n in 1..points.len() {
        let wn = weights.raw[n] * weights.raw[n];
        partial += wn;
        if let Some(thr) = threshold {
            let step = mean.distance(points[n])?;
            if step > thr {
                warn_spread(step);
            }
        }
        mean = mean.geodesic(points[n], wn / partial)?;
    }
    Ok(mean)
}

/// Weighted variance `sum_i w(i) d^2(P_i, m)` under the normalized weights.
pub fn weighted_variance<P: ManifoldOps>(
    points: &[P],
    weights: &ConvexWeights,
    m: &P,
) -> Result<f64> {
    check_inputs(points, weights)?;
    let w = weights.normalized();
    let mut acc = 0.0;
    for (p, wi) in points.iter().zip(&w) {
        let d = m.distance(p)?;
        acc += wi * d * d;
    }
    Ok(acc)
}

/// Largest pairwise distance among the input points.
pub fn input_diameter<P: ManifoldOps>(points: &[P]) -> Result<f64> {
    let mut diam = 0.0_f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            diam = diam.max(points[i].distance(&points[j])?);
        }
    }
    Ok(diam)
}

/// Fixed-point iteration for the exact weighted Frechet mean.
///
/// Starts at `points[0]` and applies `M <- Exp_M(sum_i w(i) Log_M(P_i))`
/// until the metric norm of the tangent update falls below `tol`; more than
/// `max_iter` iterations is a numerical error. Independent of
/// `recursive_wfm` in both iteration path and stopping rule.
pub fn exact_wfm_oracle<P: ManifoldOps>(
    points: &[P],
    weights: &ConvexWeights,
    tol: f64,
    max_iter: usize,
) -> Result<P> {
    check_inputs(points, weights)?;
    if !(tol > 0.0) {
        return Err(Error::domain("oracle tolerance must be positive"));
    }
    if spread_threshold::<P>().is_some() {
        let diam = input_diameter(points)?;
        if diam > SPHERE_SPREAD_WARN {
            warn_spread(diam);
        }
    }
    let w = weights.normalized();
    let mut mean = points[0].clone();
    for _ in 0..max_iter {
        let mut update = mean.zero_tangent();
        for (p, wi) in points.iter().zip(&w) {
            let v = mean.log_map(p)?;
            P::tangent_add_scaled(&mut update, *wi, &v);
        }
        let step = mean.tangent_norm(&update);
        if step < tol {
            return Ok(mean);
        }
        mean = mean.exp_map(&update)?;
    }
    Err(Error::numerical(format!(
        "weighted Frechet mean iteration did not reach tolerance {tol} within {max_iter} steps"
    )))
}

/// Spread threshold above which a warning is emitted, when the point type
/// has a known uniqueness radius. Resolved per concrete type at runtime by
/// probing a zero tangent; only the sphere variants return a threshold.
fn spread_threshold<P: ManifoldOps>() -> Option<f64> {
    // Type-level dispatch without extending the trait surface: the two
    // sphere-valued point types opt in here.
    use std::any::TypeId;
    fn type_is<A: 'static, B: 'static>() -> bool {
        TypeId::of::<A>() == TypeId::of::<B>()
    }
    if type_is::<P, crate::manifold::SpherePoint>()
        || type_is::<P, crate::manifold::Point>()
    {
        Some(SPHERE_SPREAD_WARN)
    } else {
        None
    }
}
