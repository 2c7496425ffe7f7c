//! Manifold points, metrics, geodesics, log/exp maps and isometry actions.
//!
//! Two geometries are supported: symmetric positive definite matrices under
//! the affine-invariant metric (`spd`) and unit hyperspheres under the
//! arc-length metric (`sphere`). The `Point` enum gives runtime polymorphism
//! over the two; algorithms that work on any geometry are written against
//! the `ManifoldOps` trait.

pub mod sample;
pub mod sphere;
pub mod spd;

pub use spd::SpdPoint;
pub use sphere::SpherePoint;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Which geometry a point, sequence or dataset lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManifoldKind {
    Spd,
    Sphere,
}

impl ManifoldKind {
    /// Number of floats in one serialized point of dimension `dim`.
    pub fn point_len(self, dim: usize) -> usize {
        match self {
            ManifoldKind::Spd => dim * dim,
            ManifoldKind::Sphere => dim,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::Spd => "spd",
            ManifoldKind::Sphere => "sphere",
        }
    }
}

/// Core geometric operations shared by both manifolds.
///
/// `log_map`/`exp_map` are inverse to each other near the base point, and
/// `geodesic(x, y, t)` traces the minimizing geodesic from `x` (t = 0) to
/// `y` (t = 1). Tangent vectors are measured in the Riemannian metric at
/// the base point.
pub trait ManifoldOps: Sized + Clone + 'static {
    type Tangent: Clone;

    fn distance(&self, other: &Self) -> Result<f64>;
    fn geodesic(&self, other: &Self, t: f64) -> Result<Self>;
    fn log_map(&self, other: &Self) -> Result<Self::Tangent>;
    fn exp_map(&self, v: &Self::Tangent) -> Result<Self>;
    fn zero_tangent(&self) -> Self::Tangent;
    fn tangent_add_scaled(acc: &mut Self::Tangent, w: f64, v: &Self::Tangent);
    /// Metric norm of `v` as a tangent vector at `self`.
    fn tangent_norm(&self, v: &Self::Tangent) -> f64;
}

/// Runtime-polymorphic manifold point.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Spd(SpdPoint),
    Sphere(SpherePoint),
}

/// Runtime-polymorphic tangent vector.
#[derive(Clone, Debug)]
pub enum Tangent {
    Spd(Mat),
    Sphere(Vec<f64>),
}

impl Point {
    pub fn kind(&self) -> ManifoldKind {
        match self {
            Point::Spd(_) => ManifoldKind::Spd,
            Point::Sphere(_) => ManifoldKind::Sphere,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Point::Spd(p) => p.dim(),
            Point::Sphere(p) => p.dim(),
        }
    }

    pub fn as_spd(&self) -> Result<&SpdPoint> {
        match self {
            Point::Spd(p) => Ok(p),
            Point::Sphere(_) => Err(Error::domain("expected an spd point, got a sphere point")),
        }
    }

    pub fn as_sphere(&self) -> Result<&SpherePoint> {
        match self {
            Point::Sphere(p) => Ok(p),
            Point::Spd(_) => Err(Error::domain("expected a sphere point, got an spd point")),
        }
    }

    /// Flat float encoding: row-major matrix for spd, coordinates for sphere.
    pub fn to_floats(&self) -> Vec<f64> {
        match self {
            Point::Spd(p) => p.mat().data().to_vec(),
            Point::Sphere(p) => p.coords().to_vec(),
        }
    }

    /// Decodes and validates a point from its flat float encoding.
    pub fn from_floats(kind: ManifoldKind, dim: usize, floats: &[f64]) -> Result<Point> {
        match kind {
            ManifoldKind::Spd => {
                if floats.len() != dim * dim {
                    return Err(Error::domain(format!(
                        "spd point of dimension {dim} needs {} floats, got {}",
                        dim * dim,
                        floats.len()
                    )));
                }
                let m = Mat::from_vec(dim, dim, floats.to_vec());
                Ok(Point::Spd(SpdPoint::new(m)?))
            }
            ManifoldKind::Sphere => {
                if floats.len() != dim {
                    return Err(Error::domain(format!(
                        "sphere point of dimension {dim} needs {dim} floats, got {}",
                        floats.len()
                    )));
                }
                Ok(Point::Sphere(SpherePoint::new(floats.to_vec())?))
            }
        }
    }
}

fn kind_mismatch() -> Error {
    Error::domain("points live on different manifolds")
}

impl ManifoldOps for Point {
    type Tangent = Tangent;

    fn distance(&self, other: &Self) -> Result<f64> {
        match (self, other) {
            (Point::Spd(a), Point::Spd(b)) => a.distance(b),
            (Point::Sphere(a), Point::Sphere(b)) => a.distance(b),
            _ => Err(kind_mismatch()),
        }
    }

    fn geodesic(&self, other: &Self, t: f64) -> Result<Self> {
        match (self, other) {
            (Point::Spd(a), Point::Spd(b)) => Ok(Point::Spd(a.geodesic(b, t)?)),
            (Point::Sphere(a), Point::Sphere(b)) => Ok(Point::Sphere(a.geodesic(b, t)?)),
            _ => Err(kind_mismatch()),
        }
    }

    fn log_map(&self, other: &Self) -> Result<Tangent> {
        match (self, other) {
            (Point::Spd(a), Point::Spd(b)) => Ok(Tangent::Spd(a.log_map(b)?)),
            (Point::Sphere(a), Point::Sphere(b)) => Ok(Tangent::Sphere(a.log_map(b)?)),
            _ => Err(kind_mismatch()),
        }
    }

    fn exp_map(&self, v: &Tangent) -> Result<Self> {
        match (self, v) {
            (Point::Spd(a), Tangent::Spd(v)) => Ok(Point::Spd(a.exp_map(v)?)),
            (Point::Sphere(a), Tangent::Sphere(v)) => Ok(Point::Sphere(a.exp_map(v)?)),
            _ => Err(kind_mismatch()),
        }
    }

    fn zero_tangent(&self) -> Tangent {
        match self {
            Point::Spd(a) => Tangent::Spd(a.zero_tangent()),
            Point::Sphere(a) => Tangent::Sphere(a.zero_tangent()),
        }
    }

    fn tangent_add_scaled(acc: &mut Tangent, w: f64, v: &Tangent) {
        match (acc, v) {
            (Tangent::Spd(acc), Tangent::Spd(v)) => SpdPoint::tangent_add_scaled(acc, w, v),
            (Tangent::Sphere(acc), Tangent::Sphere(v)) => {
                SpherePoint::tangent_add_scaled(acc, w, v)
            }
            _ => panic!("tangent kinds do not match"),
        }
    }

    fn tangent_norm(&self, v: &Tangent) -> f64 {
        match (self, v) {
            (Point::Spd(a), Tangent::Spd(v)) => a.tangent_norm(v),
            (Point::Sphere(a), Tangent::Sphere(v)) => a.tangent_norm(v),
            _ => panic!("tangent kinds do not match"),
        }
    }
}

/// Isometry of one of the two geometries: a congruence X -> A X A^T by an
/// invertible matrix on the spd manifold, or a rotation x -> Q x on the
/// sphere.
#[derive(Clone, Debug)]
pub enum Isometry {
    Congruence(Mat),
    Rotation(Mat),
}

impl Isometry {
    /// Validates invertibility (|det| > 1e-10) and wraps a congruence action.
    pub fn congruence(a: Mat) -> Result<Self> {
        spd::check_congruence(&a)?;
        Ok(Isometry::Congruence(a))
    }

    /// Validates orthogonality (|Q^T Q - I| <= 1e-10 in Frobenius norm) and
    /// wraps a rotation action.
    pub fn rotation(q: Mat) -> Result<Self> {
        sphere::check_rotation(&q)?;
        Ok(Isometry::Rotation(q))
    }

    pub fn apply(&self, p: &Point) -> Result<Point> {
        match (self, p) {
            (Isometry::Congruence(a), Point::Spd(x)) => Ok(Point::Spd(spd::spd_act(a, x)?)),
            (Isometry::Rotation(q), Point::Sphere(x)) => {
                Ok(Point::Sphere(sphere::sphere_act(q, x)?))
            }
            _ => Err(Error::domain("isometry does not act on this manifold")),
        }
    }
}
