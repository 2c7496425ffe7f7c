//! Dilated convolutional networks over manifold-valued sequences.
//!
//! The library covers three layers of functionality:
//!
//! * geometry: symmetric positive definite matrices under the affine-invariant
//!   metric and unit hyperspheres, with distances, geodesics, log/exp maps and
//!   isometry actions (`manifold`), built on a self-contained symmetric
//!   eigensolver (`linalg`);
//! * modelling: weighted Frechet means (`wfm`), dilated convolution layers,
//!   residual blocks and classification heads assembled into networks (`net`),
//!   trained by reverse-mode differentiation and SGD (`train`);
//! * experiments: synthetic sequence generators and binary dataset formats
//!   (`data`) and a permutation-based two-group test (`stats`).

pub mod data;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod net;
pub mod stats;
pub mod train;
pub mod wfm;

pub use error::{Error, Result};
