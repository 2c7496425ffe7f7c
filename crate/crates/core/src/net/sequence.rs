//! Multi-channel sequences of manifold points.

use crate::error::{Error, Result};
use crate::manifold::{ManifoldKind, Point};

/// A `channels x len` grid of points on one manifold, stored channel-major:
/// the point for channel `c` at time `t` sits at index `c * len + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldSequence {
    kind: ManifoldKind,
    dim: usize,
    channels: usize,
    len: usize,
    points: Vec<Point>,
}

impl ManifoldSequence {
    /// Validates that the grid is full and every point matches `kind`/`dim`.
    pub fn new(
        kind: ManifoldKind,
        dim: usize,
        channels: usize,
        len: usize,
        points: Vec<Point>,
    ) -> Result<Self> {
        if channels == 0 || len == 0 {
            return Err(Error::domain("sequence needs at least one channel and one timestep"));
        }
        if points.len() != channels * len {
            return Err(Error::domain(format!(
                "sequence of {channels} channels x {len} timesteps needs {} points, got {}",
                channels * len,
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.kind() != kind || p.dim() != dim {
                return Err(Error::domain(format!(
                    "point {i} is {}({}) but the sequence is {}({dim})",
                    p.kind().name(),
                    p.dim(),
                    kind.name()
                )));
            }
        }
        Ok(ManifoldSequence { kind, dim, channels, len, points })
    }

    /// Single-channel sequence from a time-ordered point list.
    pub fn single_channel(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("sequence needs at least one timestep"));
        }
        let kind = points[0].kind();
        let dim = points[0].dim();
        let len = points.len();
        ManifoldSequence::new(kind, dim, 1, len, points)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, channel: usize, t: usize) -> &Point {
        assert!(channel < self.channels && t < self.len, "index out of range");
        &self.points[channel * self.len + t]
    }

    pub fn set(&mut self, channel: usize, t: usize, p: Point) -> Result<()> {
        if p.kind() != self.kind || p.dim() != self.dim {
            return Err(Error::domain("replacement point has the wrong manifold or dimension"));
        }
        assert!(channel < self.channels && t < self.len, "index out of range");
        self.points[channel * self.len + t] = p;
        Ok(())
    }

    /// The points of the final timestep, one per channel.
    pub fn last_values(&self) -> Vec<&Point> {
        (0..self.channels).map(|c| self.get(c, self.len - 1)).collect()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}
