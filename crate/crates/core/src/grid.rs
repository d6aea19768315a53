use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the grid meets the domain boundary. In both cases values outside
/// the grid are treated as zero by every stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Interior nodes only, `x_i = lo + i·Δx` for `i = 1..=n`, `Δx = (hi−lo)/(n+1)`.
    DirichletExclusive,
    /// Nodes include both endpoints, `x_i = lo + i·Δx` for `i = 0..n`, `Δx = (hi−lo)/(n−1)`.
    ZeroGhostInclusive,
}

/// Uniform 1-D grid shared by every ancilla axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub policy: BoundaryPolicy,
}

impl Grid {
    pub const MIN_POINTS: usize = 5;

    pub fn new(lo: f64, hi: f64, n: usize, policy: BoundaryPolicy) -> Result<Self> {
        if n < Self::MIN_POINTS {
            return Err(Error::GridTooSmall(format!(
                "{n} points per axis, the five-point stencil needs at least {}",
                Self::MIN_POINTS
            )));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Grid { lo, hi, n, policy })
    }

    pub fn spacing(&self) -> f64 {
        match self.policy {
            BoundaryPolicy::DirichletExclusive => (self.hi - self.lo) / (self.n as f64 + 1.0),
            BoundaryPolicy::ZeroGhostInclusive => (self.hi - self.lo) / (self.n as f64 - 1.0),
        }
    }

    pub fn point(&self, i: usize) -> f64 {
        let dx = self.spacing();
        match self.policy {
            BoundaryPolicy::DirichletExclusive => self.lo + (i as f64 + 1.0) * dx,
            BoundaryPolicy::ZeroGhostInclusive => self.lo + i as f64 * dx,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }
}
