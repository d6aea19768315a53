//! Time integration of the linear and nonlinear systems and the diagnostics
//! computed from their trajectories.

pub mod diagnostics;
pub mod linear;
pub mod reference;
pub mod resources;
pub mod rk4;
pub mod sequential;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ham::AlphaReport;
use resources::ResourceReport;

/// Any block norm above this, or a non-finite one, aborts the run.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Fail with the first block, in registry order, whose norm has blown up.
pub fn check_blocks(t: f64, norms: &[f64], labels: &[String]) -> Result<()> {
    for (v, label) in norms.iter().zip(labels) {
        if !v.is_finite() || *v > DIVERGENCE_THRESHOLD {
            return Err(Error::Divergence { time: t, block: label.clone(), norm: *v });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    /// Sample interval.
    pub dt: f64,
    pub t_end: f64,
    /// RK4 steps per sample interval; chosen from the spectral radius if `None`.
    pub substeps: Option<usize>,
    /// Block indices whose vectors are recorded at every sample.
    pub keep_blocks: Vec<usize>,
    pub keep_state: bool,
}

impl IntegrateOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        IntegrateOptions { dt, t_end, substeps: None, keep_blocks: Vec::new(), keep_state: false }
    }
}

/// Sampled output of one QHAM level.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub level: usize,
    pub times: Vec<f64>,
    /// `Y₋₁` at each sample.
    pub solution_series: Vec<Vec<f64>>,
    pub block_labels: Vec<String>,
    /// `[sample][block]`
    pub block_norms: Vec<Vec<f64>>,
    pub p_series: Vec<f64>,
    pub rel_error_series: Vec<f64>,
    pub rel_error: f64,
    /// `‖U_a‖` as `[a][sample]`.
    pub order_norms: Vec<Vec<f64>>,
    pub alpha: Option<AlphaReport>,
    pub resources: Option<ResourceReport>,
    pub substeps: usize,
}

impl RunResult {
    /// `‖Y(t)‖` at each sample.
    pub fn full_norm(&self) -> Vec<f64> {
        self.block_norms.iter().map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }

    /// `max_t ‖U₀(t)‖`.
    pub fn max_u0_norm(&self) -> f64 {
        self.order_norms.first().map_or(0.0, |s| s.iter().cloned().fold(0.0, f64::max))
    }
}
