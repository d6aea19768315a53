//! Resource estimates for running the linearized system on a quantum linear
//! ODE solver, all with unit constants.

use serde::Serialize;

use super::RunResult;
use crate::discretize::DiscreteSystem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    /// Max row-sum norm of `A(t)` over the sampled assembly times.
    pub alpha_a: f64,
    pub qubit_count: u32,
    pub query_estimate: f64,
    pub gate_factor: f64,
    /// `None` when `α ≥ 1/2` or `α ≥ 1 − ‖U₀‖`.
    pub p_lower_bound: Option<f64>,
    pub alpha: f64,
    pub u0_norm: f64,
    pub epsilon: f64,
}

fn ceil_log2(x: f64) -> u32 {
    if x <= 1.0 {
        0
    } else {
        x.log2().ceil() as u32
    }
}

/// `⌈log₂(T/ε)⌉ + (m+1)⌈log₂ n⌉`.
pub fn qubit_count(n: usize, m: usize, t_end: f64, eps: f64) -> u32 {
    ceil_log2(t_end / eps) + (m as u32 + 1) * ceil_log2(n as f64)
}

/// `s·m²·⌈log₂ N⌉²`.
pub fn gate_factor(s: usize, m: usize, dim: usize) -> f64 {
    let l = ceil_log2(dim as f64) as f64;
    (s * m * m) as f64 * l * l
}

/// `(‖Y_in‖/‖Y(T)‖)·α_A·T·log₂²(1/ε)`.
pub fn query_estimate(y_in_norm: f64, y_end_norm: f64, alpha_a: f64, t_end: f64, eps: f64) -> f64 {
    let l = (1.0 / eps).log2();
    y_in_norm / y_end_norm * alpha_a * t_end * l * l
}

/// `[(1−2α)(1−α−‖U₀‖)/(2−2α−‖U₀‖)]²`, the guaranteed floor on `p`.
pub fn p_lower_bound(alpha: f64, u0_norm: f64) -> Option<f64> {
    if !(alpha < 0.5) || !(alpha < 1.0 - u0_norm) || alpha < 0.0 {
        return None;
    }
    let r = (1.0 - 2.0 * alpha) * (1.0 - alpha - u0_norm) / (2.0 - 2.0 * alpha - u0_norm);
    Some(r * r)
}

/// Evaluate every estimate for a completed run of `ds`.
pub fn resource_estimate(ds: &DiscreteSystem, run: &RunResult, s: usize, eps: f64) -> Result<ResourceReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("ε must lie in (0, 1), got {eps}")));
    }
    let t_end = *run.times.last().ok_or_else(|| Error::Domain("empty run".into()))?;
    let mut alpha_a = ds.a_at(0.0)?.max_row_sum();
    if !ds.cfg.aux_time.is_constant() {
        alpha_a = alpha_a.max(ds.a_at(t_end)?.max_row_sum());
    }
    let full = run.full_norm();
    let alpha = run.alpha.as_ref().map_or(f64::INFINITY, |a| a.sup);
    let u0_norm = run.max_u0_norm();
    let y_in = crate::par::norm(&ds.y_in);
    Ok(ResourceReport {
        alpha_a,
        qubit_count: qubit_count(ds.n(), ds.cfg.m, t_end, eps),
        query_estimate: query_estimate(y_in, *full.last().unwrap(), alpha_a, t_end, eps),
        gate_factor: gate_factor(s, ds.cfg.m, ds.dim),
        p_lower_bound: p_lower_bound(alpha, u0_norm),
        alpha,
        u0_norm,
        epsilon: eps,
    })
}
