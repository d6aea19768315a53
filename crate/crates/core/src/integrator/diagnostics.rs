//! Relative error against a reference, post-selection of `Y₋₁`, and the sum
//! identity check.

use serde::Serialize;

use super::RunResult;
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeError {
    /// `sqrt(Σ_t Σ_i (c − r)²) / sqrt(Σ_t Σ_i r²)` over every grid point and sample.
    pub total: f64,
    /// `‖c(t) − r(t)‖ / ‖r(t)‖` per sample.
    pub per_time: Vec<f64>,
}

pub fn relative_error(candidate: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<RelativeError> {
    if candidate.len() != reference.len() {
        return Err(Error::SeriesMismatch(format!(
            "{} candidate samples against {} reference samples",
            candidate.len(),
            reference.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut per_time = Vec::with_capacity(candidate.len());
    for (s, (c, r)) in candidate.iter().zip(reference).enumerate() {
        if c.len() != r.len() {
            return Err(Error::SeriesMismatch(format!("sample {s}: {} points against {}", c.len(), r.len())));
        }
        let d: f64 = c.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum();
        let rr = par::norm_sq(r);
        num += d;
        den += rr;
        per_time.push(match (rr > 0.0, d > 0.0) {
            (true, _) => (d / rr).sqrt(),
            (false, false) => 0.0,
            (false, true) => f64::INFINITY,
        });
    }
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(RelativeError { total: (num / den).sqrt(), per_time })
}

/// Index of the sample at time `t`.
pub fn sample_index(times: &[f64], t: f64) -> Result<usize> {
    let tol = 1e-9 * t.abs().max(1.0);
    times.iter().position(|&s| (s - t).abs() <= tol).ok_or(Error::NotSampled(t))
}

/// The state left after measuring the block register in the `y₋₁` outcome,
/// with the probability of that outcome.
pub fn post_select(run: &RunResult, t: f64) -> Result<(Vec<f64>, f64)> {
    let k = sample_index(&run.times, t)?;
    Ok((run.solution_series[k].clone(), run.p_series[k]))
}

/// `p = ‖y₋₁‖² / ‖Y‖²` from block norms, `y₋₁` first.
pub fn success_rate(block_norms: &[f64]) -> f64 {
    let total: f64 = block_norms.iter().map(|v| v * v).sum();
    if total > 0.0 {
        block_norms[0] * block_norms[0] / total
    } else {
        0.0
    }
}

/// `‖y₋₁ − Σ_a y_{0,a}‖ / ‖y₋₁‖`.
pub fn sum_identity_residual(sum: &[f64], orders: &[&[f64]]) -> f64 {
    let mut d = sum.to_vec();
    for u in orders {
        for (x, v) in d.iter_mut().zip(u.iter()) {
            *x -= v;
        }
    }
    let s = par::norm(sum);
    if s > 0.0 {
        par::norm(&d) / s
    } else {
        par::norm(&d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_scaled() {
        let r = vec![vec![1.0, -2.0, 0.5], vec![0.3, 0.0, 4.0]];
        assert_eq!(relative_error(&r, &r).unwrap().total, 0.0);
        let c: Vec<Vec<f64>> = r.iter().map(|v| v.iter().map(|x| 1.01 * x).collect()).collect();
        let e = relative_error(&c, &r).unwrap();
        assert!((e.total - 0.01).abs() < 1e-15);
        assert!(e.per_time.iter().all(|v| (v - 0.01).abs() < 1e-15));
    }

    #[test]
    fn errors() {
        let z = vec![vec![0.0; 3]];
        assert_eq!(relative_error(&z, &z), Err(Error::ZeroReference));
        assert!(matches!(relative_error(&z, &[]), Err(Error::SeriesMismatch(_))));
    }

    #[test]
    fn only_sum_block_gives_unit_rate() {
        assert_eq!(success_rate(&[2.0, 0.0, 0.0]), 1.0);
        assert_eq!(sample_index(&[0.0, 0.01, 0.02], 0.02).unwrap(), 2);
        assert_eq!(sample_index(&[0.0, 0.01], 0.015), Err(Error::NotSampled(0.015)));
    }
}
