//! Classical fourth-order Runge–Kutta with fixed substeps per sample.

use crate::error::{Error, Result};
use crate::par;
use crate::sparse::Csr;

/// Right-hand side `f(t, y)`.
pub trait OdeRhs: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Real-axis and imaginary-axis stability limits of RK4 are about 2.785 and
/// 2.828; runs whose `ρ·dt` exceeds this are refused.
pub const STABILITY_LIMIT: f64 = 2.8;
/// Automatic substepping aims for `ρ·dt_sub` at or below this value.
pub const TARGET_PRODUCT: f64 = 2.0;
/// Safety factor on the power-iteration estimate, which approaches ρ from below.
pub const RHO_MARGIN: f64 = 1.1;

pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    pub fn step<F: OdeRhs + ?Sized>(&mut self, f: &F, t: f64, h: f64, y: &mut [f64]) -> Result<()> {
        f.eval(t, y, &mut self.k1)?;
        par::axpy_into(&mut self.tmp, y, 0.5 * h, &self.k1);
        f.eval(t + 0.5 * h, &self.tmp, &mut self.k2)?;
        par::axpy_into(&mut self.tmp, y, 0.5 * h, &self.k2);
        f.eval(t + 0.5 * h, &self.tmp, &mut self.k3)?;
        par::axpy_into(&mut self.tmp, y, h, &self.k3);
        f.eval(t + h, &self.tmp, &mut self.k4)?;
        par::rk4_combine(y, h / 6.0, &self.k1, &self.k2, &self.k3, &self.k4);
        Ok(())
    }
}

/// Number of sample intervals `T/dt`, which must be integral up to rounding.
pub fn sample_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= 0.0) || !dt.is_finite() || !t_end.is_finite() {
        return Err(Error::Domain(format!("need dt > 0 and T ≥ 0, got dt = {dt}, T = {t_end}")));
    }
    let steps = (t_end / dt).round();
    if (steps * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::Domain(format!("T = {t_end} is not a multiple of dt = {dt}")));
    }
    Ok(steps as usize)
}

/// Integrate from `t = 0` over `steps` sample intervals of length `dt`, each
/// split into `substeps` RK4 steps. `observe` sees the initial state and each
/// sampled state.
pub fn integrate<F, O>(f: &F, y: &mut [f64], dt: f64, steps: usize, substeps: usize, mut observe: O) -> Result<()>
where
    F: OdeRhs + ?Sized,
    O: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    let substeps = substeps.max(1);
    let h = dt / substeps as f64;
    let mut rk = Rk4::new(y.len());
    observe(0, 0.0, y)?;
    for s in 0..steps {
        let t0 = s as f64 * dt;
        for q in 0..substeps {
            rk.step(f, t0 + q as f64 * h, h, y)?;
        }
        observe(s + 1, (s + 1) as f64 * dt, y)?;
    }
    Ok(())
}

/// Estimate of the spectral radius of `a` by power iteration on `a²` from a
/// fixed start vector. Squaring makes purely imaginary spectra converge too.
pub fn spectral_radius(a: &Csr) -> f64 {
    let n = a.nrows;
    if n == 0 || a.nnz() == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).sin()).collect();
    let mut w = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut est = 0.0;
    for _ in 0..80 {
        let nv = par::norm(&v);
        if nv == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        par::spmv(a, &v, &mut w);
        par::spmv(a, &w, &mut u);
        let r = par::norm(&u);
        if r == 0.0 {
            // Nilpotent on this start vector: fall back to the one-step growth.
            est = par::norm(&w);
            break;
        }
        est = r.sqrt();
        std::mem::swap(&mut v, &mut u);
    }
    est
}

/// Substeps per sample interval: either the requested count, checked against
/// the stability limit, or the smallest count meeting the target product.
pub fn choose_substeps(rho: f64, dt: f64, requested: Option<usize>) -> Result<usize> {
    let product = rho * RHO_MARGIN * dt;
    match requested {
        Some(k) => {
            let k = k.max(1);
            let p = rho * dt / k as f64;
            if p > STABILITY_LIMIT {
                return Err(Error::Unstable { product: p, limit: STABILITY_LIMIT });
            }
            Ok(k)
        }
        None => Ok(((product / TARGET_PRODUCT).ceil() as usize).max(1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeRhs for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = -y[0];
            Ok(())
        }
    }

    #[test]
    fn exponential_decay() {
        let mut y = vec![1.0];
        integrate(&Decay, &mut y, 0.01, sample_count(0.01, 1.0).unwrap(), 1, |_, _, _| Ok(())).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn sample_count_checks() {
        assert_eq!(sample_count(0.005, 6.0).unwrap(), 1200);
        assert!(sample_count(0.3, 1.0).is_err());
        assert!(sample_count(0.0, 1.0).is_err());
    }

    #[test]
    fn radius_of_known_matrices() {
        let a = Csr::from_rows(2, &[vec![(0, -3.0)], vec![(1, -1.0)]]).unwrap();
        assert!((spectral_radius(&a) - 3.0).abs() < 1e-6);
        // Rotation generator: eigenvalues ±2i.
        let r = Csr::from_rows(2, &[vec![(1, 2.0)], vec![(0, -2.0)]]).unwrap();
        assert!((spectral_radius(&r) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn substep_policy() {
        assert_eq!(choose_substeps(435.6, 0.01, None).unwrap(), 3);
        assert!(matches!(choose_substeps(435.6, 0.01, Some(1)), Err(Error::Unstable { .. })));
        assert_eq!(choose_substeps(435.6, 0.01, Some(2)).unwrap(), 2);
    }
}
