//! Time stepping of the materialized system `dY/dt = A(t) Y + B(t)`.

use std::sync::Arc;

use super::rk4::{self, OdeRhs};
use super::{check_blocks, IntegrateOptions};
use crate::discretize::{discretize_with, DiscreteSystem, DiscretizeOptions};
use crate::error::Result;
use crate::grid::Grid;
use crate::linearizer::LinearizedSystem;
use crate::par;
use crate::sparse::Csr;

/// `A` and `B` fixed for the whole run (constant H, time-independent coefficients).
pub struct FrozenOde {
    pub a: Csr,
    pub b: Vec<f64>,
}

impl OdeRhs for FrozenOde {
    fn dim(&self) -> usize {
        self.a.nrows
    }

    fn eval(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        par::spmv(&self.a, y, out);
        if !self.b.is_empty() {
            for (o, b) in out.iter_mut().zip(&self.b) {
                *o += b;
            }
        }
        Ok(())
    }
}

/// `Σ_k g(t)^k (A_k Y + B_k)` for a time-dependent H.
pub struct WeightedOde<'a> {
    pub ds: &'a DiscreteSystem,
}

impl OdeRhs for WeightedOde<'_> {
    fn dim(&self) -> usize {
        self.ds.dim
    }

    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let g = self.ds.g(t);
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut tmp = vec![0.0; y.len()];
        for (k, m) in &self.ds.a {
            par::spmv(m, y, &mut tmp);
            let w = g.powi(*k as i32);
            out.iter_mut().zip(&tmp).for_each(|(o, v)| *o += w * v);
        }
        for (k, b) in &self.ds.b {
            let w = g.powi(*k as i32);
            out.iter_mut().zip(b).for_each(|(o, v)| *o += w * v);
        }
        Ok(())
    }
}

/// Re-lowers the symbolic system at every stage time, for operators whose
/// coefficients depend on time.
pub struct ReassemblingOde<'a> {
    pub sys: &'a LinearizedSystem,
    pub grid: &'a Grid,
    pub base: Option<Arc<DiscreteSystem>>,
    pub cap: usize,
    pub dim: usize,
}

impl OdeRhs for ReassemblingOde<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let ds = discretize_with(self.sys, self.grid, self.base.clone(), DiscretizeOptions { cap: self.cap, t })?;
        WeightedOde { ds: &ds }.eval(t, y, out)
    }
}

/// Sampled output of a materialized run.
#[derive(Debug, Clone)]
pub struct LinearRun {
    pub times: Vec<f64>,
    pub block_labels: Vec<String>,
    /// `[sample][block]`
    pub block_norms: Vec<Vec<f64>>,
    /// `Y₋₁` at each sample.
    pub sum_series: Vec<Vec<f64>>,
    /// Vectors of the requested blocks, `[requested][sample]`.
    pub kept_blocks: Vec<Vec<Vec<f64>>>,
    pub states: Option<Vec<Vec<f64>>>,
    pub p_series: Vec<f64>,
    pub substeps: usize,
    pub rho: f64,
}

/// Pick the right-hand side for `ds` and integrate it.
pub fn integrate_linear(ds: &DiscreteSystem, opts: &IntegrateOptions) -> Result<LinearRun> {
    if ds.time_dependent {
        return Err(crate::error::Error::Unsupported(
            "time-dependent coefficients need integrate_reassembling".into(),
        ));
    }
    let rho = rk4::spectral_radius(&ds.a_static());
    if ds.cfg.aux_time.is_constant() {
        let g = ds.g(0.0);
        let ode = FrozenOde { a: ds.a_with_g(g)?, b: ds.b_with_g(g) };
        run(ds, &ode, rho, opts)
    } else {
        run(ds, &WeightedOde { ds }, rho, opts)
    }
}

/// Integrate a system whose coefficients depend on time by re-lowering at
/// every stage. `ds` supplies the layout and initial data.
pub fn integrate_reassembling(
    sys: &LinearizedSystem,
    grid: &Grid,
    ds: &DiscreteSystem,
    cap: usize,
    opts: &IntegrateOptions,
) -> Result<LinearRun> {
    let rho = rk4::spectral_radius(&ds.a_static());
    let ode = ReassemblingOde { sys, grid, base: ds.base.clone(), cap, dim: ds.dim };
    run(ds, &ode, rho, opts)
}

fn run<F: OdeRhs>(ds: &DiscreteSystem, ode: &F, rho: f64, opts: &IntegrateOptions) -> Result<LinearRun> {
    let steps = rk4::sample_count(opts.dt, opts.t_end)?;
    let substeps = rk4::choose_substeps(rho, opts.dt, opts.substeps)?;
    let labels = ds.block_labels();
    let mut out = LinearRun {
        times: Vec::with_capacity(steps + 1),
        block_labels: labels.clone(),
        block_norms: Vec::with_capacity(steps + 1),
        sum_series: Vec::with_capacity(steps + 1),
        kept_blocks: vec![Vec::with_capacity(steps + 1); opts.keep_blocks.len()],
        states: opts.keep_state.then(Vec::new),
        p_series: Vec::with_capacity(steps + 1),
        substeps,
        rho,
    };
    let mut y = ds.y_in.clone();
    rk4::integrate(ode, &mut y, opts.dt, steps, substeps, |_, t, y| {
        let norms = ds.block_norms(y);
        check_blocks(t, &norms, &labels)?;
        let total: f64 = norms.iter().map(|v| v * v).sum();
        out.p_series.push(if total > 0.0 { norms[0] * norms[0] / total } else { 0.0 });
        out.times.push(t);
        out.sum_series.push(ds.block(y, 0).to_vec());
        for (slot, &k) in opts.keep_blocks.iter().enumerate() {
            out.kept_blocks[slot].push(ds.block(y, k).to_vec());
        }
        if let Some(s) = out.states.as_mut() {
            s.push(y.to_vec());
        }
        out.block_norms.push(norms);
        Ok(())
    })?;
    Ok(out)
}
