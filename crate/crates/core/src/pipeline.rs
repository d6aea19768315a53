//! End-to-end runs: reference, QHAM levels, diagnostics and sweeps over h.

use serde::Serialize;

use crate::discretize::{discretize_with, DiscretizeOptions, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ham::HamConfig;
use crate::integrator::reference::{reference_series, Trajectory};
use crate::integrator::resources::resource_estimate;
use crate::integrator::RunResult;
use crate::iqham::{run_iqham, IqhamOptions, IterationPlan};
use crate::linearizer::{assemble_system, enumerate_variables};
use crate::par;
use crate::pde::QuadraticPDE;

pub use crate::iqham::Mode as Engine;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub substeps: Option<usize>,
    pub cap: usize,
    pub engine: Engine,
    pub iterations: usize,
    /// Target accuracy for the resource report; no report when `None`.
    pub epsilon: Option<f64>,
}

impl RunOptions {
    pub fn new(n: usize, dt: f64, t_end: f64) -> Self {
        RunOptions {
            n,
            dt,
            t_end,
            substeps: None,
            cap: DEFAULT_CAP,
            engine: Engine::Compositional,
            iterations: 0,
            epsilon: None,
        }
    }

    fn iqham(&self) -> IqhamOptions {
        IqhamOptions { dt: self.dt, t_end: self.t_end, substeps: self.substeps, cap: self.cap, mode: self.engine }
    }
}

pub fn reference_for(pde: &QuadraticPDE, grid: &Grid, opts: &RunOptions) -> Result<Trajectory> {
    reference_series(pde, grid, opts.dt, opts.t_end, None)
}

/// Run `cfg` and its iterations; one result per level.
pub fn run_qham(pde: &QuadraticPDE, cfg: &HamConfig, opts: &RunOptions) -> Result<Vec<RunResult>> {
    pde.validate()?;
    let grid = pde.grid(opts.n)?;
    let reference = reference_for(pde, &grid, opts)?;
    run_with_reference(pde, cfg, &grid, &reference, opts)
}

pub fn run_with_reference(
    pde: &QuadraticPDE,
    cfg: &HamConfig,
    grid: &Grid,
    reference: &Trajectory,
    opts: &RunOptions,
) -> Result<Vec<RunResult>> {
    let plan = IterationPlan::uniform(cfg, opts.iterations);
    let mut results = run_iqham(pde, &plan, grid, reference, &opts.iqham())?;
    if let Some(eps) = opts.epsilon {
        // The estimate refers to the plain QHAM system.
        let sys = assemble_system(pde, cfg, &enumerate_variables(cfg.m))?;
        let ds = discretize_with(&sys, grid, None, DiscretizeOptions { cap: opts.cap, t: 0.0 })?;
        results[0].resources = Some(resource_estimate(&ds, &results[0], pde.s(), eps)?);
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub h: f64,
    pub m: usize,
    pub l: usize,
    /// `NaN` when the run failed.
    pub final_rel_err: f64,
    pub min_p: f64,
    /// Why the run failed, for divergent or unstable points.
    pub failure: Option<String>,
}

/// `h` values from `lo` to `hi` inclusive in steps of `step`, rounded to
/// the step's decimal precision so that the grid is exact in print.
pub fn h_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::Domain(format!("bad h range {lo}..{hi} step {step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| ((lo + k as f64 * step) * 1e10).round() / 1e10).collect())
}

/// Run every `h` with iterations `0..=opts.iterations`, `workers` runs at a
/// time (`0` for one per core). Levels below the top come from the same run.
pub fn h_sweep(pde: &QuadraticPDE, cfg: &HamConfig, hs: &[f64], opts: &RunOptions, workers: usize) -> Result<Vec<SweepPoint>> {
    pde.validate()?;
    let grid = pde.grid(opts.n)?;
    let reference = reference_for(pde, &grid, opts)?;
    let workers = if workers == 0 {
        std::thread::available_parallelism().map_or(1, |v| v.get())
    } else {
        workers
    };
    let run_opts = RunOptions { epsilon: None, ..opts.clone() };
    let per_h = par::map(hs, workers, |&h| {
        let c = cfg.clone().with_h(h);
        (h, run_with_reference(pde, &c, &grid, &reference, &run_opts))
    });
    let mut out = Vec::with_capacity(hs.len() * (opts.iterations + 1));
    for (h, res) in per_h {
        match res {
            Ok(levels) => out.extend(levels.iter().map(|r| SweepPoint {
                h,
                m: cfg.m,
                l: r.level,
                final_rel_err: r.rel_error,
                min_p: r.p_series.iter().cloned().fold(f64::INFINITY, f64::min),
                failure: None,
            })),
            Err(e @ (Error::Divergence { .. } | Error::Unstable { .. })) => {
                out.extend((0..=opts.iterations).map(|l| SweepPoint {
                    h,
                    m: cfg.m,
                    l,
                    final_rel_err: f64::NAN,
                    min_p: f64::NAN,
                    failure: Some(e.to_string()),
                }))
            }
            Err(e) => return Err(e),
        }
    }
    out.sort_by(|a, b| a.l.cmp(&b.l).then(a.h.total_cmp(&b.h)));
    Ok(out)
}

/// The sweep point with the smallest error at iteration `l`.
pub fn best_h(points: &[SweepPoint], l: usize) -> Option<&SweepPoint> {
    points
        .iter()
        .filter(|p| p.l == l && p.final_rel_err.is_finite())
        .min_by(|a, b| a.final_rel_err.total_cmp(&b.final_rel_err))
}
