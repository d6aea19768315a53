//! The classical HAM solve: every deformation equation integrated on the
//! physical grid, chained through the RK4 stages order by order and level by
//! level. Norms of product variables are assembled from factor norms, which
//! is exact for the vector 2-norm.

use super::rk4::{self, OdeRhs};
use super::{check_blocks, DIVERGENCE_THRESHOLD};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ham::{GuessRule, HamConfig};
use crate::linearizer::{enumerate_variables, VariableId, VariableRegistry};
use crate::par;
use crate::pde::{apply_linear_op, LinearDiffOp, QuadraticPDE};
use crate::sparse::Csr;

/// The chained deformation system for levels `0..=l`, one `HamConfig` per level.
pub struct ChainedHam<'a> {
    pub pde: &'a QuadraticPDE,
    pub grid: &'a Grid,
    pub levels: Vec<HamConfig>,
    offsets: Vec<usize>,
    dim: usize,
}

impl<'a> ChainedHam<'a> {
    pub fn new(pde: &'a QuadraticPDE, grid: &'a Grid, levels: Vec<HamConfig>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Domain("at least one level is required".into()));
        }
        for (k, cfg) in levels.iter().enumerate() {
            cfg.validate()?;
            if k == 0 && cfg.guess == GuessRule::Prescribed {
                return Err(Error::Domain("level 0 cannot use a prescribed guess".into()));
            }
        }
        let n = grid.n;
        let mut offsets = Vec::with_capacity(levels.len() + 1);
        let mut dim = 0;
        for cfg in &levels {
            offsets.push(dim);
            dim += (cfg.m + 1) * n;
        }
        offsets.push(dim);
        Ok(ChainedHam { pde, grid, levels, offsets, dim })
    }

    fn order_slice<'y>(&self, y: &'y [f64], level: usize, a: usize) -> &'y [f64] {
        let n = self.grid.n;
        let o = self.offsets[level] + a * n;
        &y[o..o + n]
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let u = self.pde.initial.sample(&self.grid.points(), 0.0);
        let mut y = vec![0.0; self.dim];
        for k in 0..self.levels.len() {
            let o = self.offsets[k];
            y[o..o + self.grid.n].copy_from_slice(&u);
        }
        y
    }

    fn apply(&self, op: &LinearDiffOp, u: &[f64], t: f64) -> Result<Vec<f64>> {
        apply_linear_op(op, u, 1, self.grid, 0, t)
    }

    /// Spectral radius estimate of the stiffest per-order operator.
    pub fn stiffness(&self) -> Result<f64> {
        let mut rho: f64 = 0.0;
        for cfg in &self.levels {
            for op in [cfg.evolution_op(self.pde), self.pde.linear.clone()] {
                let a = Csr::from_rows(self.grid.n, &op.rows(self.grid, 0.0)?)?;
                rho = rho.max(rk4::spectral_radius(&a));
            }
        }
        Ok(rho)
    }
}

impl OdeRhs for ChainedHam<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.grid.n;
        let xs = self.grid.points();
        let n0 = self.pde.forcing.sample(&xs, t);
        let mut prev_dsum: Option<Vec<f64>> = None;
        for (k, cfg) in self.levels.iter().enumerate() {
            let m = cfg.m;
            let g = cfg.g(t);
            let u: Vec<&[f64]> = (0..=m).map(|a| self.order_slice(y, k, a)).collect();
            let mut d: Vec<Vec<f64>> = Vec::with_capacity(m + 1);

            let n1u0 = self.apply(&self.pde.linear, u[0], t)?;
            let rule = if k == 0 { cfg.guess } else { GuessRule::Prescribed };
            let (du0, r0) = match rule {
                GuessRule::SolveLinear => {
                    let du0: Vec<f64> = n1u0.iter().zip(&n0).map(|(a, b)| a + b).collect();
                    (du0, None)
                }
                GuessRule::Frozen => {
                    let r0: Vec<f64> = n1u0.iter().zip(&n0).map(|(a, b)| -a - b).collect();
                    (vec![0.0; n], Some(r0))
                }
                GuessRule::Prescribed => {
                    let du0 = prev_dsum.take().ok_or_else(|| {
                        Error::Domain("a prescribed guess needs a previous level".into())
                    })?;
                    let r0: Vec<f64> = (0..n).map(|i| du0[i] - n0[i] - n1u0[i]).collect();
                    (du0, Some(r0))
                }
            };
            d.push(du0);

            let pairs: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = self
                .pde
                .quadratic
                .iter()
                .map(|p| {
                    let l: Result<Vec<Vec<f64>>> = u[..m.max(1)].iter().map(|v| self.apply(&p.left, v, t)).collect();
                    let r: Result<Vec<Vec<f64>>> = u[..m.max(1)].iter().map(|v| self.apply(&p.right, v, t)).collect();
                    Ok((l?, r?))
                })
                .collect::<Result<_>>()?;
            let m_op = cfg.evolution_op(self.pde);
            let defect = cfg.defect_op(self.pde);

            let mut g_prev: Vec<f64> = Vec::new();
            for a in 1..=m {
                let mut q = vec![0.0; n];
                for (l, r) in &pairs {
                    for j in 0..a {
                        for i in 0..n {
                            q[i] += l[j][i] * r[a - 1 - j][i];
                        }
                    }
                }
                let ga: Vec<f64> = if a == 1 {
                    match &r0 {
                        Some(r0) => (0..n).map(|i| g * (r0[i] - q[i])).collect(),
                        None => q.iter().map(|v| -g * v).collect(),
                    }
                } else {
                    let du = if defect.is_zero() { vec![0.0; n] } else { self.apply(&defect, u[a - 1], t)? };
                    (0..n).map(|i| (1.0 + g) * g_prev[i] + g * du[i] - g * q[i]).collect()
                };
                let mu = self.apply(&m_op, u[a], t)?;
                d.push(mu.iter().zip(&ga).map(|(x, y)| x + y).collect());
                g_prev = ga;
            }

            let mut dsum = vec![0.0; n];
            for (a, da) in d.iter().enumerate() {
                let o = self.offsets[k] + a * n;
                out[o..o + n].copy_from_slice(da);
                for i in 0..n {
                    dsum[i] += da[i];
                }
            }
            prev_dsum = Some(dsum);
        }
        Ok(())
    }
}

/// Per-level output of the chained solve.
#[derive(Debug, Clone)]
pub struct LevelTrace {
    pub registry: VariableRegistry,
    /// `orders[a][sample]`
    pub orders: Vec<Vec<Vec<f64>>>,
    /// `Σ_a U_a` per sample.
    pub sum: Vec<Vec<f64>>,
    pub block_labels: Vec<String>,
    /// `[sample][block]`, from factor norms.
    pub block_norms: Vec<Vec<f64>>,
    /// Norm of the whole level state per sample.
    pub full_norm: Vec<f64>,
    pub p_series: Vec<f64>,
}

impl LevelTrace {
    /// `order_norms[a][sample] = ‖U_a‖`.
    pub fn order_norms(&self) -> Vec<Vec<f64>> {
        self.orders.iter().map(|s| s.iter().map(|v| par::norm(v)).collect()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ChainedRun {
    pub times: Vec<f64>,
    pub levels: Vec<LevelTrace>,
    pub substeps: usize,
    pub rho: f64,
}

/// Norms of every registry block from factor norms `w[a] = ‖U_a‖`, with the
/// zeroth-order factor norm replaced by `w0`.
pub fn compositional_norms(reg: &VariableRegistry, sum_norm: f64, w: &[f64], w0: f64) -> Vec<f64> {
    reg.iter()
        .map(|v| match v {
            VariableId::Sum => sum_norm,
            VariableId::Product(a) => a.iter().map(|&o| if o == 0 { w0 } else { w[o] }).product(),
        })
        .collect()
}

pub fn solve_chained(
    pde: &QuadraticPDE,
    grid: &Grid,
    levels: Vec<HamConfig>,
    dt: f64,
    t_end: f64,
    substeps: Option<usize>,
) -> Result<ChainedRun> {
    let sys = ChainedHam::new(pde, grid, levels)?;
    let steps = rk4::sample_count(dt, t_end)?;
    let rho = sys.stiffness()?;
    let substeps = rk4::choose_substeps(rho, dt, substeps)?;
    let mut traces: Vec<LevelTrace> = sys
        .levels
        .iter()
        .map(|cfg| {
            let registry = enumerate_variables(cfg.m);
            LevelTrace {
                block_labels: registry.iter().map(|v| v.to_string()).collect(),
                registry,
                orders: vec![Vec::with_capacity(steps + 1); cfg.m + 1],
                sum: Vec::with_capacity(steps + 1),
                block_norms: Vec::with_capacity(steps + 1),
                full_norm: Vec::with_capacity(steps + 1),
                p_series: Vec::with_capacity(steps + 1),
            }
        })
        .collect();
    let mut times = Vec::with_capacity(steps + 1);
    let mut y = sys.initial_state();
    rk4::integrate(&sys, &mut y, dt, steps, substeps, |_, t, y| {
        times.push(t);
        let mut prev_full = None;
        for (k, trace) in traces.iter_mut().enumerate() {
            let m = sys.levels[k].m;
            let orders: Vec<&[f64]> = (0..=m).map(|a| sys.order_slice(y, k, a)).collect();
            let w: Vec<f64> = orders.iter().map(|u| par::norm(u)).collect();
            let labels: Vec<String> = (0..=m)
                .map(|a| format!("level {k} {}", VariableId::Product(vec![a])))
                .collect();
            check_blocks(t, &w, &labels)?;
            let mut s = vec![0.0; sys.grid.n];
            for u in &orders {
                for (si, ui) in s.iter_mut().zip(u.iter()) {
                    *si += ui;
                }
            }
            let sum_norm = par::norm(&s);
            let w0 = prev_full.unwrap_or(w[0]);
            let norms = compositional_norms(&trace.registry, sum_norm, &w, w0);
            let full_sq: f64 = norms.iter().map(|v| v * v).sum();
            let full = full_sq.sqrt();
            if !full.is_finite() || full > DIVERGENCE_THRESHOLD {
                let (b, v) = norms
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !v.is_finite() || **v > DIVERGENCE_THRESHOLD)
                    .map(|(b, v)| (b, *v))
                    .unwrap_or((0, full));
                return Err(Error::Divergence {
                    time: t,
                    block: format!("level {k} {}", trace.block_labels[b]),
                    norm: v,
                });
            }
            trace.p_series.push(if full_sq > 0.0 { sum_norm * sum_norm / full_sq } else { 0.0 });
            trace.full_norm.push(full);
            trace.block_norms.push(norms);
            for (a, u) in orders.iter().enumerate() {
                trace.orders[a].push(u.to_vec());
            }
            trace.sum.push(s);
            prev_full = Some(full);
        }
        Ok(())
    })?;
    Ok(ChainedRun { times, levels: traces, substeps, rho })
}
