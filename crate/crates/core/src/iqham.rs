//! Iterated QHAM: each level's initial guess is the previous level's summed
//! solution. Levels are evaluated either by the chained classical solve with
//! norms assembled from factors, or by materializing the nested z-system.

use std::sync::Arc;

use serde::Serialize;

use crate::discretize::{discretize_with, DiscreteSystem, DiscretizeOptions};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ham::{measure_alpha, GuessRule, HamConfig};
use crate::integrator::diagnostics::relative_error;
use crate::integrator::linear::{integrate_linear, integrate_reassembling, LinearRun};
use crate::integrator::reference::Trajectory;
use crate::integrator::sequential::{solve_chained, ChainedRun};
use crate::integrator::{IntegrateOptions, RunResult};
use crate::linearizer::{assemble_system, enumerate_variables, LinearizedSystem, VariableId};
use crate::pde::QuadraticPDE;

/// One `HamConfig` per level; level `k ≥ 1` always takes its guess from level `k − 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationPlan {
    pub levels: Vec<HamConfig>,
}

impl IterationPlan {
    /// `l` iterations on top of `cfg`, all with the same `m` and `h`.
    pub fn uniform(cfg: &HamConfig, l: usize) -> Self {
        let mut levels = vec![cfg.clone()];
        levels.extend((0..l).map(|_| cfg.clone().with_guess(GuessRule::Prescribed)));
        IterationPlan { levels }
    }

    pub fn iterations(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.levels.first().ok_or_else(|| Error::Domain("empty iteration plan".into()))?;
        if first.guess == GuessRule::Prescribed {
            return Err(Error::Domain("level 0 cannot use a prescribed guess".into()));
        }
        for (k, cfg) in self.levels.iter().enumerate().skip(1) {
            if cfg.guess != GuessRule::Prescribed {
                return Err(Error::Domain(format!("level {k} must take its guess from level {}", k - 1)));
            }
        }
        self.levels.iter().try_for_each(HamConfig::validate)
    }

    pub fn ledger(&self, n: usize) -> CompositionLedger {
        CompositionLedger::build(&self.levels, n)
    }
}

/// How many z-blocks each registry family expands into when zeroth-order
/// slots hold the whole previous-level state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyCount {
    pub label: String,
    /// Zeroth-order slots that refer to the previous level.
    pub previous_slots: usize,
    pub blocks: u128,
    /// Scalar entries, with `n` points per grid axis.
    pub entries: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelLedger {
    pub families: Vec<FamilyCount>,
    pub blocks: u128,
    pub entries: u128,
}

impl LevelLedger {
    pub fn largest_family(&self) -> u128 {
        self.families.iter().map(|f| f.blocks).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionLedger {
    pub levels: Vec<LevelLedger>,
}

impl CompositionLedger {
    fn build(levels: &[HamConfig], n: usize) -> Self {
        let mut out: Vec<LevelLedger> = Vec::with_capacity(levels.len());
        for (k, cfg) in levels.iter().enumerate() {
            let prev = out.last().map(|p| (p.blocks, p.entries));
            let families = enumerate_variables(cfg.m)
                .iter()
                .map(|v| match v {
                    VariableId::Sum => FamilyCount { label: v.to_string(), previous_slots: 0, blocks: 1, entries: n as u128 },
                    VariableId::Product(a) => {
                        let mut f = FamilyCount { label: v.to_string(), previous_slots: 0, blocks: 1, entries: 1 };
                        for &o in a {
                            match (o, prev) {
                                (0, Some((b, e))) if k > 0 => {
                                    f.previous_slots += 1;
                                    f.blocks = f.blocks.saturating_mul(b);
                                    f.entries = f.entries.saturating_mul(e);
                                }
                                _ => f.entries = f.entries.saturating_mul(n as u128),
                            }
                        }
                        f
                    }
                })
                .collect::<Vec<_>>();
            let blocks = families.iter().fold(0u128, |s, f| s.saturating_add(f.blocks));
            let entries = families.iter().fold(0u128, |s, f| s.saturating_add(f.entries));
            out.push(LevelLedger { families, blocks, entries });
        }
        CompositionLedger { levels: out }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Chained classical solve with factor-norm bookkeeping.
    Compositional,
    /// Lower and integrate the nested linear system of every level.
    Materialized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqhamOptions {
    pub dt: f64,
    pub t_end: f64,
    pub substeps: Option<usize>,
    pub cap: usize,
    pub mode: Mode,
}

/// Symbolic systems of every level, level `k ≥ 1` with a prescribed guess.
pub fn linearize_levels(pde: &QuadraticPDE, plan: &IterationPlan) -> Result<Vec<LinearizedSystem>> {
    plan.levels.iter().map(|cfg| assemble_system(pde, cfg, &enumerate_variables(cfg.m))).collect()
}

/// Lower every level, each on top of the one before.
pub fn materialize_levels(
    pde: &QuadraticPDE,
    plan: &IterationPlan,
    grid: &Grid,
    cap: usize,
) -> Result<Vec<Arc<DiscreteSystem>>> {
    plan.validate()?;
    let mut out: Vec<Arc<DiscreteSystem>> = Vec::with_capacity(plan.levels.len());
    for sys in linearize_levels(pde, plan)? {
        let base = out.last().cloned();
        out.push(Arc::new(discretize_with(&sys, grid, base, DiscretizeOptions { cap, t: 0.0 })?));
    }
    Ok(out)
}

/// The explicit z-system of the last level of `plan`.
pub fn materialize_z_system(pde: &QuadraticPDE, plan: &IterationPlan, grid: &Grid, cap: usize) -> Result<Arc<DiscreteSystem>> {
    Ok(materialize_levels(pde, plan, grid, cap)?.pop().expect("plan has a level"))
}

/// Run every level of `plan`. `reference` is the ground truth sampled at the
/// same times.
pub fn run_iqham(
    pde: &QuadraticPDE,
    plan: &IterationPlan,
    grid: &Grid,
    reference: &Trajectory,
    opts: &IqhamOptions,
) -> Result<Vec<RunResult>> {
    plan.validate()?;
    let mut results = match opts.mode {
        Mode::Compositional => {
            let run = solve_chained(pde, grid, plan.levels.clone(), opts.dt, opts.t_end, opts.substeps)?;
            from_chained(run)
        }
        Mode::Materialized => {
            let systems = materialize_levels(pde, plan, grid, opts.cap)?;
            let sys = linearize_levels(pde, plan)?;
            let mut out = Vec::with_capacity(systems.len());
            for (k, ds) in systems.iter().enumerate() {
                let run = integrate_materialized(&sys[k], grid, ds, opts)?;
                out.push(from_linear(ds, run, k));
            }
            out
        }
    };
    for r in &mut results {
        let e = relative_error(&r.solution_series, &reference.states)?;
        r.rel_error = e.total;
        r.rel_error_series = e.per_time;
        if r.order_norms.len() >= 2 {
            r.alpha = Some(measure_alpha(&r.order_norms)?);
        }
    }
    Ok(results)
}

fn integrate_materialized(sys: &LinearizedSystem, grid: &Grid, ds: &DiscreteSystem, opts: &IqhamOptions) -> Result<LinearRun> {
    let keep: Vec<usize> = (0..=ds.cfg.m)
        .map(|a| ds.block_index(&VariableId::Product(vec![a])).expect("order block exists"))
        .collect();
    let io = IntegrateOptions { dt: opts.dt, t_end: opts.t_end, substeps: opts.substeps, keep_blocks: keep, keep_state: false };
    if ds.time_dependent {
        integrate_reassembling(sys, grid, ds, opts.cap, &io)
    } else {
        integrate_linear(ds, &io)
    }
}

fn from_linear(ds: &DiscreteSystem, run: LinearRun, level: usize) -> RunResult {
    let n = ds.n();
    // At levels above 0 the zeroth-order block holds the previous state; its
    // first n entries are the guess itself.
    let order_norms = run
        .kept_blocks
        .iter()
        .map(|series| series.iter().map(|v| crate::par::norm(&v[..n])).collect())
        .collect();
    RunResult {
        level,
        times: run.times,
        solution_series: run.sum_series,
        block_labels: run.block_labels,
        block_norms: run.block_norms,
        p_series: run.p_series,
        rel_error_series: Vec::new(),
        rel_error: f64::NAN,
        order_norms,
        alpha: None,
        resources: None,
        substeps: run.substeps,
    }
}

fn from_chained(run: ChainedRun) -> Vec<RunResult> {
    let ChainedRun { times, levels, substeps, .. } = run;
    levels
        .into_iter()
        .enumerate()
        .map(|(k, tr)| RunResult {
            level: k,
            times: times.clone(),
            order_norms: tr.order_norms(),
            solution_series: tr.sum,
            block_labels: tr.block_labels,
            block_norms: tr.block_norms,
            p_series: tr.p_series,
            rel_error_series: Vec::new(),
            rel_error: f64::NAN,
            alpha: None,
            resources: None,
            substeps,
        })
        .collect()
}
