use std::io::BufWriter;

use anyhow::{Context, Result};
use serde_json::json;

use qham_core::discretize::{discretize_with, write_matrix_market, DiscretizeOptions};
use qham_core::integrator::diagnostics::relative_error;
use qham_core::integrator::RunResult;
use qham_core::iqham::IterationPlan;
use qham_core::linearizer::{assemble_system, block_sparsity, dump, enumerate_variables};
use qham_core::pipeline::{self, Engine, RunOptions};

use crate::config::Experiment;
use crate::output::{column, num, write_atomic, Csv};

#[derive(Debug, thiserror::Error)]
#[error("verification failed: {0}")]
pub struct VerificationFailed(pub String);

pub fn linearize(exp: &Experiment) -> Result<()> {
    let sys = assemble_system(&exp.problem, &exp.ham, &enumerate_variables(exp.ham.m))?;
    let text = dump::to_text(&sys);
    write_atomic(&exp.out.join("linearize.txt"), text.as_bytes())?;
    let mut json = dump::to_json(&sys);
    json["config_hash"] = json!(exp.hash());
    write_atomic(&exp.out.join("linearize.json"), serde_json::to_string_pretty(&json)?.as_bytes())?;
    print!("{text}");
    let rep = block_sparsity(&sys);
    println!("max block sparsity {} (bound {})", rep.max_restricted, rep.bound);
    Ok(())
}

fn run_csv(exp: &Experiment, r: &RunResult) -> String {
    let mut cols = vec!["t".to_string(), "p".into(), "rel_err".into()];
    cols.extend(r.block_labels.iter().map(|l| column(l)));
    let mut csv = Csv::new(&exp.hash(), &cols);
    for (s, t) in r.times.iter().enumerate() {
        let mut row = vec![num(*t), num(r.p_series[s]), num(r.rel_error_series[s])];
        row.extend(r.block_norms[s].iter().map(|v| num(*v)));
        csv.row(row);
    }
    csv.into_string()
}

fn snapshot_csv(exp: &Experiment, xs: &[f64], qham: &[f64], reference: &[f64]) -> String {
    let mut csv = Csv::new(&exp.hash(), &["x".into(), "qham".into(), "reference".into()]);
    for i in 0..xs.len() {
        csv.row([num(xs[i]), num(qham[i]), num(reference[i])]);
    }
    csv.into_string()
}

fn summary(r: &RunResult) -> serde_json::Value {
    json!({
        "level": r.level,
        "rel_error": r.rel_error,
        "final_p": r.p_series.last(),
        "min_p": r.p_series.iter().cloned().fold(f64::INFINITY, f64::min),
        "alpha": r.alpha,
        "resources": r.resources,
        "substeps": r.substeps,
    })
}

pub fn run(exp: &Experiment, dump_matrix: bool) -> Result<()> {
    let grid = exp.problem.grid(exp.n)?;
    let opts = exp.run_options();
    let reference = pipeline::reference_for(&exp.problem, &grid, &opts)?;
    let levels = pipeline::run_with_reference(&exp.problem, &exp.ham, &grid, &reference, &opts)
        .with_context(|| format!("running {} with m = {}, h = {}", exp.problem.name, exp.ham.m, exp.ham.h))?;
    let xs = grid.points();
    let mut summaries = Vec::new();
    for r in &levels {
        let k = r.level;
        write_atomic(&exp.out.join(format!("run_l{k}.csv")), run_csv(exp, r).as_bytes())?;
        let snap = snapshot_csv(exp, &xs, r.solution_series.last().unwrap(), reference.states.last().unwrap());
        write_atomic(&exp.out.join(format!("snapshot_l{k}.csv")), snap.as_bytes())?;
        println!(
            "level {k}: relative error {:.6e}, p(T) = {:.6e}, substeps {}",
            r.rel_error,
            r.p_series.last().unwrap(),
            r.substeps
        );
        summaries.push(summary(r));
    }
    let doc = json!({ "config_hash": exp.hash(), "levels": summaries });
    write_atomic(&exp.out.join("summary.json"), serde_json::to_string_pretty(&doc)?.as_bytes())?;
    if dump_matrix {
        dump_level_zero(exp)?;
    }
    Ok(())
}

fn dump_level_zero(exp: &Experiment) -> Result<()> {
    let grid = exp.problem.grid(exp.n)?;
    let sys = assemble_system(&exp.problem, &exp.ham, &enumerate_variables(exp.ham.m))?;
    let ds = discretize_with(&sys, &grid, None, DiscretizeOptions { cap: exp.cap, t: 0.0 })?;
    let mut buf = BufWriter::new(Vec::new());
    write_matrix_market(&mut buf, &ds.a_at(0.0)?)?;
    write_atomic(&exp.out.join("A_l0.mtx"), &buf.into_inner()?)?;
    let mut csv = Csv::new(&exp.hash(), &["index".into(), "b".into(), "y_in".into()]);
    let b = ds.b_at(0.0);
    for i in 0..ds.dim {
        csv.row([i.to_string(), num(b.get(i).copied().unwrap_or(0.0)), num(ds.y_in[i])]);
    }
    write_atomic(&exp.out.join("vectors_l0.csv"), csv.into_string().as_bytes())?;
    println!("wrote matrix of dimension {} with {} nonzeros", ds.dim, ds.nnz());
    Ok(())
}

pub fn hcurve(exp: &Experiment) -> Result<()> {
    let points = pipeline::h_sweep(&exp.problem, &exp.ham, &exp.h_values, &exp.run_options(), exp.workers)?;
    let cols: Vec<String> = ["h", "m", "l", "final_rel_err", "min_p", "failure"].iter().map(|s| s.to_string()).collect();
    let mut csv = Csv::new(&exp.hash(), &cols);
    for p in &points {
        csv.row([
            num(p.h),
            p.m.to_string(),
            p.l.to_string(),
            num(p.final_rel_err),
            num(p.min_p),
            p.failure.as_deref().unwrap_or("").replace([',', '\n'], " "),
        ]);
    }
    write_atomic(&exp.out.join("sweep.csv"), csv.into_string().as_bytes())?;
    for l in 0..=exp.iterations {
        if let Some(best) = pipeline::best_h(&points, l) {
            println!("l = {l}: minimum relative error {:.6e} at h = {}", best.final_rel_err, best.h);
        }
    }
    Ok(())
}

pub fn estimate(exp: &Experiment) -> Result<()> {
    let opts = RunOptions { epsilon: Some(exp.epsilon), ..exp.run_options() };
    let levels = pipeline::run_qham(&exp.problem, &exp.ham, &opts)?;
    let report = levels[0].resources.clone().context("no resource report was produced")?;
    let ledger = IterationPlan::uniform(&exp.ham, exp.iterations).ledger(exp.n);
    let doc = json!({
        "config_hash": exp.hash(),
        "n": exp.n,
        "m": exp.ham.m,
        "T": exp.t_end,
        "report": report,
        "z_blocks_per_level": ledger.levels.iter().map(|l| l.blocks.to_string()).collect::<Vec<_>>(),
        "z_entries_per_level": ledger.levels.iter().map(|l| l.entries.to_string()).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&doc)?;
    write_atomic(&exp.out.join("estimate.json"), text.as_bytes())?;
    println!("qubit_count {}", report.qubit_count);
    println!("alpha_A {:e}", report.alpha_a);
    println!("query_estimate {:e}", report.query_estimate);
    println!("gate_factor {:e}", report.gate_factor);
    match report.p_lower_bound {
        Some(p) => println!("p_lower_bound {p:e}"),
        None => println!(
            "p_lower_bound not applicable (alpha = {:.4}, max |U0| = {:.4})",
            report.alpha, report.u0_norm
        ),
    }
    Ok(())
}

/// Compare the materialized system with the chained solve level by level.
pub fn verify(exp: &Experiment, tol: f64) -> Result<()> {
    let base = exp.run_options();
    let comp = pipeline::run_qham(&exp.problem, &exp.ham, &RunOptions { engine: Engine::Compositional, ..base.clone() })?;
    let mat = pipeline::run_qham(&exp.problem, &exp.ham, &RunOptions { engine: Engine::Materialized, ..base })?;
    let cols: Vec<String> = ["level", "quantity", "rel_gap", "tolerance", "pass"].iter().map(|s| s.to_string()).collect();
    let mut csv = Csv::new(&exp.hash(), &cols);
    let mut failures = Vec::new();
    for (a, b) in comp.iter().zip(&mat) {
        let mut checks = vec![("sum".to_string(), relative_error(&b.solution_series, &a.solution_series)?.total)];
        for (k, (x, y)) in a.order_norms.iter().zip(&b.order_norms).enumerate() {
            let gap = match relative_error(&[y.clone()], &[x.clone()]) {
                Ok(e) => e.total,
                // Both identically zero, as for every correction at h = 0.
                Err(_) if y.iter().all(|v| *v == 0.0) => 0.0,
                Err(_) => f64::INFINITY,
            };
            checks.push((format!("order_norm_{k}"), gap));
        }
        let p_gap = a.p_series.iter().zip(&b.p_series).map(|(u, v)| (u - v).abs() / u).fold(0.0, f64::max);
        checks.push(("p".into(), p_gap));
        for (name, gap) in checks {
            let pass = gap <= tol;
            if !pass {
                failures.push(format!("level {} {name}: {gap:.3e} > {tol:e}", a.level));
            }
            println!("level {} {name}: {gap:.3e} {}", a.level, if pass { "ok" } else { "FAIL" });
            csv.row([a.level.to_string(), name, num(gap), num(tol), pass.to_string()]);
        }
    }
    write_atomic(&exp.out.join("verify.csv"), csv.into_string().as_bytes())?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(VerificationFailed(failures.join("; ")).into())
    }
}
