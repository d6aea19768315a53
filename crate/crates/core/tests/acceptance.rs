//! Exit criteria. Each test prints one `PASS` or `FAIL` line and then asserts.

use std::time::{Duration, Instant};

use qham_core::discretize::{discretize_system, expected_dimension, layout_dims};
use qham_core::ham::HamConfig;
use qham_core::integrator::diagnostics::relative_error;
use qham_core::integrator::linear::integrate_linear;
use qham_core::integrator::resources::{p_lower_bound, qubit_count};
use qham_core::integrator::sequential::solve_chained;
use qham_core::integrator::IntegrateOptions;
use qham_core::iqham::{run_iqham, IqhamOptions, IterationPlan, Mode};
use qham_core::linearizer::{assemble_system, block_sparsity, dump, enumerate_variables, VariableId};
use qham_core::pde::{make_burgers_preset, make_kdv_preset, QuadraticPDE};
use qham_core::pipeline::{h_grid, h_sweep, reference_for, run_qham, Engine, RunOptions};

fn golden() -> serde_json::Value {
    serde_json::from_str(include_str!("golden/golden.json")).expect("golden.json parses")
}

fn report(name: &str, ok: bool, detail: String) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn within(name: &str, start: Instant, budget: Duration) -> bool {
    let spent = start.elapsed();
    if spent > budget {
        println!("  {name} took {spent:?}, budget {budget:?}");
    }
    spent <= budget
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn variable_lattice() {
    let start = Instant::now();
    let mut ok = true;
    for m in 0..=6 {
        let reg = enumerate_variables(m);
        ok &= reg.len() == 1 << (m + 1);
        for j in 0..=m {
            for i in 0..=j {
                ok &= reg.count_at(i, j) == binomial(j, i);
            }
        }
    }
    let ok = ok && within("lattice", start, Duration::from_secs(1));
    report("variable lattice", ok, format!("m = 0..6 counts 2^(m+1) and C(j,i), {:?}", start.elapsed()));
}

#[test]
fn dimension_formula() {
    let start = Instant::now();
    let d1 = expected_dimension(32, 1);
    let d3 = expected_dimension(32, 3);
    // The layout the lowering actually uses must give the same count.
    let laid = |m| -> usize {
        layout_dims(&enumerate_variables(m), 32, 32)
            .unwrap()
            .iter()
            .map(|d| d.iter().product::<usize>())
            .sum()
    };
    let ok = d1 == Some(1120) && d3 == Some(1_185_952) && laid(1) == 1120 && laid(3) == 1_185_952;
    let ok = ok && within("dimension", start, Duration::from_secs(1));
    report("dimension formula", ok, format!("N(32,1) = {d1:?}, N(32,3) = {d3:?}"));
}

#[test]
fn block_sparsity_bound() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for pde in [make_burgers_preset(), make_kdv_preset()] {
        for m in 1..=3 {
            let cfg = HamConfig::for_problem(&pde, m, -1.0);
            let sys = assemble_system(&pde, &cfg, &enumerate_variables(m)).unwrap();
            let rep = block_sparsity(&sys);
            ok &= rep.within_bound() && rep.bound == m * (m + 1) / 2;
            detail.push(format!("{} m={m}: {}/{}", pde.name, rep.max_restricted, rep.bound));
        }
    }
    let ok = ok && within("sparsity", start, Duration::from_secs(10));
    report("block sparsity bound", ok, detail.join(", "));
}

#[test]
fn burgers_m1_structure() {
    let start = Instant::now();
    let pde = make_burgers_preset();
    let sys = assemble_system(&pde, &HamConfig::new(1, -1.0), &enumerate_variables(1)).unwrap();
    let text = dump::to_text(&sys);
    let expected = include_str!("golden/burgers_m1.txt");
    let ok = text == expected && within("structure", start, Duration::from_secs(1));
    if !ok {
        println!("{text}");
    }
    report("burgers m=1 block structure", ok, format!("{} dump lines match the golden file", expected.lines().count()));
}

/// Worst relative error over the order blocks between the materialized run
/// and the chained solve.
fn oracle_gap(pde: &QuadraticPDE, m: usize, dt: f64) -> f64 {
    let grid = pde.grid(16).unwrap();
    let cfg = HamConfig::new(m, -1.0);
    let sys = assemble_system(pde, &cfg, &enumerate_variables(m)).unwrap();
    let ds = discretize_system(&sys, &grid).unwrap();
    let keep: Vec<usize> = (0..=m).map(|a| ds.block_index(&VariableId::Product(vec![a])).unwrap()).collect();
    let opts = IntegrateOptions { dt, t_end: 0.5, substeps: Some(1), keep_blocks: keep, keep_state: false };
    let big = integrate_linear(&ds, &opts).unwrap();
    let seq = solve_chained(pde, &grid, vec![cfg], dt, 0.5, Some(1)).unwrap();
    let mut worst: f64 = 0.0;
    for a in 0..=m {
        worst = worst.max(relative_error(&big.kept_blocks[a], &seq.levels[0].orders[a]).unwrap().total);
    }
    worst.max(relative_error(&big.sum_series, &seq.levels[0].sum).unwrap().total)
}

#[test]
fn oracle_equivalence() {
    let start = Instant::now();
    let pde = make_burgers_preset();
    let coarse = oracle_gap(&pde, 2, 1e-3);
    let fine = oracle_gap(&pde, 2, 5e-4);
    let shrink = coarse / fine;
    let ok = coarse <= 1e-6 && shrink >= 12.0 && within("oracle", start, Duration::from_secs(120));
    report(
        "oracle equivalence",
        ok,
        format!("gap {coarse:.3e} at dt = 1e-3, {fine:.3e} at dt/2, shrink {shrink:.2}x"),
    );
}

#[test]
fn burgers_reproduction() {
    let start = Instant::now();
    let g = golden();
    let pde = make_burgers_preset();
    let opts = RunOptions::new(32, 0.01, 1.0);

    let hs = h_grid(-2.0, -0.1, 0.1).unwrap();
    let sweep = h_sweep(&pde, &HamConfig::new(3, -1.0), &hs, &opts, 0).unwrap();
    let best = qham_core::pipeline::best_h(&sweep, 0).unwrap();
    let a = (best.h + 1.0).abs() <= 0.1 + 1e-9;

    let errs: Vec<f64> = (1..=3)
        .map(|m| run_qham(&pde, &HamConfig::new(m, -1.0), &opts).unwrap()[0].rel_error)
        .collect();
    let b = errs[0] > errs[1] && errs[1] > errs[2];

    // The large system itself, cross-checked against the chained solve.
    let mat = run_qham(&pde, &HamConfig::new(3, -1.0), &RunOptions { engine: Engine::Materialized, ..opts.clone() })
        .unwrap()
        .remove(0);
    let threshold = g["burgers_rel_error"]["3"].as_f64().unwrap() * (1.0 + 1e-4);
    let c = mat.rel_error < threshold && (mat.rel_error - errs[2]).abs() <= 1e-8;

    let ps = &mat.p_series;
    let floor = g["burgers_m3_p"].as_array().unwrap().last().unwrap().as_f64().unwrap() * (1.0 - 1e-4);
    let monotone = ps.windows(2).all(|w| w[1] >= w[0]);
    let d = monotone && *ps.last().unwrap() > floor;

    let ok = a && b && c && d && within("burgers", start, Duration::from_secs(600));
    report(
        "burgers reproduction",
        ok,
        format!(
            "(a) best h = {:.1} [{a}] (b) errors {:.4e} > {:.4e} > {:.4e} [{b}] (c) m=3 error {:.4e} < {threshold:.4e} [{c}] \
             (d) p non-decreasing {monotone}, p(1) = {:.4} > {floor:.4} [{d}]",
            best.h,
            errs[0],
            errs[1],
            errs[2],
            mat.rel_error,
            ps.last().unwrap()
        ),
    );
}

#[test]
fn kdv_reproduction() {
    let start = Instant::now();
    let pde = make_kdv_preset();
    let cfg = HamConfig::for_problem(&pde, 3, -0.8);
    let opts = RunOptions { iterations: 2, ..RunOptions::new(41, 0.005, 6.0) };
    let levels = run_qham(&pde, &cfg, &opts).unwrap();
    let at_end: Vec<f64> = levels.iter().map(|r| *r.rel_error_series.last().unwrap()).collect();
    let total: Vec<f64> = levels.iter().map(|r| r.rel_error).collect();
    let decreasing = at_end.windows(2).all(|w| w[1] < w[0]) && total.windows(2).all(|w| w[1] < w[0]);

    let hs = h_grid(-1.0, -0.5, 0.1).unwrap();
    let sweep = h_sweep(&pde, &cfg, &hs, &opts, 0).unwrap();
    let mut flat = true;
    let mut ratios = Vec::new();
    for l in 0..=2 {
        let e: Vec<f64> = sweep.iter().filter(|p| p.l == l).map(|p| p.final_rel_err).collect();
        let lo = e.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = e.iter().cloned().fold(0.0, f64::max);
        flat &= e.len() == hs.len() && hi <= 2.0 * lo;
        ratios.push(format!("l={l} {:.2}", hi / lo));
    }

    let top = &levels[2];
    let from = qham_core::integrator::diagnostics::sample_index(&top.times, 3.0).unwrap();
    let window = top.p_series[from..].windows(2).all(|w| w[1] <= w[0]);

    let ok = decreasing && flat && window && within("kdv", start, Duration::from_secs(900));
    report(
        "kdv reproduction",
        ok,
        format!(
            "errors at t=6 {:.4} > {:.4} > {:.4} [{decreasing}]; max/min over h in [-1,-0.5]: {} [{flat}]; \
             l=2 p non-increasing on [3,6] [{window}]",
            at_end[0],
            at_end[1],
            at_end[2],
            ratios.join(", ")
        ),
    );
}

#[test]
fn success_rate_bound() {
    let base = make_burgers_preset();
    let opts = RunOptions::new(32, 0.01, 1.0);
    let mut ok = true;
    let mut applicable = 0;
    let mut runs = 0;
    let mut tightest = f64::INFINITY;
    // Scaling the unknown leaves the order ratios alone and shrinks ‖U₀‖.
    for eta in [1.0, 0.5, 0.25, 0.1] {
        let pde = base.scaled(eta).unwrap();
        for m in 1..=3 {
            let r = run_qham(&pde, &HamConfig::new(m, -1.0), &opts).unwrap().remove(0);
            runs += 1;
            let alpha = r.alpha.as_ref().unwrap().sup;
            if let Some(bound) = p_lower_bound(alpha, r.max_u0_norm()) {
                applicable += 1;
                let sqrt_p = r.p_series.last().unwrap().sqrt();
                ok &= sqrt_p >= bound.sqrt();
                tightest = tightest.min(sqrt_p - bound.sqrt());
            }
        }
    }
    let ok = ok && applicable > 0;
    report(
        "success-rate bound",
        ok,
        format!("{applicable} of {runs} runs meet the preconditions, smallest margin on sqrt(p) {tightest:.4}"),
    );
}

#[test]
fn iqham_cross_validation() {
    let start = Instant::now();
    let pde = make_kdv_preset();
    let grid = pde.grid(8).unwrap();
    let plan = IterationPlan::uniform(&HamConfig::for_problem(&pde, 1, -0.8), 1);
    let base = RunOptions::new(8, 0.005, 1.0);
    let reference = reference_for(&pde, &grid, &base).unwrap();
    let run = |mode| {
        let o = IqhamOptions { dt: 0.005, t_end: 1.0, substeps: Some(1), cap: base.cap, mode };
        run_iqham(&pde, &plan, &grid, &reference, &o).unwrap().remove(1)
    };
    let mat = run(Mode::Materialized);
    let comp = run(Mode::Compositional);
    let z = relative_error(&mat.solution_series, &comp.solution_series).unwrap().total;
    let p_gap = mat
        .p_series
        .iter()
        .zip(&comp.p_series)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0, f64::max);
    let ok = z <= 1e-8 && p_gap <= 1e-8 && within("iqham", start, Duration::from_secs(60));
    report(
        "iqham cross-validation",
        ok,
        format!("z[-1] gap {z:.3e}, p gap {p_gap:.3e}, p(1) = {:.6e}", mat.p_series.last().unwrap()),
    );
}

#[test]
fn resource_estimator() {
    let q = qubit_count(32, 3, 1.0, 1e-3);
    let p = p_lower_bound(0.25, 0.25).unwrap();
    let ok = q == 30 && (p - 0.04).abs() <= 1e-15;
    report("resource estimator", ok, format!("qubits = {q}, p bound = {p}"));
}
