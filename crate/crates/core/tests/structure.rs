use proptest::prelude::*;

use qham_core::grid::Grid;
use qham_core::ham::{build_deformation_rhs, HamConfig};
use qham_core::linearizer::{
    assemble_system, build_forcing_and_init, dump, enumerate_variables, CouplingOp, VariableId,
};
use qham_core::pde::{apply_linear_op, make_burgers_preset, make_kdv_preset, LinearDiffOp, QuadraticPDE};
use qham_core::func::SpaceFn;

#[test]
fn kdv_m1_rows() {
    let pde = make_kdv_preset();
    let sys = assemble_system(&pde, &HamConfig::for_problem(&pde, 1, -0.8), &enumerate_variables(1)).unwrap();
    let text = dump::to_text(&sys);
    for row in ["y[-1]", "y[0,1](1)"] {
        assert!(text.contains(&format!("  {row} <- y[0,0](0) [1*g] (1*d3)@x0")));
        assert!(text.contains(&format!("  {row} <- y[1,1](0,0) [-1*g] delta(x0,x1) (-6*I)@x0 (1*d1)@x1")));
    }
    // The frozen guess and its products do not move.
    let reg = &sys.registry;
    for id in [VariableId::Product(vec![0]), VariableId::Product(vec![0, 0])] {
        let k = reg.position(&id).unwrap();
        assert_eq!(sys.couplings_into(k).count(), 0);
    }
    assert!(sys.forcing.is_empty());
}

#[test]
fn forcing_and_init_supports() {
    for pde in [make_burgers_preset(), make_kdv_preset()] {
        for m in 0..=3 {
            let cfg = HamConfig::for_problem(&pde, m, -1.0);
            let reg = enumerate_variables(m);
            let (forcing, init) = build_forcing_and_init(&pde, &cfg, &reg).unwrap();
            for f in &forcing {
                let id = reg.get(f.target);
                assert!(matches!(id, VariableId::Sum) || *id == VariableId::Product(vec![0]));
            }
            for b in &init {
                match reg.get(b.target) {
                    VariableId::Sum => {}
                    VariableId::Product(a) => assert!(a.iter().all(|&o| o == 0), "{a:?}"),
                }
            }
        }
    }
    let pde = make_burgers_preset();
    let reg = enumerate_variables(2);
    let (_, init) = build_forcing_and_init(&pde, &HamConfig::new(2, -1.0), &reg).unwrap();
    let k = reg.position(&VariableId::Product(vec![0, 0, 0])).unwrap();
    let top = init.iter().find(|b| b.target == k).unwrap();
    assert_eq!(top.factors.len(), 3);
    assert!(top.factors.iter().all(|f| *f == pde.initial));
}

#[test]
fn quadratic_entries_per_order() {
    for pde in [make_burgers_preset(), make_kdv_preset()] {
        let rhs = build_deformation_rhs(&pde, &HamConfig::for_problem(&pde, 4, -1.0));
        for r in &rhs {
            assert_eq!(r.quadratic.len(), pde.s() * r.order);
            assert_eq!(r.forcing, r.order == 1);
        }
    }
}

#[test]
fn restrictions_carry_the_deformation_weight() {
    let pde = make_burgers_preset();
    let sys = assemble_system(&pde, &HamConfig::new(3, -1.0), &enumerate_variables(3)).unwrap();
    let mut deepest = -1;
    for c in &sys.couplings {
        if let CouplingOp::Restrict { .. } = c.op {
            assert!(c.h_scaled());
            deepest = deepest.max(sys.registry.get(c.target).level());
        }
    }
    // Product rows pick up restrictions from each factor's quadratic terms.
    assert_eq!(deepest, 2);
}

#[test]
fn presets_round_trip_through_json() {
    for pde in [make_burgers_preset(), make_kdv_preset()] {
        let text = serde_json::to_string(&pde).unwrap();
        let back: QuadraticPDE = serde_json::from_str(&text).unwrap();
        assert_eq!(back, pde);
    }
}

fn op() -> LinearDiffOp {
    LinearDiffOp::derivative(2, 0.1)
        .with_term(1, SpaceFn::Sine { amplitude: 1.0, wavenumber: 2.0, phase: 0.3 })
        .with_term(3, SpaceFn::Constant(-1.0))
}

proptest! {
    #[test]
    fn operator_application_is_linear(
        f in prop::collection::vec(-1.0f64..1.0, 24),
        g in prop::collection::vec(-1.0f64..1.0, 24),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let grid = Grid::new(0.0, 1.0, 24, qham_core::grid::BoundaryPolicy::DirichletExclusive).unwrap();
        let op = op();
        let mix: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let lhs = apply_linear_op(&op, &mix, 1, &grid, 0, 0.0).unwrap();
        let of = apply_linear_op(&op, &f, 1, &grid, 0, 0.0).unwrap();
        let og = apply_linear_op(&op, &g, 1, &grid, 0, 0.0).unwrap();
        let scale = lhs.iter().chain(&of).chain(&og).fold(1.0f64, |s, v| s.max(v.abs()));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a * of[i] + b * og[i])).abs() <= 1e-12 * scale * (a.abs() + b.abs() + 1.0));
        }
    }
}
