//! Homotopy analysis: configuration, deformation right-hand sides, truncation
//! order selection and the measured convergence factor.
//!
//! With the auxiliary operator written as `ℒ = ∂t − M` and `g = h·H(t)`, the
//! deformation equations become evolution equations
//!
//! ```text
//! ∂t U_a = M U_a + G_a
//! G_1 = g (r_0 − Q_1)
//! G_a = (1 + g) G_{a−1} + g (M − N1) U_{a−1} − g Q_a
//! ```
//!
//! with the initial-guess residual `r_0 = ∂t U_0 − N0 − N1 U_0` and the
//! quadratic sums `Q_a = Σ_k Σ_{j<a} L1k(U_j) · L2k(U_{a−1−j})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::TimeFn;
use crate::pde::{LinearDiffOp, QuadraticPDE};
use crate::poly::Poly;

/// How the zeroth-order guess U0 evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessRule {
    /// `∂t U0 = N0 + N1 U0` from the initial data.
    SolveLinear,
    /// `U0(x, t) = u_in(x)` for all t.
    Frozen,
    /// U0 is supplied from outside (the previous iteration's solution);
    /// its time derivative enters as a known field.
    Prescribed,
}

/// The spatial part `M` of the auxiliary operator `ℒ = ∂t − M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxOperator {
    /// `M = N1`.
    LinearPart,
    Custom(LinearDiffOp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamConfig {
    pub m: usize,
    pub h: f64,
    #[serde(default, rename = "H")]
    pub aux_time: TimeFn,
    pub guess: GuessRule,
    pub aux: AuxOperator,
}

impl HamConfig {
    pub fn new(m: usize, h: f64) -> Self {
        HamConfig {
            m,
            h,
            aux_time: TimeFn::default(),
            guess: GuessRule::SolveLinear,
            aux: AuxOperator::LinearPart,
        }
    }

    /// The rules used for the named presets: KdV freezes U0 at the initial
    /// data and uses `ℒ = ∂t + ∂³`; everything else solves for U0 with
    /// `ℒ = ∂t − N1`.
    pub fn for_problem(pde: &QuadraticPDE, m: usize, h: f64) -> Self {
        let cfg = HamConfig::new(m, h);
        if pde.name.starts_with("kdv") {
            cfg.with_guess(GuessRule::Frozen)
                .with_aux(AuxOperator::Custom(LinearDiffOp::derivative(3, -1.0)))
        } else {
            cfg
        }
    }

    pub fn with_guess(mut self, guess: GuessRule) -> Self {
        self.guess = guess;
        self
    }

    pub fn with_aux(mut self, aux: AuxOperator) -> Self {
        self.aux = aux;
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_aux_time(mut self, aux_time: TimeFn) -> Self {
        self.aux_time = aux_time;
        self
    }

    /// `h = 0` is accepted: it switches the deformation couplings off, which
    /// is a useful degenerate case.
    pub fn validate(&self) -> Result<()> {
        if !self.h.is_finite() {
            return Err(Error::Domain(format!("h = {} is not finite", self.h)));
        }
        if let AuxOperator::Custom(op) = &self.aux {
            if let Some(t) = op.terms.iter().find(|t| t.order > 3) {
                return Err(Error::UnsupportedOrder(t.order));
            }
        }
        Ok(())
    }

    /// `g(t) = h·H(t)`.
    pub fn g(&self, t: f64) -> f64 {
        self.h * self.aux_time.eval(t)
    }

    pub fn evolution_op(&self, pde: &QuadraticPDE) -> LinearDiffOp {
        match &self.aux {
            AuxOperator::LinearPart => pde.linear.clone(),
            AuxOperator::Custom(op) => op.clone(),
        }
    }

    /// `M − N1`, zero when the auxiliary operator is built from N1.
    pub fn defect_op(&self, pde: &QuadraticPDE) -> LinearDiffOp {
        match &self.aux {
            AuxOperator::LinearPart => LinearDiffOp::zero(),
            AuxOperator::Custom(op) => op.minus(&pde.linear),
        }
    }
}

/// One term of `∂t U_a` written in terms of lower orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// `op(U_order)`
    Linear { order: usize, op: LinearDiffOp },
    /// `∂t U0` for a prescribed guess.
    GuessDerivative,
    /// `L1k(U_left) · L2k(U_right)`
    Quadratic { pair: usize, left: usize, right: usize },
    /// `N0`
    Forcing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorTerm {
    pub kind: TermKind,
    pub coef: Poly,
}

/// The right-hand side of `∂t U_a` as a flat list of terms with polynomial
/// weights in g. The recursion for `G_a` is unrolled in closed form:
/// `G_a = g(1+g)^{a−1} r_0 + Σ_{i=2}^{a} g(1+g)^{a−i} D U_{i−1} − Σ_{i=1}^{a} g(1+g)^{a−i} Q_i`.
pub fn factor_derivative(pde: &QuadraticPDE, cfg: &HamConfig, a: usize) -> Vec<FactorTerm> {
    let mut out = Vec::new();
    if a == 0 {
        match cfg.guess {
            GuessRule::SolveLinear => {
                if !pde.linear.is_zero() {
                    out.push(FactorTerm {
                        kind: TermKind::Linear { order: 0, op: pde.linear.clone() },
                        coef: Poly::constant(1.0),
                    });
                }
                if !pde.forcing.is_zero() {
                    out.push(FactorTerm { kind: TermKind::Forcing, coef: Poly::constant(1.0) });
                }
            }
            GuessRule::Frozen => {}
            GuessRule::Prescribed => out.push(FactorTerm {
                kind: TermKind::GuessDerivative,
                coef: Poly::constant(1.0),
            }),
        }
        return out;
    }

    let m_op = cfg.evolution_op(pde);
    if !m_op.is_zero() {
        out.push(FactorTerm {
            kind: TermKind::Linear { order: a, op: m_op },
            coef: Poly::constant(1.0),
        });
    }

    // g(1+g)^{a−1} r_0
    let w0 = Poly::g_times_one_plus_g(a - 1, 1.0);
    match cfg.guess {
        GuessRule::SolveLinear => {}
        GuessRule::Frozen | GuessRule::Prescribed => {
            if cfg.guess == GuessRule::Prescribed {
                out.push(FactorTerm { kind: TermKind::GuessDerivative, coef: w0.clone() });
            }
            if !pde.forcing.is_zero() {
                out.push(FactorTerm { kind: TermKind::Forcing, coef: w0.scale(-1.0) });
            }
            if !pde.linear.is_zero() {
                out.push(FactorTerm {
                    kind: TermKind::Linear { order: 0, op: pde.linear.scaled(-1.0) },
                    coef: w0,
                });
            }
        }
    }

    let defect = cfg.defect_op(pde);
    if !defect.is_zero() {
        for i in 2..=a {
            out.push(FactorTerm {
                kind: TermKind::Linear { order: i - 1, op: defect.clone() },
                coef: Poly::g_times_one_plus_g(a - i, 1.0),
            });
        }
    }

    for i in 1..=a {
        let w = Poly::g_times_one_plus_g(a - i, -1.0);
        for pair in 0..pde.s() {
            for j in 0..i {
                out.push(FactorTerm {
                    kind: TermKind::Quadratic { pair, left: j, right: i - 1 - j },
                    coef: w.clone(),
                });
            }
        }
    }
    out
}

/// Quadratic entry `L1k(U_left) · L2k(U_right)` of a deformation right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadEntry {
    pub pair: usize,
    pub left: usize,
    pub right: usize,
}

/// Symbolic `R_i = (∂t − N1) U_{i−1} − [i = 1] N0 − Σ Q-entries`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationRhs {
    pub order: usize,
    /// The linear residual acts on `U_{linear_source}`.
    pub linear_source: usize,
    /// True when `−N0` appears (only for order 1).
    pub forcing: bool,
    /// True when the linear residual `(∂t − N1)U0 − N0` vanishes identically
    /// because the guess rule solves exactly that equation.
    pub residual_cancels: bool,
    pub quadratic: Vec<QuadEntry>,
}

impl DeformationRhs {
    pub fn is_purely_quadratic(&self) -> bool {
        self.residual_cancels
    }
}

pub fn build_deformation_rhs(pde: &QuadraticPDE, cfg: &HamConfig) -> Vec<DeformationRhs> {
    (1..=cfg.m)
        .map(|i| DeformationRhs {
            order: i,
            linear_source: i - 1,
            forcing: i == 1,
            residual_cancels: i == 1 && cfg.guess == GuessRule::SolveLinear,
            quadratic: (0..pde.s())
                .flat_map(|pair| (0..i).map(move |j| QuadEntry { pair, left: j, right: i - 1 - j }))
                .collect(),
        })
        .collect()
}

/// Smallest m with `α^{m+1} β / (1 − α) ≤ ε`, clamped at zero.
pub fn choose_truncation_order(alpha: f64, beta: f64, eps: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(beta > 0.0) || !(eps > 0.0) {
        return Err(Error::Domain(format!("beta = {beta} and eps = {eps} must be positive")));
    }
    let x = (beta / ((1.0 - alpha) * eps)).ln() / (1.0 / alpha).ln() - 1.0;
    // Snap values that sit on an integer up to rounding.
    let r = x.round();
    let c = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    Ok(if c <= 0.0 { 0 } else { c as usize })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRatio {
    /// Ratio `‖U_{order+1}‖ / ‖U_order‖`.
    pub order: usize,
    pub sup: Option<f64>,
    pub terminal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    /// Max over orders and sample times.
    pub sup: f64,
    /// Max over orders at the last sample time.
    pub terminal: Option<f64>,
    pub per_order: Vec<OrderRatio>,
    /// `(order, sample)` pairs whose denominator was zero.
    pub undefined: Vec<(usize, usize)>,
    pub warning: bool,
}

/// Largest ratio of consecutive order norms, `norms[i][t] = ‖U_i(·, t_t)‖`.
pub fn measure_alpha(norms: &[Vec<f64>]) -> Result<AlphaReport> {
    if norms.len() < 2 {
        return Err(Error::Domain(format!(
            "at least two orders are needed, got {}",
            norms.len()
        )));
    }
    let samples = norms[0].len();
    if norms.iter().any(|s| s.len() != samples) || samples == 0 {
        return Err(Error::SeriesMismatch("order norm series differ in length".into()));
    }
    let mut per_order = Vec::new();
    let mut undefined = Vec::new();
    for i in 0..norms.len() - 1 {
        let mut sup: Option<f64> = None;
        let mut terminal = None;
        for t in 0..samples {
            let den = norms[i][t];
            if den == 0.0 {
                undefined.push((i, t));
                continue;
            }
            let r = norms[i + 1][t] / den;
            sup = Some(sup.map_or(r, |s: f64| s.max(r)));
            if t == samples - 1 {
                terminal = Some(r);
            }
        }
        per_order.push(OrderRatio { order: i, sup, terminal });
    }
    let sup = per_order
        .iter()
        .filter_map(|o| o.sup)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
        .ok_or_else(|| Error::Domain("every ratio has a zero denominator".into()))?;
    let terminal = per_order
        .iter()
        .filter_map(|o| o.terminal)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    Ok(AlphaReport {
        sup,
        terminal,
        per_order,
        warning: !undefined.is_empty(),
        undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{make_burgers_preset, make_kdv_preset, QuadraticPair};
    use proptest::prelude::*;

    #[test]
    fn truncation_order_examples() {
        assert_eq!(choose_truncation_order(0.5, 1.0, 1e-3).unwrap(), 10);
        assert_eq!(choose_truncation_order(0.5, 0.5, 1.0).unwrap(), 0);
        assert_eq!(choose_truncation_order(0.1, 1.0, 1e-4).unwrap(), 4);
        assert!(choose_truncation_order(1.0, 1.0, 1e-3).is_err());
        assert!(choose_truncation_order(0.0, 1.0, 1e-3).is_err());
    }

    proptest! {
        #[test]
        fn truncation_order_monotone(alpha in 0.01f64..0.99, beta in 0.01f64..10.0, e1 in 1e-8f64..1.0, e2 in 1e-8f64..1.0) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(choose_truncation_order(alpha, beta, lo).unwrap() >= choose_truncation_order(alpha, beta, hi).unwrap());
            prop_assert!(choose_truncation_order(alpha, beta * 2.0, lo).unwrap() >= choose_truncation_order(alpha, beta, lo).unwrap());
        }
    }

    #[test]
    fn burgers_first_rhs_is_quadratic_only() {
        let pde = make_burgers_preset();
        let rhs = build_deformation_rhs(&pde, &HamConfig::new(3, -1.0));
        assert_eq!(rhs.len(), 3);
        assert!(rhs[0].is_purely_quadratic());
        assert_eq!(rhs[0].quadratic, vec![QuadEntry { pair: 0, left: 0, right: 0 }]);
        for (i, r) in rhs.iter().enumerate() {
            assert_eq!(r.quadratic.len(), pde.s() * (i + 1));
            assert_eq!(r.forcing, i == 0);
        }
        assert_eq!(
            rhs[1].quadratic,
            vec![QuadEntry { pair: 0, left: 0, right: 1 }, QuadEntry { pair: 0, left: 1, right: 0 }]
        );
    }

    #[test]
    fn linear_problem_has_no_corrections() {
        let mut pde = make_burgers_preset();
        pde.quadratic.clear();
        let cfg = HamConfig::new(2, -1.0);
        assert!(build_deformation_rhs(&pde, &cfg).iter().all(|r| r.quadratic.is_empty()));
        for a in 1..=2 {
            let terms = factor_derivative(&pde, &cfg, a);
            // Only the self-evolution remains.
            assert_eq!(terms.len(), 1);
            assert!(matches!(terms[0].kind, TermKind::Linear { order, .. } if order == a));
        }
    }

    #[test]
    fn kdv_terms() {
        let pde = make_kdv_preset();
        let cfg = HamConfig::for_problem(&pde, 1, -0.8);
        assert!(cfg.defect_op(&pde).is_zero());
        assert!(factor_derivative(&pde, &cfg, 0).is_empty());
        let t1 = factor_derivative(&pde, &cfg, 1);
        // −∂³ U1, g·∂³ U0, −g·(−6 U0)(∂U0)
        assert_eq!(t1.len(), 3);
        assert_eq!(t1[1].kind, TermKind::Linear { order: 0, op: LinearDiffOp::derivative(3, 1.0) });
        assert_eq!(t1[1].coef, Poly(vec![0.0, 1.0]));
        assert_eq!(t1[2].coef, Poly(vec![0.0, -1.0]));
    }

    #[test]
    fn recursion_weights() {
        // The coefficient of Q_1 in ∂t U_3 is −g(1+g)².
        let pde = QuadraticPDE {
            quadratic: vec![QuadraticPair { left: LinearDiffOp::identity(), right: LinearDiffOp::identity() }],
            ..make_burgers_preset()
        };
        let t = factor_derivative(&pde, &HamConfig::new(3, -1.0), 3);
        let q1 = t
            .iter()
            .find(|t| t.kind == TermKind::Quadratic { pair: 0, left: 0, right: 0 })
            .unwrap();
        assert_eq!(q1.coef, Poly(vec![0.0, -1.0, -2.0, -1.0]));
        let quads = t.iter().filter(|t| matches!(t.kind, TermKind::Quadratic { .. })).count();
        assert_eq!(quads, 1 + 2 + 3);
    }

    #[test]
    fn alpha_geometric() {
        let norms: Vec<Vec<f64>> = (0..4).map(|i| vec![0.3 * 0.4f64.powi(i); 5]).collect();
        let r = measure_alpha(&norms).unwrap();
        assert!((r.sup - 0.4).abs() < 1e-12);
        assert!((r.terminal.unwrap() - 0.4).abs() < 1e-12);
        assert!(!r.warning);
    }

    #[test]
    fn alpha_errors_and_warnings() {
        assert!(measure_alpha(&[vec![1.0]]).is_err());
        let r = measure_alpha(&[vec![1.0, 1.0], vec![0.0, 0.5], vec![0.0, 0.1]]).unwrap();
        assert!(r.warning);
        assert_eq!(r.undefined, vec![(1, 0)]);
        assert_eq!(r.sup, 0.5);
    }
}
