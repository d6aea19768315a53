//! Quadratic nonlinear PDEs in the canonical form
//! `∂t u = N0 + N1(u) + Σ_k L1k(u)·L2k(u)` and finite-difference application
//! of their linear operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::SpaceFn;
use crate::grid::{BoundaryPolicy, Grid};

/// Central finite-difference weights `(offset, weight)` for a derivative of
/// the given order on spacing `dx`.
pub fn stencil(order: u8, dx: f64) -> Result<Vec<(isize, f64)>> {
    Ok(match order {
        0 => vec![(0, 1.0)],
        1 => {
            let w = 0.5 / dx;
            vec![(-1, -w), (1, w)]
        }
        2 => {
            let w = 1.0 / (dx * dx);
            vec![(-1, w), (0, -2.0 * w), (1, w)]
        }
        3 => {
            let w = 0.5 / (dx * dx * dx);
            vec![(-2, -w), (-1, 2.0 * w), (1, -2.0 * w), (2, w)]
        }
        k => return Err(Error::UnsupportedOrder(k)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffTerm {
    pub order: u8,
    pub coefficient: SpaceFn,
}

/// A homogeneous linear differential operator `Σ c_k(x) ∂^k`. The axis it
/// acts on is chosen when it is applied. An empty term list is the zero
/// operator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearDiffOp {
    pub terms: Vec<DiffTerm>,
}

impl LinearDiffOp {
    pub fn zero() -> Self {
        LinearDiffOp { terms: Vec::new() }
    }

    pub fn identity() -> Self {
        Self::derivative(0, 1.0)
    }

    pub fn derivative(order: u8, coefficient: f64) -> Self {
        LinearDiffOp {
            terms: vec![DiffTerm {
                order,
                coefficient: SpaceFn::Constant(coefficient),
            }],
        }
    }

    pub fn with_term(mut self, order: u8, coefficient: SpaceFn) -> Self {
        self.terms.push(DiffTerm { order, coefficient });
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient.is_zero())
    }

    pub fn is_time_dependent(&self) -> bool {
        self.terms.iter().any(|t| t.coefficient.is_time_dependent())
    }

    pub fn max_order(&self) -> u8 {
        self.terms.iter().map(|t| t.order).max().unwrap_or(0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        LinearDiffOp {
            terms: self
                .terms
                .iter()
                .map(|t| DiffTerm {
                    order: t.order,
                    coefficient: t.coefficient.scaled(factor),
                })
                .collect(),
        }
        .simplified()
    }

    /// `self − other`, merging constant-coefficient terms of equal order.
    pub fn minus(&self, other: &LinearDiffOp) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.scaled(-1.0).terms);
        LinearDiffOp { terms }.simplified()
    }

    /// Merge constant-coefficient terms of equal order and drop zero terms.
    pub fn simplified(&self) -> Self {
        let mut constant = [0.0f64; 4];
        let mut seen = [false; 4];
        let mut rest = Vec::new();
        for t in &self.terms {
            match (t.coefficient.as_constant(), (t.order as usize) < 4) {
                (Some(c), true) => {
                    constant[t.order as usize] += c;
                    seen[t.order as usize] = true;
                }
                _ => rest.push(t.clone()),
            }
        }
        let mut terms: Vec<DiffTerm> = (0..4)
            .filter(|&k| seen[k] && constant[k] != 0.0)
            .map(|k| DiffTerm {
                order: k as u8,
                coefficient: SpaceFn::Constant(constant[k]),
            })
            .collect();
        terms.extend(rest.into_iter().filter(|t| !t.coefficient.is_zero()));
        LinearDiffOp { terms }
    }

    /// Weighted stencil row at node `i`: `(column, value)` pairs with columns
    /// inside the grid. Entries that would fall outside are dropped (zero ghosts).
    pub fn row(&self, grid: &Grid, i: usize, t: f64) -> Result<Vec<(usize, f64)>> {
        let dx = grid.spacing();
        let x = grid.point(i);
        let mut out: Vec<(usize, f64)> = Vec::new();
        for term in &self.terms {
            let c = term.coefficient.eval(x, t);
            if c == 0.0 {
                continue;
            }
            for (off, w) in stencil(term.order, dx)? {
                let j = i as isize + off;
                if j < 0 || j >= grid.n as isize {
                    continue;
                }
                let j = j as usize;
                match out.iter_mut().find(|(col, _)| *col == j) {
                    Some(e) => e.1 += c * w,
                    None => out.push((j, c * w)),
                }
            }
        }
        out.sort_by_key(|e| e.0);
        Ok(out)
    }

    /// Dense `n × n` row lists for the whole grid.
    pub fn rows(&self, grid: &Grid, t: f64) -> Result<Vec<Vec<(usize, f64)>>> {
        (0..grid.n).map(|i| self.row(grid, i, t)).collect()
    }
}

/// Apply `op` along `axis` of a field of rank `rank` stored row-major on the
/// tensor grid `grid^rank` (axis 0 is the slowest index).
pub fn apply_linear_op(
    op: &LinearDiffOp,
    field: &[f64],
    rank: usize,
    grid: &Grid,
    axis: usize,
    t: f64,
) -> Result<Vec<f64>> {
    let n = grid.n;
    if axis >= rank {
        return Err(Error::AxisOutOfRange { axis, rank });
    }
    let expected = n.checked_pow(rank as u32).unwrap_or(usize::MAX);
    if field.len() != expected {
        return Err(Error::ShapeMismatch {
            len: field.len(),
            points: n,
            rank,
        });
    }
    let dx = grid.spacing();
    let xs = grid.points();
    let stride = n.pow((rank - axis - 1) as u32);
    let outer = field.len() / (stride * n);
    let mut out = vec![0.0; field.len()];
    for term in &op.terms {
        let weights = stencil(term.order, dx)?;
        let coef: Vec<f64> = xs.iter().map(|&x| term.coefficient.eval(x, t)).collect();
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * stride * n + inner;
                for i in 0..n {
                    let mut acc = 0.0;
                    for &(off, w) in &weights {
                        let j = i as isize + off;
                        if j >= 0 && (j as usize) < n {
                            acc += w * field[base + j as usize * stride];
                        }
                    }
                    out[base + i * stride] += coef[i] * acc;
                }
            }
        }
    }
    Ok(out)
}

/// One quadratic product `L1(u)·L2(u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPair {
    pub left: LinearDiffOp,
    pub right: LinearDiffOp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPDE {
    pub name: String,
    /// N0, the driving term.
    pub forcing: SpaceFn,
    /// N1.
    pub linear: LinearDiffOp,
    /// The s pairs of N2.
    pub quadratic: Vec<QuadraticPair>,
    pub domain: (f64, f64),
    pub boundary: BoundaryPolicy,
    pub initial: SpaceFn,
    /// Closed-form solution, when one is known; used as the reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<SpaceFn>,
}

impl QuadraticPDE {
    pub fn s(&self) -> usize {
        self.quadratic.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.domain;
        if !(hi > lo) {
            return Err(Error::InvalidProblem(format!("empty domain [{lo}, {hi}]")));
        }
        let ops = std::iter::once(&self.linear)
            .chain(self.quadratic.iter().flat_map(|p| [&p.left, &p.right]));
        for op in ops {
            if let Some(t) = op.terms.iter().find(|t| t.order > 3) {
                return Err(Error::UnsupportedOrder(t.order));
            }
        }
        let scale = (0..=64)
            .map(|k| self.initial.eval(lo + (hi - lo) * k as f64 / 64.0, 0.0).abs())
            .fold(0.0, f64::max);
        let edge = self.initial.eval(lo, 0.0).abs().max(self.initial.eval(hi, 0.0).abs());
        let tol = match self.boundary {
            BoundaryPolicy::DirichletExclusive => 1e-9 * scale.max(1.0),
            BoundaryPolicy::ZeroGhostInclusive => 1e-2 * scale,
        };
        if edge > tol {
            return Err(Error::InvalidProblem(format!(
                "initial data is {edge:e} at the boundary, expected zero"
            )));
        }
        Ok(())
    }

    pub fn grid(&self, n: usize) -> Result<Grid> {
        Grid::new(self.domain.0, self.domain.1, n, self.boundary)
    }

    /// The problem for `v = η·u`: forcing and initial data scale by η and
    /// each quadratic pair by 1/η, so every HAM order scales by η.
    pub fn scaled(&self, eta: f64) -> Result<Self> {
        if eta == 0.0 || !eta.is_finite() {
            return Err(Error::Domain(format!("scale factor {eta} must be finite and nonzero")));
        }
        Ok(QuadraticPDE {
            name: format!("{}*{eta}", self.name),
            forcing: self.forcing.scaled(eta),
            linear: self.linear.clone(),
            quadratic: self
                .quadratic
                .iter()
                .map(|p| QuadraticPair {
                    left: p.left.scaled(1.0 / eta),
                    right: p.right.clone(),
                })
                .collect(),
            domain: self.domain,
            boundary: self.boundary,
            initial: self.initial.scaled(eta),
            exact: self.exact.as_ref().map(|e| e.scaled(eta)),
        })
    }

    /// Pointwise right-hand side of the semi-discrete nonlinear PDE.
    pub fn rhs(&self, u: &[f64], grid: &Grid, t: f64) -> Result<Vec<f64>> {
        let xs = grid.points();
        let mut out = apply_linear_op(&self.linear, u, 1, grid, 0, t)?;
        for (o, &x) in out.iter_mut().zip(&xs) {
            *o += self.forcing.eval(x, t);
        }
        for pair in &self.quadratic {
            let a = apply_linear_op(&pair.left, u, 1, grid, 0, t)?;
            let b = apply_linear_op(&pair.right, u, 1, grid, 0, t)?;
            for ((o, a), b) in out.iter_mut().zip(a).zip(b) {
                *o += a * b;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersParams {
    pub viscosity: f64,
    pub forcing_amplitude: f64,
    pub initial_amplitude: f64,
}

impl Default for BurgersParams {
    fn default() -> Self {
        BurgersParams {
            viscosity: 0.1,
            forcing_amplitude: 0.3,
            initial_amplitude: 0.3,
        }
    }
}

/// Forced viscous Burgers `u_t + u u_x = μ u_xx + a cos(πx)` on `[0, 1]`
/// with `u(x, 0) = b sin(πx)` and zero Dirichlet data.
pub fn burgers(p: BurgersParams) -> QuadraticPDE {
    use std::f64::consts::PI;
    QuadraticPDE {
        name: "burgers".into(),
        forcing: SpaceFn::Cosine {
            amplitude: p.forcing_amplitude,
            wavenumber: PI,
            phase: 0.0,
        },
        linear: LinearDiffOp::derivative(2, p.viscosity),
        quadratic: vec![QuadraticPair {
            left: LinearDiffOp::identity(),
            right: LinearDiffOp::derivative(1, -1.0),
        }],
        domain: (0.0, 1.0),
        boundary: BoundaryPolicy::DirichletExclusive,
        initial: SpaceFn::Sine {
            amplitude: p.initial_amplitude,
            wavenumber: PI,
            phase: 0.0,
        },
        exact: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdvParams {
    /// Soliton speed `r` (amplitude `r/2`).
    pub speed: f64,
    /// Phase offset `β`.
    pub offset: f64,
    pub domain: (f64, f64),
}

impl Default for KdvParams {
    fn default() -> Self {
        KdvParams {
            speed: 0.5,
            offset: 0.0,
            domain: (-10.0, 10.0),
        }
    }
}

/// KdV `u_t + 6 u u_x + u_xxx = 0` with the single-soliton initial data.
pub fn kdv(p: KdvParams) -> QuadraticPDE {
    let soliton = |speed: f64| SpaceFn::Sech2 {
        amplitude: p.speed / 2.0,
        width: p.speed.sqrt() / 2.0,
        center: p.offset,
        speed,
    };
    QuadraticPDE {
        name: "kdv".into(),
        forcing: SpaceFn::zero(),
        linear: LinearDiffOp::derivative(3, -1.0),
        quadratic: vec![QuadraticPair {
            left: LinearDiffOp::derivative(0, -6.0),
            right: LinearDiffOp::derivative(1, 1.0),
        }],
        domain: p.domain,
        boundary: BoundaryPolicy::ZeroGhostInclusive,
        initial: soliton(0.0),
        exact: Some(soliton(p.speed)),
    }
}

pub fn make_burgers_preset() -> QuadraticPDE {
    burgers(BurgersParams::default())
}

pub fn make_kdv_preset() -> QuadraticPDE {
    kdv(KdvParams::default())
}

pub fn preset(name: &str) -> Option<QuadraticPDE> {
    match name {
        "burgers" => Some(make_burgers_preset()),
        "kdv" => Some(make_kdv_preset()),
        _ => None,
    }
}
