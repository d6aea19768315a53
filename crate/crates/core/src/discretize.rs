//! Lowering of a linearized system to `dY/dt = A(t) Y + B(t)` on tensor grids.
//!
//! Every variable is a tensor product of factor spaces. An order-`a ≥ 1`
//! factor lives on the spatial grid. The zeroth-order factor lives on the grid
//! for a plain run; when the guess is prescribed by a previous iteration it
//! lives in the full state space of that iteration's system, whose first `n`
//! entries hold the summed solution.
//!
//! `A(t)` and `B(t)` are stored as polynomials in `g = h·H(t)`; the constant
//! term holds the couplings that do not depend on the deformation weight.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ham::HamConfig;
use crate::linearizer::{CouplingOp, FactorOp, LinearizedSystem, VariableId, VariableRegistry};
use crate::pde::LinearDiffOp;
use crate::sparse::{Csr, Triplets};

pub const DEFAULT_CAP: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockInfo {
    pub id: VariableId,
    pub offset: usize,
    pub extent: usize,
    pub factor_dims: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    /// Iteration level: 0 for a plain run.
    pub level: usize,
    pub grid: Grid,
    pub registry: VariableRegistry,
    pub cfg: HamConfig,
    pub blocks: Vec<BlockInfo>,
    pub dim: usize,
    /// `A(t) = Σ_k g(t)^k a[k].1`, sorted by power.
    pub a: Vec<(usize, Csr)>,
    /// `B(t) = Σ_k g(t)^k b[k].1`, sorted by power.
    pub b: Vec<(usize, Vec<f64>)>,
    pub y_in: Vec<f64>,
    /// True when some operator coefficient or forcing depends on time, so
    /// the matrices are only valid at `assembled_at`.
    pub time_dependent: bool,
    pub assembled_at: f64,
    /// The previous iteration's system, for levels above zero.
    pub base: Option<Arc<DiscreteSystem>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizeOptions {
    pub cap: usize,
    pub t: f64,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        DiscretizeOptions { cap: DEFAULT_CAP, t: 0.0 }
    }
}

/// `(n+1)^{m+1} + n − 1`, the size of a level-0 system.
pub fn expected_dimension(n: usize, m: usize) -> Option<usize> {
    (n + 1).checked_pow(m as u32 + 1).and_then(|v| v.checked_add(n - 1))
}

/// Block dimensions for a registry whose zeroth-order factor has dimension
/// `base_dim`. `None` when the size overflows.
pub fn layout_dims(reg: &VariableRegistry, n: usize, base_dim: usize) -> Option<Vec<Vec<usize>>> {
    reg.iter()
        .map(|v| match v {
            VariableId::Sum => Some(vec![n]),
            VariableId::Product(a) => {
                let dims: Vec<usize> = a.iter().map(|&o| if o == 0 { base_dim } else { n }).collect();
                dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).map(|_| dims)
            }
        })
        .collect()
}

fn sizing_report(reg: &VariableRegistry, n: usize, base_dim: usize) -> String {
    let mut lines = vec![format!("points per axis n = {n}, zeroth-order factor dimension {base_dim}")];
    let mut by_level: std::collections::BTreeMap<isize, (usize, u128)> = Default::default();
    for v in reg.iter() {
        let size: u128 = match v {
            VariableId::Sum => n as u128,
            VariableId::Product(a) => a
                .iter()
                .map(|&o| if o == 0 { base_dim as u128 } else { n as u128 })
                .fold(1u128, |acc, d| acc.saturating_mul(d)),
        };
        let e = by_level.entry(v.level()).or_default();
        e.0 += 1;
        e.1 = e.1.saturating_add(size);
    }
    for (level, (count, size)) in by_level {
        lines.push(format!("  level {level}: {count} blocks, {size} entries"));
    }
    lines.join("\n")
}

/// A factor-space map stored as a polynomial in g.
type MatPoly = Vec<(usize, Csr)>;
type VecPoly = Vec<(usize, Vec<f64>)>;

struct Lowering<'a> {
    sys: &'a LinearizedSystem,
    grid: &'a Grid,
    n: usize,
    base: Option<&'a DiscreteSystem>,
    base_dim: usize,
    t: f64,
    dims: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    a: Vec<Triplets>,
    b: Vec<Vec<f64>>,
    dim: usize,
}

fn ensure<T: Default>(v: &mut Vec<T>, k: usize) -> &mut T {
    while v.len() <= k {
        v.push(T::default());
    }
    &mut v[k]
}

impl<'a> Lowering<'a> {
    fn slot_is_state(&self, order: usize) -> bool {
        order == 0 && self.base.is_some()
    }

    fn stencil(&self, op: &LinearDiffOp) -> Result<Csr> {
        Csr::from_rows(self.n, &op.rows(self.grid, self.t)?)
    }

    /// `op` mapped from a slot of the given source order to a grid slot.
    fn diff_matrix(&self, op: &LinearDiffOp, src_order: usize) -> Result<Csr> {
        let mut d = self.stencil(op)?;
        if self.slot_is_state(src_order) {
            // D·S with S selecting the summed solution at the head of the state.
            d.ncols = self.base_dim;
        }
        Ok(d)
    }

    fn base(&self) -> Result<&'a DiscreteSystem> {
        self.base.ok_or_else(|| {
            Error::Unsupported("a prescribed zeroth-order guess needs a previous-level system".into())
        })
    }

    /// `∂t U0 = A_prev Y + B_prev`, restricted to the head when the target
    /// slot is on the grid.
    fn guess_derivative(&self, tgt_order: usize) -> Result<(MatPoly, VecPoly)> {
        let base = self.base()?;
        if tgt_order == 0 {
            Ok((base.a.clone(), base.b.clone()))
        } else {
            let n = self.n;
            Ok((
                base.a.iter().map(|(k, m)| (*k, m.top_rows(n))).collect(),
                base.b.iter().map(|(k, v)| (*k, v[..n].to_vec())).collect(),
            ))
        }
    }

    fn push_evolve(&mut self, target: usize, row_dims: &[usize], source: usize, axis: usize, fm: &Csr, power: usize, scale: f64) {
        let src_dims = &self.dims[source];
        let st: usize = row_dims[axis + 1..].iter().product();
        let dt = row_dims[axis];
        let ds = src_dims[axis];
        let extent: usize = row_dims.iter().product();
        let limit = self.row_limit(target, extent);
        let (to, so) = (self.offsets[target], self.offsets[source]);
        let trip = ensure(&mut self.a, power);
        for r in 0..limit {
            let hi = r / (dt * st);
            let i = (r / st) % dt;
            let lo = r % st;
            let (cols, vals) = fm.row(i);
            let base = so + hi * ds * st + lo;
            for (&j, &v) in cols.iter().zip(vals) {
                trip.push(to + r, base + j as usize * st, scale * v);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push_restrict(&mut self, target: usize, row_dims: &[usize], source: usize, axis: usize, l1: &Csr, l2: &Csr, power: usize, scale: f64) {
        let src_dims = &self.dims[source];
        let st: usize = row_dims[axis + 1..].iter().product();
        let dt = row_dims[axis];
        let (s1, s2) = (src_dims[axis], src_dims[axis + 1]);
        let extent: usize = row_dims.iter().product();
        let limit = self.row_limit(target, extent);
        let (to, so) = (self.offsets[target], self.offsets[source]);
        let trip = ensure(&mut self.a, power);
        for r in 0..limit {
            let hi = r / (dt * st);
            let i = (r / st) % dt;
            let lo = r % st;
            let (c1, v1) = l1.row(i);
            let (c2, v2) = l2.row(i);
            let base = so + hi * s1 * s2 * st + lo;
            for (&j, &x) in c1.iter().zip(v1) {
                for (&k, &y) in c2.iter().zip(v2) {
                    trip.push(to + r, base + (j as usize * s2 + k as usize) * st, scale * x * y);
                }
            }
        }
    }

    fn push_inject(&mut self, target: usize, row_dims: &[usize], source: usize, axis: usize, field: &[f64], power: usize, scale: f64) {
        let st: usize = row_dims[axis + 1..].iter().product();
        let dt = row_dims[axis];
        let extent: usize = row_dims.iter().product();
        let limit = self.row_limit(target, extent);
        let (to, so) = (self.offsets[target], self.offsets[source]);
        let trip = ensure(&mut self.a, power);
        for r in 0..limit {
            let hi = r / (dt * st);
            let i = (r / st) % dt;
            let lo = r % st;
            trip.push(to + r, so + hi * st + lo, scale * field[i]);
        }
    }

    fn push_forcing(&mut self, target: usize, v: &[f64], power: usize, scale: f64) {
        let limit = self.row_limit(target, v.len());
        let dim = self.dim;
        let off = self.offsets[target];
        let b = ensure(&mut self.b, power);
        if b.is_empty() {
            b.resize(dim, 0.0);
        }
        for (k, &x) in v[..limit].iter().enumerate() {
            b[off + k] += scale * x;
        }
    }

    /// Rows of a row-layout that land in the target. Copies into the sum
    /// variable keep only the head of a state-space layout.
    fn row_limit(&self, target: usize, extent: usize) -> usize {
        extent.min(self.dims[target].iter().product())
    }

    fn lower(&mut self) -> Result<()> {
        let sys = self.sys;
        for c in &sys.couplings {
            let row_dims = self.dims[c.row_of].clone();
            let row_var = sys.registry.get(c.row_of).clone();
            let row_orders: Vec<usize> = row_var.multi_index().map(|a| a.to_vec()).unwrap_or_else(|| vec![1]);
            let src_orders: Vec<usize> = sys
                .registry
                .get(c.source)
                .multi_index()
                .map(|a| a.to_vec())
                .ok_or_else(|| Error::RegistryMiss("the sum variable cannot be a coupling source".into()))?;
            match &c.op {
                CouplingOp::Evolve { axis, op: FactorOp::Diff(op) } => {
                    if self.slot_is_state(row_orders[*axis]) {
                        return Err(Error::Unsupported(
                            "a differential operator cannot act into a prescribed-guess slot".into(),
                        ));
                    }
                    let fm = self.diff_matrix(op, src_orders[*axis])?;
                    for (k, w) in c.coef.terms() {
                        self.push_evolve(c.target, &row_dims, c.source, *axis, &fm, k, w);
                    }
                }
                CouplingOp::Evolve { axis, op: FactorOp::GuessDerivative } => {
                    let (mats, vecs) = self.guess_derivative(row_orders[*axis])?;
                    for (k, w) in c.coef.terms() {
                        for (p, fm) in &mats {
                            self.push_evolve(c.target, &row_dims, c.source, *axis, fm, k + p, w);
                        }
                    }
                    // The forcing part of the guess derivative multiplies the
                    // remaining factors.
                    let rest: Vec<usize> = src_orders
                        .iter()
                        .enumerate()
                        .filter(|&(q, _)| q != *axis)
                        .map(|(_, &o)| o)
                        .collect();
                    for (p, v) in &vecs {
                        for (k, w) in c.coef.terms() {
                            if rest.is_empty() {
                                self.push_forcing(c.target, v, k + p, w);
                            } else {
                                let src = sys
                                    .registry
                                    .position(&VariableId::Product(rest.clone()))
                                    .ok_or_else(|| Error::RegistryMiss(format!("{:?}", rest)))?;
                                self.push_inject(c.target, &row_dims, src, *axis, v, k + p, w);
                            }
                        }
                    }
                }
                CouplingOp::Restrict { axis, left, right } => {
                    let l1 = self.diff_matrix(left, src_orders[*axis])?;
                    let l2 = self.diff_matrix(right, src_orders[*axis + 1])?;
                    for (k, w) in c.coef.terms() {
                        self.push_restrict(c.target, &row_dims, c.source, *axis, &l1, &l2, k, w);
                    }
                }
                CouplingOp::Inject { axis, field, .. } => {
                    if self.slot_is_state(row_orders[*axis]) {
                        return Err(Error::Unsupported("forcing into a prescribed-guess slot".into()));
                    }
                    let v = field.sample(&self.grid.points(), self.t);
                    for (k, w) in c.coef.terms() {
                        self.push_inject(c.target, &row_dims, c.source, *axis, &v, k, w);
                    }
                }
            }
        }
        for f in &sys.forcing {
            let orders = sys.registry.get(f.row_of).multi_index().map(|a| a.to_vec()).unwrap_or_default();
            if orders.first().map_or(false, |&o| self.slot_is_state(o)) {
                return Err(Error::Unsupported("forcing into a prescribed-guess slot".into()));
            }
            let v = f.field.sample(&self.grid.points(), self.t);
            for (k, w) in f.coef.terms() {
                self.push_forcing(f.target, &v, k, w);
            }
        }
        Ok(())
    }

    fn initial(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        let xs = self.grid.points();
        for blk in &self.sys.init {
            let orders = self.sys.registry.get(blk.target).multi_index().map(|a| a.to_vec());
            let mut v = vec![1.0];
            for (slot, f) in blk.factors.iter().enumerate() {
                let is_state = orders.as_ref().map_or(false, |o| self.slot_is_state(o[slot]));
                let factor = match (is_state, self.base) {
                    (true, Some(b)) => b.y_in.clone(),
                    _ => f.sample(&xs, 0.0),
                };
                v = kron(&v, &factor);
            }
            let off = self.offsets[blk.target];
            y[off..off + v.len()].copy_from_slice(&v);
        }
        y
    }
}

/// Kronecker product of two vectors, `u` on the slow index.
pub fn kron(u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len() * v.len());
    for &a in u {
        out.extend(v.iter().map(|&b| a * b));
    }
    out
}

fn is_time_dependent(sys: &LinearizedSystem) -> bool {
    let op_td = |op: &LinearDiffOp| op.is_time_dependent();
    sys.couplings.iter().any(|c| match &c.op {
        CouplingOp::Evolve { op: FactorOp::Diff(op), .. } => op_td(op),
        CouplingOp::Evolve { .. } => false,
        CouplingOp::Restrict { left, right, .. } => op_td(left) || op_td(right),
        CouplingOp::Inject { field, .. } => field.is_time_dependent(),
    }) || sys.forcing.iter().any(|f| f.field.is_time_dependent())
}

pub fn discretize_system(sys: &LinearizedSystem, grid: &Grid) -> Result<DiscreteSystem> {
    discretize_with(sys, grid, None, DiscretizeOptions::default())
}

/// Lower `sys` on `grid`. With `base`, zeroth-order factors live in the
/// state space of that system.
pub fn discretize_with(
    sys: &LinearizedSystem,
    grid: &Grid,
    base: Option<Arc<DiscreteSystem>>,
    opts: DiscretizeOptions,
) -> Result<DiscreteSystem> {
    let n = grid.n;
    let base_dim = base.as_ref().map_or(n, |b| b.dim);
    if let Some(b) = &base {
        if b.grid != *grid {
            return Err(Error::Unsupported("levels must share one grid".into()));
        }
    }
    let reg = &sys.registry;
    let cap_err = |dim| Error::CapExceeded { dim, cap: opts.cap, report: sizing_report(reg, n, base_dim) };
    let dims = layout_dims(reg, n, base_dim).ok_or_else(|| cap_err(usize::MAX))?;
    let mut offsets = Vec::with_capacity(dims.len());
    let mut dim = 0usize;
    for d in &dims {
        offsets.push(dim);
        dim = dim
            .checked_add(d.iter().product::<usize>())
            .ok_or_else(|| cap_err(usize::MAX))?;
    }
    if dim > opts.cap {
        return Err(cap_err(dim));
    }
    let level = base.as_ref().map_or(0, |b| b.level + 1);
    let mut low = Lowering {
        sys,
        grid,
        n,
        base: base.as_deref(),
        base_dim,
        t: opts.t,
        dims,
        offsets,
        a: Vec::new(),
        b: Vec::new(),
        dim,
    };
    low.lower()?;
    let y_in = low.initial();
    let mut a = Vec::new();
    for (k, t) in std::mem::take(&mut low.a).into_iter().enumerate() {
        if !t.is_empty() {
            a.push((k, Csr::from_triplets(dim, dim, t)?));
        }
    }
    if a.is_empty() {
        a.push((0, Csr::zeros(dim, dim)));
    }
    let b: Vec<(usize, Vec<f64>)> = std::mem::take(&mut low.b)
        .into_iter()
        .enumerate()
        .filter(|(_, v)| v.iter().any(|&x| x != 0.0))
        .collect();
    let blocks = reg
        .iter()
        .zip(low.dims.iter().zip(&low.offsets))
        .map(|(id, (d, &offset))| BlockInfo {
            id: id.clone(),
            offset,
            extent: d.iter().product(),
            factor_dims: d.clone(),
        })
        .collect();
    let time_dependent = is_time_dependent(sys) || base.as_ref().map_or(false, |b| b.time_dependent);
    Ok(DiscreteSystem {
        level,
        grid: grid.clone(),
        registry: reg.clone(),
        cfg: sys.cfg.clone(),
        blocks,
        dim,
        a,
        b,
        y_in,
        time_dependent,
        assembled_at: opts.t,
        base,
    })
}

impl DiscreteSystem {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn g(&self, t: f64) -> f64 {
        self.cfg.g(t)
    }

    /// The part of A that does not depend on g.
    pub fn a_static(&self) -> Csr {
        self.a
            .iter()
            .find(|(k, _)| *k == 0)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| Csr::zeros(self.dim, self.dim))
    }

    /// The parts of A multiplying `g^k`, `k ≥ 1`.
    pub fn a_ham(&self) -> impl Iterator<Item = &(usize, Csr)> {
        self.a.iter().filter(|(k, _)| *k > 0)
    }

    pub fn a_with_g(&self, g: f64) -> Result<Csr> {
        let parts: Vec<(f64, &Csr)> = self.a.iter().map(|(k, m)| (g.powi(*k as i32), m)).collect();
        Csr::linear_combination(&parts)
    }

    pub fn a_at(&self, t: f64) -> Result<Csr> {
        self.a_with_g(self.g(t))
    }

    pub fn b_with_g(&self, g: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (k, v) in &self.b {
            let w = g.powi(*k as i32);
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        out
    }

    pub fn b_at(&self, t: f64) -> Vec<f64> {
        self.b_with_g(self.g(t))
    }

    pub fn block_index(&self, id: &VariableId) -> Option<usize> {
        self.registry.position(id)
    }

    pub fn block<'y>(&self, y: &'y [f64], k: usize) -> &'y [f64] {
        let b = &self.blocks[k];
        &y[b.offset..b.offset + b.extent]
    }

    pub fn block_norms(&self, y: &[f64]) -> Vec<f64> {
        (0..self.blocks.len()).map(|k| crate::par::norm(self.block(y, k))).collect()
    }

    pub fn block_labels(&self) -> Vec<String> {
        self.blocks.iter().map(|b| b.id.to_string()).collect()
    }

    /// Sorted union of the column patterns of every power of A in `row`.
    pub fn row_pattern(&self, row: usize) -> Result<Vec<usize>> {
        if row >= self.dim {
            return Err(Error::IndexOutOfRange(format!("row {row} of {}", self.dim)));
        }
        let mut cols: Vec<usize> = self
            .a
            .iter()
            .flat_map(|(_, m)| m.row(row).0.iter().map(|&c| c as usize))
            .collect();
        cols.sort_unstable();
        cols.dedup();
        Ok(cols)
    }

    /// Column of the k-th nonzero of `row`. Past the last nonzero the row's
    /// own index is returned, the usual padding convention for sparse-access
    /// oracles.
    pub fn sparsity_pattern_access(&self, row: usize, k: usize) -> Result<usize> {
        Ok(self.row_pattern(row)?.get(k).copied().unwrap_or(row))
    }

    /// `A_{ij}(t)`.
    pub fn element_access(&self, i: usize, j: usize, t: f64) -> Result<f64> {
        if i >= self.dim || j >= self.dim {
            return Err(Error::IndexOutOfRange(format!("({i}, {j}) of {}", self.dim)));
        }
        let g = self.g(t);
        Ok(self.a.iter().map(|(k, m)| g.powi(*k as i32) * m.get(i, j)).sum())
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.dim).map(|r| self.row_pattern(r).map_or(0, |p| p.len())).max().unwrap_or(0)
    }

    pub fn nnz(&self) -> usize {
        self.a.iter().map(|(_, m)| m.nnz()).sum()
    }
}

/// Matrix Market coordinate format, 1-based indices.
pub fn write_matrix_market<W: Write>(w: &mut W, a: &Csr) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows, a.ncols, a.nnz())?;
    for i in 0..a.nrows {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryPolicy;
    use crate::ham::HamConfig;
    use crate::linearizer::{assemble_system, enumerate_variables};
    use crate::pde::{apply_linear_op, make_burgers_preset, make_kdv_preset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn burgers(m: usize, n: usize, h: f64) -> DiscreteSystem {
        let pde = make_burgers_preset();
        let sys = assemble_system(&pde, &HamConfig::new(m, h), &enumerate_variables(m)).unwrap();
        discretize_system(&sys, &pde.grid(n).unwrap()).unwrap()
    }

    #[test]
    fn dimension_formula() {
        for n in [8, 16] {
            for m in 0..=3 {
                assert_eq!(burgers(m, n, -1.0).dim, expected_dimension(n, m).unwrap());
            }
        }
        assert_eq!(expected_dimension(32, 1), Some(1120));
        assert_eq!(expected_dimension(32, 3), Some(1_185_952));
    }

    #[test]
    fn cap_fails_fast() {
        let pde = make_burgers_preset();
        let sys = assemble_system(&pde, &HamConfig::new(3, -1.0), &enumerate_variables(3)).unwrap();
        let err = discretize_with(&sys, &pde.grid(32).unwrap(), None, DiscretizeOptions { cap: 10_000, t: 0.0 })
            .unwrap_err();
        match err {
            Error::CapExceeded { dim, report, .. } => {
                assert_eq!(dim, 1_185_952);
                assert!(report.contains("level 3: 1 blocks, 1048576 entries"), "{report}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn laplacian_row_oracles() {
        let ds = burgers(1, 16, -1.0);
        let dx = ds.grid.spacing();
        // Row 5 of the U0 block: μ∂² stencil only.
        let off = ds.blocks[1].offset;
        let row = off + 5;
        let cols: Vec<usize> = (0..3).map(|k| ds.sparsity_pattern_access(row, k).unwrap()).collect();
        assert_eq!(cols, [row - 1, row, row + 1]);
        assert_eq!(ds.sparsity_pattern_access(row, 3).unwrap(), row);
        let mu = 0.1;
        let e = |j| ds.element_access(row, j, 0.0).unwrap();
        assert!((e(row - 1) - mu / (dx * dx)).abs() < 1e-9);
        assert!((e(row) + 2.0 * mu / (dx * dx)).abs() < 1e-9);
        assert!(ds.element_access(ds.dim, 0, 0.0).is_err());
    }

    #[test]
    fn sum_row_draws_from_level_zero_blocks() {
        let ds = burgers(1, 16, -1.0);
        let allowed: Vec<std::ops::Range<usize>> = ds.blocks[1..].iter().map(|b| b.offset..b.offset + b.extent).collect();
        for r in 0..16 {
            for c in ds.row_pattern(r).unwrap() {
                assert!(allowed.iter().any(|rg| rg.contains(&c)));
                assert!(c >= 16);
            }
        }
    }

    #[test]
    fn row_nnz_bound() {
        for (pde, s) in [(make_burgers_preset(), 1usize), (make_kdv_preset(), 1)] {
            for m in 1..=3 {
                let cfg = HamConfig::for_problem(&pde, m, -1.0);
                let sys = assemble_system(&pde, &cfg, &enumerate_variables(m)).unwrap();
                let ds = discretize_system(&sys, &pde.grid(8).unwrap()).unwrap();
                let bound = 5 * s * m * (m + 1) / 2 + 5;
                assert!(ds.max_row_nnz() <= bound, "{} m = {m}: {} > {bound}", pde.name, ds.max_row_nnz());
            }
        }
    }

    #[test]
    fn restriction_on_separable_field() {
        // δ(x0,x1) (I ⊗ −D1) applied to g ⊗ h gives g·(−D h) pointwise.
        let ds = burgers(1, 12, 1.0);
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y = vec![0.0; ds.dim];
        let b = &ds.blocks[3];
        y[b.offset..b.offset + b.extent].copy_from_slice(&kron(&g, &h));
        let (_, a1) = ds.a_ham().next().unwrap();
        let mut out = vec![0.0; ds.dim];
        a1.spmv(&y, &mut out);
        let dh = apply_linear_op(&LinearDiffOp::derivative(1, 1.0), &h, 1, &ds.grid, 0, 0.0).unwrap();
        // The U1 row carries −g·Q1 = −g·(g ⊗ −D h) on the diagonal.
        let u1 = &ds.blocks[2];
        for i in 0..n {
            assert!((out[u1.offset + i] - g[i] * dh[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn kronecker_sum_consistency() {
        let pde = make_burgers_preset();
        let ds = burgers(2, 8, -1.0);
        let grid = &ds.grid;
        let k = ds.block_index(&VariableId::Product(vec![0, 0, 0])).unwrap();
        let blk = ds.blocks[k].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f: Vec<f64> = (0..blk.extent).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y = vec![0.0; ds.dim];
        y[blk.offset..blk.offset + blk.extent].copy_from_slice(&f);
        let a0 = ds.a_static();
        let mut out = vec![0.0; ds.dim];
        a0.spmv(&y, &mut out);
        let mut expect = vec![0.0; blk.extent];
        for axis in 0..3 {
            let d = apply_linear_op(&pde.linear, &f, 3, grid, axis, 0.0).unwrap();
            for (e, v) in expect.iter_mut().zip(d) {
                *e += v;
            }
        }
        for (a, b) in out[blk.offset..blk.offset + blk.extent].iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn zero_h_keeps_only_static_dynamics() {
        let ds = burgers(2, 8, 0.0);
        let a = ds.a_at(0.0).unwrap();
        assert_eq!(a, Csr::linear_combination(&[(1.0, &ds.a_static())]).unwrap());
        assert!(ds.a_ham().count() > 0);
    }

    #[test]
    fn burgers_m1_forcing_and_init() {
        let ds = burgers(1, 16, -1.0);
        let xs = ds.grid.points();
        let f: Vec<f64> = xs.iter().map(|x| 0.3 * (std::f64::consts::PI * x).cos()).collect();
        let u: Vec<f64> = xs.iter().map(|x| 0.3 * (std::f64::consts::PI * x).sin()).collect();
        let b = ds.b_at(0.0);
        assert_eq!(&b[..16], &f[..]);
        assert_eq!(&b[16..32], &f[..]);
        assert!(b[32..].iter().all(|&v| v == 0.0));
        assert_eq!(&ds.y_in[..16], &u[..]);
        assert_eq!(&ds.y_in[16..32], &u[..]);
        assert!(ds.y_in[32..48].iter().all(|&v| v == 0.0));
        assert_eq!(&ds.y_in[48..], &kron(&u, &u)[..]);
    }

    #[test]
    fn matrix_market_header() {
        let a = Csr::identity(2);
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &a).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1e0\n"));
    }

    #[test]
    fn mixed_grids_rejected() {
        let ds = Arc::new(burgers(1, 8, -1.0));
        let pde = make_burgers_preset();
        let sys = assemble_system(&pde, &HamConfig::new(1, -1.0), &enumerate_variables(1)).unwrap();
        let other = Grid::new(0.0, 1.0, 9, BoundaryPolicy::DirichletExclusive).unwrap();
        assert!(discretize_with(&sys, &other, Some(ds), DiscretizeOptions::default()).is_err());
    }
}
