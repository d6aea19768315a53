//! Secondary linearization: the variable lattice, the symbolic block operator,
//! forcing and initial data.
//!
//! A product variable `Product(a)` stands for `U_{a_0}(x_0) U_{a_1}(x_1) ...`
//! over ancilla copies of the spatial axis. Its time derivative follows from
//! the product rule; every factor derivative is a combination of lower-order
//! factors (see [`crate::ham::factor_derivative`]), and quadratic terms are
//! absorbed by restricting a variable with one extra factor to the diagonal
//! `x_p = x_{p+1}`.

pub mod dump;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::SpaceFn;
use crate::ham::{factor_derivative, HamConfig, TermKind};
use crate::pde::{LinearDiffOp, QuadraticPDE};
use crate::poly::Poly;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableId {
    /// `y₋₁ = Σ_j y_{0,j}`, the physical solution.
    Sum,
    /// Factor orders `(a_0, ..., a_i)`.
    Product(Vec<usize>),
}

impl VariableId {
    /// `-1` for the sum variable, otherwise the number of factors minus one.
    pub fn level(&self) -> isize {
        match self {
            VariableId::Sum => -1,
            VariableId::Product(a) => a.len() as isize - 1,
        }
    }

    /// `j = level + Σa`.
    pub fn order(&self) -> Option<usize> {
        match self {
            VariableId::Sum => None,
            VariableId::Product(a) => Some(a.len() - 1 + a.iter().sum::<usize>()),
        }
    }

    pub fn multi_index(&self) -> Option<&[usize]> {
        match self {
            VariableId::Sum => None,
            VariableId::Product(a) => Some(a),
        }
    }

    /// Number of spatial axes.
    pub fn rank(&self) -> usize {
        match self {
            VariableId::Sum => 1,
            VariableId::Product(a) => a.len(),
        }
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariableId::Sum => write!(f, "y[-1]"),
            VariableId::Product(a) => {
                let idx: Vec<String> = a.iter().map(|v| v.to_string()).collect();
                write!(f, "y[{},{}]({})", a.len() - 1, self.order().unwrap_or(0), idx.join(","))
            }
        }
    }
}

/// Tuples of `parts` non-negative integers summing to `total`, in descending
/// lexicographic order.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableRegistry {
    pub m: usize,
    pub vars: Vec<VariableId>,
    index: HashMap<VariableId, usize>,
}

impl VariableRegistry {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn position(&self, id: &VariableId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, i: usize) -> &VariableId {
        &self.vars[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &VariableId> {
        self.vars.iter()
    }

    /// Number of variables at level i and order j.
    pub fn count_at(&self, i: usize, j: usize) -> usize {
        self.vars
            .iter()
            .filter(|v| v.level() == i as isize && v.order() == Some(j))
            .count()
    }

    fn lookup(&self, a: Vec<usize>) -> Result<usize> {
        let id = VariableId::Product(a);
        self.position(&id).ok_or_else(|| Error::RegistryMiss(id.to_string()))
    }
}

/// `y₋₁` followed by every `(i, j, a)` with `0 ≤ i ≤ j ≤ m` and `Σa = j − i`,
/// ordered by level, then order, then descending multi-index.
pub fn enumerate_variables(m: usize) -> VariableRegistry {
    let mut vars = vec![VariableId::Sum];
    for i in 0..=m {
        for j in i..=m {
            vars.extend(compositions(j - i, i + 1).into_iter().map(VariableId::Product));
        }
    }
    let index = vars.iter().cloned().enumerate().map(|(k, v)| (v, k)).collect();
    VariableRegistry { m, vars, index }
}

/// Per-factor operator inside an evolution coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorOp {
    Diff(LinearDiffOp),
    /// Time derivative of a prescribed zeroth-order factor.
    GuessDerivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingOp {
    /// Apply `op` on `axis` of a source with the same rank as the target.
    Evolve { axis: usize, op: FactorOp },
    /// `δ_{x_axis, x_axis+1} (L1 on axis) (L2 on axis+1)`: the source has one
    /// more axis than the target; axes after `axis + 1` shift down by one.
    Restrict {
        axis: usize,
        left: LinearDiffOp,
        right: LinearDiffOp,
    },
    /// Multiply by `field(x_axis)`: the source lacks `axis`; source axis k
    /// lands on target axis `permutation[k]`.
    Inject {
        axis: usize,
        field: SpaceFn,
        permutation: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCoupling {
    pub target: usize,
    pub source: usize,
    /// The variable whose row this coupling was generated for. It differs
    /// from `target` only for the copies that make up the `y₋₁` row.
    pub row_of: usize,
    pub op: CouplingOp,
    pub coef: Poly,
}

impl BlockCoupling {
    /// True for couplings that stem from the deformation right-hand sides.
    pub fn h_scaled(&self) -> bool {
        self.coef.is_h_scaled()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingBlock {
    pub target: usize,
    pub row_of: usize,
    pub field: SpaceFn,
    pub coef: Poly,
}

/// Initial data `Π_k factors[k](x_k)`. Blocks without an entry start at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitBlock {
    pub target: usize,
    pub factors: Vec<SpaceFn>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub registry: VariableRegistry,
    pub cfg: HamConfig,
    pub couplings: Vec<BlockCoupling>,
    pub forcing: Vec<ForcingBlock>,
    pub init: Vec<InitBlock>,
}

impl LinearizedSystem {
    pub fn couplings_into(&self, target: usize) -> impl Iterator<Item = &BlockCoupling> {
        self.couplings.iter().filter(move |c| c.target == target)
    }
}

fn shift_permutation(rank: usize, axis: usize) -> Vec<usize> {
    (0..rank - 1).map(|k| if k < axis { k } else { k + 1 }).collect()
}

/// Couplings and forcing for a single product-variable row.
fn product_row(
    pde: &QuadraticPDE,
    cfg: &HamConfig,
    reg: &VariableRegistry,
    target: usize,
) -> Result<(Vec<BlockCoupling>, Vec<ForcingBlock>)> {
    let a = match reg.get(target) {
        VariableId::Product(a) => a.clone(),
        VariableId::Sum => return Ok((Vec::new(), Vec::new())),
    };
    let rank = a.len();
    let mut couplings = Vec::new();
    let mut forcing = Vec::new();
    for p in 0..rank {
        for term in factor_derivative(pde, cfg, a[p]) {
            let coupling = |source, op| BlockCoupling {
                target,
                source,
                row_of: target,
                op,
                coef: term.coef.clone(),
            };
            match term.kind {
                TermKind::Linear { order, op } => {
                    let mut b = a.clone();
                    b[p] = order;
                    couplings.push(coupling(
                        reg.lookup(b)?,
                        CouplingOp::Evolve { axis: p, op: FactorOp::Diff(op) },
                    ));
                }
                TermKind::GuessDerivative => {
                    let mut b = a.clone();
                    b[p] = 0;
                    couplings.push(coupling(
                        reg.lookup(b)?,
                        CouplingOp::Evolve { axis: p, op: FactorOp::GuessDerivative },
                    ));
                }
                TermKind::Quadratic { pair, left, right } => {
                    let mut b = a[..p].to_vec();
                    b.push(left);
                    b.push(right);
                    b.extend_from_slice(&a[p + 1..]);
                    let pq = &pde.quadratic[pair];
                    couplings.push(coupling(
                        reg.lookup(b)?,
                        CouplingOp::Restrict {
                            axis: p,
                            left: pq.left.clone(),
                            right: pq.right.clone(),
                        },
                    ));
                }
                TermKind::Forcing => {
                    if rank == 1 {
                        forcing.push(ForcingBlock {
                            target,
                            row_of: target,
                            field: pde.forcing.clone(),
                            coef: term.coef.clone(),
                        });
                    } else {
                        let mut b = a.clone();
                        b.remove(p);
                        couplings.push(coupling(
                            reg.lookup(b)?,
                            CouplingOp::Inject {
                                axis: p,
                                field: pde.forcing.clone(),
                                permutation: shift_permutation(rank, p),
                            },
                        ));
                    }
                }
            }
        }
    }
    Ok((couplings, forcing))
}

pub fn assemble_system(pde: &QuadraticPDE, cfg: &HamConfig, reg: &VariableRegistry) -> Result<LinearizedSystem> {
    if reg.m != cfg.m {
        return Err(Error::RegistryMismatch { registry: reg.m, config: cfg.m });
    }
    pde.validate()?;
    cfg.validate()?;
    let mut rows = Vec::with_capacity(reg.len());
    for target in 0..reg.len() {
        rows.push(product_row(pde, cfg, reg, target)?);
    }
    let sum = reg.position(&VariableId::Sum).expect("registry always holds the sum variable");

    let mut couplings = Vec::new();
    let mut forcing = Vec::new();
    for (target, (c, f)) in rows.iter().enumerate() {
        if reg.get(target).level() == 0 {
            couplings.extend(c.iter().map(|c| BlockCoupling { target: sum, ..c.clone() }));
            forcing.extend(f.iter().map(|f| ForcingBlock { target: sum, ..f.clone() }));
        }
    }
    for (c, f) in rows {
        couplings.extend(c);
        forcing.extend(f);
    }
    let (_, init) = build_forcing_and_init(pde, cfg, reg)?;
    Ok(LinearizedSystem {
        registry: reg.clone(),
        cfg: cfg.clone(),
        couplings,
        forcing,
        init,
    })
}

/// Symbolic forcing and initial-data blocks. The forcing follows the guess
/// rule; with the default rule it is `N0` on `y₋₁` and `y_{0,0}`.
pub fn build_forcing_and_init(
    pde: &QuadraticPDE,
    cfg: &HamConfig,
    reg: &VariableRegistry,
) -> Result<(Vec<ForcingBlock>, Vec<InitBlock>)> {
    let mut forcing = Vec::new();
    let sum = reg.position(&VariableId::Sum).expect("registry always holds the sum variable");
    let mut own = Vec::new();
    for target in 0..reg.len() {
        if reg.get(target).level() == 0 {
            let (_, f) = product_row(pde, cfg, reg, target)?;
            forcing.extend(f.iter().map(|f| ForcingBlock { target: sum, ..f.clone() }));
            own.extend(f);
        }
    }
    forcing.extend(own);
    let init = reg
        .iter()
        .enumerate()
        .filter_map(|(k, v)| match v {
            VariableId::Sum => Some(InitBlock { target: k, factors: vec![pde.initial.clone()] }),
            VariableId::Product(a) if a.iter().all(|&x| x == 0) => Some(InitBlock {
                target: k,
                factors: vec![pde.initial.clone(); a.len()],
            }),
            _ => None,
        })
        .collect();
    Ok((forcing, init))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSparsity {
    pub target: String,
    /// Distinct source variables of any kind.
    pub sources: usize,
    /// Distinct sources reached through a diagonal restriction.
    pub restricted_sources: usize,
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub rows: Vec<RowSparsity>,
    pub max_sources: usize,
    pub max_restricted: usize,
    /// `m(m+1)/2`.
    pub bound: usize,
}

impl SparsityReport {
    pub fn within_bound(&self) -> bool {
        self.max_restricted <= self.bound
    }
}

pub fn block_sparsity(sys: &LinearizedSystem) -> SparsityReport {
    let reg = &sys.registry;
    let mut rows = Vec::with_capacity(reg.len());
    for target in 0..reg.len() {
        let mut all: Vec<usize> = Vec::new();
        let mut restricted: Vec<usize> = Vec::new();
        for c in sys.couplings_into(target) {
            if !all.contains(&c.source) {
                all.push(c.source);
            }
            if matches!(c.op, CouplingOp::Restrict { .. }) && !restricted.contains(&c.source) {
                restricted.push(c.source);
            }
        }
        rows.push(RowSparsity {
            target: reg.get(target).to_string(),
            sources: all.len(),
            restricted_sources: restricted.len(),
            forced: sys.forcing.iter().any(|f| f.target == target),
        });
    }
    SparsityReport {
        max_sources: rows.iter().map(|r| r.sources).max().unwrap_or(0),
        max_restricted: rows.iter().map(|r| r.restricted_sources).max().unwrap_or(0),
        bound: reg.m * (reg.m + 1) / 2,
        rows,
    }
}
