//! Plain-text and JSON renderings of a linearized system.
//!
//! Text layout, one item per line:
//!
//! ```text
//! registry m=<m> count=<N>
//!   <index> <label>
//! couplings
//!   <target> <- <source> [<coef>] <operator>
//! forcing
//!   <target> [<coef>] <field>
//! init
//!   <target> <factor> (x) <factor> ...
//! sparsity bound=<m(m+1)/2> max_restricted=<..> max_sources=<..>
//!   <target> sources=<..> restricted=<..> forced=<bool>
//! ```

use std::fmt::Write as _;

use serde_json::json;

use super::{block_sparsity, CouplingOp, FactorOp, LinearizedSystem};
use crate::func::SpaceFn;
use crate::pde::LinearDiffOp;

fn describe_fn(f: &SpaceFn) -> String {
    match f {
        SpaceFn::Constant(c) => format!("{c}"),
        other => serde_json::to_string(other).unwrap_or_else(|_| "?".into()),
    }
}

/// `0.1*d2`, `-1*d1`, `1*I`, with non-constant coefficients spelled out.
pub fn describe_op(op: &LinearDiffOp) -> String {
    if op.is_zero() {
        return "0".into();
    }
    let parts: Vec<String> = op
        .terms
        .iter()
        .map(|t| {
            let d = if t.order == 0 { "I".to_string() } else { format!("d{}", t.order) };
            format!("{}*{d}", describe_fn(&t.coefficient))
        })
        .collect();
    parts.join(" + ")
}

pub fn describe_coupling(op: &CouplingOp) -> String {
    match op {
        CouplingOp::Evolve { axis, op: FactorOp::Diff(d) } => format!("({})@x{axis}", describe_op(d)),
        CouplingOp::Evolve { axis, op: FactorOp::GuessDerivative } => format!("dt_guess@x{axis}"),
        CouplingOp::Restrict { axis, left, right } => format!(
            "delta(x{axis},x{}) ({})@x{axis} ({})@x{}",
            axis + 1,
            describe_op(left),
            describe_op(right),
            axis + 1
        ),
        CouplingOp::Inject { axis, field, permutation } => {
            let p: Vec<String> = permutation.iter().map(|k| k.to_string()).collect();
            format!("{}@x{axis} perm=[{}]", describe_fn(field), p.join(","))
        }
    }
}

pub fn to_text(sys: &LinearizedSystem) -> String {
    let reg = &sys.registry;
    let mut s = String::new();
    let _ = writeln!(s, "registry m={} count={}", reg.m, reg.len());
    for (k, v) in reg.iter().enumerate() {
        let _ = writeln!(s, "  {k} {v}");
    }
    let _ = writeln!(s, "couplings");
    for c in &sys.couplings {
        let _ = writeln!(
            s,
            "  {} <- {} [{}] {}",
            reg.get(c.target),
            reg.get(c.source),
            c.coef,
            describe_coupling(&c.op)
        );
    }
    let _ = writeln!(s, "forcing");
    for f in &sys.forcing {
        let _ = writeln!(s, "  {} [{}] {}", reg.get(f.target), f.coef, describe_fn(&f.field));
    }
    let _ = writeln!(s, "init");
    for b in &sys.init {
        let f: Vec<String> = b.factors.iter().map(describe_fn).collect();
        let _ = writeln!(s, "  {} {}", reg.get(b.target), f.join(" (x) "));
    }
    let r = block_sparsity(sys);
    let _ = writeln!(
        s,
        "sparsity bound={} max_restricted={} max_sources={}",
        r.bound, r.max_restricted, r.max_sources
    );
    for row in &r.rows {
        let _ = writeln!(
            s,
            "  {} sources={} restricted={} forced={}",
            row.target, row.sources, row.restricted_sources, row.forced
        );
    }
    s
}

pub fn to_json(sys: &LinearizedSystem) -> serde_json::Value {
    let reg = &sys.registry;
    let label = |k: usize| reg.get(k).to_string();
    json!({
        "m": reg.m,
        "config": sys.cfg,
        "registry": reg.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        "couplings": sys.couplings.iter().map(|c| json!({
            "target": label(c.target),
            "source": label(c.source),
            "row_of": label(c.row_of),
            "h_scaled": c.h_scaled(),
            "coef": c.coef,
            "op": c.op,
        })).collect::<Vec<_>>(),
        "forcing": sys.forcing.iter().map(|f| json!({
            "target": label(f.target),
            "coef": f.coef,
            "field": f.field,
        })).collect::<Vec<_>>(),
        "init": sys.init.iter().map(|b| json!({
            "target": label(b.target),
            "factors": b.factors,
        })).collect::<Vec<_>>(),
        "sparsity": block_sparsity(sys),
    })
}
