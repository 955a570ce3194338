//! Canonical text form of scripts and expressions. Parsing the output gives
//! back the same tree, so rendering is a fixed point of `render . parse`.

use super::ast::{Arg, AssertKind, BinOp, ExprAst, Script, StmtKind};
use super::parser::{precedence, PREC_NEG};

const PREC_ATOM: u8 = 100;

fn prec_of(e: &ExprAst) -> u8 {
    match e {
        ExprAst::Bin(op, ..) => precedence(op),
        ExprAst::Neg(_) => PREC_NEG,
        _ => PREC_ATOM,
    }
}

fn wrap(e: &ExprAst, parens: bool) -> String {
    let s = render_expr(e);
    if parens {
        format!("({s})")
    } else {
        s
    }
}

pub fn render_expr(e: &ExprAst) -> String {
    match e {
        ExprAst::Num(n) => n.to_string(),
        ExprAst::Ident(name, None, _) => name.clone(),
        ExprAst::Ident(name, Some(chart), _) => format!("{name}@{chart}"),
        ExprAst::Neg(x) => format!("-{}", wrap(x, prec_of(x) <= PREC_NEG)),
        ExprAst::Bin(op, l, r) => {
            let p = precedence(op);
            let pow = *op == BinOp::Pow;
            let lp = prec_of(l) < p || (pow && prec_of(l) <= p);
            let rp = if pow { prec_of(r) < p } else { prec_of(r) <= p };
            let sym = match op {
                BinOp::Add | BinOp::Sub => format!(" {} ", op.symbol()),
                _ => op.symbol().to_string(),
            };
            format!("{}{sym}{}", wrap(l, lp), wrap(r, rp))
        }
        ExprAst::Deriv(target, coords, _) => format!("D[{}, {}]", render_expr(target), coords.join(", ")),
        ExprAst::Call(name, args, _) => {
            let args: Vec<String> = args
                .iter()
                .map(|a| match a {
                    Arg::Expr(e) => render_expr(e),
                    Arg::Map(a, b) => format!("{} -> {}", render_expr(a), render_expr(b)),
                })
                .collect();
            format!("{name}({})", args.join(", "))
        }
    }
}

fn label(l: &Option<String>) -> String {
    l.as_ref().map(|s| format!(" \"{s}\"")).unwrap_or_default()
}

fn list(xs: &[ExprAst]) -> String {
    xs.iter().map(render_expr).collect::<Vec<_>>().join(", ")
}

pub fn render_statement(s: &StmtKind) -> String {
    match s {
        StmtKind::Field { names, parity, charts } => {
            let charts: Vec<&str> = charts.iter().map(|c| c.name()).collect();
            format!("field {} : {parity} on {};", names.join(", "), charts.join(", "))
        }
        StmtKind::Coord { names, chart } => format!("coord {} on {chart};", names.join(", ")),
        StmtKind::Const { names, parity } => format!("const {} : {parity};", names.join(", ")),
        StmtKind::Assume { atoms } => format!("assume positive {};", list(atoms)),
        StmtKind::Let { name, value } => format!("let {name} = {};", render_expr(value)),
        StmtKind::Variation { name, parity, parameter, deltas } => {
            let body: Vec<String> = deltas.iter().map(|(f, e)| format!("{f} -> {}", render_expr(e))).collect();
            format!("variation {name} : {parity} {parameter} {{ {} }};", body.join(", "))
        }
        StmtKind::Assert { kind: AssertKind::Invariant(v), label: l, args } => {
            format!("assert_invariant{} {} under {v};", label(l), list(args))
        }
        StmtKind::Assert { kind, label: l, args } => format!("{}{} {};", kind.keyword(), label(l), list(args)),
        StmtKind::Show { label: l, value } => format!("show{} {};", label(l), render_expr(value)),
    }
}

/// One statement per line.
pub fn render_script(s: &Script) -> String {
    s.statements.iter().map(|st| render_statement(&st.kind) + "\n").collect()
}
