//! Bind checking and execution of derivation scripts.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use grassfield::canonical::{
    canonical_momentum, flux, legendre, reconstruct_lagrangian, solve_nilpotent, verify_inversion, CanonicalPair,
};
use grassfield::gamma::{
    bilinear, det_g, expanded_metric_formula, gamma, gauge_project, induced_metric, induced_vector,
    is_physical, pauli_identity_check, wz_term, MatrixExpr, Parameterization, PauliReport, PauliVariant, Spinor,
};
use grassfield::oracle::{oracle_equiv, oracle_inversion, EquivReport};
use grassfield::symmetry::{
    apply_variation, invariance, lorentz_check, lorentz_operator, scalar_multiple, total_derivative_match,
    InvarianceTier, Variation,
};
use grassfield::{
    c_limit, c_series, change_chart, coord_derive, euler_lagrange, partial_atom, substitute, AssumptionSet, Atom,
    AtomKind, Basis, Chart, Coefficient, Exponent, Expr, Parity, SeriesInC,
};
use num_traits::ToPrimitive;

use crate::dsl::ast::{Arg, AssertKind, BinOp, ExprAst, Script, Span, Stmt, StmtKind};
use crate::report::{AssertionRecord, ErrorRecord, OracleRecord, Report, ShowRecord, Status};

/// Run-time options, mirroring the command-line flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Options {
    pub oracle: bool,
    pub trials: usize,
    pub seed: u64,
    pub fail_fast: bool,
    /// Series truncation override, in half units of the exponent of `c`.
    pub order_half: Option<i32>,
    pub timing: bool,
}

impl Default for Options {
    fn default() -> Options {
        Options {
            oracle: false,
            trials: 200,
            seed: 0,
            fail_fast: false,
            order_half: None,
            timing: false,
        }
    }
}

const CONSTANTS: [&str; 3] = ["c", "I", "alpha"];
const KEYWORD_VALUES: [&str; 5] = ["lorentz", "pauli123", "literal012", "tx", "lc"];

/// Builtin functions with their accepted argument counts.
const BUILTINS: [(&str, usize, usize); 37] = [
    ("sqrt", 1, 1),
    ("subst", 2, usize::MAX),
    ("replace", 2, usize::MAX),
    ("limit_c", 1, 1),
    ("series_c", 1, 2),
    ("vary", 2, 2),
    ("Lop", 1, 1),
    ("lorentz_residual", 1, 1),
    ("euler_lagrange", 2, 2),
    ("chart", 2, 2),
    ("partial", 2, 2),
    ("momentum", 3, 3),
    ("legendre", 4, 4),
    ("lagrangian_from", 3, 3),
    ("flux", 3, 3),
    ("newton", 3, 3),
    ("det", 1, 1),
    ("metric", 2, 2),
    ("expanded_metric", 2, 2),
    ("entry", 3, 3),
    ("wz", 2, 2),
    ("induced", 4, 4),
    ("spinor", 2, 2),
    ("component", 2, 2),
    ("gauge", 1, 1),
    ("bar", 1, 1),
    ("barprod", 3, 3),
    ("gamma", 1, 1),
    ("cartesian", 1, 1),
    ("general", 3, 3),
    ("physical", 1, 1),
    ("conj", 1, 1),
    ("tdmatch", 1, 1),
    ("pauli", 1, 1),
    ("pauli_lhs", 5, 5),
    ("pauli_rhs", 5, 5),
    ("pauli_failures", 1, 1),
];

/// A name used before it was declared, or an ill-formed declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindError {
    pub span: Span,
    pub message: String,
}

impl fmt::Display for BindError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bind error at {}: {}", self.span, self.message)
    }
}

impl std::error::Error for BindError {}

#[derive(Default)]
struct Scope {
    names: HashSet<String>,
    fields: HashMap<String, Vec<Chart>>,
    variations: HashSet<String>,
    errors: Vec<BindError>,
}

impl Scope {
    fn err(&mut self, span: Span, message: String) {
        self.errors.push(BindError { span, message });
    }

    fn declare(&mut self, span: Span, name: &str) {
        if CONSTANTS.contains(&name) || KEYWORD_VALUES.contains(&name) || name == "D" {
            self.err(span, format!("`{name}` is reserved"));
        }
        self.names.insert(name.to_string());
    }

    fn check(&mut self, e: &ExprAst) {
        match e {
            ExprAst::Num(_) => {}
            ExprAst::Ident(name, chart, span) => {
                if let Some(ch) = chart {
                    match (Chart::from_name(ch), self.fields.get(name)) {
                        (Some(c), Some(charts)) if charts.contains(&c) => {}
                        (Some(_), Some(_)) => self.err(*span, format!("field `{name}` is not declared on chart {ch}")),
                        (None, _) => self.err(*span, format!("unknown chart `{ch}`")),
                        (_, None) => self.err(*span, format!("unknown field `{name}`")),
                    }
                } else if !(self.names.contains(name)
                    || CONSTANTS.contains(&name.as_str())
                    || KEYWORD_VALUES.contains(&name.as_str()))
                {
                    self.err(*span, format!("unknown identifier `{name}`"));
                }
            }
            ExprAst::Neg(x) => self.check(x),
            ExprAst::Bin(_, a, b) => {
                self.check(a);
                self.check(b);
            }
            ExprAst::Deriv(target, coords, span) => {
                self.check(target);
                let charts: HashSet<Option<Chart>> = coords.iter().map(|c| direction(c).map(|d| d.0)).collect();
                if charts.contains(&None) {
                    self.err(*span, format!("unknown derivative direction in D[..., {}]", coords.join(", ")));
                } else if charts.len() > 1 {
                    self.err(*span, "derivative directions from different charts".into());
                }
            }
            ExprAst::Call(name, args, span) => {
                match BUILTINS.iter().find(|b| b.0 == name) {
                    None => self.err(*span, format!("unknown function `{name}`")),
                    Some((_, lo, hi)) if args.len() < *lo || args.len() > *hi => {
                        self.err(*span, format!("`{name}` takes {lo}..{} arguments, got {}", hi.min(&9), args.len()))
                    }
                    _ => {}
                }
                for a in args {
                    match a {
                        Arg::Expr(e) => self.check(e),
                        Arg::Map(a, b) => {
                            self.check(a);
                            self.check(b);
                        }
                    }
                }
            }
        }
    }

    fn statement(&mut self, st: &Stmt) {
        let span = st.span;
        match &st.kind {
            StmtKind::Field { names, charts, .. } => {
                for n in names {
                    self.declare(span, n);
                    let entry = self.fields.entry(n.clone()).or_default();
                    for c in charts {
                        if !entry.contains(c) {
                            entry.push(*c);
                        }
                    }
                }
            }
            StmtKind::Coord { names, chart } => {
                for n in names {
                    if !chart.coord_atoms().contains(&n.as_str()) {
                        self.err(span, format!("chart {chart} has coordinates {}", chart.coord_atoms().join(", ")));
                    }
                    self.declare(span, n);
                }
            }
            StmtKind::Const { names, .. } => names.iter().for_each(|n| self.declare(span, n)),
            StmtKind::Assume { atoms } => atoms.iter().for_each(|a| self.check(a)),
            StmtKind::Let { name, value } => {
                self.check(value);
                self.declare(span, name);
            }
            StmtKind::Variation { name, deltas, .. } => {
                for (f, e) in deltas {
                    let base = f.split('@').next().unwrap_or_default();
                    if !self.fields.contains_key(base) {
                        self.err(span, format!("`{f}` in variation {name} is not a field"));
                    }
                    self.check(e);
                }
                self.declare(span, name);
                self.variations.insert(name.clone());
            }
            StmtKind::Assert { kind, args, .. } => {
                args.iter().for_each(|a| self.check(a));
                if let AssertKind::Invariant(v) = kind {
                    if !self.variations.contains(v) && v != "lorentz" {
                        self.err(span, format!("unknown variation `{v}`"));
                    }
                }
            }
            StmtKind::Show { value, .. } => self.check(value),
        }
    }
}

/// Checks that every name is declared before use.
pub fn bind_check(s: &Script) -> Result<(), Vec<BindError>> {
    let mut scope = Scope::default();
    for st in &s.statements {
        scope.statement(st);
    }
    if scope.errors.is_empty() {
        Ok(())
    } else {
        Err(scope.errors)
    }
}

/// Chart and index of a derivative direction name.
fn direction(name: &str) -> Option<(Chart, usize)> {
    [Chart::Tx, Chart::LightCone]
        .into_iter()
        .find_map(|c| c.coord_index(name).map(|i| (c, i)))
}

#[derive(Debug, Clone)]
enum Value {
    Expr(Expr),
    Series(SeriesInC),
    Matrix(MatrixExpr),
    Spinor(Spinor),
    Param(Parameterization),
    Variation(Variation),
    Lorentz,
    Name(String),
    Text(String),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Expr(_) => "expression",
            Value::Series(_) => "series",
            Value::Matrix(_) => "matrix",
            Value::Spinor(_) => "spinor",
            Value::Param(_) => "parameterization",
            Value::Variation(_) | Value::Lorentz => "variation",
            Value::Name(_) => "keyword",
            Value::Text(_) => "text",
        }
    }

    fn render(&self) -> String {
        match self {
            Value::Expr(e) => e.to_string(),
            Value::Series(s) => s.to_string(),
            Value::Matrix(m) => m.to_string(),
            Value::Spinor(s) => s.to_string(),
            Value::Param(p) => format!("X = ({}, {}, {})", p.target[0], p.target[1], p.target[2]),
            Value::Variation(v) => v
                .deltas()
                .map(|(f, d)| format!("{f} -> {d}"))
                .collect::<Vec<_>>()
                .join(", "),
            Value::Lorentz => "lorentz".into(),
            Value::Name(n) | Value::Text(n) => n.clone(),
        }
    }
}

#[derive(Debug)]
enum RunError {
    Engine(grassfield::Error),
    Script(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Engine(e) => write!(f, "{e}"),
            RunError::Script(s) => f.write_str(s),
        }
    }
}

impl From<grassfield::Error> for RunError {
    fn from(e: grassfield::Error) -> RunError {
        RunError::Engine(e)
    }
}

type R<T> = std::result::Result<T, RunError>;

fn script_err<T>(msg: String) -> R<T> {
    Err(RunError::Script(msg))
}

struct Interp<'o> {
    opts: &'o Options,
    fields: HashMap<String, (Parity, Vec<Chart>)>,
    atoms: HashMap<String, Atom>,
    lets: HashMap<String, Value>,
    poisoned: HashSet<String>,
    assume: AssumptionSet,
}

fn pauli_variant(v: &Value) -> R<PauliVariant> {
    match v {
        Value::Name(n) if n == "pauli123" => Ok(PauliVariant::Pauli123),
        Value::Name(n) if n == "literal012" => Ok(PauliVariant::Literal012),
        other => script_err(format!("expected `pauli123` or `literal012`, got {}", other.kind())),
    }
}

fn pauli_table(r: &PauliReport) -> String {
    let mut lines = vec![format!("holds for all tuples: {}", r.holds)];
    for c in &r.cases {
        let [i, j, k, l] = c.indices;
        lines.push(format!(
            "({i},{j},{k},{l}): lhs = {}, rhs = {}{}",
            c.lhs,
            c.rhs,
            if c.holds { "" } else { "  FAILS" }
        ));
    }
    lines.join("\n")
}

fn rational_of(e: &Expr) -> Option<Exponent> {
    let k = e.as_coefficient()?;
    if k.basis != Basis::ONE {
        return None;
    }
    Some(Exponent::new(k.value.numer().to_i64()?, k.value.denom().to_i64()?))
}

fn single_atom(e: &Expr) -> Option<Atom> {
    let atoms = e.atoms();
    if atoms.len() != 1 {
        return None;
    }
    let a = atoms.into_iter().next()?;
    (Expr::atom(a.clone()) == *e).then_some(a)
}

impl<'o> Interp<'o> {
    fn new(opts: &'o Options) -> Interp<'o> {
        Interp {
            opts,
            fields: HashMap::new(),
            atoms: HashMap::new(),
            lets: HashMap::new(),
            poisoned: HashSet::new(),
            assume: AssumptionSet::new(),
        }
    }

    fn field_atom(&self, name: &str, chart: Option<Chart>, pref: Option<Chart>) -> R<Atom> {
        let Some((parity, charts)) = self.fields.get(name) else {
            return script_err(format!("`{name}` is not a field"));
        };
        let chart = match (chart, pref) {
            (Some(c), _) => c,
            (None, Some(p)) if charts.contains(&p) => p,
            _ => charts[0],
        };
        if !charts.contains(&chart) {
            return script_err(format!("field `{name}` is not declared on chart {chart}"));
        }
        Ok(Atom::field(name, chart, *parity))
    }

    fn ident(&self, name: &str, chart: Option<&str>, pref: Option<Chart>) -> R<Value> {
        if let Some(ch) = chart {
            let c = Chart::from_name(ch).ok_or_else(|| RunError::Script(format!("unknown chart `{ch}`")))?;
            return Ok(Value::Expr(Expr::atom(self.field_atom(name, Some(c), pref)?)));
        }
        if self.poisoned.contains(name) {
            return script_err(format!("`{name}` is unavailable because its definition failed"));
        }
        if let Some(v) = self.lets.get(name) {
            return Ok(v.clone());
        }
        if self.fields.contains_key(name) {
            return Ok(Value::Expr(Expr::atom(self.field_atom(name, None, pref)?)));
        }
        if let Some(a) = self.atoms.get(name) {
            return Ok(Value::Expr(Expr::atom(a.clone())));
        }
        Ok(match name {
            "c" => Value::Expr(Expr::c()),
            "I" => Value::Expr(Expr::imag()),
            "alpha" => Value::Expr(Expr::alpha()),
            "lorentz" => Value::Lorentz,
            other if KEYWORD_VALUES.contains(&other) => Value::Name(other.into()),
            other => return script_err(format!("unknown identifier `{other}`")),
        })
    }

    fn expr(&self, e: &ExprAst, pref: Option<Chart>) -> R<Expr> {
        match self.eval(e, pref)? {
            Value::Expr(x) => Ok(x),
            Value::Series(s) => Ok(s.reconstruct()),
            other => script_err(format!("expected an expression, got a {}", other.kind())),
        }
    }

    fn atom(&self, e: &ExprAst, pref: Option<Chart>) -> R<Atom> {
        let x = self.expr(e, pref)?;
        single_atom(&x).ok_or_else(|| RunError::Script(format!("expected a single atom, got {x}")))
    }

    fn index(&self, e: &ExprAst, bound: usize) -> R<usize> {
        let x = self.expr(e, None)?;
        match rational_of(&x) {
            Some(r) if r.is_integer() && (0..bound as i64).contains(r.numer()) => Ok(*r.numer() as usize),
            _ => script_err(format!("expected an index below {bound}, got {x}")),
        }
    }

    fn pow(&self, base: &Expr, r: Exponent) -> R<Expr> {
        Ok(base.pow_assuming(r, &self.assume)?)
    }

    fn eval(&self, e: &ExprAst, pref: Option<Chart>) -> R<Value> {
        Ok(Value::Expr(match e {
            ExprAst::Num(n) => Expr::integer(*n as i64),
            ExprAst::Ident(name, chart, _) => return self.ident(name, chart.as_deref(), pref),
            ExprAst::Neg(x) => match self.eval(x, pref)? {
                Value::Matrix(m) => return Ok(Value::Matrix(m.scale(&Coefficient::integer(-1)))),
                _ => self.expr(x, pref)?.neg(),
            },
            ExprAst::Bin(op, a, b) => {
                let l = self.eval(a, pref)?;
                if let Value::Matrix(m) = &l {
                    let Value::Matrix(n) = self.eval(b, pref)? else {
                        return script_err("matrices combine only with matrices".into());
                    };
                    return Ok(Value::Matrix(match op {
                        BinOp::Add => m + &n,
                        BinOp::Sub => m - &n,
                        BinOp::Mul => m * &n,
                        _ => return script_err(format!("`{}` is not defined on matrices", op.symbol())),
                    }));
                }
                let l = self.expr(a, pref)?;
                if *op == BinOp::Pow {
                    let r = self.expr(b, pref)?;
                    let Some(r) = rational_of(&r) else {
                        return script_err(format!("exponent must be a rational number, got {r}"));
                    };
                    self.pow(&l, r)?
                } else {
                    let r = self.expr(b, pref)?;
                    match op {
                        BinOp::Add => l.try_add(&r)?,
                        BinOp::Sub => l.try_sub(&r)?,
                        BinOp::Mul => l.try_mul(&r)?,
                        BinOp::Div => l.try_mul(&self.pow(&r, Exponent::from(-1))?)?,
                        BinOp::Pow => unreachable!(),
                    }
                }
            }
            ExprAst::Deriv(target, coords, _) => {
                let chart = direction(&coords[0]).map(|d| d.0);
                let mut x = self.expr(target, chart)?;
                for c in coords {
                    let (chart, i) = direction(c).ok_or_else(|| RunError::Script(format!("unknown direction `{c}`")))?;
                    x = coord_derive(&x, chart, i)?;
                }
                x
            }
            ExprAst::Call(name, args, _) => return self.call(name, args, pref),
        }))
    }

    fn arg<'a>(&self, args: &'a [Arg], i: usize) -> R<&'a ExprAst> {
        match args.get(i) {
            Some(Arg::Expr(e)) => Ok(e),
            Some(Arg::Map(..)) => script_err(format!("argument {} must not be a `->` pair", i + 1)),
            None => script_err(format!("missing argument {}", i + 1)),
        }
    }

    fn maps(&self, args: &[Arg], pref: Option<Chart>) -> R<BTreeMap<Atom, Expr>> {
        let mut out = BTreeMap::new();
        for a in args {
            let Arg::Map(from, to) = a else {
                return script_err("substitutions are written `atom -> expression`".into());
            };
            let atom = self.atom(from, pref)?;
            let pref = atom.chart().or(pref);
            out.insert(atom, self.expr(to, pref)?);
        }
        Ok(out)
    }

    fn pair(&self, args: &[Arg], from: usize, pref: Option<Chart>) -> R<CanonicalPair> {
        let theta = self.atom(self.arg(args, from)?, pref)?;
        let pi = self.atom(self.arg(args, from + 1)?, pref)?;
        Ok(CanonicalPair::new(theta, pi, 0)?)
    }

    fn matrix(&self, e: &ExprAst) -> R<MatrixExpr> {
        match self.eval(e, None)? {
            Value::Matrix(m) => Ok(m),
            other => script_err(format!("expected a matrix, got a {}", other.kind())),
        }
    }

    fn spinor(&self, e: &ExprAst) -> R<Spinor> {
        match self.eval(e, None)? {
            Value::Spinor(s) => Ok(s),
            other => script_err(format!("expected a spinor, got a {}", other.kind())),
        }
    }

    fn param(&self, e: &ExprAst) -> R<Parameterization> {
        match self.eval(e, None)? {
            Value::Param(p) => Ok(p),
            other => script_err(format!("expected a parameterization, got a {}", other.kind())),
        }
    }

    fn variation_for(&self, v: &Value, e: &Expr) -> R<Variation> {
        match v {
            Value::Variation(v) => Ok(v.clone()),
            Value::Lorentz => {
                let mut fields: Vec<Atom> = e
                    .atoms()
                    .into_iter()
                    .filter(|a| a.kind() == AtomKind::Field)
                    .map(|a| a.base_field())
                    .collect();
                fields.dedup();
                Ok(Variation::lorentz(&fields))
            }
            other => script_err(format!("expected a variation, got a {}", other.kind())),
        }
    }

    fn series_order(&self, args: &[Arg]) -> R<i32> {
        if let Some(o) = self.opts.order_half {
            return Ok(o);
        }
        let Some(a) = args.get(1) else {
            return Ok(0);
        };
        let Arg::Expr(a) = a else {
            return script_err("series order must be a number".into());
        };
        let x = self.expr(a, None)?;
        match rational_of(&x).map(|r| r * Exponent::from(2)) {
            Some(h) if h.is_integer() => Ok(*h.numer() as i32),
            _ => script_err(format!("series order must be a multiple of 1/2, got {x}")),
        }
    }

    fn call(&self, name: &str, args: &[Arg], pref: Option<Chart>) -> R<Value> {
        let ex = |i: usize| -> R<Expr> { self.expr(self.arg(args, i)?, pref) };
        let bool_expr = |b: bool| Value::Expr(Expr::integer(i64::from(b)));
        Ok(Value::Expr(match name {
            "sqrt" => self.pow(&ex(0)?, Exponent::new(1, 2))?,
            "subst" => {
                let e = ex(0)?;
                substitute(&e, &self.maps(&args[1..], e.chart().or(pref))?)?
            }
            "replace" => {
                let e = ex(0)?;
                let map = self.maps(&args[1..], e.chart().or(pref))?;
                for (a, rep) in &map {
                    if !rep.is_zero() && rep.parity() != Some(a.parity()) {
                        return script_err(format!("{} atom {a} replaced by {rep}", a.parity()));
                    }
                }
                e.rebuild(&|a: &Atom| Ok(map.get(a).cloned()), Some(&self.assume))?
            }
            "limit_c" => c_limit(&ex(0)?)?,
            "series_c" => return Ok(Value::Series(c_series(&ex(0)?, self.series_order(args)?)?)),
            "vary" => {
                let e = ex(0)?;
                let v = self.eval(self.arg(args, 1)?, pref)?;
                apply_variation(&e, &self.variation_for(&v, &e)?)?
            }
            "Lop" => lorentz_operator(&ex(0)?)?,
            "lorentz_residual" => lorentz_check(&ex(0)?)?,
            "euler_lagrange" => {
                let l = ex(0)?;
                let f = self.atom(self.arg(args, 1)?, l.chart().or(pref))?;
                euler_lagrange(&l, &f)?
            }
            "chart" => {
                let e = ex(0)?;
                let target = match self.eval(self.arg(args, 1)?, pref)? {
                    Value::Name(n) if Chart::from_name(&n).is_some() => Chart::from_name(&n).unwrap(),
                    _ => return script_err("chart() takes `tx` or `lc`".into()),
                };
                change_chart(&e, target)?
            }
            "partial" => {
                let e = ex(0)?;
                let a = self.atom(self.arg(args, 1)?, e.chart().or(pref))?;
                partial_atom(&e, &a)?
            }
            "momentum" => {
                let l = ex(0)?;
                canonical_momentum(&l, &self.pair(args, 1, l.chart().or(pref))?)?
            }
            "legendre" => {
                let l = ex(0)?;
                let p = self.pair(args, 1, l.chart().or(pref))?;
                legendre(&l, &p, &ex(3)?, &self.assume)?
            }
            "lagrangian_from" => {
                let h = ex(0)?;
                reconstruct_lagrangian(&h, &self.pair(args, 1, h.chart().or(pref))?)?
            }
            "flux" => {
                let l = ex(0)?;
                flux(&l, &self.pair(args, 1, l.chart().or(pref))?)?
            }
            "newton" => {
                let f = ex(0)?;
                let x = self.atom(self.arg(args, 1)?, f.chart().or(pref))?;
                solve_nilpotent(&f, &x, &ex(2)?, &self.assume)?
            }
            "det" => det_g(&self.matrix(self.arg(args, 0)?)?)?,
            "metric" => {
                let p = self.param(self.arg(args, 0)?)?;
                return Ok(Value::Matrix(induced_metric(&p, &self.spinor(self.arg(args, 1)?)?)?));
            }
            "expanded_metric" => {
                let th = self.atom(self.arg(args, 0)?, Some(Chart::Tx))?;
                return Ok(Value::Matrix(expanded_metric_formula(&th, &self.spinor(self.arg(args, 1)?)?)?));
            }
            "entry" => {
                let m = self.matrix(self.arg(args, 0)?)?;
                m.get(self.index(self.arg(args, 1)?, 2)?, self.index(self.arg(args, 2)?, 2)?).clone()
            }
            "wz" => wz_term(&self.param(self.arg(args, 0)?)?, &self.spinor(self.arg(args, 1)?)?)?,
            "induced" => {
                let p = self.param(self.arg(args, 0)?)?;
                let psi = self.spinor(self.arg(args, 1)?)?;
                let mu = self.index(self.arg(args, 2)?, 3)?;
                let i = self.index(self.arg(args, 3)?, 2)?;
                induced_vector(&p, &psi, i)?[mu].clone()
            }
            "spinor" => return Ok(Value::Spinor(Spinor::new(ex(0)?, ex(1)?)?)),
            "component" => {
                let s = self.spinor(self.arg(args, 0)?)?;
                s.component(self.index(self.arg(args, 1)?, 2)?).clone()
            }
            "gauge" => return Ok(Value::Spinor(gauge_project(&self.spinor(self.arg(args, 0)?)?))),
            "bar" => {
                let [a, b] = self.spinor(self.arg(args, 0)?)?.bar();
                return Ok(Value::Spinor(Spinor([a, b])));
            }
            "barprod" => {
                let row = self.spinor(self.arg(args, 0)?)?.bar();
                let mu = self.index(self.arg(args, 1)?, 3)?;
                bilinear(&row, &gamma(mu), &self.spinor(self.arg(args, 2)?)?)
            }
            "gamma" => return Ok(Value::Matrix(gamma(self.index(self.arg(args, 0)?, 3)?))),
            "cartesian" => {
                let th = self.atom(self.arg(args, 0)?, Some(Chart::Tx))?;
                return Ok(Value::Param(Parameterization::cartesian(&th)));
            }
            "general" => {
                let mut names = Vec::new();
                for i in 0..3 {
                    let a = self.atom(self.arg(args, i)?, Some(Chart::Tx))?;
                    if a.kind() != AtomKind::Field || a.parity() != Parity::Even || a.chart() != Some(Chart::Tx) {
                        return script_err(format!("general() needs even fields on tx, got {a}"));
                    }
                    names.push(a.name().to_string());
                }
                return Ok(Value::Param(Parameterization::general([&names[0], &names[1], &names[2]])));
            }
            "physical" => return Ok(bool_expr(is_physical(&ex(0)?))),
            "conj" => ex(0)?.conj(),
            "tdmatch" => {
                let r = ex(0)?;
                match total_derivative_match(&r, r.chart().unwrap_or(Chart::Tx))? {
                    Some((x, y)) => return Ok(Value::Text(format!("X = {x}; Y = {y}"))),
                    None => return Ok(Value::Text("no total-derivative form found".into())),
                }
            }
            "pauli" => return Ok(Value::Text(pauli_table(&pauli_identity_check(pauli_variant(&self.eval(self.arg(args, 0)?, pref)?)?)))),
            "pauli_lhs" | "pauli_rhs" => {
                let r = pauli_identity_check(pauli_variant(&self.eval(self.arg(args, 0)?, pref)?)?);
                let mut idx = [0; 4];
                for (k, slot) in idx.iter_mut().enumerate() {
                    *slot = self.index(self.arg(args, k + 1)?, 3)?;
                    if *slot == 0 {
                        return script_err("Pauli indices run over 1 and 2".into());
                    }
                }
                let case = r.case(idx).expect("all 16 tuples are enumerated");
                Expr::coefficient(if name == "pauli_lhs" { case.lhs.clone() } else { case.rhs.clone() })
            }
            "pauli_failures" => {
                let r = pauli_identity_check(pauli_variant(&self.eval(self.arg(args, 0)?, pref)?)?);
                Expr::integer(r.failures().count() as i64)
            }
            other => return script_err(format!("unknown function `{other}`")),
        }))
    }
}

struct Outcome {
    status: Status,
    residual: Option<String>,
    tier: Option<String>,
    oracle: Option<OracleRecord>,
    detail: Option<String>,
}

impl Outcome {
    fn new(status: Status) -> Outcome {
        Outcome {
            status,
            residual: None,
            tier: None,
            oracle: None,
            detail: None,
        }
    }
}

fn oracle_record(r: grassfield::Result<EquivReport>) -> OracleRecord {
    match r {
        Ok(r) => OracleRecord {
            trials: r.trials,
            exact_trials: r.exact_trials,
            rejected: r.rejected,
            equivalent: r.equivalent,
            witness: r.witness,
            skipped: None,
        },
        Err(e) => OracleRecord::skipped(e.to_string()),
    }
}

impl Interp<'_> {
    /// Combines a symbolic verdict on `lhs == rhs` with the oracle.
    fn equality(&self, lhs: &Expr, rhs: &Expr) -> R<Outcome> {
        let d = lhs.try_sub(rhs)?;
        let proven = grassfield::expr::is_zero_assuming(&d, &self.assume);
        let mut out = Outcome::new(if proven { Status::Pass } else { Status::Fail });
        if !d.is_zero() {
            out.residual = Some(d.to_string());
        }
        if proven {
            out.residual = Some("0".into());
        }
        if self.opts.oracle {
            let rec = oracle_record(oracle_equiv(lhs, rhs, self.opts.trials, self.opts.seed, &self.assume));
            if rec.skipped.is_none() {
                match (proven, rec.equivalent) {
                    (false, true) => out.status = Status::Unproven,
                    (true, false) => {
                        out.status = Status::Fail;
                        out.detail = Some("symbolic result contradicted by the oracle".into());
                    }
                    _ => {}
                }
            }
            out.oracle = Some(rec);
        }
        Ok(out)
    }

    /// Confirms a symbolic witness identity `lhs == rhs` with the oracle. A
    /// counterexample overturns a symbolic pass.
    fn cross_check(&self, out: &mut Outcome, lhs: &Expr, rhs: &Expr) {
        if !self.opts.oracle {
            return;
        }
        let rec = oracle_record(oracle_equiv(lhs, rhs, self.opts.trials, self.opts.seed, &self.assume));
        if out.status == Status::Pass && rec.skipped.is_none() && !rec.equivalent {
            out.status = Status::Fail;
            out.detail = Some("symbolic result contradicted by the oracle".into());
        }
        out.oracle = Some(rec);
    }

    fn total_derivative(&self, x: &Expr, y: &Expr, chart: Chart) -> R<Expr> {
        Ok(coord_derive(x, chart, 0)?.try_add(&coord_derive(y, chart, 1)?)?)
    }

    fn assertion(&self, kind: &AssertKind, args: &[ExprAst]) -> R<Outcome> {
        match kind {
            AssertKind::Zero => self.equality(&self.expr(&args[0], None)?, &Expr::zero()),
            AssertKind::Eq => {
                let a = self.expr(&args[0], None)?;
                let b = self.expr(&args[1], a.chart())?;
                self.equality(&a, &b)
            }
            AssertKind::NonZero => {
                let e = self.expr(&args[0], None)?;
                let zero = grassfield::expr::is_zero_assuming(&e, &self.assume);
                let mut out = Outcome::new(if zero { Status::Fail } else { Status::Pass });
                out.residual = Some(e.to_string());
                if self.opts.oracle {
                    let rec = oracle_record(oracle_equiv(&e, &Expr::zero(), self.opts.trials, self.opts.seed, &self.assume));
                    if out.status == Status::Pass && rec.skipped.is_none() && rec.equivalent {
                        out.status = Status::Unproven;
                        out.detail = Some("the oracle found no nonzero value".into());
                    }
                    out.oracle = Some(rec);
                }
                Ok(out)
            }
            AssertKind::TotalDerivative => {
                let r = self.expr(&args[0], None)?;
                let chart = r.chart().unwrap_or(Chart::Tx);
                let mut out = Outcome::new(Status::Fail);
                out.residual = Some(r.to_string());
                if let Some((x, y)) = total_derivative_match(&r, chart)? {
                    out.status = Status::Pass;
                    let td = self.total_derivative(&x, &y, chart)?;
                    self.cross_check(&mut out, &r, &td);
                    if out.status == Status::Pass {
                        out.detail = Some(format!("X = {x}; Y = {y}"));
                    }
                }
                Ok(out)
            }
            AssertKind::Invariant(v) => {
                let l = self.expr(&args[0], None)?;
                let var = self.variation_for(&self.ident(v, None, None)?, &l)?;
                let chart = l.chart().unwrap_or(Chart::Tx);
                let (d, tier) = invariance(&l, &var, chart)?;
                let mut out = Outcome::new(if tier == InvarianceTier::NotShown { Status::Fail } else { Status::Pass });
                out.tier = Some(tier.name().to_string());
                out.residual = Some(d.to_string());
                match &tier {
                    InvarianceTier::TotalDerivative { x, y } => {
                        let td = self.total_derivative(x, y, chart)?;
                        self.cross_check(&mut out, &d, &td);
                        if out.status == Status::Pass {
                            out.detail = Some(format!("X = {x}; Y = {y}"));
                        }
                    }
                    InvarianceTier::NotShown => {}
                    _ => self.cross_check(&mut out, &d, &Expr::zero()),
                }
                Ok(out)
            }
            AssertKind::ScalarMultiple => {
                let a = self.expr(&args[0], None)?;
                let b = self.expr(&args[1], a.chart())?;
                let k = scalar_multiple(&a, &b).filter(|k| !k.is_zero());
                let mut out = Outcome::new(if k.is_some() { Status::Pass } else { Status::Fail });
                out.residual = Some(a.to_string());
                out.detail = Some(match &k {
                    Some(k) => format!("factor {k}"),
                    None => "not a nonzero constant multiple".into(),
                });
                if let Some(k) = k {
                    self.cross_check(&mut out, &a, &b.scale(&k));
                }
                Ok(out)
            }
            AssertKind::Inverts => {
                let pi_expr = self.expr(&args[0], None)?;
                let cand = self.expr(&args[1], pi_expr.chart())?;
                let theta = self.atom(&args[2], pi_expr.chart())?;
                let pi = self.atom(&args[3], pi_expr.chart())?;
                let pair = CanonicalPair::new(theta, pi, 0)?;
                let rec = oracle_record(oracle_inversion(
                    &pi_expr,
                    &cand,
                    &pair.velocity(),
                    &pair.momentum,
                    self.opts.trials,
                    self.opts.seed,
                    &self.assume,
                ));
                let sym = verify_inversion(&pi_expr, &cand, &pair, &self.assume)?;
                let oracle_ok = rec.skipped.is_none() && rec.equivalent;
                let witness = rec.skipped.is_none() && !rec.equivalent;
                let mut out = Outcome::new(match (sym.verified, oracle_ok, witness) {
                    (_, _, true) => Status::Fail,
                    (true, _, _) => Status::Pass,
                    (false, true, _) => Status::Unproven,
                    (false, false, _) => Status::Fail,
                });
                out.residual = Some(sym.residual.to_string());
                out.detail = Some(format!(
                    "round trip: oracle {}, symbolic {}",
                    if oracle_ok { "agrees" } else if witness { "disagrees" } else { "skipped" },
                    if sym.verified { "zero residual" } else { "not shown" }
                ));
                out.oracle = Some(rec);
                Ok(out)
            }
        }
    }

    fn declare(&mut self, st: &Stmt) -> R<()> {
        match &st.kind {
            StmtKind::Field { names, parity, charts } => {
                for n in names {
                    let entry = self.fields.entry(n.clone()).or_insert((*parity, Vec::new()));
                    if entry.0 != *parity {
                        return script_err(format!("field `{n}` redeclared with parity {parity}"));
                    }
                    for c in charts {
                        if !entry.1.contains(c) {
                            entry.1.push(*c);
                        }
                    }
                }
            }
            StmtKind::Coord { names, chart } => {
                for n in names {
                    let i = chart.coord_atoms().iter().position(|c| c == n).expect("bind-checked");
                    self.atoms.insert(n.clone(), Atom::coordinate(*chart, i));
                }
            }
            StmtKind::Const { names, parity } => {
                for n in names {
                    self.atoms.insert(n.clone(), Atom::constant(n, *parity));
                }
            }
            StmtKind::Assume { atoms } => {
                for a in atoms {
                    let atom = self.atom(a, None)?;
                    if atom.is_odd() {
                        return script_err(format!("odd atom {atom} cannot be positive"));
                    }
                    self.assume.insert(atom);
                }
            }
            StmtKind::Let { name, value } => {
                self.poisoned.insert(name.clone());
                let v = self.eval(value, None)?;
                self.poisoned.remove(name);
                self.lets.insert(name.clone(), v);
            }
            StmtKind::Variation { name, parity, parameter, deltas } => {
                self.poisoned.insert(name.clone());
                let param = match self.atoms.get(parameter) {
                    Some(a) => a.clone(),
                    None => Atom::constant(parameter, *parity),
                };
                let mut map = BTreeMap::new();
                for (f, e) in deltas {
                    let atom = match f.split_once('@') {
                        Some((base, ch)) => self.field_atom(base, Chart::from_name(ch), None)?,
                        None => self.field_atom(f, None, None)?,
                    };
                    let d = self.expr(e, atom.chart())?;
                    map.insert(atom, d);
                }
                let v = Variation::new(param, map)?;
                self.poisoned.remove(name);
                self.lets.insert(name.clone(), Value::Variation(v));
            }
            StmtKind::Assert { .. } | StmtKind::Show { .. } => {}
        }
        Ok(())
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else {
        "internal error".into()
    }
}

/// Executes a bind-checked script.
pub fn run_script(s: &Script, script_name: &str, opts: &Options) -> Report {
    let mut it = Interp::new(opts);
    let mut assertions = Vec::new();
    let mut shows = Vec::new();
    let mut errors = Vec::new();
    for st in &s.statements {
        let line = st.span.line;
        let started = Instant::now();
        match &st.kind {
            StmtKind::Assert { kind, label, args } => {
                let res = catch_unwind(AssertUnwindSafe(|| it.assertion(kind, args)));
                let out = match res {
                    Ok(Ok(o)) => o,
                    Ok(Err(e)) => {
                        let mut o = Outcome::new(Status::Error);
                        o.detail = Some(e.to_string());
                        o
                    }
                    Err(p) => {
                        let mut o = Outcome::new(Status::Error);
                        o.detail = Some(format!("engine panic: {}", panic_message(p)));
                        o
                    }
                };
                let id = assertions.len() + 1;
                let stop = opts.fail_fast && out.status != Status::Pass;
                assertions.push(AssertionRecord {
                    id,
                    name: label.clone().unwrap_or_else(|| format!("{}@{line}", kind.keyword())),
                    kind: kind.keyword().to_string(),
                    line,
                    status: out.status,
                    residual: out.residual,
                    tier: out.tier,
                    oracle: out.oracle,
                    detail: out.detail,
                    timing_ms: opts.timing.then(|| started.elapsed().as_millis()),
                });
                if stop {
                    break;
                }
            }
            StmtKind::Show { label, value } => {
                match catch_unwind(AssertUnwindSafe(|| it.eval(value, None))) {
                    Ok(Ok(v)) => shows.push(ShowRecord {
                        line,
                        label: label.clone(),
                        value: v.render(),
                    }),
                    Ok(Err(e)) => errors.push(ErrorRecord { line, col: st.span.col, message: e.to_string() }),
                    Err(p) => errors.push(ErrorRecord {
                        line,
                        col: st.span.col,
                        message: format!("engine panic: {}", panic_message(p)),
                    }),
                }
            }
            _ => {
                let res = catch_unwind(AssertUnwindSafe(|| it.declare(st)));
                let msg = match res {
                    Ok(Ok(())) => None,
                    Ok(Err(e)) => Some(e.to_string()),
                    Err(p) => Some(format!("engine panic: {}", panic_message(p))),
                };
                if let Some(message) = msg {
                    errors.push(ErrorRecord { line, col: st.span.col, message });
                    if opts.fail_fast {
                        break;
                    }
                }
            }
        }
    }
    Report::finish(script_name.to_string(), assertions, shows, errors)
}
