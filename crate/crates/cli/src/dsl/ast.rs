use std::fmt;

use grassfield::{Chart, Parity};

/// One-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprAst {
    Num(u64),
    /// A name, optionally pinned to a chart with `name@chart`.
    Ident(String, Option<String>, Span),
    Neg(Box<ExprAst>),
    Bin(BinOp, Box<ExprAst>, Box<ExprAst>),
    /// `D[target, coord, ...]`.
    Deriv(Box<ExprAst>, Vec<String>, Span),
    Call(String, Vec<Arg>, Span),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Expr(ExprAst),
    /// `lhs -> rhs` inside a call.
    Map(ExprAst, ExprAst),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssertKind {
    Zero,
    NonZero,
    Eq,
    TotalDerivative,
    Invariant(String),
    ScalarMultiple,
    Inverts,
}

impl AssertKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            AssertKind::Zero => "assert_zero",
            AssertKind::NonZero => "assert_nonzero",
            AssertKind::Eq => "assert_eq",
            AssertKind::TotalDerivative => "assert_matches_total_derivative",
            AssertKind::Invariant(_) => "assert_invariant",
            AssertKind::ScalarMultiple => "assert_scalar_multiple",
            AssertKind::Inverts => "assert_inverts",
        }
    }

    /// Number of comma-separated operands.
    pub fn arity(&self) -> usize {
        match self {
            AssertKind::Zero | AssertKind::NonZero | AssertKind::TotalDerivative | AssertKind::Invariant(_) => 1,
            AssertKind::Eq | AssertKind::ScalarMultiple => 2,
            AssertKind::Inverts => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Field { names: Vec<String>, parity: Parity, charts: Vec<Chart> },
    Coord { names: Vec<String>, chart: Chart },
    Const { names: Vec<String>, parity: Parity },
    Assume { atoms: Vec<ExprAst> },
    Let { name: String, value: ExprAst },
    Variation { name: String, parity: Parity, parameter: String, deltas: Vec<(String, ExprAst)> },
    Assert { kind: AssertKind, label: Option<String>, args: Vec<ExprAst> },
    Show { label: Option<String>, value: ExprAst },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    pub statements: Vec<Stmt>,
}
