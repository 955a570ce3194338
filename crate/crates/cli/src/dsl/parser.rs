use grassfield::{Chart, Parity};

use super::ast::{Arg, AssertKind, BinOp, ExprAst, Script, Span, Stmt, StmtKind};
use super::lexer::{lex, Tok};
use super::ParseError;

const PREC_ADD: u8 = 10;
const PREC_MUL: u8 = 20;
pub(crate) const PREC_NEG: u8 = 25;
const PREC_POW: u8 = 30;

pub(crate) fn precedence(op: &BinOp) -> u8 {
    match op {
        BinOp::Add | BinOp::Sub => PREC_ADD,
        BinOp::Mul | BinOp::Div => PREC_MUL,
        BinOp::Pow => PREC_POW,
    }
}

const STATEMENT_STARTS: [&str; 15] = [
    "field",
    "coord",
    "const",
    "param",
    "assume",
    "let",
    "variation",
    "assert_zero",
    "assert_nonzero",
    "assert_eq",
    "assert_matches_total_derivative",
    "assert_invariant",
    "assert_scalar_multiple",
    "assert_inverts",
    "show",
];

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

/// Parses a whole script.
pub fn parse_script(src: &str) -> Result<Script, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let mut statements = Vec::new();
    while p.peek() != &Tok::Eof {
        statements.push(p.statement()?);
    }
    Ok(Script { statements })
}

/// Parses a single expression, e.g. for tests and tooling.
pub fn parse_expr(src: &str) -> Result<ExprAst, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr(0)?;
    p.expect_eof()?;
    Ok(e)
}

fn quoted(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| format!("`{s}`")).collect()
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: Vec<String>) -> ParseError {
        ParseError::new(self.span(), format!("unexpected {}", self.peek().describe()), expected)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(quoted(&[s])))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => Err(self.error(vec!["end of input".into()])),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(vec![what.into()])),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.error(quoted(&[kw]))),
        }
    }

    fn names(&mut self) -> Result<Vec<String>, ParseError> {
        let mut out = vec![self.ident("a name")?];
        while self.eat_sym(",") {
            out.push(self.ident("a name")?);
        }
        Ok(out)
    }

    fn parity(&mut self) -> Result<Parity, ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == "even" => {
                self.bump();
                Ok(Parity::Even)
            }
            Tok::Ident(s) if s == "odd" => {
                self.bump();
                Ok(Parity::Odd)
            }
            _ => Err(self.error(quoted(&["even", "odd"]))),
        }
    }

    fn chart(&mut self) -> Result<Chart, ParseError> {
        if let Tok::Ident(s) = self.peek() {
            if let Some(c) = Chart::from_name(s) {
                self.bump();
                return Ok(c);
            }
        }
        Err(self.error(quoted(&["tx", "lc"])))
    }

    fn label(&mut self) -> Option<String> {
        if let Tok::Str(s) = self.peek().clone() {
            self.bump();
            Some(s)
        } else {
            None
        }
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        let Tok::Ident(kw) = self.peek().clone() else {
            return Err(self.error(quoted(&STATEMENT_STARTS)));
        };
        self.bump();
        let kind = match kw.as_str() {
            "field" => {
                let names = self.names()?;
                self.sym(":")?;
                let parity = self.parity()?;
                self.keyword("on")?;
                let mut charts = vec![self.chart()?];
                while self.eat_sym(",") {
                    charts.push(self.chart()?);
                }
                StmtKind::Field { names, parity, charts }
            }
            "coord" => {
                let names = self.names()?;
                self.keyword("on")?;
                StmtKind::Coord { names, chart: self.chart()? }
            }
            "const" | "param" => {
                let names = self.names()?;
                self.sym(":")?;
                StmtKind::Const { names, parity: self.parity()? }
            }
            "assume" => {
                self.keyword("positive")?;
                let mut atoms = vec![self.expr(0)?];
                while self.eat_sym(",") {
                    atoms.push(self.expr(0)?);
                }
                StmtKind::Assume { atoms }
            }
            "let" => {
                let name = self.ident("a name")?;
                self.sym("=")?;
                StmtKind::Let { name, value: self.expr(0)? }
            }
            "variation" => {
                let name = self.ident("a name")?;
                self.sym(":")?;
                let parity = self.parity()?;
                let parameter = self.ident("a parameter name")?;
                self.sym("{")?;
                let mut deltas = Vec::new();
                if !self.eat_sym("}") {
                    loop {
                        let f = self.ident("a field name")?;
                        self.sym("->")?;
                        deltas.push((f, self.expr(0)?));
                        if self.eat_sym("}") {
                            break;
                        }
                        if !self.eat_sym(",") {
                            return Err(self.error(quoted(&[",", "}"])));
                        }
                    }
                }
                StmtKind::Variation { name, parity, parameter, deltas }
            }
            "show" => {
                let label = self.label();
                StmtKind::Show { label, value: self.expr(0)? }
            }
            "assert_invariant" => {
                let label = self.label();
                let l = self.expr(0)?;
                self.keyword("under")?;
                let v = self.ident("a variation name")?;
                StmtKind::Assert { kind: AssertKind::Invariant(v), label, args: vec![l] }
            }
            other => {
                let kind = match other {
                    "assert_zero" => AssertKind::Zero,
                    "assert_nonzero" => AssertKind::NonZero,
                    "assert_eq" => AssertKind::Eq,
                    "assert_matches_total_derivative" => AssertKind::TotalDerivative,
                    "assert_scalar_multiple" => AssertKind::ScalarMultiple,
                    "assert_inverts" => AssertKind::Inverts,
                    _ => {
                        return Err(ParseError::new(
                            span,
                            format!("unknown statement `{other}`"),
                            quoted(&STATEMENT_STARTS),
                        ))
                    }
                };
                let label = self.label();
                let mut args = vec![self.expr(0)?];
                while args.len() < kind.arity() {
                    self.sym(",")?;
                    args.push(self.expr(0)?);
                }
                StmtKind::Assert { kind, label, args }
            }
        };
        self.sym(";")?;
        Ok(Stmt { kind, span })
    }

    fn infix(&self) -> Option<BinOp> {
        match self.peek() {
            Tok::Sym("+") => Some(BinOp::Add),
            Tok::Sym("-") => Some(BinOp::Sub),
            Tok::Sym("*") => Some(BinOp::Mul),
            Tok::Sym("/") => Some(BinOp::Div),
            Tok::Sym("^") => Some(BinOp::Pow),
            _ => None,
        }
    }

    fn expr(&mut self, min: u8) -> Result<ExprAst, ParseError> {
        let mut lhs = self.prefix()?;
        while let Some(op) = self.infix() {
            let prec = precedence(&op);
            if prec <= min {
                break;
            }
            self.bump();
            // `^` is right associative
            let next = if op == BinOp::Pow { prec - 1 } else { prec };
            let rhs = self.expr(next)?;
            lhs = ExprAst::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<ExprAst, ParseError> {
        let (tok, span) = self.bump();
        match tok {
            Tok::Num(n) => Ok(ExprAst::Num(n)),
            Tok::Sym("-") => Ok(ExprAst::Neg(Box::new(self.expr(PREC_NEG)?))),
            Tok::Sym("(") => {
                let e = self.expr(0)?;
                self.sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "D" && matches!(self.peek(), Tok::Sym("[")) => {
                self.bump();
                let target = self.expr(0)?;
                let mut coords = Vec::new();
                while self.eat_sym(",") {
                    coords.push(self.ident("a coordinate direction")?);
                }
                if coords.is_empty() {
                    return Err(self.error(quoted(&[","])));
                }
                self.sym("]")?;
                Ok(ExprAst::Deriv(Box::new(target), coords, span))
            }
            Tok::Ident(name) => {
                if self.eat_sym("(") {
                    let mut args = Vec::new();
                    if !self.eat_sym(")") {
                        loop {
                            let a = self.expr(0)?;
                            if self.eat_sym("->") {
                                args.push(Arg::Map(a, self.expr(0)?));
                            } else {
                                args.push(Arg::Expr(a));
                            }
                            if self.eat_sym(")") {
                                break;
                            }
                            if !self.eat_sym(",") {
                                return Err(self.error(quoted(&[",", ")", "->"])));
                            }
                        }
                    }
                    return Ok(ExprAst::Call(name, args, span));
                }
                match name.split_once('@') {
                    Some((base, chart)) if !base.is_empty() && !chart.is_empty() && !chart.contains('@') => {
                        Ok(ExprAst::Ident(base.into(), Some(chart.into()), span))
                    }
                    Some(_) => Err(ParseError::new(span, format!("malformed name `{name}`"), vec!["name@chart".into()])),
                    None => Ok(ExprAst::Ident(name, None, span)),
                }
            }
            other => {
                self.pos -= usize::from(other != Tok::Eof);
                Err(self.error(vec!["a number".into(), "a name".into(), "`(`".into(), "`-`".into()]))
            }
        }
    }
}
