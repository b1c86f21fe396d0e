//! Expression language for user-supplied fields.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables are `x1..xn` and `v1..vn`; functions are `exp log sqrt sin cos pow`.

use std::fmt;
use std::ops;

use crate::error::{GeomError, Result};
use crate::jet::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Pow,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        if self == Func::Pow {
            2
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Base coordinate, zero-based.
    X(usize),
    /// Velocity coordinate, zero-based.
    V(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn num(c: f64) -> Expr {
        Expr::Num(c)
    }

    pub fn x(i: usize) -> Expr {
        Expr::X(i)
    }

    pub fn v(i: usize) -> Expr {
        Expr::V(i)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, vec![arg])
    }

    pub fn pow(self, e: Expr) -> Expr {
        Expr::Bin(BinOp::Pow, Box::new(self), Box::new(e))
    }

    pub fn powi(self, p: i32) -> Expr {
        self.pow(Expr::Num(p as f64))
    }

    pub fn exp(self) -> Expr {
        Expr::call(Func::Exp, self)
    }

    pub fn log(self) -> Expr {
        Expr::call(Func::Log, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::call(Func::Sqrt, self)
    }

    /// Does the tree mention any coordinate?
    pub fn has_vars(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::X(_) | Expr::V(_) => true,
            Expr::Neg(e) => e.has_vars(),
            Expr::Bin(_, a, b) => a.has_vars() || b.has_vars(),
            Expr::Call(_, args) => args.iter().any(Expr::has_vars),
        }
    }

    pub fn has_velocity(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::X(_) => false,
            Expr::V(_) => true,
            Expr::Neg(e) => e.has_velocity(),
            Expr::Bin(_, a, b) => a.has_velocity() || b.has_velocity(),
            Expr::Call(_, args) => args.iter().any(Expr::has_velocity),
        }
    }

    /// Largest zero-based coordinate index used, if any.
    pub fn max_index(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::X(i) | Expr::V(i) => Some(*i),
            Expr::Neg(e) => e.max_index(),
            Expr::Bin(_, a, b) => a.max_index().max(b.max_index()),
            Expr::Call(_, args) => args.iter().filter_map(Expr::max_index).max(),
        }
    }

    /// Literal folding of coordinate-free subtrees; used for exponent dispatch.
    fn constant_value(&self) -> Option<f64> {
        if self.has_vars() {
            None
        } else {
            let probe = [0.0f64; 2];
            self.eval_with(&probe, 1).ok()
        }
    }

    /// Evaluate with `vars = [x_1.., v_1..]`.
    pub fn eval<S: Scalar>(&self, vars: &[S]) -> Result<S> {
        let n = vars.len() / 2;
        let r = self.eval_with(vars, n)?;
        if !r.value().is_finite() {
            return Err(GeomError::domain("expression evaluated to a non-finite value"));
        }
        Ok(r)
    }

    fn eval_with<S: Scalar>(&self, vars: &[S], n: usize) -> Result<S> {
        match self {
            Expr::Num(c) => Ok(vars[0].lift(*c)),
            Expr::X(i) => Ok(vars[*i].clone()),
            Expr::V(i) => Ok(vars[n + *i].clone()),
            Expr::Neg(e) => Ok(e.eval_with(vars, n)?.neg()),
            Expr::Bin(op, a, b) => {
                if *op == BinOp::Pow {
                    return power(a, b, vars, n);
                }
                let l = a.eval_with(vars, n)?;
                let r = b.eval_with(vars, n)?;
                Ok(match op {
                    BinOp::Add => l.add(&r),
                    BinOp::Sub => l.sub(&r),
                    BinOp::Mul => l.mul(&r),
                    BinOp::Div => {
                        if r.value() == 0.0 {
                            return Err(GeomError::domain("division by zero"));
                        }
                        l.div(&r)
                    }
                    BinOp::Pow => unreachable!(),
                })
            }
            Expr::Call(f, args) => {
                if *f == Func::Pow {
                    return power(&args[0], &args[1], vars, n);
                }
                let a = args[0].eval_with(vars, n)?;
                let av = a.value();
                Ok(match f {
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if av <= 0.0 {
                            return Err(GeomError::domain(format!("log of non-positive value {av}")));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if av < 0.0 || (av == 0.0 && !S::is_plain()) {
                            return Err(GeomError::domain(format!("sqrt of {av}")));
                        }
                        a.sqrt()
                    }
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Pow => unreachable!(),
                })
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

fn power<S: Scalar>(base: &Expr, expo: &Expr, vars: &[S], n: usize) -> Result<S> {
    let b = base.eval_with(vars, n)?;
    let bv = b.value();
    if let Some(p) = expo.constant_value() {
        if p.fract() == 0.0 && p.abs() <= 64.0 {
            if p < 0.0 && bv == 0.0 {
                return Err(GeomError::domain("negative power of zero"));
            }
            return Ok(b.powi(p as i32));
        }
        if bv < 0.0 || (bv == 0.0 && !(S::is_plain() && p > 0.0)) {
            return Err(GeomError::domain(format!("non-integer power of {bv}")));
        }
        return Ok(b.powf(p));
    }
    if bv <= 0.0 {
        return Err(GeomError::domain(format!("variable power of non-positive base {bv}")));
    }
    let e = expo.eval_with(vars, n)?;
    Ok(e.mul(&b.ln()).exp())
}

macro_rules! bin_impl {
    ($tr:ident, $m:ident, $op:expr) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                Expr::Bin($op, Box::new(self), Box::new(o))
            }
        }
        impl ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, o: f64) -> Expr {
                Expr::Bin($op, Box::new(self), Box::new(Expr::Num(o)))
            }
        }
        impl ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                Expr::Bin($op, Box::new(Expr::Num(self)), Box::new(o))
            }
        }
    };
}

bin_impl!(Add, add, BinOp::Add);
bin_impl!(Sub, sub, BinOp::Sub);
bin_impl!(Mul, mul, BinOp::Mul);
bin_impl!(Div, div, BinOp::Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool| {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::X(i) => write!(f, "x{}", i + 1),
            Expr::V(i) => write!(f, "v{}", i + 1),
            Expr::Neg(e) => {
                write!(f, "-")?;
                wrap(f, e, e.precedence() < 3)
            }
            Expr::Bin(op, a, b) => {
                let p = self.precedence();
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                if *op == BinOp::Pow {
                    wrap(f, a, a.precedence() <= 4)?;
                    write!(f, "{sym}")?;
                    wrap(f, b, b.precedence() < 3)
                } else {
                    wrap(f, a, a.precedence() < p)?;
                    write!(f, "{sym}")?;
                    wrap(f, b, b.precedence() <= p)
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    n: usize,
}

fn perr(offset: usize, message: impl Into<String>) -> GeomError {
    GeomError::Parse {
        offset,
        message: message.into(),
    }
}

fn lex(src: &str, base: usize) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let val: f64 = text
                .parse()
                .map_err(|_| perr(base + start, format!("malformed number '{text}'")))?;
            toks.push((Tok::Num(val), base + start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push((Tok::Ident(src[start..i].to_string()), base + start));
        } else {
            let t = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    let ch = src[i..].chars().next().unwrap_or('?');
                    return Err(perr(base + i, format!("unexpected character '{ch}'")));
                }
            };
            toks.push((t, base + i));
            i += 1;
        }
    }
    toks.push((Tok::End, base + src.len()));
    Ok(toks)
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().0 {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().0 {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().0 == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek().0 == Tok::Op('^') {
            self.bump();
            let e = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(e)));
        }
        Ok(base)
    }

    fn variable(&self, name: &str, at: usize) -> Result<Expr> {
        let bad = || perr(at, format!("unknown identifier '{name}'"));
        let (kind, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
            return Err(bad());
        }
        let idx: usize = digits.parse().map_err(|_| bad())?;
        if idx == 0 || idx > self.n {
            return Err(perr(
                at,
                format!("identifier '{name}' out of range for dimension {}", self.n),
            ));
        }
        match kind {
            "x" => Ok(Expr::X(idx - 1)),
            "v" => Ok(Expr::V(idx - 1)),
            _ => Err(bad()),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(c) => Ok(Expr::Num(c)),
            Tok::LParen => {
                let e = self.expr()?;
                match self.bump() {
                    (Tok::RParen, _) => Ok(e),
                    (_, p) => Err(perr(p, "expected ')'")),
                }
            }
            Tok::Ident(name) => {
                if self.peek().0 == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| perr(at, format!("unknown function '{name}'")))?;
                    self.bump();
                    let mut args = vec![self.expr()?];
                    loop {
                        match self.bump() {
                            (Tok::Comma, _) => args.push(self.expr()?),
                            (Tok::RParen, _) => break,
                            (_, p) => return Err(perr(p, "expected ',' or ')'")),
                        }
                    }
                    if args.len() != func.arity() {
                        return Err(perr(
                            at,
                            format!(
                                "function '{}' takes {} argument(s), got {}",
                                func.name(),
                                func.arity(),
                                args.len()
                            ),
                        ));
                    }
                    Ok(Expr::Call(func, args))
                } else if Func::from_name(&name).is_some() {
                    Err(perr(at, format!("function '{name}' used without arguments")))
                } else {
                    self.variable(&name, at)
                }
            }
            Tok::End => Err(perr(at, "unexpected end of input")),
            Tok::Op(c) => Err(perr(at, format!("unexpected operator '{c}'"))),
            Tok::RParen => Err(perr(at, "unexpected ')'")),
            Tok::Comma => Err(perr(at, "unexpected ','")),
        }
    }
}

fn parse_at(src: &str, n: usize, base: usize) -> Result<Expr> {
    let toks = lex(src, base)?;
    let mut p = Parser { toks, pos: 0, n };
    let e = p.expr()?;
    match p.peek() {
        (Tok::End, _) => Ok(e),
        (_, at) => Err(perr(*at, "unexpected trailing input")),
    }
}

/// Parse `src` over the variables `x1..xn, v1..vn`.
pub fn parse_expression(src: &str, n: usize) -> Result<Expr> {
    parse_at(src, n, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

/// One inequality `lhs <op> rhs` of a domain description.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub lhs: Expr,
    pub cmp: Cmp,
    pub rhs: Expr,
    pub source: String,
}

impl Constraint {
    /// Signed slack: positive inside the domain.
    pub fn slack(&self, vars: &[f64]) -> Result<f64> {
        let l = self.lhs.eval(vars)?;
        let r = self.rhs.eval(vars)?;
        Ok(match self.cmp {
            Cmp::Gt | Cmp::Ge => l - r,
            Cmp::Lt | Cmp::Le => r - l,
        })
    }

    pub fn holds(&self, vars: &[f64]) -> bool {
        match self.slack(vars) {
            Ok(s) => match self.cmp {
                Cmp::Gt | Cmp::Lt => s > 0.0,
                Cmp::Ge | Cmp::Le => s >= 0.0,
            },
            Err(_) => false,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)
    }
}

pub fn parse_constraint(src: &str, n: usize) -> Result<Constraint> {
    let bytes = src.as_bytes();
    let mut found = None;
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'<' || b == b'>' {
            if found.is_some() {
                return Err(perr(i, "only one comparison allowed per constraint"));
            }
            let eq = bytes.get(i + 1) == Some(&b'=');
            let cmp = match (b, eq) {
                (b'<', false) => Cmp::Lt,
                (b'<', true) => Cmp::Le,
                (b'>', false) => Cmp::Gt,
                _ => Cmp::Ge,
            };
            found = Some((i, if eq { 2 } else { 1 }, cmp));
        }
    }
    let (at, len, cmp) = found.ok_or_else(|| perr(0, "constraint needs one of < <= > >="))?;
    let lhs = parse_at(&src[..at], n, 0)?;
    let rhs = parse_at(&src[at + len..], n, at + len)?;
    Ok(Constraint {
        lhs,
        cmp,
        rhs,
        source: src.trim().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, n: usize, vars: &[f64]) -> f64 {
        parse_expression(src, n).unwrap().eval(vars).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        let vars = [0.0, 0.0, 2.0, 3.0];
        assert_eq!(ev("-v1^2", 2, &vars), -4.0);
        assert!((ev("v1^v1^v2", 2, &vars) - 256.0).abs() < 1e-12);
        assert_eq!(ev("v2 - v1 - 1", 2, &vars), 0.0);
        assert_eq!(ev("v2 / v1 / 2", 2, &vars), 0.75);
        assert_eq!(ev("2^-1", 2, &vars), 0.5);
        assert_eq!(ev("pow(v1, 3) + 1.5e1", 2, &vars), 23.0);
    }

    #[test]
    fn error_offsets() {
        match parse_expression("v1 +* v2", 2) {
            Err(GeomError::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_expression("y1 + 1", 2), Err(GeomError::Parse { offset: 0, .. })));
        assert!(matches!(parse_expression("v3", 2), Err(GeomError::Parse { .. })));
        assert!(matches!(parse_expression("pow(v1)", 2), Err(GeomError::Parse { .. })));
        assert!(matches!(parse_expression("(v1 + 2", 2), Err(GeomError::Parse { offset: 7, .. })));
    }

    #[test]
    fn domain_errors() {
        let e = parse_expression("log(v1)", 1).unwrap();
        assert!(matches!(e.eval(&[0.0, -1.0]), Err(GeomError::Domain(_))));
        let e = parse_expression("1/(v1 - 1)", 1).unwrap();
        assert!(matches!(e.eval(&[0.0, 1.0]), Err(GeomError::Domain(_))));
    }

    #[test]
    fn constraints() {
        let c = parse_constraint("x1 >= 2*v1", 1).unwrap();
        assert!(c.holds(&[2.0, 1.0]));
        assert!(!c.holds(&[1.0, 1.0]));
        match parse_constraint("x1 > +", 1) {
            Err(GeomError::Parse { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn display_reparses() {
        let n = 3;
        let src = "-(v1 - v2)^2/(x1*x2) - v3^-2 - (-v1)^3 + exp(-x3)*2^v2^2";
        let a = parse_expression(src, n).unwrap();
        let b = parse_expression(&a.to_string(), n).unwrap();
        assert_eq!(a, b);
    }
}
