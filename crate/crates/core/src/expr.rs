//! Closed-form scalar expressions in chart coordinates `x1..xn`.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' '-'? integer)?
//! base   := number | 'pi' | 'e' | ident | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | log | sqrt
//! ident  := x1 | x2 | ...
//! ```
//!
//! Expressions evaluate on plain `f64` or on [`Jet`]s; the latter yields every
//! partial derivative up to the jet order in one pass.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};

/// Maximum derivative order supported by [`Expression::eval_tower`].
pub const MAX_TOWER_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

/// Expression tree. Variables are 0-based (`Var(0)` is `x1`).
#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Num(f64),
    Const(Constant),
    Var(usize),
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, i32),
    Call(Func, Box<Ast>),
}

impl Ast {
    /// Largest variable index used plus one.
    pub fn arity(&self) -> usize {
        match self {
            Ast::Num(_) | Ast::Const(_) => 0,
            Ast::Var(k) => k + 1,
            Ast::Neg(a) | Ast::Pow(a, _) | Ast::Call(_, a) => a.arity(),
            Ast::Add(a, b) | Ast::Sub(a, b) | Ast::Mul(a, b) | Ast::Div(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Ast::Add(..) | Ast::Sub(..) => 1,
            Ast::Mul(..) | Ast::Div(..) => 2,
            Ast::Neg(_) => 3,
            Ast::Pow(..) => 4,
            _ => 5,
        }
    }
}

/// Parsed expression together with its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    source: String,
    ast: Ast,
}

impl Expression {
    /// Parses `src`, accepting any variable `x1, x2, ...`.
    pub fn parse(src: &str) -> Result<Expression> {
        Self::parse_with_limit(src, None)
    }

    /// Parses `src`, rejecting variables beyond `x{n}`.
    pub fn parse_in(src: &str, n: usize) -> Result<Expression> {
        Self::parse_with_limit(src, Some(n))
    }

    fn parse_with_limit(src: &str, limit: Option<usize>) -> Result<Expression> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
            limit,
        };
        let ast = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.syntax("unexpected trailing input"));
        }
        Ok(Expression {
            source: src.to_string(),
            ast,
        })
    }

    pub fn from_ast(ast: Ast) -> Expression {
        let source = ast.to_string();
        Expression { source, ast }
    }

    pub fn constant(v: f64) -> Expression {
        Expression::from_ast(if v < 0.0 {
            Ast::Neg(Box::new(Ast::Num(-v)))
        } else {
            Ast::Num(v)
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Ast {
        &self.ast
    }

    pub fn arity(&self) -> usize {
        self.ast.arity()
    }

    pub fn is_constant(&self) -> bool {
        self.ast.arity() == 0
    }

    /// Value at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_arity(x.len())?;
        eval_node(&self.ast, x, &0.0)
    }

    /// Evaluates with jets standing in for the coordinates; `zero` fixes the
    /// jet space used for constants.
    pub fn eval_jet(&self, vars: &[Jet], zero: &Jet) -> Result<Jet> {
        self.check_arity(vars.len())?;
        eval_node(&self.ast, vars, zero)
    }

    /// Value and all partial derivatives of total order `<= order` at `x`.
    pub fn eval_tower(&self, x: &[f64], order: usize) -> Result<DerivativeTower> {
        if order > MAX_TOWER_ORDER {
            return Err(Error::BadParameter(format!(
                "derivative order {order} exceeds {MAX_TOWER_ORDER}"
            )));
        }
        let n = x.len();
        let space = JetSpace::shared(n, order);
        let vars: Vec<Jet> = (0..n).map(|k| Jet::variable(&space, k, x[k])).collect();
        let jet = self.eval_jet(&vars, &Jet::zero(&space))?;
        Ok(DerivativeTower::from_jet(&jet))
    }

    fn check_arity(&self, n: usize) -> Result<()> {
        let need = self.ast.arity();
        if need > n {
            return Err(Error::UnknownIdentifier {
                name: format!("x{need}"),
                offset: self.source.find(&format!("x{need}")).unwrap_or(0),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ast)
    }
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, a: &Ast, min: u8) -> fmt::Result {
            if a.precedence() < min {
                write!(f, "({a})")
            } else {
                write!(f, "{a}")
            }
        }
        match self {
            Ast::Num(v) => write!(f, "{v}"),
            Ast::Const(Constant::Pi) => write!(f, "pi"),
            Ast::Const(Constant::E) => write!(f, "e"),
            Ast::Var(k) => write!(f, "x{}", k + 1),
            Ast::Neg(a) => {
                write!(f, "-")?;
                child(f, a, 3)
            }
            Ast::Add(a, b) | Ast::Sub(a, b) | Ast::Mul(a, b) | Ast::Div(a, b) => {
                let (op, p) = match self {
                    Ast::Add(..) => (" + ", 1),
                    Ast::Sub(..) => (" - ", 1),
                    Ast::Mul(..) => ("*", 2),
                    _ => ("/", 2),
                };
                child(f, a, p)?;
                write!(f, "{op}")?;
                child(f, b, p + 1)
            }
            Ast::Pow(a, e) => {
                child(f, a, 5)?;
                write!(f, "^{e}")
            }
            Ast::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    limit: Option<usize>,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' {
                Ast::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Ast::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.factor()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if c == b'*' {
                Ast::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Ast::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Ast> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Ast::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let negative = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.syntax("expected integer exponent"));
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let mut e: i32 = text.parse().map_err(|_| Error::Syntax {
                offset: start,
                message: "exponent out of range".into(),
            })?;
            if negative {
                e = -e;
            }
            return Ok(Ast::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Ast> {
        let c = match self.peek() {
            Some(c) => c,
            None => return Err(self.syntax("unexpected end of input")),
        };
        if c == b'(' {
            self.pos += 1;
            let inner = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.syntax("expected `)`"));
            }
            self.pos += 1;
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            if let Some(func) = Func::from_name(name) {
                if self.peek() != Some(b'(') {
                    return Err(self.syntax("expected `(` after function name"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                return Ok(Ast::Call(func, Box::new(arg)));
            }
            match name {
                "pi" => return Ok(Ast::Const(Constant::Pi)),
                "e" => return Ok(Ast::Const(Constant::E)),
                _ => {}
            }
            let unknown = || Error::UnknownIdentifier {
                name: name.to_string(),
                offset: start,
            };
            let digits = name.strip_prefix('x').ok_or_else(unknown)?;
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
                return Err(unknown());
            }
            let k: usize = digits.parse().map_err(|_| unknown())?;
            if let Some(n) = self.limit {
                if k > n {
                    return Err(unknown());
                }
            }
            return Ok(Ast::Var(k - 1));
        }
        Err(self.syntax(&format!("unexpected character `{}`", c as char)))
    }

    fn number(&mut self) -> Result<Ast> {
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p - b
        };
        let mut n = digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            n += digits(&mut self.pos);
        }
        if n == 0 {
            return Err(Error::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            if digits(&mut self.pos) == 0 {
                // `2e` is not a number with exponent; leave the `e` alone.
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        let v: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            message: "malformed number".into(),
        })?;
        Ok(Ast::Num(v))
    }
}

/// Numeric types an [`Ast`] can be evaluated on.
pub trait Scalar: Clone {
    fn lift(template: &Self, v: f64) -> Self;
    fn value(&self) -> f64;
    /// True if derivatives are carried, so `sqrt` at 0 is not differentiable.
    fn differentiable(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn recip(&self) -> Self;
    fn neg(&self) -> Self;
    fn powi(&self, e: i32) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
}

impl Scalar for f64 {
    fn lift(_: &Self, v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn differentiable(&self) -> bool {
        false
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
    fn neg(&self) -> Self {
        -self
    }
    fn powi(&self, e: i32) -> Self {
        f64::powi(*self, e)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
}

impl Scalar for Jet {
    fn lift(template: &Self, v: f64) -> Self {
        Jet::constant(template.space(), v)
    }
    fn value(&self) -> f64 {
        Jet::value(self)
    }
    fn differentiable(&self) -> bool {
        self.order() > 0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn recip(&self) -> Self {
        Jet::recip(self)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn powi(&self, e: i32) -> Self {
        Jet::powi(self, e)
    }
    fn sin(&self) -> Self {
        Jet::sin(self)
    }
    fn cos(&self) -> Self {
        Jet::cos(self)
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn ln(&self) -> Self {
        Jet::ln(self)
    }
    fn sqrt(&self) -> Self {
        Jet::sqrt(self)
    }
}

fn eval_node<S: Scalar>(ast: &Ast, vars: &[S], zero: &S) -> Result<S> {
    Ok(match ast {
        Ast::Num(v) => S::lift(zero, *v),
        Ast::Const(c) => S::lift(zero, c.value()),
        Ast::Var(k) => vars[*k].clone(),
        Ast::Neg(a) => eval_node(a, vars, zero)?.neg(),
        Ast::Add(a, b) => eval_node(a, vars, zero)?.add(&eval_node(b, vars, zero)?),
        Ast::Sub(a, b) => eval_node(a, vars, zero)?.sub(&eval_node(b, vars, zero)?),
        Ast::Mul(a, b) => eval_node(a, vars, zero)?.mul(&eval_node(b, vars, zero)?),
        Ast::Div(a, b) => {
            let num = eval_node(a, vars, zero)?;
            let den = eval_node(b, vars, zero)?;
            if den.value() == 0.0 {
                return Err(Error::Domain("division by zero".into()));
            }
            num.mul(&den.recip())
        }
        Ast::Pow(a, e) => {
            let b = eval_node(a, vars, zero)?;
            if *e < 0 && b.value() == 0.0 {
                return Err(Error::Domain("negative power of zero".into()));
            }
            b.powi(*e)
        }
        Ast::Call(func, a) => {
            let v = eval_node(a, vars, zero)?;
            match func {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Log => {
                    if v.value() <= 0.0 {
                        return Err(Error::Domain(format!("log of non-positive value {}", v.value())));
                    }
                    v.ln()
                }
                Func::Sqrt => {
                    let x = v.value();
                    if x < 0.0 || (x == 0.0 && v.differentiable()) {
                        return Err(Error::Domain(format!("sqrt at {x} is not differentiable or undefined")));
                    }
                    v.sqrt()
                }
            }
        }
    })
}

/// Value plus partial derivatives keyed by sorted multi-index (0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeTower {
    pub value: f64,
    pub order: usize,
    pub partials: BTreeMap<Vec<usize>, f64>,
}

impl DerivativeTower {
    pub fn from_jet(jet: &Jet) -> DerivativeTower {
        let space = jet.space();
        let mut partials = BTreeMap::new();
        for k in 1..space.len() {
            if space.monomial_degree(k) > jet.order() {
                break;
            }
            let mut idx = Vec::new();
            for (v, &m) in space.exponents(k).iter().enumerate() {
                idx.extend(std::iter::repeat_n(v, m as usize));
            }
            let val = jet.partial(&idx);
            partials.insert(idx, val);
        }
        DerivativeTower {
            value: jet.value(),
            order: jet.order(),
            partials,
        }
    }

    /// Partial derivative along `vars` in any order; `None` beyond the order.
    pub fn partial(&self, vars: &[usize]) -> Option<f64> {
        if vars.is_empty() {
            return Some(self.value);
        }
        let mut key = vars.to_vec();
        key.sort_unstable();
        self.partials.get(&key).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Ast {
        Expression::parse(s).unwrap().ast
    }

    #[test]
    fn parses_with_precedence() {
        assert_eq!(
            p("x1^2 + 1"),
            Ast::Add(Box::new(Ast::Pow(Box::new(Ast::Var(0)), 2)), Box::new(Ast::Num(1.0)))
        );
        assert_eq!(
            p("sin(x2)*x1"),
            Ast::Mul(Box::new(Ast::Call(Func::Sin, Box::new(Ast::Var(1)))), Box::new(Ast::Var(0)))
        );
        assert_eq!(
            p("1 - 2 - 3"),
            Ast::Sub(
                Box::new(Ast::Sub(Box::new(Ast::Num(1.0)), Box::new(Ast::Num(2.0)))),
                Box::new(Ast::Num(3.0))
            )
        );
        assert_eq!(p("-x1^2"), Ast::Neg(Box::new(Ast::Pow(Box::new(Ast::Var(0)), 2))));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match Expression::parse("x1 +") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Expression::parse("(x1"), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(Expression::parse("x1^1.5"), Err(Error::Syntax { .. })));
        assert!(matches!(Expression::parse("x1 x2"), Err(Error::Syntax { offset: 3, .. })));
    }

    #[test]
    fn unknown_identifiers() {
        assert!(matches!(
            Expression::parse("y + 1"),
            Err(Error::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(
            Expression::parse_in("x1 + x3", 2),
            Err(Error::UnknownIdentifier { offset: 5, .. })
        ));
        assert!(matches!(Expression::parse("x0"), Err(Error::UnknownIdentifier { .. })));
        assert!(matches!(Expression::parse("tan(x1)"), Err(Error::UnknownIdentifier { .. })));
    }

    #[test]
    fn towers_for_simple_inputs() {
        let t = Expression::parse("x1^2").unwrap().eval_tower(&[3.0], 2).unwrap();
        assert_eq!(t.value, 9.0);
        assert_eq!(t.partial(&[0]), Some(6.0));
        assert_eq!(t.partial(&[0, 0]), Some(2.0));

        let t = Expression::parse("exp(x1)").unwrap().eval_tower(&[0.0], 3).unwrap();
        for k in 0..=3 {
            assert!((t.partial(&vec![0; k]).unwrap() - 1.0).abs() < 1e-15);
        }

        let t = Expression::parse("x1*x2").unwrap().eval_tower(&[2.0, 5.0], 2).unwrap();
        assert_eq!(t.partial(&[0, 1]), Some(1.0));
        assert_eq!(t.partial(&[1, 0]), Some(1.0));
        assert_eq!(t.partial(&[0, 0]), Some(0.0));
    }

    #[test]
    fn domain_errors() {
        let e = Expression::parse("log(x1)").unwrap();
        assert!(matches!(e.eval(&[0.0]), Err(Error::Domain(_))));
        let e = Expression::parse("1/x1").unwrap();
        assert!(matches!(e.eval(&[0.0]), Err(Error::Domain(_))));
        let e = Expression::parse("sqrt(x1)").unwrap();
        assert!(matches!(e.eval(&[-1.0]), Err(Error::Domain(_))));
        assert_eq!(e.eval(&[0.0]).unwrap(), 0.0);
        assert!(matches!(e.eval_tower(&[0.0], 1), Err(Error::Domain(_))));
        assert!(matches!(e.eval_tower(&[1.0], 5), Err(Error::BadParameter(_))));
    }

    #[test]
    fn printing_round_trips() {
        for s in [
            "x1^2 + 1",
            "1 - (2 - x1)",
            "x1/(x2*x3)",
            "-(x1 + 2)^3",
            "(-x1)^2",
            "sin(cos(x1))*exp(-x2)/sqrt(x1^2 + 1)",
            "x1^-2 - pi*e",
            "2.5e-3*log(x1)",
        ] {
            let a = Expression::parse(s).unwrap();
            let b = Expression::parse(&a.to_string()).unwrap();
            assert_eq!(a.ast, b.ast, "{s} -> {a}");
        }
    }

    #[test]
    fn number_followed_by_constant_e() {
        assert!(matches!(Expression::parse("2e"), Err(Error::Syntax { .. })));
        assert_eq!(p("2*e"), Ast::Mul(Box::new(Ast::Num(2.0)), Box::new(Ast::Const(Constant::E))));
        assert_eq!(p("1e2"), Ast::Num(100.0));
    }
}
