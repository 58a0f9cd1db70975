//! Expression language for matrix entries.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          right associative
//! atom   := number | number 'i' | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! The bare identifier `i` is the imaginary unit.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Exp,
    Sin,
    Cos,
    Conj,
    Abs,
    Re,
    Im,
}

impl Func {
    const ALL: [Func; 8] =
        [Func::Sqrt, Func::Exp, Func::Sin, Func::Cos, Func::Conj, Func::Abs, Func::Re, Func::Im];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Conj => "conj",
            Func::Abs => "abs",
            Func::Re => "re",
            Func::Im => "im",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    pub(crate) fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Func::Sqrt => z.sqrt(),
            Func::Exp => z.exp(),
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Conj => z.conj(),
            Func::Abs => Complex64::new(z.norm(), 0.0),
            Func::Re => Complex64::new(z.re, 0.0),
            Func::Im => Complex64::new(z.im, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Non-negative real literal.
    Real(f64),
    /// Imaginary literal `v i`; the bare unit `i` is `Imag(1.0)`.
    Imag(f64),
    Ident(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            _ => 5,
        }
    }

    /// Identifiers referenced anywhere in the tree, in first-seen order.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_identifiers(&mut out);
        out
    }

    fn collect_identifiers<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Ident(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_identifiers(out),
            Expr::Binary(_, a, b) => {
                a.collect_identifiers(out);
                b.collect_identifiers(out);
            }
            Expr::Real(_) | Expr::Imag(_) => {}
        }
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    let s = format!("{v}");
    f.write_str(&s)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Real(v) => write_number(f, *v),
            Expr::Imag(v) => {
                if *v == 1.0 {
                    f.write_str("i")
                } else {
                    write_number(f, *v)?;
                    f.write_str("i")
                }
            }
            Expr::Ident(name) => f.write_str(name),
            Expr::Neg(e) => {
                f.write_str("-")?;
                if e.precedence() < 3 {
                    write!(f, "({e})")
                } else {
                    write!(f, "{e}")
                }
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let (left_parens, right_parens) = if *op == BinOp::Pow {
                    (a.precedence() <= p, b.precedence() < 3)
                } else {
                    (a.precedence() < p, b.precedence() <= p)
                };
                if left_parens {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                f.write_str(op.symbol())?;
                if right_parens {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Real(f64),
    Imag(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(ch) = self.src[self.pos..].chars().next() {
            if ch.is_whitespace() {
                self.pos += ch.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Returns the token and the byte offset where it starts.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let Some(ch) = rest.chars().next() else {
            return Ok((Tok::End, start));
        };
        if ch.is_ascii_digit() || (ch == '.' && rest[1..].starts_with(|c: char| c.is_ascii_digit())) {
            let bytes = rest.as_bytes();
            let mut end = 0;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let value: f64 = rest[..end]
                .parse()
                .map_err(|_| Error::Syntax { offset: start, expected: vec!["number"] })?;
            if !value.is_finite() {
                return Err(Error::Syntax { offset: start, expected: vec!["finite number"] });
            }
            self.pos += end;
            let after = &self.src[self.pos..];
            if after.starts_with('i') && !after[1..].starts_with(|c: char| c.is_alphanumeric() || c == '_') {
                self.pos += 1;
                return Ok((Tok::Imag(value), start));
            }
            return Ok((Tok::Real(value), start));
        }
        if ch.is_alphabetic() || ch == '_' {
            let end = rest
                .char_indices()
                .find(|(_, c)| !(c.is_alphanumeric() || *c == '_'))
                .map(|(i, _)| i)
                .unwrap_or(rest.len());
            self.pos += end;
            return Ok((Tok::Ident(rest[..end].to_string()), start));
        }
        self.pos += ch.len_utf8();
        match ch {
            '+' | '-' | '*' | '/' | '^' => Ok((Tok::Op(ch), start)),
            '(' => Ok((Tok::LParen, start)),
            ')' => Ok((Tok::RParen, start)),
            _ => Err(Error::Syntax {
                offset: start,
                expected: vec!["number", "identifier", "operator", "(", ")"],
            }),
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    offset: usize,
}

const ATOM_START: [&str; 4] = ["number", "identifier", "(", "-"];

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self> {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, offset) = lexer.next()?;
        Ok(Self { lexer, tok, offset })
    }

    fn bump(&mut self) -> Result<()> {
        let (tok, offset) = self.lexer.next()?;
        self.tok = tok;
        self.offset = offset;
        Ok(())
    }

    fn fail<T>(&self, expected: &[&'static str]) -> Result<T> {
        Err(Error::Syntax { offset: self.offset, expected: expected.to_vec() })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.tok == Tok::Op('-') {
            self.bump()?;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tok.clone() {
            Tok::Real(v) => {
                self.bump()?;
                Ok(Expr::Real(v))
            }
            Tok::Imag(v) => {
                self.bump()?;
                Ok(Expr::Imag(v))
            }
            Tok::Ident(name) => {
                self.bump()?;
                if let Some(func) = Func::from_name(&name) {
                    if self.tok != Tok::LParen {
                        return self.fail(&["("]);
                    }
                    self.bump()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return self.fail(&[")", "operator"]);
                    }
                    self.bump()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if name == "i" {
                    return Ok(Expr::Imag(1.0));
                }
                Ok(Expr::Ident(name))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return self.fail(&[")", "operator"]);
                }
                self.bump()?;
                Ok(inner)
            }
            _ => self.fail(&ATOM_START),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut parser = Parser::new(src)?;
    let e = parser.expr()?;
    if parser.tok != Tok::End {
        return parser.fail(&["operator", "end of input"]);
    }
    Ok(e)
}

/// Evaluates `e`; `lookup` resolves identifiers.
pub fn eval_with<F>(e: &Expr, lookup: &F) -> Result<Complex64>
where
    F: Fn(&str) -> Option<Complex64>,
{
    let v = match e {
        Expr::Real(v) => Complex64::new(*v, 0.0),
        Expr::Imag(v) => Complex64::new(0.0, *v),
        Expr::Ident(name) => lookup(name).ok_or_else(|| Error::Unbound(name.clone()))?,
        Expr::Neg(inner) => Complex64::new(0.0, 0.0) - eval_with(inner, lookup)?,
        Expr::Call(func, arg) => func.apply(eval_with(arg, lookup)?),
        Expr::Binary(op, a, b) => {
            let x = eval_with(a, lookup)?;
            let y = eval_with(b, lookup)?;
            apply_binary(*op, x, y)?
        }
    };
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::NonFinite(e.to_string()));
    }
    Ok(v)
}

pub(crate) fn apply_binary(op: BinOp, x: Complex64, y: Complex64) -> Result<Complex64> {
    Ok(match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div => {
            if y == Complex64::new(0.0, 0.0) {
                return Err(Error::DivisionByZero);
            }
            x / y
        }
        BinOp::Pow => {
            if y.im == 0.0 && y.re.fract() == 0.0 && y.re.abs() <= 64.0 {
                if y.re < 0.0 && x == Complex64::new(0.0, 0.0) {
                    return Err(Error::DivisionByZero);
                }
                x.powi(y.re as i32)
            } else if x == Complex64::new(0.0, 0.0) {
                Complex64::new(0.0, 0.0)
            } else {
                x.powc(y)
            }
        }
    })
}

/// Evaluates with a list of `(name, value)` bindings.
pub fn eval_expr(e: &Expr, bindings: &[(&str, Complex64)]) -> Result<Complex64> {
    eval_with(e, &|name: &str| bindings.iter().find(|(n, _)| *n == name).map(|(_, v)| *v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ident(s: &str) -> Expr {
        Expr::Ident(s.into())
    }

    #[test]
    fn parses_product_with_unit() {
        assert_eq!(
            parse_expr("i*gamma").unwrap(),
            Expr::binary(BinOp::Mul, Expr::Imag(1.0), ident("gamma"))
        );
    }

    #[test]
    fn parses_power_then_subtraction() {
        assert_eq!(
            parse_expr("kappa^2 - 1").unwrap(),
            Expr::binary(
                BinOp::Sub,
                Expr::binary(BinOp::Pow, ident("kappa"), Expr::Real(2.0)),
                Expr::Real(1.0)
            )
        );
    }

    #[test]
    fn power_binds_tighter_than_negation_and_is_right_associative() {
        let v = eval_expr(&parse_expr("-2^2").unwrap(), &[]).unwrap();
        assert_eq!(v, Complex64::new(-4.0, 0.0));
        let v = eval_expr(&parse_expr("2^3^2").unwrap(), &[]).unwrap();
        assert_eq!(v, Complex64::new(512.0, 0.0));
        let v = eval_expr(&parse_expr("2^-1").unwrap(), &[]).unwrap();
        assert_eq!(v, Complex64::new(0.5, 0.0));
    }

    #[test]
    fn closed_form_ep_locations() {
        let v = eval_expr(&parse_expr("sqrt(2*sqrt(3)-3)").unwrap(), &[]).unwrap();
        assert!((v.re - 0.6812500).abs() < 1e-7 && v.im == 0.0);
        let v = eval_expr(&parse_expr("sqrt(2*sqrt(3)+3)").unwrap(), &[]).unwrap();
        assert!((v.re - 2.5424597).abs() < 1e-7);
    }

    #[test]
    fn imaginary_unit_and_principal_sqrt() {
        assert_eq!(eval_expr(&parse_expr("i*i").unwrap(), &[]).unwrap(), Complex64::new(-1.0, 0.0));
        let r = eval_expr(&parse_expr("sqrt(-1)").unwrap(), &[]).unwrap();
        assert!((r - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(eval_expr(&parse_expr("2.5i").unwrap(), &[]).unwrap(), Complex64::new(0.0, 2.5));
    }

    #[test]
    fn functions() {
        let z = Complex64::new(3.0, -4.0);
        let b = [("z", z)];
        let ev = |s: &str| eval_expr(&parse_expr(s).unwrap(), &b).unwrap();
        assert_eq!(ev("abs(z)"), Complex64::new(5.0, 0.0));
        assert_eq!(ev("conj(z)"), z.conj());
        assert_eq!(ev("re(z) + im(z)"), Complex64::new(-1.0, 0.0));
        assert!((ev("exp(i*0)") - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((ev("sin(z)^2 + cos(z)^2") - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn errors() {
        match parse_expr("1 + * 2") {
            Err(Error::Syntax { offset, expected }) => {
                assert_eq!(offset, 4);
                assert!(expected.contains(&"number"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expr("sqrt 2"), Err(Error::Syntax { offset: 5, .. })));
        assert!(matches!(parse_expr("(1 + 2"), Err(Error::Syntax { offset: 6, .. })));
        assert!(matches!(parse_expr("1 2"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr("1 $ 2"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(
            eval_expr(&parse_expr("x + 1").unwrap(), &[]),
            Err(Error::Unbound(name)) if name == "x"
        ));
        assert!(matches!(eval_expr(&parse_expr("1/0").unwrap(), &[]), Err(Error::DivisionByZero)));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000, 0u32..4).prop_map(|(m, e)| Expr::Real(m as f64 / 10f64.powi(e as i32))),
            (1u32..50).prop_map(|m| Expr::Imag(m as f64 / 4.0)),
            prop::sample::select(vec!["kappa", "J", "gamma", "x_1"]).prop_map(|s| Expr::Ident(s.into())),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::binary(op, a, b)),
                (prop::sample::select(Func::ALL.to_vec()), inner).prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
            ]
        })
    }

    proptest! {
        #[test]
        fn pretty_print_round_trips(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = parse_expr(&printed).unwrap();
            prop_assert_eq!(&reparsed, &e, "printed as {}", printed);
            prop_assert_eq!(parse_expr(&reparsed.to_string()).unwrap(), reparsed);
        }
    }
}
