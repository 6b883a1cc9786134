//! Expressions in `(u, v)` and second-order forward-mode jets.
//!
//! Coordinate functions of a surface arrive as strings like
//! `"u^3/6 + u*v^2/2 - u/2"`. This module parses them into an [`Expr`] tree
//! and evaluates them either as plain scalars or as [`Jet2`] values carrying
//! the function value together with its five partial derivatives up to second
//! order. Jets obey the product and chain rules exactly, so the surface
//! derivatives `z_u, z_v, z_uu, z_uv, z_vv` needed downstream are exact to
//! machine rounding — no finite differences are involved at this level.
//!
//! ## Grammar
//!
//! ```text
//! sum    := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          // right-associative
//! atom   := number | 'u' | 'v' | func '(' sum ')' | '(' sum ')'
//! func   := sin cos tan sinh cosh tanh exp log sqrt
//! ```
//!
//! Function application requires parentheses: `cos u cosh v` is a syntax
//! error, `cos(u)*cosh(v)` is the accepted spelling. This bans implicit
//! multiplication and keeps the grammar unambiguous.
//!
//! ## Domain checks
//!
//! Evaluation never produces NaN silently: `log` of a non-positive value,
//! `sqrt` of a non-positive value, `tan` at a pole, division by zero, and
//! `0^negative` all raise [`EvalError`] naming the offending subexpression.

use std::fmt;

use thiserror::Error;

/// One of the two independent variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    /// The first parameter `u`.
    U,
    /// The second parameter `v`.
    V,
}

/// Built-in unary functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Binary operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Abstract syntax tree of an expression over `u` and `v`.
///
/// Trees are immutable values; evaluation is pure and re-entrant, so a single
/// parsed `Expr` may be evaluated from many threads concurrently.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Numeric literal.
    Num(f64),
    /// Variable reference.
    Var(Var),
    /// Unary minus.
    Neg(Box<Expr>),
    /// Binary operation.
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Function application.
    Call(Func, Box<Expr>),
}

/// Error raised while parsing an expression string.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    /// Byte offset into the source string.
    pub pos: usize,
    /// Human-readable description.
    pub msg: String,
}

/// Error raised during evaluation when a value leaves a function's domain.
#[derive(Clone, Debug, Error, PartialEq)]
#[error("{kind} in `{subexpr}`")]
pub struct EvalError {
    /// The offending subexpression, re-rendered as text.
    pub subexpr: String,
    /// What went wrong.
    pub kind: DomainErrorKind,
}

/// The specific domain violation behind an [`EvalError`].
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DomainErrorKind {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of a non-positive value")]
    LogNonPositive,
    #[error("sqrt of a non-positive value")]
    SqrtNonPositive,
    #[error("tan evaluated at a pole")]
    TanPole,
    #[error("zero raised to a non-positive power")]
    ZeroToNonPositive,
    #[error("negative base with non-integer exponent")]
    NegativeBaseFractionalPower,
    #[error("non-finite result")]
    NonFinite,
}

impl Expr {
    /// Parse an expression string. Whitespace-insensitive; standard
    /// precedence (`^` > unary `-` > `*` `/` > `+` `-`), `^` right-associative.
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.parse_sum()?;
        match p.peek() {
            (Token::End, _) => Ok(e),
            (tok, pos) => Err(ParseError {
                pos,
                msg: format!("unexpected {tok} after complete expression"),
            }),
        }
    }

    /// Evaluate to a plain scalar.
    pub fn eval(&self, u: f64, v: f64) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(c) => *c,
            Expr::Var(Var::U) => u,
            Expr::Var(Var::V) => v,
            Expr::Neg(e) => -e.eval(u, v)?,
            Expr::Bin(op, l, r) => {
                let a = l.eval(u, v)?;
                let b = r.eval(u, v)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(self.domain_error(DomainErrorKind::DivisionByZero));
                        }
                        a / b
                    }
                    BinOp::Pow => self.checked_pow_scalar(a, b)?,
                }
            }
            Expr::Call(f, arg) => {
                let x = arg.eval(u, v)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => {
                        if x.cos().abs() < 1e-300 {
                            return Err(self.domain_error(DomainErrorKind::TanPole));
                        }
                        x.tan()
                    }
                    Func::Sinh => x.sinh(),
                    Func::Cosh => x.cosh(),
                    Func::Tanh => x.tanh(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(self.domain_error(DomainErrorKind::LogNonPositive));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x <= 0.0 {
                            return Err(self.domain_error(DomainErrorKind::SqrtNonPositive));
                        }
                        x.sqrt()
                    }
                }
            }
        })
    }

    /// Evaluate with exact first- and second-order partial derivatives.
    pub fn eval_jet2(&self, u: f64, v: f64) -> Result<Jet2, EvalError> {
        Ok(match self {
            Expr::Num(c) => Jet2::constant(*c),
            Expr::Var(Var::U) => Jet2::var_u(u),
            Expr::Var(Var::V) => Jet2::var_v(v),
            Expr::Neg(e) => -e.eval_jet2(u, v)?,
            Expr::Bin(op, l, r) => {
                let a = l.eval_jet2(u, v)?;
                let b = r.eval_jet2(u, v)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.val == 0.0 {
                            return Err(self.domain_error(DomainErrorKind::DivisionByZero));
                        }
                        a / b
                    }
                    BinOp::Pow => self.checked_pow_jet(a, b, r)?,
                }
            }
            Expr::Call(f, arg) => {
                let x = arg.eval_jet2(u, v)?;
                let t = x.val;
                match f {
                    Func::Sin => x.chain(t.sin(), t.cos(), -t.sin()),
                    Func::Cos => x.chain(t.cos(), -t.sin(), -t.cos()),
                    Func::Tan => {
                        let c = t.cos();
                        if c.abs() < 1e-300 {
                            return Err(self.domain_error(DomainErrorKind::TanPole));
                        }
                        let s2 = 1.0 / (c * c);
                        x.chain(t.tan(), s2, 2.0 * t.tan() * s2)
                    }
                    Func::Sinh => x.chain(t.sinh(), t.cosh(), t.sinh()),
                    Func::Cosh => x.chain(t.cosh(), t.sinh(), t.cosh()),
                    Func::Tanh => {
                        let th = t.tanh();
                        let sech2 = 1.0 - th * th;
                        x.chain(th, sech2, -2.0 * th * sech2)
                    }
                    Func::Exp => {
                        let e = t.exp();
                        x.chain(e, e, e)
                    }
                    Func::Log => {
                        if t <= 0.0 {
                            return Err(self.domain_error(DomainErrorKind::LogNonPositive));
                        }
                        x.chain(t.ln(), 1.0 / t, -1.0 / (t * t))
                    }
                    Func::Sqrt => {
                        if t <= 0.0 {
                            return Err(self.domain_error(DomainErrorKind::SqrtNonPositive));
                        }
                        let s = t.sqrt();
                        x.chain(s, 0.5 / s, -0.25 / (s * t))
                    }
                }
            }
        })
    }

    /// Fold a constant subtree (literals combined by arithmetic) to its value.
    ///
    /// Used to give literal exponents like `3`, `-2`, or `(3/2)` the exact
    /// power rule instead of the generic `exp(e·log b)` route.
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Num(c) => Some(*c),
            Expr::Neg(e) => e.as_const().map(|c| -c),
            Expr::Bin(op, l, r) => {
                let a = l.as_const()?;
                let b = r.as_const()?;
                Some(match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                })
            }
            _ => None,
        }
    }

    /// Substitute expressions for `u` and `v`, producing the composed tree.
    ///
    /// Useful for re-parametrizing a surface definition, e.g. replacing
    /// `u` by `u - v` and `v` by `u + v`.
    pub fn substitute(&self, for_u: &Expr, for_v: &Expr) -> Expr {
        match self {
            Expr::Num(c) => Expr::Num(*c),
            Expr::Var(Var::U) => for_u.clone(),
            Expr::Var(Var::V) => for_v.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(for_u, for_v))),
            Expr::Bin(op, l, r) => Expr::Bin(
                *op,
                Box::new(l.substitute(for_u, for_v)),
                Box::new(r.substitute(for_u, for_v)),
            ),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute(for_u, for_v))),
        }
    }

    fn domain_error(&self, kind: DomainErrorKind) -> EvalError {
        EvalError {
            subexpr: self.to_string(),
            kind,
        }
    }

    fn checked_pow_scalar(&self, base: f64, exponent: f64) -> Result<f64, EvalError> {
        if base == 0.0 && exponent <= 0.0 {
            return Err(self.domain_error(DomainErrorKind::ZeroToNonPositive));
        }
        if base < 0.0 && exponent.fract() != 0.0 {
            return Err(self.domain_error(DomainErrorKind::NegativeBaseFractionalPower));
        }
        // Integer exponents go through powi so scalar evaluation agrees
        // bitwise with the jet path's power rule.
        let r = if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
            base.powi(exponent as i32)
        } else {
            base.powf(exponent)
        };
        if !r.is_finite() {
            return Err(self.domain_error(DomainErrorKind::NonFinite));
        }
        Ok(r)
    }

    fn checked_pow_jet(&self, base: Jet2, exponent: Jet2, exp_tree: &Expr) -> Result<Jet2, EvalError> {
        if let Some(c) = exp_tree.as_const() {
            // Literal exponent: integer powers work for any base; fractional
            // powers require a positive base.
            if c == 0.0 {
                return Ok(Jet2::constant(1.0));
            }
            if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 {
                if base.val == 0.0 && c < 0.0 {
                    return Err(self.domain_error(DomainErrorKind::ZeroToNonPositive));
                }
                return Ok(base.powi(c as i32));
            }
            if base.val <= 0.0 {
                return Err(self.domain_error(if base.val == 0.0 {
                    DomainErrorKind::ZeroToNonPositive
                } else {
                    DomainErrorKind::NegativeBaseFractionalPower
                }));
            }
            let t = base.val;
            return Ok(base.chain(
                t.powf(c),
                c * t.powf(c - 1.0),
                c * (c - 1.0) * t.powf(c - 2.0),
            ));
        }
        // Variable exponent: route through exp(exponent · log base).
        if base.val <= 0.0 {
            return Err(self.domain_error(if base.val == 0.0 {
                DomainErrorKind::ZeroToNonPositive
            } else {
                DomainErrorKind::NegativeBaseFractionalPower
            }));
        }
        let t = base.val;
        let logb = base.chain(t.ln(), 1.0 / t, -1.0 / (t * t));
        let prod = exponent * logb;
        let e = prod.val.exp();
        Ok(prod.chain(e, e, e))
    }
}

/// A scalar together with its partial derivatives up to second order in
/// `(u, v)`: `val`, `d_u`, `d_v`, `d_uu`, `d_uv`, `d_vv`.
///
/// Arithmetic propagates derivatives by the exact product and chain rules;
/// there is no truncation error. The jet of the variable `u` at `(u₀, v₀)`
/// has `val = u₀`, `d_u = 1`, and all other slots `0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    /// Function value.
    pub val: f64,
    /// First partial ∂/∂u.
    pub d_u: f64,
    /// First partial ∂/∂v.
    pub d_v: f64,
    /// Second partial ∂²/∂u².
    pub d_uu: f64,
    /// Mixed partial ∂²/∂u∂v.
    pub d_uv: f64,
    /// Second partial ∂²/∂v².
    pub d_vv: f64,
}

impl Jet2 {
    /// Jet of a constant.
    #[inline]
    pub fn constant(c: f64) -> Jet2 {
        Jet2 {
            val: c,
            ..Jet2::default()
        }
    }

    /// Jet of the variable `u` at value `u0` (seeds `d_u = 1`).
    #[inline]
    pub fn var_u(u0: f64) -> Jet2 {
        Jet2 {
            val: u0,
            d_u: 1.0,
            ..Jet2::default()
        }
    }

    /// Jet of the variable `v` at value `v0` (seeds `d_v = 1`).
    #[inline]
    pub fn var_v(v0: f64) -> Jet2 {
        Jet2 {
            val: v0,
            d_v: 1.0,
            ..Jet2::default()
        }
    }

    /// Compose with a scalar function given its value and first two
    /// derivatives at `self.val`: the exact second-order chain rule.
    #[inline]
    pub fn chain(self, h: f64, dh: f64, d2h: f64) -> Jet2 {
        Jet2 {
            val: h,
            d_u: dh * self.d_u,
            d_v: dh * self.d_v,
            d_uu: d2h * self.d_u * self.d_u + dh * self.d_uu,
            d_uv: d2h * self.d_u * self.d_v + dh * self.d_uv,
            d_vv: d2h * self.d_v * self.d_v + dh * self.d_vv,
        }
    }

    /// Multiplicative inverse `1/self` (caller checks `val != 0`).
    #[inline]
    pub fn recip(self) -> Jet2 {
        let t = self.val;
        self.chain(1.0 / t, -1.0 / (t * t), 2.0 / (t * t * t))
    }

    /// Integer power by the exact power rule (any base).
    #[inline]
    pub fn powi(self, n: i32) -> Jet2 {
        let t = self.val;
        let nf = f64::from(n);
        self.chain(
            t.powi(n),
            nf * t.powi(n - 1),
            nf * (nf - 1.0) * t.powi(n - 2),
        )
    }

    /// Square root by the exact chain rule (caller checks `val > 0`).
    #[inline]
    pub fn sqrt(self) -> Jet2 {
        let s = self.val.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.val))
    }
}

impl std::ops::Add for Jet2 {
    type Output = Jet2;
    #[inline]
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            val: self.val + o.val,
            d_u: self.d_u + o.d_u,
            d_v: self.d_v + o.d_v,
            d_uu: self.d_uu + o.d_uu,
            d_uv: self.d_uv + o.d_uv,
            d_vv: self.d_vv + o.d_vv,
        }
    }
}

impl std::ops::Sub for Jet2 {
    type Output = Jet2;
    #[inline]
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 {
            val: self.val - o.val,
            d_u: self.d_u - o.d_u,
            d_v: self.d_v - o.d_v,
            d_uu: self.d_uu - o.d_uu,
            d_uv: self.d_uv - o.d_uv,
            d_vv: self.d_vv - o.d_vv,
        }
    }
}

impl std::ops::Mul for Jet2 {
    type Output = Jet2;
    #[inline]
    fn mul(self, o: Jet2) -> Jet2 {
        // Leibniz rule through second order.
        Jet2 {
            val: self.val * o.val,
            d_u: self.d_u * o.val + self.val * o.d_u,
            d_v: self.d_v * o.val + self.val * o.d_v,
            d_uu: self.d_uu * o.val + 2.0 * self.d_u * o.d_u + self.val * o.d_uu,
            d_uv: self.d_uv * o.val + self.d_u * o.d_v + self.d_v * o.d_u + self.val * o.d_uv,
            d_vv: self.d_vv * o.val + 2.0 * self.d_v * o.d_v + self.val * o.d_vv,
        }
    }
}

impl std::ops::Div for Jet2 {
    type Output = Jet2;
    #[inline]
    fn div(self, o: Jet2) -> Jet2 {
        // Quotient rule solved from the Leibniz identity a = q·b, so the
        // value slot is exactly `a/b` (bitwise identical to scalar eval).
        let q = self.val / o.val;
        let q_u = (self.d_u - q * o.d_u) / o.val;
        let q_v = (self.d_v - q * o.d_v) / o.val;
        Jet2 {
            val: q,
            d_u: q_u,
            d_v: q_v,
            d_uu: (self.d_uu - 2.0 * q_u * o.d_u - q * o.d_uu) / o.val,
            d_uv: (self.d_uv - q_u * o.d_v - q_v * o.d_u - q * o.d_uv) / o.val,
            d_vv: (self.d_vv - 2.0 * q_v * o.d_v - q * o.d_vv) / o.val,
        }
    }
}

impl std::ops::Neg for Jet2 {
    type Output = Jet2;
    #[inline]
    fn neg(self) -> Jet2 {
        Jet2 {
            val: -self.val,
            d_u: -self.d_u,
            d_v: -self.d_v,
            d_uu: -self.d_uu,
            d_uv: -self.d_uv,
            d_vv: -self.d_vv,
        }
    }
}

impl std::ops::Mul<f64> for Jet2 {
    type Output = Jet2;
    #[inline]
    fn mul(self, c: f64) -> Jet2 {
        Jet2 {
            val: self.val * c,
            d_u: self.d_u * c,
            d_v: self.d_v * c,
            d_uu: self.d_uu * c,
            d_uv: self.d_uv * c,
            d_vv: self.d_vv * c,
        }
    }
}

// ── Tokenizer ──────────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(c) => write!(f, "number `{c}`"),
            Token::Ident(s) => write!(f, "identifier `{s}`"),
            Token::Plus => write!(f, "`+`"),
            Token::Minus => write!(f, "`-`"),
            Token::Star => write!(f, "`*`"),
            Token::Slash => write!(f, "`/`"),
            Token::Caret => write!(f, "`^`"),
            Token::LParen => write!(f, "`(`"),
            Token::RParen => write!(f, "`)`"),
            Token::End => write!(f, "end of input"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                out.push((Token::Plus, i));
                i += 1;
            }
            b'-' => {
                out.push((Token::Minus, i));
                i += 1;
            }
            b'*' => {
                out.push((Token::Star, i));
                i += 1;
            }
            b'/' => {
                out.push((Token::Slash, i));
                i += 1;
            }
            b'^' => {
                out.push((Token::Caret, i));
                i += 1;
            }
            b'(' => {
                out.push((Token::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Token::RParen, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // Optional exponent part: e.g. 1.5e-3.
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s = &text[start..i];
                let value: f64 = s.parse().map_err(|_| ParseError {
                    pos: start,
                    msg: format!("malformed number `{s}`"),
                })?;
                out.push((Token::Num(value), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Token::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(ParseError {
                    pos: i,
                    msg: format!("unexpected character `{}`", text[i..].chars().next().unwrap()),
                })
            }
        }
    }
    out.push((Token::End, text.len()));
    Ok(out)
}

// ── Parser ─────────────────────────────────────────────────────────────────

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> (Token, usize) {
        self.tokens[self.pos].clone()
    }

    fn bump(&mut self) -> (Token, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Token, what: &str) -> Result<(), ParseError> {
        let (tok, pos) = self.bump();
        if &tok == want {
            Ok(())
        } else {
            Err(ParseError {
                pos,
                msg: format!("expected {what}, found {tok}"),
            })
        }
    }

    fn parse_sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek().0 {
                Token::Plus => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Token::Minus => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek().0 {
                Token::Star => {
                    self.bump();
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Token::Slash => {
                    self.bump();
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().0 == Token::Minus {
            self.bump();
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_atom()?;
        if self.peek().0 == Token::Caret {
            self.bump();
            // Right-associative; a leading minus in the exponent is allowed.
            let exponent = self.parse_unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, pos) = self.bump();
        match tok {
            Token::Num(c) => Ok(Expr::Num(c)),
            Token::Ident(name) => {
                if name == "u" {
                    return Ok(Expr::Var(Var::U));
                }
                if name == "v" {
                    return Ok(Expr::Var(Var::V));
                }
                if let Some(f) = Func::from_name(&name) {
                    // Function application requires parentheses; this is what
                    // rejects juxtaposition like `cos u cosh v`.
                    self.expect(&Token::LParen, &format!("`(` after function `{name}`"))?;
                    let arg = self.parse_sum()?;
                    self.expect(&Token::RParen, "closing `)`")?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                Err(ParseError {
                    pos,
                    msg: format!("unknown identifier `{name}` (variables are `u`, `v`)"),
                })
            }
            Token::LParen => {
                let e = self.parse_sum()?;
                self.expect(&Token::RParen, "closing `)`")?;
                Ok(e)
            }
            other => Err(ParseError {
                pos,
                msg: format!("expected a value, found {other}"),
            }),
        }
    }
}

// ── Unparser ───────────────────────────────────────────────────────────────

/// Precedence levels used when re-rendering an expression with the minimal
/// parenthesization that still round-trips structurally.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn paren(f: &mut fmt::Formatter<'_>, e: &Expr, need: bool) -> fmt::Result {
            if need {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(c) => {
                if *c < 0.0 {
                    // A negative literal prints as a parenthesized value so
                    // the output re-parses to the same tree shape.
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(Var::U) => write!(f, "u"),
            Expr::Var(Var::V) => write!(f, "v"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                paren(f, e, precedence(e) < 3)
            }
            Expr::Bin(op, l, r) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                if *op == BinOp::Pow {
                    // Right-associative: the left child needs parens at equal
                    // precedence, the right child is parsed as unary anyway.
                    paren(f, l, precedence(l) <= prec)?;
                    write!(f, "{sym}")?;
                    paren(f, r, precedence(r) < 3)
                } else {
                    // Left-associative: the right child needs parens at equal
                    // precedence (a-b-c, a/b/c).
                    paren(f, l, precedence(l) < prec)?;
                    write!(f, " {sym} ")?;
                    paren(f, r, precedence(r) <= prec)
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Expression corpus for round-trip and finite-difference properties;
    /// includes all fixture parametrization coordinates.
    const CORPUS: &[&str] = &[
        "u^3/6 + u*v^2/2 - u/2",
        "u*v",
        "u^2*v/2 + v^3/6 + v/2",
        "v^3/6 + u^2*v/2 - v/2",
        "u^2/2 + v^2/2",
        "u^3/6 + u*v^2/2 + v^3/6 + u/2",
        "cos(u)*cosh(v)",
        "cos(u)*sinh(v)",
        "cosh(v)/cosh(u)",
        "tanh(u)",
        "sinh(v)/cosh(u)",
        "u",
        "v",
        "-u^2",
        "2^3^2",
        "1 - u^2 + v^2",
        "sqrt(1 + u^2)",
        "exp(u*v) - log(2 + u)",
        "sin(u + v)/(2 + cos(u - v))",
        "tan(u/4)",
        "u^(3/2) + (1 + v)^0.5",
        "(u + v)^3",
        "1/(1 + u^2 + v^2)",
        "u/2 - v/3 + 0.25",
    ];

    fn jet(text: &str, u: f64, v: f64) -> Jet2 {
        Expr::parse(text).unwrap().eval_jet2(u, v).unwrap()
    }

    #[test]
    fn parses_polynomial_coordinate_function() {
        let j = jet("u^3/6 + u*v^2/2 - u/2", 0.0, 0.0);
        assert_eq!(j.val, 0.0);
        assert_eq!(j.d_u, -0.5);
        assert_eq!(j.d_v, 0.0);
        assert_eq!(j.d_uu, 0.0);
        assert_eq!(j.d_uv, 0.0);
        assert_eq!(j.d_vv, 0.0);
    }

    #[test]
    fn product_jet_is_exact() {
        let j = jet("u*v", 2.0, 3.0);
        assert_eq!(j.val, 6.0);
        assert_eq!(j.d_u, 3.0);
        assert_eq!(j.d_v, 2.0);
        assert_eq!(j.d_uv, 1.0);
        assert_eq!(j.d_uu, 0.0);
        assert_eq!(j.d_vv, 0.0);
    }

    #[test]
    fn trig_hyperbolic_jet_at_origin() {
        let j = jet("cos(u)*cosh(v)", 0.0, 0.0);
        assert_eq!(j.val, 1.0);
        assert_eq!(j.d_u, 0.0);
        assert_eq!(j.d_v, 0.0);
        assert_eq!(j.d_uu, -1.0);
        assert_eq!(j.d_vv, 1.0);
        assert_eq!(j.d_uv, 0.0);
    }

    #[test]
    fn juxtaposition_is_rejected() {
        let err = Expr::parse("cos u cosh v").unwrap_err();
        assert!(err.msg.contains("`(` after function"), "{err}");
    }

    #[test]
    fn unknown_identifier_is_rejected_at_parse_time() {
        let err = Expr::parse("u + w").unwrap_err();
        assert!(err.msg.contains("unknown identifier `w`"), "{err}");
    }

    #[test]
    fn power_is_right_associative_and_binds_tighter_than_unary_minus() {
        assert_eq!(Expr::parse("2^3^2").unwrap().eval(0.0, 0.0).unwrap(), 512.0);
        assert_eq!(Expr::parse("-u^2").unwrap().eval(3.0, 0.0).unwrap(), -9.0);
        assert_eq!(Expr::parse("2^-2").unwrap().eval(0.0, 0.0).unwrap(), 0.25);
    }

    #[test]
    fn constant_exponent_paths() {
        // Integer exponent with a negative base is fine.
        let j = jet("(u - 1)^3", 0.0, 0.0);
        assert_eq!(j.val, -1.0);
        assert_eq!(j.d_u, 3.0);
        assert_eq!(j.d_uu, -6.0);
        // Half-integer exponent needs a positive base.
        let j = jet("u^(3/2)", 4.0, 0.0);
        assert_abs_diff_eq!(j.val, 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(j.d_u, 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(j.d_uu, 0.375, epsilon = 1e-14);
        let err = Expr::parse("u^(1/2)").unwrap().eval_jet2(-1.0, 0.0).unwrap_err();
        assert_eq!(err.kind, DomainErrorKind::NegativeBaseFractionalPower);
    }

    #[test]
    fn variable_exponent_goes_through_exp_log() {
        let j = jet("u^v", 2.0, 3.0);
        assert_abs_diff_eq!(j.val, 8.0, epsilon = 1e-12);
        // d/du u^v = v·u^(v-1); d/dv u^v = u^v·ln u.
        assert_abs_diff_eq!(j.d_u, 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j.d_v, 8.0 * 2.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn domain_violations_raise_errors_not_nan() {
        let cases = [
            ("log(u)", -1.0, 0.0, DomainErrorKind::LogNonPositive),
            ("sqrt(u - 2)", 1.0, 0.0, DomainErrorKind::SqrtNonPositive),
            ("1/(u - 1)", 1.0, 0.0, DomainErrorKind::DivisionByZero),
            ("u^(-1)", 0.0, 0.0, DomainErrorKind::ZeroToNonPositive),
        ];
        for (text, u, v, kind) in cases {
            let e = Expr::parse(text).unwrap();
            assert_eq!(e.eval_jet2(u, v).unwrap_err().kind, kind, "{text}");
            assert_eq!(e.eval(u, v).unwrap_err().kind, kind, "{text}");
        }
    }

    #[test]
    fn error_reports_offending_subexpression() {
        let e = Expr::parse("1 + log(u - 5)").unwrap();
        let err = e.eval_jet2(0.0, 0.0).unwrap_err();
        assert_eq!(err.subexpr, "log(u - 5)");
    }

    #[test]
    fn scalar_eval_matches_jet_value_on_corpus() {
        for text in CORPUS {
            let e = Expr::parse(text).unwrap();
            let (u, v) = (0.37, 0.21);
            let s = e.eval(u, v).unwrap();
            let j = e.eval_jet2(u, v).unwrap();
            assert_eq!(s, j.val, "{text}");
        }
    }

    #[test]
    fn unparse_reparse_is_structurally_identical_on_corpus() {
        for text in CORPUS {
            let e = Expr::parse(text).unwrap();
            let rendered = e.to_string();
            let again = Expr::parse(&rendered)
                .unwrap_or_else(|err| panic!("re-parse of `{rendered}` failed: {err}"));
            assert_eq!(e, again, "round trip of `{text}` via `{rendered}`");
        }
    }

    #[test]
    fn substitute_composes_trees() {
        // (u*v) with u → u - v, v → u + v becomes (u-v)*(u+v) = u² - v².
        let e = Expr::parse("u*v").unwrap();
        let s = e.substitute(
            &Expr::parse("u - v").unwrap(),
            &Expr::parse("u + v").unwrap(),
        );
        let j = s.eval_jet2(3.0, 2.0).unwrap();
        assert_eq!(j.val, 5.0);
        assert_eq!(j.d_u, 6.0);
        assert_eq!(j.d_v, -4.0);
    }

    /// Central finite differences of the value slot approximate each first
    /// derivative at order 2, and of the first-derivative slots approximate
    /// the second derivatives; shrinking h by 10 shrinks the error ~100×.
    #[test]
    fn jets_match_central_differences_at_second_order() {
        let (u0, v0) = (0.31, 0.17);
        for text in CORPUS {
            let e = Expr::parse(text).unwrap();
            let mut worst_ratio: f64 = 1.0;
            for (h, tol) in [(1e-2, 1e-3), (1e-3, 1e-5)] {
                let j = e.eval_jet2(u0, v0).unwrap();
                let at = |du: f64, dv: f64| e.eval(u0 + du, v0 + dv).unwrap();
                let fd_u = (at(h, 0.0) - at(-h, 0.0)) / (2.0 * h);
                let fd_v = (at(0.0, h) - at(0.0, -h)) / (2.0 * h);
                let fd_uu = (at(h, 0.0) - 2.0 * at(0.0, 0.0) + at(-h, 0.0)) / (h * h);
                let fd_vv = (at(0.0, h) - 2.0 * at(0.0, 0.0) + at(0.0, -h)) / (h * h);
                let fd_uv =
                    (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
                let scale = 1.0 + j.val.abs();
                for (jet_slot, fd) in [
                    (j.d_u, fd_u),
                    (j.d_v, fd_v),
                    (j.d_uu, fd_uu),
                    (j.d_uv, fd_uv),
                    (j.d_vv, fd_vv),
                ] {
                    let err = (jet_slot - fd).abs() / scale;
                    assert!(err < tol, "{text}: h={h} err={err}");
                    worst_ratio = worst_ratio.max(err / tol);
                }
            }
        }
    }

    // Structural round-trip on randomly generated trees.
    mod proptests {
        use super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                (0u32..1000).prop_map(|n| Expr::Num(f64::from(n) / 16.0)),
                Just(Expr::Var(Var::U)),
                Just(Expr::Var(Var::V)),
            ];
            leaf.prop_recursive(5, 64, 4, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone(), 0u8..4).prop_map(|(l, r, op)| {
                        let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][op as usize];
                        Expr::Bin(op, Box::new(l), Box::new(r))
                    }),
                    // Keep exponents as literals so evaluation stays in-domain.
                    (inner.clone(), 0u32..4).prop_map(|(l, n)| Expr::Bin(
                        BinOp::Pow,
                        Box::new(l),
                        Box::new(Expr::Num(f64::from(n)))
                    )),
                    inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                    (inner, 0u8..6).prop_map(|(e, f)| {
                        let f = [
                            Func::Sin,
                            Func::Cos,
                            Func::Sinh,
                            Func::Cosh,
                            Func::Tanh,
                            Func::Exp,
                        ][f as usize];
                        Expr::Call(f, Box::new(e))
                    }),
                ]
            })
        }

        proptest! {
            #[test]
            fn unparse_reparse_roundtrip(e in arb_expr()) {
                let rendered = e.to_string();
                let again = Expr::parse(&rendered).unwrap();
                prop_assert_eq!(e, again);
            }
        }
    }
}
