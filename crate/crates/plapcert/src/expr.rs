//! Expression language for problem data.
//!
//! Weights, nonlinearities and boundary maps are given in config files as
//! small arithmetic expressions over the variables `t`, `u`, `v` and `w`.
//! The grammar supports `+ - * / ^` (with `^` right-associative and binding
//! tighter than unary minus, so `t^-2` and `-t^2` both mean what they look
//! like), the functions `sqrt`, `abs`, `sgn`, `exp`, `log`, `min`, `max`,
//! and a first-match `piecewise` form with a mandatory `else` arm:
//!
//! ```text
//! piecewise((w <= 0, w), (w <= 1, w/2), (else, w/6 + 1/3))
//! ```
//!
//! Guards compare a single variable against a numeric literal. Parsing
//! reports byte offsets; evaluation distinguishes division by zero, domain
//! violations, non-finite intermediates and unbound variables. The
//! [`Display`](std::fmt::Display) form is fully parenthesized and reparses
//! to the identical syntax tree.

use std::collections::BTreeSet;
use std::fmt;

use crate::real::{real, Real};

/// Variables an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    T,
    U,
    V,
    W,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::U => "u",
            Var::V => "v",
            Var::W => "w",
        }
    }

    fn from_name(s: &str) -> Option<Var> {
        match s {
            "t" => Some(Var::T),
            "u" => Some(Var::U),
            "v" => Some(Var::V),
            "w" => Some(Var::W),
            _ => None,
        }
    }
}

/// Binary operators in precedence order `^` > `* /` > `+ -`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
}

/// Built-in functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Abs,
    Sgn,
    Exp,
    Log,
    Min,
    Max,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sgn => "sgn",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        match s {
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            "sgn" => Some(Func::Sgn),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            _ => None,
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Comparison operators allowed in piecewise guards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

/// Guard of one piecewise arm: `var cmp literal`.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub var: Var,
    pub cmp: Cmp,
    pub bound: f64,
}

impl Guard {
    fn holds<R: Real>(&self, env: &Bindings<R>) -> Result<bool, EvalError> {
        let x = env.get(self.var)?;
        let b = real::<R>(self.bound);
        Ok(match self.cmp {
            Cmp::Lt => x < b,
            Cmp::Le => x <= b,
            Cmp::Gt => x > b,
            Cmp::Ge => x >= b,
        })
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Piecewise {
        arms: Vec<(Guard, Expr)>,
        otherwise: Box<Expr>,
    },
}

/// Variable values supplied to [`Expr::eval`]. Unset variables produce
/// [`EvalError::Unbound`] when referenced.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<R> {
    pub t: Option<R>,
    pub u: Option<R>,
    pub v: Option<R>,
    pub w: Option<R>,
}

impl<R: Real> Bindings<R> {
    /// Bind only `t` (weight functions).
    pub fn only_t(t: R) -> Self {
        Bindings {
            t: Some(t),
            ..Default::default()
        }
    }

    /// Bind `t`, `u`, `v` (nonlinearities).
    pub fn tuv(t: R, u: R, v: R) -> Self {
        Bindings {
            t: Some(t),
            u: Some(u),
            v: Some(v),
            w: None,
        }
    }

    /// Bind only `w` (boundary maps).
    pub fn only_w(w: R) -> Self {
        Bindings {
            w: Some(w),
            ..Default::default()
        }
    }

    fn get(&self, var: Var) -> Result<R, EvalError> {
        let slot = match var {
            Var::T => self.t,
            Var::U => self.u,
            Var::V => self.v,
            Var::W => self.w,
        };
        slot.ok_or(EvalError::Unbound(var.name()))
    }
}

/// Failure while evaluating a well-formed expression.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("non-finite intermediate value")]
    NonFinite,
    #[error("variable '{0}' is not bound")]
    Unbound(&'static str),
}

/// Syntax error with the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl Expr {
    /// Evaluate under `env`. The result is guaranteed finite.
    pub fn eval<R: Real>(&self, env: &Bindings<R>) -> Result<R, EvalError> {
        let value = match self {
            Expr::Num(x) => real::<R>(*x),
            Expr::Var(var) => env.get(*var)?,
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval(env)?;
                let y = b.eval(env)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == R::zero() {
                            return Err(EvalError::DivisionByZero);
                        }
                        x / y
                    }
                    BinOp::Pow => pow(x, y)?,
                }
            }
            Expr::Call(func, args) => {
                let x = args[0].eval(env)?;
                match func {
                    Func::Sqrt => {
                        if x < R::zero() {
                            return Err(EvalError::Domain("sqrt of a negative number"));
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                    Func::Sgn => {
                        if x > R::zero() {
                            R::one()
                        } else if x < R::zero() {
                            -R::one()
                        } else {
                            R::zero()
                        }
                    }
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= R::zero() {
                            return Err(EvalError::Domain("log of a non-positive number"));
                        }
                        x.ln()
                    }
                    Func::Min => x.min(args[1].eval(env)?),
                    Func::Max => x.max(args[1].eval(env)?),
                }
            }
            Expr::Piecewise { arms, otherwise } => {
                let mut chosen: Option<&Expr> = None;
                for (guard, e) in arms {
                    if guard.holds(env)? {
                        chosen = Some(e);
                        break;
                    }
                }
                chosen.unwrap_or(otherwise).eval(env)?
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Variables the expression references, guards included.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            Expr::Piecewise { arms, otherwise } => {
                for (guard, e) in arms {
                    out.insert(guard.var);
                    e.collect_vars(out);
                }
                otherwise.collect_vars(out);
            }
        }
    }
}

fn pow<R: Real>(x: R, y: R) -> Result<R, EvalError> {
    if x < R::zero() && y.fract() != R::zero() {
        return Err(EvalError::Domain("negative base with a non-integer exponent"));
    }
    if x == R::zero() && y < R::zero() {
        return Err(EvalError::DivisionByZero);
    }
    Ok(x.powf(y))
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; reparses to the identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Piecewise { arms, otherwise } => {
                f.write_str("piecewise(")?;
                for (guard, e) in arms {
                    write!(
                        f,
                        "({} {} {:?}, {e}), ",
                        guard.var.name(),
                        guard.cmp.symbol(),
                        guard.bound
                    )?;
                }
                write!(f, "(else, {otherwise}))")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x:?}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::Lt => "'<'".into(),
            Tok::Le => "'<='".into(),
            Tok::Gt => "'>'".into(),
            Tok::Ge => "'>='".into(),
        }
    }
}

struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let offset = i;
        let tok = match c {
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b',' => {
                i += 1;
                Tok::Comma
            }
            b'+' => {
                i += 1;
                Tok::Plus
            }
            b'-' => {
                i += 1;
                Tok::Minus
            }
            b'*' => {
                i += 1;
                Tok::Star
            }
            b'/' => {
                i += 1;
                Tok::Slash
            }
            b'^' => {
                i += 1;
                Tok::Caret
            }
            b'<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    Tok::Le
                } else {
                    i += 1;
                    Tok::Lt
                }
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    Tok::Ge
                } else {
                    i += 1;
                    Tok::Gt
                }
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
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
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError {
                    offset: start,
                    message: format!("invalid numeric literal '{text}'"),
                })?;
                if !value.is_finite() {
                    return Err(ParseError {
                        offset: start,
                        message: format!("numeric literal '{text}' overflows"),
                    });
                }
                Tok::Num(value)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                Tok::Ident(src[start..i].to_string())
            }
            other => {
                return Err(ParseError {
                    offset,
                    message: format!("unexpected character '{}'", other as char),
                });
            }
        };
        toks.push(Token { tok, offset });
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

/// Parse `src` into an [`Expr`].
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end_offset: src.len(),
    };
    let e = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(ParseError {
            offset: p.offset(),
            message: format!("unexpected trailing {}", tok.describe()),
        });
    }
    Ok(e)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    end_offset: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.pos)
            .map_or(self.end_offset, |t| t.offset)
    }

    fn advance(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos).map(|t| &t.tok);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn expect(&mut self, want: &Tok, context: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error(format!(
                "expected {} {context}, found {}",
                want.describe(),
                t.describe()
            ))),
            None => Err(self.error(format!(
                "expected {} {context}, found end of input",
                want.describe()
            ))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exponent = self.exponent()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    /// Exponent position: allows a sign and recurses through `power` for
    /// right associativity (`2^3^2` is `2^(3^2)`).
    fn exponent(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            let inner = self.exponent()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.advance() {
            Some(Tok::Num(x)) => Ok(Expr::Num(*x)),
            Some(Tok::Ident(name)) => self.ident(name, offset),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "to close the group")?;
                Ok(e)
            }
            Some(t) => Err(ParseError {
                offset,
                message: format!("expected a value, found {}", t.describe()),
            }),
            None => Err(ParseError {
                offset,
                message: "expected a value, found end of input".into(),
            }),
        }
    }

    fn ident(&mut self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        if name == "piecewise" {
            return self.piecewise();
        }
        let called = self.peek() == Some(&Tok::LParen);
        if called {
            let func = Func::from_name(name).ok_or_else(|| ParseError {
                offset,
                message: format!("unknown function '{name}'"),
            })?;
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                args.push(self.expr()?);
            }
            self.expect(&Tok::RParen, "to close the argument list")?;
            if args.len() != func.arity() {
                return Err(ParseError {
                    offset,
                    message: format!(
                        "function '{name}' takes {} argument(s), found {}",
                        func.arity(),
                        args.len()
                    ),
                });
            }
            return Ok(Expr::Call(func, args));
        }
        match Var::from_name(name) {
            Some(v) => Ok(Expr::Var(v)),
            None => Err(ParseError {
                offset,
                message: format!("unknown identifier '{name}'"),
            }),
        }
    }

    fn piecewise(&mut self) -> Result<Expr, ParseError> {
        self.expect(&Tok::LParen, "after 'piecewise'")?;
        let mut arms = Vec::new();
        loop {
            self.expect(&Tok::LParen, "to open a piecewise arm")?;
            if matches!(self.peek(), Some(Tok::Ident(s)) if s == "else") {
                self.pos += 1;
                self.expect(&Tok::Comma, "after 'else'")?;
                let otherwise = self.expr()?;
                self.expect(&Tok::RParen, "to close the else arm")?;
                self.expect(&Tok::RParen, "to close 'piecewise'")?;
                if arms.is_empty() {
                    return Err(self.error(
                        "piecewise needs at least one guarded arm before the else arm",
                    ));
                }
                return Ok(Expr::Piecewise {
                    arms,
                    otherwise: Box::new(otherwise),
                });
            }
            let guard = self.guard()?;
            self.expect(&Tok::Comma, "after the guard")?;
            let body = self.expr()?;
            self.expect(&Tok::RParen, "to close the piecewise arm")?;
            arms.push((guard, body));
            match self.peek() {
                Some(Tok::Comma) => {
                    self.pos += 1;
                }
                _ => {
                    return Err(self.error(
                        "piecewise requires a final '(else, ...)' arm",
                    ));
                }
            }
        }
    }

    fn guard(&mut self) -> Result<Guard, ParseError> {
        let offset = self.offset();
        let var = match self.advance() {
            Some(Tok::Ident(s)) => Var::from_name(s).ok_or_else(|| ParseError {
                offset,
                message: format!("guard variable must be one of t, u, v, w, found '{s}'"),
            })?,
            Some(t) => {
                return Err(ParseError {
                    offset,
                    message: format!("expected a guard variable, found {}", t.describe()),
                })
            }
            None => {
                return Err(ParseError {
                    offset,
                    message: "expected a guard variable, found end of input".into(),
                })
            }
        };
        let cmp_offset = self.offset();
        let cmp = match self.advance() {
            Some(Tok::Lt) => Cmp::Lt,
            Some(Tok::Le) => Cmp::Le,
            Some(Tok::Gt) => Cmp::Gt,
            Some(Tok::Ge) => Cmp::Ge,
            other => {
                return Err(ParseError {
                    offset: cmp_offset,
                    message: match other {
                        Some(t) => format!("expected a comparison operator, found {}", t.describe()),
                        None => "expected a comparison operator, found end of input".into(),
                    },
                })
            }
        };
        let negative = if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        let bound_offset = self.offset();
        let bound = match self.advance() {
            Some(Tok::Num(x)) => {
                if negative {
                    -*x
                } else {
                    *x
                }
            }
            Some(t) => {
                return Err(ParseError {
                    offset: bound_offset,
                    message: format!("guard bound must be a numeric literal, found {}", t.describe()),
                })
            }
            None => {
                return Err(ParseError {
                    offset: bound_offset,
                    message: "guard bound must be a numeric literal, found end of input".into(),
                })
            }
        };
        Ok(Guard { var, cmp, bound })
    }
}
