//! Arithmetic expressions used in production conditions and successor
//! parameters: `+ - * /`, `min`, `max`, `pow`, comparisons, and calls to the
//! model's named growth functions. Comparisons yield 1.0 or 0.0.

use std::fmt;

use super::growth::GrowthFunction;
use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 1,
            BinOp::Add | BinOp::Sub => 2,
            BinOp::Mul | BinOp::Div => 3,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        let truth = |c: bool| if c { 1.0 } else { 0.0 };
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Lt => truth(a < b),
            BinOp::Le => truth(a <= b),
            BinOp::Gt => truth(a > b),
            BinOp::Ge => truth(a >= b),
            BinOp::Eq => truth(a == b),
            BinOp::Ne => truth(a != b),
        }
    }
}

/// A parsed expression with identifiers resolved to slots.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Param(usize),
    Const(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    /// `name(age, duration)` for a declared growth function.
    Growth(usize, Box<Expr>, Box<Expr>),
}

/// Names visible while parsing an expression.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    pub params: Vec<String>,
    pub constants: Vec<String>,
    pub growth: Vec<String>,
}

/// Values bound while evaluating an expression.
pub struct Env<'a> {
    pub params: &'a [f64],
    pub constants: &'a [f64],
    pub growth: &'a [GrowthFunction],
}

impl<'a> Env<'a> {
    pub fn constants_only(constants: &'a [f64], growth: &'a [GrowthFunction]) -> Self {
        Env {
            params: &[],
            constants,
            growth,
        }
    }
}

impl Expr {
    pub fn eval(&self, env: &Env<'_>) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Param(i) => env.params[*i],
            Expr::Const(i) => env.constants[*i],
            Expr::Neg(e) => -e.eval(env),
            Expr::Bin(op, a, b) => op.apply(a.eval(env), b.eval(env)),
            Expr::Min(a, b) => a.eval(env).min(b.eval(env)),
            Expr::Max(a, b) => a.eval(env).max(b.eval(env)),
            Expr::Pow(a, b) => a.eval(env).powf(b.eval(env)),
            Expr::Growth(i, age, dur) => env.growth[*i].evaluate(age.eval(env), dur.eval(env)),
        }
    }

    pub fn display<'a>(&'a self, scope: &'a Scope) -> impl fmt::Display + 'a {
        ExprDisplay { expr: self, scope }
    }

    /// Parses `text`; `line`/`column` locate its first character for errors.
    pub fn parse(text: &str, line: usize, column: usize, scope: &Scope) -> Result<Expr, ParseError> {
        let mut p = ExprParser {
            src: text,
            pos: 0,
            line,
            column,
            scope,
        };
        let e = p.comparison()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error(format!("unexpected '{}'", &p.src[p.pos..])));
        }
        Ok(e)
    }
}

struct ExprDisplay<'a> {
    expr: &'a Expr,
    scope: &'a Scope,
}

impl ExprDisplay<'_> {
    fn write(&self, f: &mut fmt::Formatter<'_>, e: &Expr, parent: u8, right: bool) -> fmt::Result {
        match e {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Param(i) => f.write_str(&self.scope.params[*i]),
            Expr::Const(i) => f.write_str(&self.scope.constants[*i]),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                self.write(f, inner, 4, false)
            }
            Expr::Bin(op, a, b) => {
                let prec = op.precedence();
                let paren = prec < parent || (right && prec == parent);
                if paren {
                    f.write_str("(")?;
                }
                self.write(f, a, prec, false)?;
                write!(f, " {} ", op.symbol())?;
                self.write(f, b, prec, true)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Min(a, b) | Expr::Max(a, b) | Expr::Pow(a, b) => {
                f.write_str(match e {
                    Expr::Min(..) => "min(",
                    Expr::Max(..) => "max(",
                    _ => "pow(",
                })?;
                self.write(f, a, 0, false)?;
                f.write_str(", ")?;
                self.write(f, b, 0, false)?;
                f.write_str(")")
            }
            Expr::Growth(i, a, b) => {
                write!(f, "{}(", self.scope.growth[*i])?;
                self.write(f, a, 0, false)?;
                f.write_str(", ")?;
                self.write(f, b, 0, false)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, self.expr, 0, false)
    }
}

struct ExprParser<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
    scope: &'a Scope,
}

impl ExprParser<'_> {
    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.column + self.src[..self.pos].chars().count(), msg)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{token}'")))
        }
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.additive()?;
        let op = if self.eat("<=") {
            BinOp::Le
        } else if self.eat(">=") {
            BinOp::Ge
        } else if self.eat("==") {
            BinOp::Eq
        } else if self.eat("!=") {
            BinOp::Ne
        } else if self.eat("<") {
            BinOp::Lt
        } else if self.eat(">") {
            BinOp::Gt
        } else {
            return Ok(lhs);
        };
        let rhs = self.additive()?;
        Ok(Expr::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat("+") {
                BinOp::Add
            } else if self.eat("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat("*") {
                BinOp::Mul
            } else if self.eat("/") {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat("-") {
            return Ok(match self.unary()? {
                Expr::Num(v) => Expr::Num(-v),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let Some(c) = self.peek() else {
            return Err(self.error("unexpected end of expression"));
        };
        if c == '(' {
            self.pos += 1;
            let e = self.comparison()?;
            self.expect(")")?;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                self.pos += 1;
            }
            let ident = &self.src[start..self.pos];
            if self.eat("(") {
                let a = self.comparison()?;
                self.expect(",")?;
                let b = self.comparison()?;
                self.expect(")")?;
                let (a, b) = (Box::new(a), Box::new(b));
                return match ident {
                    "min" => Ok(Expr::Min(a, b)),
                    "max" => Ok(Expr::Max(a, b)),
                    "pow" => Ok(Expr::Pow(a, b)),
                    _ => match self.scope.growth.iter().position(|g| g == ident) {
                        Some(i) => Ok(Expr::Growth(i, a, b)),
                        None => {
                            self.pos = start;
                            Err(self.error(format!("undeclared function '{ident}'")))
                        }
                    },
                };
            }
            if let Some(i) = self.scope.params.iter().position(|p| p == ident) {
                return Ok(Expr::Param(i));
            }
            if let Some(i) = self.scope.constants.iter().position(|p| p == ident) {
                return Ok(Expr::Const(i));
            }
            self.pos = start;
            return Err(self.error(format!("undeclared identifier '{ident}'")));
        }
        Err(self.error(format!("unexpected '{c}'")))
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mut q = self.pos + 1;
            if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                q += 1;
            }
            if q < bytes.len() && bytes[q].is_ascii_digit() {
                while q < bytes.len() && bytes[q].is_ascii_digit() {
                    q += 1;
                }
                self.pos = q;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map(Expr::Num).map_err(|_| {
            self.pos = start;
            self.error(format!("invalid number '{text}'"))
        })
    }
}
