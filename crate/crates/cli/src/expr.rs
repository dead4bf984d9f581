//! Closed-form expressions for histories and forcing terms.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("+" | "-") unary | power ;
//! power   = primary [ "^" unary ] ;
//! primary = number | variable | constant | func "(" expr ")" | "(" expr ")" ;
//! func    = "sin" | "cos" | "exp" ;
//! ```
//!
//! Exponents must be free of variables. Powers associate to the right and
//! bind tighter than unary minus, so `-x^2` is `-(x^2)`.

use std::fmt;

/// Independent variables an expression may refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, f64),
    Call(Func, Box<Node>),
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.message, self.offset)
    }
}

impl std::error::Error for ParseError {}

/// A parsed expression in `t` and possibly `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    /// Parses `src`, accepting only the listed variables.
    pub fn parse(src: &str, vars: &[Var]) -> Result<Expr, ParseError> {
        let mut p = Parser { src, pos: 0, vars };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr {
            root,
            source: src.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        eval(&self.root, t, x)
    }

    /// Symbolic partial derivative.
    pub fn derivative(&self, var: Var) -> Expr {
        Expr {
            root: simplify(diff(&self.root, var)),
            source: format!("d/d{}({})", var.name(), self.source),
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        depends(&self.root, var)
    }
}

fn eval(n: &Node, t: f64, x: f64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::T) => t,
        Node::Var(Var::X) => x,
        Node::Neg(a) => -eval(a, t, x),
        Node::Add(a, b) => eval(a, t, x) + eval(b, t, x),
        Node::Sub(a, b) => eval(a, t, x) - eval(b, t, x),
        Node::Mul(a, b) => eval(a, t, x) * eval(b, t, x),
        Node::Div(a, b) => eval(a, t, x) / eval(b, t, x),
        Node::Pow(a, p) => {
            let base = eval(a, t, x);
            if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
                base.powi(*p as i32)
            } else {
                base.powf(*p)
            }
        }
        Node::Call(f, a) => {
            let v = eval(a, t, x);
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
            }
        }
    }
}

fn depends(n: &Node, var: Var) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(v) => *v == var,
        Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => depends(a, var),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            depends(a, var) || depends(b, var)
        }
    }
}

fn bx(n: Node) -> Box<Node> {
    Box::new(n)
}

fn diff(n: &Node, var: Var) -> Node {
    use Node::*;
    match n {
        Num(_) => Num(0.0),
        Var(v) => Num(if *v == var { 1.0 } else { 0.0 }),
        Neg(a) => Neg(bx(diff(a, var))),
        Add(a, b) => Add(bx(diff(a, var)), bx(diff(b, var))),
        Sub(a, b) => Sub(bx(diff(a, var)), bx(diff(b, var))),
        Mul(a, b) => Add(
            bx(Mul(bx(diff(a, var)), b.clone())),
            bx(Mul(a.clone(), bx(diff(b, var)))),
        ),
        Div(a, b) => Div(
            bx(Sub(
                bx(Mul(bx(diff(a, var)), b.clone())),
                bx(Mul(a.clone(), bx(diff(b, var)))),
            )),
            bx(Pow(b.clone(), 2.0)),
        ),
        Pow(a, p) => Mul(
            bx(Mul(bx(Num(*p)), bx(Pow(a.clone(), p - 1.0)))),
            bx(diff(a, var)),
        ),
        Call(f, a) => {
            let outer = match f {
                Func::Sin => Call(Func::Cos, a.clone()),
                Func::Cos => Neg(bx(Call(Func::Sin, a.clone()))),
                Func::Exp => Call(Func::Exp, a.clone()),
            };
            Mul(bx(outer), bx(diff(a, var)))
        }
    }
}

/// Folds constants and drops zero and unit factors.
fn simplify(n: Node) -> Node {
    use Node::*;
    match n {
        Neg(a) => match simplify(*a) {
            Num(v) => Num(-v),
            a => Neg(bx(a)),
        },
        Add(a, b) => match (simplify(*a), simplify(*b)) {
            (Num(x), Num(y)) => Num(x + y),
            (Num(z), e) | (e, Num(z)) if z == 0.0 => e,
            (a, b) => Add(bx(a), bx(b)),
        },
        Sub(a, b) => match (simplify(*a), simplify(*b)) {
            (Num(x), Num(y)) => Num(x - y),
            (e, Num(0.0)) => e,
            (Num(0.0), e) => Neg(bx(e)),
            (a, b) => Sub(bx(a), bx(b)),
        },
        Mul(a, b) => match (simplify(*a), simplify(*b)) {
            (Num(x), Num(y)) => Num(x * y),
            (Num(0.0), _) | (_, Num(0.0)) => Num(0.0),
            (Num(1.0), e) | (e, Num(1.0)) => e,
            (a, b) => Mul(bx(a), bx(b)),
        },
        Div(a, b) => match (simplify(*a), simplify(*b)) {
            (Num(0.0), _) => Num(0.0),
            (e, Num(1.0)) => e,
            (a, b) => Div(bx(a), bx(b)),
        },
        Pow(a, p) => match simplify(*a) {
            _ if p == 0.0 => Num(1.0),
            e if p == 1.0 => e,
            Num(v) => Num(v.powf(p)),
            e => Pow(bx(e), p),
        },
        Call(f, a) => Call(f, bx(simplify(*a))),
        leaf => leaf,
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    vars: &'a [Var],
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(bx(lhs), bx(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(bx(lhs), bx(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(bx(lhs), bx(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(bx(lhs), bx(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat('-') {
            Ok(Node::Neg(bx(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let at = self.pos;
        let exponent = self.unary()?;
        if depends(&exponent, Var::T) || depends(&exponent, Var::X) {
            return Err(ParseError {
                offset: at,
                message: "exponent must not contain variables".into(),
            });
        }
        let p = eval(&exponent, 0.0, 0.0);
        if !p.is_finite() {
            return Err(ParseError {
                offset: at,
                message: "exponent is not finite".into(),
            });
        }
        Ok(Node::Pow(bx(base), p))
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.identifier(),
            Some(c) => Err(self.error(format!("unexpected character '{c}'"))),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let bytes = self.rest().as_bytes();
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
        let text = &self.rest()[..end];
        let v: f64 = text
            .parse()
            .map_err(|_| self.error(format!("malformed number '{text}'")))?;
        self.pos += end;
        Ok(Node::Num(v))
    }

    fn identifier(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.rest().len());
        let name = &self.src[start..start + len];
        self.pos += len;
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        };
        if let Some(f) = func {
            if !self.eat('(') {
                return Err(self.error(format!("expected '(' after '{name}'")));
            }
            let arg = self.expr()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(Node::Call(f, bx(arg)));
        }
        let unknown = || ParseError {
            offset: start,
            message: format!("unknown identifier '{name}'"),
        };
        match name {
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            "e" => Ok(Node::Num(std::f64::consts::E)),
            "t" if self.vars.contains(&Var::T) => Ok(Node::Var(Var::T)),
            "x" if self.vars.contains(&Var::X) => Ok(Node::Var(Var::X)),
            _ => Err(unknown()),
        }
    }
}
