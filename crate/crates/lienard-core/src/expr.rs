//! Arithmetic expression language for problem configuration.
//!
//! Config files define the problem data p(t), f(x), g(x), h(t) as quoted
//! strings in this small language. Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*      left-associative
//! product := unary (('*' | '/') unary)*          left-associative
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?                   right-associative
//! atom    := number | name '(' sum ')' | name | '(' sum ')'
//! ```
//!
//! so `2^3^2 = 512` and `-x^2 = -(x^2)`. Calls take a single argument and
//! are limited to `sin, cos, exp, log, abs, sqrt`. The name `pi` is a
//! predefined constant; `e` is deliberately not (it is a common name for
//! a forcing term — write `exp(1)`). Implicit multiplication is rejected:
//! `2x` is a syntax error, not `2*x`.
//!
//! Parsing and evaluation are pure; [`Expr`] values are immutable and can
//! be shared freely across threads.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::math;

/// Token classes produced by [`tokenize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Number,
    Ident,
    Op,
    Paren,
    Comma,
}

/// One lexical token with its byte offset in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub pos: usize,
}

/// Binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Built-in single-argument functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Expression tree. Symbols keep the byte offset of their first source
/// occurrence so validation reports can point at them.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var { name: String, pos: usize },
    Neg(Box<Expr>),
    Bin { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { func: Func, arg: Box<Expr> },
}

/// Errors from lexing, parsing and checked evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprError {
    /// Character outside the token alphabet.
    Lex { offset: usize, found: char },
    /// Malformed token stream.
    Syntax { offset: usize, message: String },
    /// A symbol had no binding at evaluation time.
    Unbound { name: String },
    /// Domain violation: log of a non-positive value, division by zero,
    /// zero to a negative power, and similar.
    Domain { message: String },
}

impl core::fmt::Display for ExprError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ExprError::Lex { offset, found } => {
                write!(f, "lex error at offset {offset}: unexpected character '{found}'")
            }
            ExprError::Syntax { offset, message } => {
                write!(f, "syntax error at offset {offset}: {message}")
            }
            ExprError::Unbound { name } => write!(f, "unbound symbol '{name}'"),
            ExprError::Domain { message } => write!(f, "domain error: {message}"),
        }
    }
}

impl core::error::Error for ExprError {}

/// Splits `source` into tokens. Whitespace separates tokens and is
/// dropped; any other character outside the alphabet is a `Lex` error at
/// its byte offset.
pub fn tokenize(source: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // optional exponent part: e or E, optional sign, digits
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
                let lexeme = &source[start..i];
                if lexeme == "." {
                    return Err(ExprError::Lex { offset: start, found: '.' });
                }
                tokens.push(Token {
                    kind: TokenKind::Number,
                    lexeme: lexeme.to_string(),
                    pos: start,
                });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident,
                    lexeme: source[start..i].to_string(),
                    pos: start,
                });
            }
            '+' | '-' | '*' | '/' | '^' => {
                tokens.push(Token {
                    kind: TokenKind::Op,
                    lexeme: c.to_string(),
                    pos: i,
                });
                i += 1;
            }
            '(' | ')' => {
                tokens.push(Token {
                    kind: TokenKind::Paren,
                    lexeme: c.to_string(),
                    pos: i,
                });
                i += 1;
            }
            ',' => {
                tokens.push(Token {
                    kind: TokenKind::Comma,
                    lexeme: c.to_string(),
                    pos: i,
                });
                i += 1;
            }
            _ => return Err(ExprError::Lex { offset: i, found: c }),
        }
    }
    Ok(tokens)
}

/// Parses a token stream into an expression tree.
pub fn parse(tokens: &[Token]) -> Result<Expr, ExprError> {
    let mut p = Parser { tokens, idx: 0 };
    let expr = p.sum()?;
    if let Some(t) = p.peek() {
        let hint = if t.kind == TokenKind::Number || t.kind == TokenKind::Ident {
            " (implicit multiplication is not supported)"
        } else {
            ""
        };
        return Err(ExprError::Syntax {
            offset: t.pos,
            message: format!("unexpected '{}'{hint}", t.lexeme),
        });
    }
    Ok(expr)
}

struct Parser<'a> {
    tokens: &'a [Token],
    idx: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.idx)
    }

    fn advance(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.idx);
        self.idx += 1;
        t
    }

    fn end_offset(&self) -> usize {
        self.tokens
            .last()
            .map(|t| t.pos + t.lexeme.len())
            .unwrap_or(0)
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        while let Some(t) = self.peek() {
            let op = match t.lexeme.as_str() {
                "+" => BinOp::Add,
                "-" => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.product()?;
            lhs = Expr::Bin { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(t) = self.peek() {
            let op = match t.lexeme.as_str() {
                "*" => BinOp::Mul,
                "/" => BinOp::Div,
                _ => break,
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Bin { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if let Some(t) = self.peek() {
            if t.lexeme == "-" {
                self.advance();
                return Ok(Expr::Neg(Box::new(self.unary()?)));
            }
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if let Some(t) = self.peek() {
            if t.lexeme == "^" {
                self.advance();
                // exponent recurses through unary, giving right
                // associativity and allowing 2^-3
                let exponent = self.unary()?;
                return Ok(Expr::Bin {
                    op: BinOp::Pow,
                    lhs: Box::new(base),
                    rhs: Box::new(exponent),
                });
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let t = match self.advance() {
            Some(t) => t,
            None => {
                return Err(ExprError::Syntax {
                    offset: self.end_offset(),
                    message: "expected a value".to_string(),
                })
            }
        };
        match t.kind {
            TokenKind::Number => t.lexeme.parse::<f64>().map(Expr::Const).map_err(|_| {
                ExprError::Syntax {
                    offset: t.pos,
                    message: format!("invalid number '{}'", t.lexeme),
                }
            }),
            TokenKind::Ident => {
                let is_call = self.peek().map(|n| n.lexeme == "(").unwrap_or(false);
                if is_call {
                    let func = Func::from_name(&t.lexeme).ok_or_else(|| ExprError::Syntax {
                        offset: t.pos,
                        message: format!("unknown function '{}'", t.lexeme),
                    })?;
                    self.advance(); // consume '('
                    let arg = self.sum()?;
                    self.expect_close()?;
                    return Ok(Expr::Call { func, arg: Box::new(arg) });
                }
                if t.lexeme == "pi" {
                    return Ok(Expr::Const(core::f64::consts::PI));
                }
                Ok(Expr::Var { name: t.lexeme.clone(), pos: t.pos })
            }
            TokenKind::Paren if t.lexeme == "(" => {
                let inner = self.sum()?;
                self.expect_close()?;
                Ok(inner)
            }
            _ => Err(ExprError::Syntax {
                offset: t.pos,
                message: format!("unexpected '{}'", t.lexeme),
            }),
        }
    }

    fn expect_close(&mut self) -> Result<(), ExprError> {
        match self.advance() {
            Some(t) if t.lexeme == ")" => Ok(()),
            Some(t) => Err(ExprError::Syntax {
                offset: t.pos,
                message: format!("expected ')', found '{}'", t.lexeme),
            }),
            None => Err(ExprError::Syntax {
                offset: self.end_offset(),
                message: "unbalanced parenthesis".to_string(),
            }),
        }
    }
}

/// Report produced by [`Expr::validate`]: distinct symbols outside the
/// allowed set, with the byte offset of their first occurrence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub offenders: Vec<(String, usize)>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.offenders.is_empty()
    }
}

impl core::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        write!(f, "unknown symbols:")?;
        for (name, pos) in &self.offenders {
            write!(f, " '{name}' (offset {pos})")?;
        }
        Ok(())
    }
}

impl Expr {
    /// Tokenizes and parses `source` in one step.
    pub fn parse_str(source: &str) -> Result<Expr, ExprError> {
        parse(&tokenize(source)?)
    }

    /// Checked recursive evaluation against name/value bindings.
    ///
    /// Domain violations (log of a non-positive value, division by zero,
    /// `0^negative`, square root of a negative, a negative base raised to
    /// a fractional power) are reported as errors instead of silently
    /// producing NaN or infinities.
    pub fn evaluate(&self, bindings: &[(&str, f64)]) -> Result<f64, ExprError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var { name, .. } => bindings
                .iter()
                .find(|(n, _)| *n == name.as_str())
                .map(|(_, v)| *v)
                .ok_or_else(|| ExprError::Unbound { name: name.clone() }),
            Expr::Neg(inner) => Ok(-inner.evaluate(bindings)?),
            Expr::Bin { op, lhs, rhs } => {
                let a = lhs.evaluate(bindings)?;
                let b = rhs.evaluate(bindings)?;
                eval_bin(*op, a, b)
            }
            Expr::Call { func, arg } => {
                let x = arg.evaluate(bindings)?;
                eval_call(*func, x)
            }
        }
    }

    /// Checks that every symbol of the expression is in `allowed`.
    pub fn validate(&self, allowed: &[&str]) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (name, pos) in self.variables() {
            if !allowed.contains(&name.as_str())
                && !report.offenders.iter().any(|(n, _)| *n == name)
            {
                report.offenders.push((name, pos));
            }
        }
        report
    }

    /// Distinct symbols with the byte offset of their first occurrence,
    /// in source order.
    pub fn variables(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        self.collect_vars(&mut out);
        out.sort_by_key(|(_, pos)| *pos);
        let mut seen: Vec<String> = Vec::new();
        out.retain(|(name, _)| {
            if seen.iter().any(|s| s == name) {
                false
            } else {
                seen.push(name.clone());
                true
            }
        });
        out
    }

    fn collect_vars(&self, out: &mut Vec<(String, usize)>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var { name, pos } => out.push((name.clone(), *pos)),
            Expr::Neg(inner) => inner.collect_vars(out),
            Expr::Bin { lhs, rhs, .. } => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Expr::Call { arg, .. } => arg.collect_vars(out),
        }
    }

    /// Resolves symbols to slots of `vars`, for fast repeated evaluation.
    pub fn compile(&self, vars: &[&str]) -> Result<Compiled, ExprError> {
        Ok(Compiled { root: self.compile_node(vars)? })
    }

    fn compile_node(&self, vars: &[&str]) -> Result<CNode, ExprError> {
        Ok(match self {
            Expr::Const(c) => CNode::Const(*c),
            Expr::Var { name, .. } => {
                let slot = vars
                    .iter()
                    .position(|v| *v == name.as_str())
                    .ok_or_else(|| ExprError::Unbound { name: name.clone() })?;
                CNode::Slot(slot)
            }
            Expr::Neg(inner) => CNode::Neg(Box::new(inner.compile_node(vars)?)),
            Expr::Bin { op, lhs, rhs } => CNode::Bin {
                op: *op,
                lhs: Box::new(lhs.compile_node(vars)?),
                rhs: Box::new(rhs.compile_node(vars)?),
            },
            Expr::Call { func, arg } => CNode::Call {
                func: *func,
                arg: Box::new(arg.compile_node(vars)?),
            },
        })
    }

    // Precedence used by the canonical printer. Negative constants print
    // with a leading minus, so they share the unary-minus level.
    fn prec(&self) -> u8 {
        match self {
            Expr::Const(c) if *c < 0.0 => 3,
            Expr::Const(_) | Expr::Var { .. } | Expr::Call { .. } => 5,
            Expr::Neg(_) => 3,
            Expr::Bin { op, .. } => match op {
                BinOp::Add | BinOp::Sub => 1,
                BinOp::Mul | BinOp::Div => 2,
                BinOp::Pow => 4,
            },
        }
    }
}

fn eval_bin(op: BinOp, a: f64, b: f64) -> Result<f64, ExprError> {
    match op {
        BinOp::Add => Ok(a + b),
        BinOp::Sub => Ok(a - b),
        BinOp::Mul => Ok(a * b),
        BinOp::Div => {
            if b == 0.0 {
                Err(ExprError::Domain { message: format!("division by zero ({a:e}/0)") })
            } else {
                Ok(a / b)
            }
        }
        BinOp::Pow => {
            if a == 0.0 && b < 0.0 {
                return Err(ExprError::Domain {
                    message: format!("zero raised to negative power {b:e}"),
                });
            }
            let v = math::pow(a, b);
            if v.is_nan() && !a.is_nan() && !b.is_nan() {
                return Err(ExprError::Domain {
                    message: format!("{a:e}^{b:e} is undefined"),
                });
            }
            Ok(v)
        }
    }
}

fn eval_call(func: Func, x: f64) -> Result<f64, ExprError> {
    match func {
        Func::Sin => Ok(math::sin(x)),
        Func::Cos => Ok(math::cos(x)),
        Func::Exp => Ok(math::exp(x)),
        Func::Abs => Ok(x.abs()),
        Func::Log => {
            if x <= 0.0 {
                Err(ExprError::Domain { message: format!("log of non-positive value {x:e}") })
            } else {
                Ok(math::log(x))
            }
        }
        Func::Sqrt => {
            if x < 0.0 {
                Err(ExprError::Domain { message: format!("sqrt of negative value {x:e}") })
            } else {
                Ok(math::sqrt(x))
            }
        }
    }
}

impl core::fmt::Display for Expr {
    /// Canonical text form: minimal parentheses under the grammar above,
    /// constants printed in shortest round-trip notation. Re-parsing the
    /// output evaluates identically (bit for bit).
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var { name, .. } => write!(f, "{name}"),
            Expr::Neg(inner) => {
                if inner.prec() < 3 {
                    write!(f, "-({inner})")
                } else {
                    write!(f, "-{inner}")
                }
            }
            Expr::Bin { op, lhs, rhs } => {
                let my = self.prec();
                // ^ is right-associative: parenthesize a compound base;
                // + - * / are left-associative: parenthesize an equal-
                // precedence right operand.
                let (lp, rp) = match op {
                    BinOp::Pow => (lhs.prec() <= my, rhs.prec() < my),
                    _ => (lhs.prec() < my, rhs.prec() <= my),
                };
                if lp {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if rp {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
            Expr::Call { func, arg } => write!(f, "{}({arg})", func.name()),
        }
    }
}

/// Slot-resolved expression for hot loops.
///
/// Evaluation is plain IEEE arithmetic with no domain checks: division
/// by zero and friends produce infinities or NaN, which callers are
/// expected to screen with `is_finite`. Guarded evaluation is the job of
/// [`Expr::evaluate`] and of the operator layer's admissibility guard.
#[derive(Debug, Clone)]
pub struct Compiled {
    root: CNode,
}

#[derive(Debug, Clone)]
enum CNode {
    Const(f64),
    Slot(usize),
    Neg(Box<CNode>),
    Bin { op: BinOp, lhs: Box<CNode>, rhs: Box<CNode> },
    Call { func: Func, arg: Box<CNode> },
}

impl Compiled {
    pub fn eval(&self, args: &[f64]) -> f64 {
        eval_cnode(&self.root, args)
    }
}

fn eval_cnode(node: &CNode, args: &[f64]) -> f64 {
    match node {
        CNode::Const(c) => *c,
        CNode::Slot(i) => args[*i],
        CNode::Neg(inner) => -eval_cnode(inner, args),
        CNode::Bin { op, lhs, rhs } => {
            let a = eval_cnode(lhs, args);
            let b = eval_cnode(rhs, args);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => math::pow(a, b),
            }
        }
        CNode::Call { func, arg } => {
            let x = eval_cnode(arg, args);
            match func {
                Func::Sin => math::sin(x),
                Func::Cos => math::cos(x),
                Func::Exp => math::exp(x),
                Func::Log => math::log(x),
                Func::Abs => x.abs(),
                Func::Sqrt => math::sqrt(x),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(src: &str) -> Expr {
        Expr::parse_str(src).unwrap_or_else(|e| panic!("parse '{src}': {e}"))
    }

    #[test]
    fn tokenize_basic() {
        let toks = tokenize("1/x^2").unwrap();
        let lex: Vec<&str> = toks.iter().map(|t| t.lexeme.as_str()).collect();
        assert_eq!(lex, ["1", "/", "x", "^", "2"]);
        assert_eq!(
            toks.iter().map(|t| t.kind).collect::<Vec<_>>(),
            [
                TokenKind::Number,
                TokenKind::Op,
                TokenKind::Ident,
                TokenKind::Op,
                TokenKind::Number
            ]
        );
    }

    #[test]
    fn tokenize_empty_and_positions() {
        assert!(tokenize("").unwrap().is_empty());
        let toks = tokenize("3 + sin(2*pi*t)").unwrap();
        // positions strictly increase and skip only whitespace
        assert!(toks.windows(2).all(|w| w[0].pos < w[1].pos));
        let rebuilt: String = toks.iter().map(|t| t.lexeme.as_str()).collect();
        assert_eq!(rebuilt, "3+sin(2*pi*t)");
        assert!(toks.iter().any(|t| t.lexeme == "pi" && t.kind == TokenKind::Ident));
    }

    #[test]
    fn tokenize_number_forms() {
        for (src, val) in [("1.5", 1.5), ("2e3", 2000.0), ("1.25e-2", 0.0125), (".5", 0.5)] {
            let e = parse_ok(src);
            assert_eq!(e.evaluate(&[]).unwrap(), val, "{src}");
        }
    }

    #[test]
    fn lex_error_has_offset() {
        match tokenize("1 + $x") {
            Err(ExprError::Lex { offset, found }) => {
                assert_eq!(offset, 4);
                assert_eq!(found, '$');
            }
            other => panic!("expected lex error, got {other:?}"),
        }
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(parse_ok("2^3^2").evaluate(&[]).unwrap(), 512.0);
    }

    #[test]
    fn unary_minus_binds_below_power() {
        let e = parse_ok("-x^2");
        assert_eq!(e.evaluate(&[("x", 3.0)]).unwrap(), -9.0);
        assert_eq!(parse_ok("(-x)^2").evaluate(&[("x", 3.0)]).unwrap(), 9.0);
        assert_eq!(parse_ok("2^-3").evaluate(&[]).unwrap(), 0.125);
    }

    #[test]
    fn dangling_operator_offset() {
        match Expr::parse_str("1+*2") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn implicit_multiplication_rejected() {
        assert!(matches!(Expr::parse_str("2x"), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expr::parse_str("2 x"), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn unbalanced_and_unknown() {
        assert!(matches!(Expr::parse_str("(1+2"), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expr::parse_str("foo(1)"), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expr::parse_str(""), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expr::parse_str("1,2"), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn evaluate_examples() {
        let e = parse_ok("sigma/x^mu");
        let v = e
            .evaluate(&[("sigma", 2.0), ("mu", 3.0), ("x", 2.0)])
            .unwrap();
        assert_eq!(v, 0.25);

        let e = parse_ok("3+sin(2*pi*t)");
        assert_eq!(e.evaluate(&[("t", 0.0)]).unwrap(), 3.0);

        let e = parse_ok("1/x");
        assert!(matches!(
            e.evaluate(&[("x", 0.0)]),
            Err(ExprError::Domain { .. })
        ));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            parse_ok("log(x)").evaluate(&[("x", -1.0)]),
            Err(ExprError::Domain { .. })
        ));
        assert!(matches!(
            parse_ok("log(0)").evaluate(&[]),
            Err(ExprError::Domain { .. })
        ));
        assert!(matches!(
            parse_ok("0^(-1)").evaluate(&[]),
            Err(ExprError::Domain { .. })
        ));
        assert!(matches!(
            parse_ok("sqrt(0-2)").evaluate(&[]),
            Err(ExprError::Domain { .. })
        ));
        assert!(matches!(
            parse_ok("(0-2)^0.5").evaluate(&[]),
            Err(ExprError::Domain { .. })
        ));
    }

    #[test]
    fn unbound_symbol() {
        assert_eq!(
            parse_ok("1/u").evaluate(&[("x", 1.0)]),
            Err(ExprError::Unbound { name: "u".into() })
        );
    }

    #[test]
    fn validate_reports_offenders() {
        assert!(parse_ok("1/x").validate(&["x"]).is_ok());
        assert!(parse_ok("sigma/x^mu").validate(&["x", "sigma", "mu"]).is_ok());
        let report = parse_ok("1/u").validate(&["x"]);
        assert_eq!(report.offenders, vec![("u".to_string(), 2)]);
    }

    #[test]
    fn pi_is_predefined_e_is_not() {
        assert!((parse_ok("pi").evaluate(&[]).unwrap() - core::f64::consts::PI).abs() == 0.0);
        assert!(matches!(
            parse_ok("e").evaluate(&[]),
            Err(ExprError::Unbound { .. })
        ));
    }

    #[test]
    fn display_round_trips() {
        for src in [
            "1 + 2 * 3",
            "(1 + 2) * 3",
            "2^3^2",
            "-x^2",
            "(-x)^2",
            "a - (b - c)",
            "a - b - c",
            "1/(x*y)",
            "sin(2*pi*t) + exp(-t)",
            "-(a + b)",
        ] {
            let e = parse_ok(src);
            let printed = alloc::format!("{e}");
            let re = parse_ok(&printed);
            let bindings = [
                ("x", 1.7),
                ("y", -0.3),
                ("t", 0.25),
                ("a", 2.0),
                ("b", 5.0),
                ("c", -1.5),
            ];
            let v1 = e.evaluate(&bindings).unwrap();
            let v2 = re.evaluate(&bindings).unwrap();
            assert_eq!(v1.to_bits(), v2.to_bits(), "{src} -> {printed}");
        }
    }

    #[test]
    fn compiled_matches_checked() {
        let e = parse_ok("sigma/x^mu + sin(x)");
        let c = e.compile(&["x", "sigma", "mu"]).unwrap();
        for x in [0.3, 1.0, 2.5, 7.0] {
            let checked = e
                .evaluate(&[("x", x), ("sigma", 2.0), ("mu", 1.5)])
                .unwrap();
            let fast = c.eval(&[x, 2.0, 1.5]);
            assert_eq!(checked.to_bits(), fast.to_bits());
        }
    }
}
