//! Boolean expressions for cell functions: identifiers, `&`, `|`, `^`,
//! `!`, parentheses. Used by function verification and gate-level
//! simulation.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoolExpr {
    Var(String),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Xor(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn eval<F: Fn(&str) -> Option<bool>>(&self, env: &F) -> Result<bool> {
        Ok(match self {
            BoolExpr::Var(n) => env(n)
                .ok_or_else(|| Error::Structure(format!("unbound pin `{n}` in function")))?,
            BoolExpr::Not(e) => !e.eval(env)?,
            BoolExpr::And(a, b) => a.eval(env)? && b.eval(env)?,
            BoolExpr::Or(a, b) => a.eval(env)? || b.eval(env)?,
            BoolExpr::Xor(a, b) => a.eval(env)? ^ b.eval(env)?,
        })
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            BoolExpr::Var(n) => {
                out.insert(n.clone());
            }
            BoolExpr::Not(e) => e.collect_vars(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) | BoolExpr::Xor(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Compile to an index-based form for fast repeated evaluation.
    pub fn compile<F: Fn(&str) -> Option<usize>>(&self, lookup: &F) -> Result<CompiledExpr> {
        Ok(match self {
            BoolExpr::Var(n) => CompiledExpr::Var(
                lookup(n).ok_or_else(|| Error::Structure(format!("unbound pin `{n}`")))?,
            ),
            BoolExpr::Not(e) => CompiledExpr::Not(Box::new(e.compile(lookup)?)),
            BoolExpr::And(a, b) => {
                CompiledExpr::And(Box::new(a.compile(lookup)?), Box::new(b.compile(lookup)?))
            }
            BoolExpr::Or(a, b) => {
                CompiledExpr::Or(Box::new(a.compile(lookup)?), Box::new(b.compile(lookup)?))
            }
            BoolExpr::Xor(a, b) => {
                CompiledExpr::Xor(Box::new(a.compile(lookup)?), Box::new(b.compile(lookup)?))
            }
        })
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::Var(n) => write!(f, "{n}"),
            BoolExpr::Not(e) => write!(f, "!{e}"),
            BoolExpr::And(a, b) => write!(f, "({a} & {b})"),
            BoolExpr::Or(a, b) => write!(f, "({a} | {b})"),
            BoolExpr::Xor(a, b) => write!(f, "({a} ^ {b})"),
        }
    }
}

/// Index-based expression over a value slice.
#[derive(Debug, Clone)]
pub enum CompiledExpr {
    Var(usize),
    Not(Box<CompiledExpr>),
    And(Box<CompiledExpr>, Box<CompiledExpr>),
    Or(Box<CompiledExpr>, Box<CompiledExpr>),
    Xor(Box<CompiledExpr>, Box<CompiledExpr>),
}

impl CompiledExpr {
    pub fn eval(&self, values: &[bool]) -> bool {
        match self {
            CompiledExpr::Var(i) => values[*i],
            CompiledExpr::Not(e) => !e.eval(values),
            CompiledExpr::And(a, b) => a.eval(values) && b.eval(values),
            CompiledExpr::Or(a, b) => a.eval(values) || b.eval(values),
            CompiledExpr::Xor(a, b) => a.eval(values) ^ b.eval(values),
        }
    }
}

/// Parse a function expression. Precedence: `!` binds tightest, then
/// `&`, then `^`, then `|`.
pub fn parse_expr(text: &str) -> Result<BoolExpr> {
    let mut p = ExprParser { bytes: text.as_bytes(), pos: 0 };
    let e = p.or_expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(Error::Parse {
            line: 1,
            msg: format!("trailing input in function expression `{text}`"),
        });
    }
    Ok(e)
}

struct ExprParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ExprParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn or_expr(&mut self) -> Result<BoolExpr> {
        let mut lhs = self.xor_expr()?;
        while self.peek() == Some(b'|') {
            self.pos += 1;
            if self.bytes.get(self.pos) == Some(&b'|') {
                self.pos += 1; // tolerate `||`
            }
            let rhs = self.xor_expr()?;
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn xor_expr(&mut self) -> Result<BoolExpr> {
        let mut lhs = self.and_expr()?;
        while self.peek() == Some(b'^') {
            self.pos += 1;
            let rhs = self.and_expr()?;
            lhs = BoolExpr::Xor(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<BoolExpr> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(b'&') {
            self.pos += 1;
            if self.bytes.get(self.pos) == Some(&b'&') {
                self.pos += 1;
            }
            let rhs = self.unary()?;
            lhs = BoolExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<BoolExpr> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                Ok(BoolExpr::Not(Box::new(self.unary()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.or_expr()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Parse { line: 1, msg: "expected `)` in function".into() });
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphanumeric() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric()
                        || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Ok(BoolExpr::Var(
                    std::str::from_utf8(&self.bytes[start..self.pos]).unwrap().to_string(),
                ))
            }
            other => Err(Error::Parse {
                line: 1,
                msg: format!("unexpected token {:?} in function expression", other.map(|c| c as char)),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval2(text: &str, a: bool, b: bool, ci: bool) -> bool {
        let e = parse_expr(text).unwrap();
        e.eval(&|n| match n {
            "A" => Some(a),
            "B" => Some(b),
            "CI" => Some(ci),
            _ => None,
        })
        .unwrap()
    }

    #[test]
    fn full_adder_functions() {
        for bits in 0..8u8 {
            let (a, b, ci) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
            let sum = eval2("(CI ^ (A ^ B))", a, b, ci);
            let co = eval2("((A & B) | (CI & (A | B)))", a, b, ci);
            let total = a as u8 + b as u8 + ci as u8;
            assert_eq!(sum, total & 1 != 0);
            assert_eq!(co, total >= 2);
        }
    }

    #[test]
    fn precedence_and_negation() {
        // ! > & > ^ > |
        let e = parse_expr("!A & B | CI ^ B").unwrap();
        assert_eq!(e.to_string(), "((!A & B) | (CI ^ B))");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_expr("A &&& B").is_err());
        assert!(parse_expr("(A").is_err());
        assert!(parse_expr("A + B").is_err());
    }
}
