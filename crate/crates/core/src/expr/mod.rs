//! Expression language for problem definitions.
//!
//! Dynamics and running costs are small closed-form expressions over state
//! variables `y1..yn` and control variables `u1..um`, with the operators
//! `+ - * / ^` and the functions `sin, cos, exp, abs, min, max`. Parsing
//! and symbolic differentiation live in the submodules.

mod deriv;
mod parser;

use std::fmt;

use crate::error::{Error, Result};

/// A state or control variable. Indices are zero-based internally; the
/// surface syntax is one-based (`y1` is `Var::State(0)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    State(usize),
    Control(usize),
}

impl Var {
    /// Parses `y3` / `u1` style names.
    pub fn from_name(name: &str) -> Result<Var> {
        let err = || {
            Error::InvalidArgument(format!(
                "unknown variable '{name}' (expected y1..yn or u1..um)"
            ))
        };
        let (kind, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let index: usize = digits.parse().map_err(|_| err())?;
        if index == 0 {
            return Err(Error::InvalidArgument(format!(
                "variable indices start at 1, got '{name}'"
            )));
        }
        match kind {
            "y" => Ok(Var::State(index - 1)),
            "u" => Ok(Var::Control(index - 1)),
            _ => Err(err()),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::State(i) => write!(f, "y{}", i + 1),
            Var::Control(j) => write!(f, "u{}", j + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

/// Expression tree. Evaluation is reentrant; trees are immutable.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Constant(f64),
    Variable(Var),
    Unary(UnaryOp, Box<Expression>),
    Binary(BinaryOp, Box<Expression>, Box<Expression>),
}

impl Expression {
    /// Parses source text; see the module docs for the grammar.
    pub fn parse(text: &str) -> Result<Expression> {
        parser::parse(text)
    }

    pub fn constant(c: f64) -> Expression {
        Expression::Constant(c)
    }

    pub fn var(v: Var) -> Expression {
        Expression::Variable(v)
    }

    pub fn unary(op: UnaryOp, e: Expression) -> Expression {
        Expression::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, a: Expression, b: Expression) -> Expression {
        Expression::Binary(op, Box::new(a), Box::new(b))
    }

    /// Evaluates at state `y` and control `u`.
    ///
    /// Variable indices must be covered by the slices; problems validate
    /// this at construction time.
    pub fn eval(&self, y: &[f64], u: &[f64]) -> f64 {
        match self {
            Expression::Constant(c) => *c,
            Expression::Variable(Var::State(i)) => y[*i],
            Expression::Variable(Var::Control(j)) => u[*j],
            Expression::Unary(op, e) => {
                let x = e.eval(y, u);
                match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Abs => x.abs(),
                }
            }
            Expression::Binary(op, a, b) => {
                let x = a.eval(y, u);
                let z = b.eval(y, u);
                match op {
                    BinaryOp::Add => x + z,
                    BinaryOp::Sub => x - z,
                    BinaryOp::Mul => x * z,
                    BinaryOp::Div => x / z,
                    BinaryOp::Pow => x.powf(z),
                    BinaryOp::Min => x.min(z),
                    BinaryOp::Max => x.max(z),
                }
            }
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expression::Constant(_) => false,
            Expression::Variable(v) => *v == var,
            Expression::Unary(_, e) => e.depends_on(var),
            Expression::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Smallest state dimension that covers every `y` variable used.
    pub fn state_dim(&self) -> usize {
        match self {
            Expression::Constant(_) => 0,
            Expression::Variable(Var::State(i)) => i + 1,
            Expression::Variable(Var::Control(_)) => 0,
            Expression::Unary(_, e) => e.state_dim(),
            Expression::Binary(_, a, b) => a.state_dim().max(b.state_dim()),
        }
    }

    /// Smallest control dimension that covers every `u` variable used.
    pub fn control_dim(&self) -> usize {
        match self {
            Expression::Constant(_) => 0,
            Expression::Variable(Var::Control(j)) => j + 1,
            Expression::Variable(Var::State(_)) => 0,
            Expression::Unary(_, e) => e.control_dim(),
            Expression::Binary(_, a, b) => a.control_dim().max(b.control_dim()),
        }
    }

    /// Symbolic partial derivative; `abs`/`min`/`max` and variable
    /// exponents on the differentiation path are rejected.
    pub fn differentiate(&self, var: Var) -> Result<Expression> {
        deriv::differentiate(self, var)
    }

    /// Light constant folding and identity elimination.
    pub fn simplify(self) -> Expression {
        deriv::simplify(self)
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expression) -> u8 {
    match e {
        Expression::Constant(_) | Expression::Variable(_) => PREC_ATOM,
        Expression::Unary(UnaryOp::Neg, _) => PREC_NEG,
        Expression::Unary(_, _) => PREC_ATOM,
        Expression::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => PREC_ADD,
        Expression::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => PREC_MUL,
        Expression::Binary(BinaryOp::Pow, _, _) => PREC_POW,
        Expression::Binary(BinaryOp::Min | BinaryOp::Max, _, _) => PREC_ATOM,
    }
}

impl fmt::Display for Expression {
    /// Prints with enough parentheses that re-parsing reconstructs the exact
    /// evaluation order (right operands of equal precedence stay grouped).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(
            f: &mut fmt::Formatter<'_>,
            e: &Expression,
            parent: u8,
            right: bool,
        ) -> fmt::Result {
            let p = precedence(e);
            let parens = p < parent || (right && p == parent);
            if parens {
                write!(f, "(")?;
            }
            write!(f, "{e}")?;
            if parens {
                write!(f, ")")?;
            }
            Ok(())
        }

        match self {
            Expression::Constant(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    // Negative literals re-parse as unary minus; keep the
                    // grouping explicit.
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expression::Variable(v) => write!(f, "{v}"),
            Expression::Unary(UnaryOp::Neg, e) => {
                write!(f, "-")?;
                child(f, e, PREC_NEG, true)
            }
            Expression::Unary(op, e) => {
                let name = match op {
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                    UnaryOp::Exp => "exp",
                    UnaryOp::Abs => "abs",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({e})")
            }
            Expression::Binary(op, a, b) => match op {
                BinaryOp::Min => write!(f, "min({a}, {b})"),
                BinaryOp::Max => write!(f, "max({a}, {b})"),
                _ => {
                    let (sym, prec) = match op {
                        BinaryOp::Add => ("+", PREC_ADD),
                        BinaryOp::Sub => ("-", PREC_ADD),
                        BinaryOp::Mul => ("*", PREC_MUL),
                        BinaryOp::Div => ("/", PREC_MUL),
                        BinaryOp::Pow => ("^", PREC_POW),
                        _ => unreachable!(),
                    };
                    child(f, a, prec, false)?;
                    write!(f, " {sym} ")?;
                    child(f, b, prec, true)
                }
            },
        }
    }
}

impl std::ops::Add for Expression {
    type Output = Expression;
    fn add(self, rhs: Expression) -> Expression {
        Expression::binary(BinaryOp::Add, self, rhs)
    }
}

impl std::ops::Sub for Expression {
    type Output = Expression;
    fn sub(self, rhs: Expression) -> Expression {
        Expression::binary(BinaryOp::Sub, self, rhs)
    }
}

impl std::ops::Mul for Expression {
    type Output = Expression;
    fn mul(self, rhs: Expression) -> Expression {
        Expression::binary(BinaryOp::Mul, self, rhs)
    }
}

impl std::ops::Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::unary(UnaryOp::Neg, self)
    }
}
