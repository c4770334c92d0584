//! Symbolic differentiation and light simplification.

use crate::error::{Error, Result};

use super::{BinaryOp, Expression, UnaryOp, Var};

/// Partial derivative of `expr` with respect to `var`.
///
/// `abs`, `min` and `max` are rejected whenever the subtree actually depends
/// on `var`; so is `a^b` with `var` occurring in the exponent, since the
/// language has no logarithm to express the derivative.
pub fn differentiate(expr: &Expression, var: Var) -> Result<Expression> {
    Ok(diff(expr, var)?.simplify())
}

fn diff(expr: &Expression, var: Var) -> Result<Expression> {
    if !expr.depends_on(var) {
        return Ok(Expression::Constant(0.0));
    }
    let e = match expr {
        Expression::Constant(_) => Expression::Constant(0.0),
        Expression::Variable(_) => Expression::Constant(1.0),
        Expression::Unary(op, inner) => {
            let di = diff(inner, var)?;
            match op {
                UnaryOp::Neg => -di,
                UnaryOp::Sin => {
                    Expression::unary(UnaryOp::Cos, (**inner).clone()) * di
                }
                UnaryOp::Cos => {
                    -(Expression::unary(UnaryOp::Sin, (**inner).clone()) * di)
                }
                UnaryOp::Exp => {
                    Expression::unary(UnaryOp::Exp, (**inner).clone()) * di
                }
                UnaryOp::Abs => {
                    return Err(Error::NonDifferentiable {
                        node: format!("abs({inner})"),
                    })
                }
            }
        }
        Expression::Binary(op, a, b) => {
            match op {
                BinaryOp::Add => diff(a, var)? + diff(b, var)?,
                BinaryOp::Sub => diff(a, var)? - diff(b, var)?,
                BinaryOp::Mul => {
                    diff(a, var)? * (**b).clone() + (**a).clone() * diff(b, var)?
                }
                BinaryOp::Div => {
                    let num =
                        diff(a, var)? * (**b).clone() - (**a).clone() * diff(b, var)?;
                    let den = Expression::binary(
                        BinaryOp::Mul,
                        (**b).clone(),
                        (**b).clone(),
                    );
                    Expression::binary(BinaryOp::Div, num, den)
                }
                BinaryOp::Pow => {
                    if b.depends_on(var) {
                        return Err(Error::NonDifferentiable {
                            node: format!("{expr} (variable exponent)"),
                        });
                    }
                    // d(a^b) = b * a^(b-1) * a' for an exponent free of var.
                    let lowered = Expression::binary(
                        BinaryOp::Pow,
                        (**a).clone(),
                        (**b).clone() - Expression::Constant(1.0),
                    );
                    (**b).clone() * lowered * diff(a, var)?
                }
                BinaryOp::Min | BinaryOp::Max => {
                    return Err(Error::NonDifferentiable {
                        node: format!("{expr}"),
                    })
                }
            }
        }
    };
    Ok(e)
}

/// Bottom-up constant folding plus the usual identities (`x+0`, `x*1`,
/// `x*0`, `x^1`, ...). Constant subtrees fold only when the result is
/// finite.
pub fn simplify(expr: Expression) -> Expression {
    match expr {
        Expression::Constant(_) | Expression::Variable(_) => expr,
        Expression::Unary(op, inner) => {
            let inner = simplify(*inner);
            if let Expression::Constant(c) = inner {
                let folded = Expression::Constant(match op {
                    UnaryOp::Neg => -c,
                    UnaryOp::Sin => c.sin(),
                    UnaryOp::Cos => c.cos(),
                    UnaryOp::Exp => c.exp(),
                    UnaryOp::Abs => c.abs(),
                });
                if let Expression::Constant(v) = folded {
                    if v.is_finite() {
                        return folded;
                    }
                }
                return Expression::unary(op, inner);
            }
            if op == UnaryOp::Neg {
                if let Expression::Unary(UnaryOp::Neg, e) = inner {
                    return *e;
                }
            }
            Expression::unary(op, inner)
        }
        Expression::Binary(op, a, b) => {
            let a = simplify(*a);
            let b = simplify(*b);
            if let (Expression::Constant(x), Expression::Constant(z)) = (&a, &b) {
                let v = match op {
                    BinaryOp::Add => x + z,
                    BinaryOp::Sub => x - z,
                    BinaryOp::Mul => x * z,
                    BinaryOp::Div => x / z,
                    BinaryOp::Pow => x.powf(*z),
                    BinaryOp::Min => x.min(*z),
                    BinaryOp::Max => x.max(*z),
                };
                if v.is_finite() {
                    return Expression::Constant(v);
                }
            }
            match (op, &a, &b) {
                (BinaryOp::Add, Expression::Constant(c), _) if *c == 0.0 => b,
                (BinaryOp::Add, _, Expression::Constant(c)) if *c == 0.0 => a,
                (BinaryOp::Sub, _, Expression::Constant(c)) if *c == 0.0 => a,
                (BinaryOp::Sub, Expression::Constant(c), _) if *c == 0.0 => {
                    simplify(-b)
                }
                (BinaryOp::Mul, Expression::Constant(c), _) if *c == 0.0 => {
                    Expression::Constant(0.0)
                }
                (BinaryOp::Mul, _, Expression::Constant(c)) if *c == 0.0 => {
                    Expression::Constant(0.0)
                }
                (BinaryOp::Mul, Expression::Constant(c), _) if *c == 1.0 => b,
                (BinaryOp::Mul, _, Expression::Constant(c)) if *c == 1.0 => a,
                (BinaryOp::Div, _, Expression::Constant(c)) if *c == 1.0 => a,
                (BinaryOp::Div, Expression::Constant(c), _) if *c == 0.0 => {
                    Expression::Constant(0.0)
                }
                (BinaryOp::Pow, _, Expression::Constant(c)) if *c == 1.0 => a,
                (BinaryOp::Pow, _, Expression::Constant(c)) if *c == 0.0 => {
                    Expression::Constant(1.0)
                }
                _ => Expression::binary(op, a, b),
            }
        }
    }
}
