//! Expression AST and its two evaluators: value-only (for grid sampling)
//! and full second-order jets via Taylor arithmetic.

use super::taylor::Taylor2;
use super::{FieldError, Jet2, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Self::Sin),
            "cos" => Some(Self::Cos),
            "exp" => Some(Self::Exp),
            "ln" => Some(Self::Ln),
            "sqrt" => Some(Self::Sqrt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Expr {
    Number(f64),
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
}

impl Expr {
    fn value(&self, x: &[f64]) -> Result<f64, String> {
        Ok(match self {
            Expr::Number(v) => *v,
            Expr::Var(i) => x[*i],
            Expr::Neg(e) => -e.value(x)?,
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.value(x)?, b.value(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err("division by zero".into());
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        let v = a.powf(b);
                        if !v.is_finite() {
                            return Err(format!("{a}^{b} is not finite"));
                        }
                        v
                    }
                }
            }
            Expr::Func(f, e) => {
                let u = e.value(x)?;
                match f {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Exp => u.exp(),
                    Func::Ln => {
                        if u <= 0.0 {
                            return Err(format!("ln of non-positive value {u}"));
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(format!("sqrt of negative value {u}"));
                        }
                        u.sqrt()
                    }
                }
            }
        })
    }

    fn taylor(&self, p: &Point) -> Result<Taylor2, String> {
        let d = p.dim();
        Ok(match self {
            Expr::Number(v) => Taylor2::constant(*v, d),
            Expr::Var(i) => Taylor2::variable(*i, p.as_slice()[*i], d),
            Expr::Neg(e) => e.taylor(p)?.neg(),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.taylor(p)?, b.taylor(p)?);
                match op {
                    BinOp::Add => a.add(&b),
                    BinOp::Sub => a.sub(&b),
                    BinOp::Mul => a.mul(&b),
                    BinOp::Div => a.div(&b)?,
                    BinOp::Pow => a.pow(&b)?,
                }
            }
            Expr::Func(f, e) => {
                let u = e.taylor(p)?;
                match f {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Exp => u.exp(),
                    Func::Ln => u.ln()?,
                    Func::Sqrt => u.sqrt()?,
                }
            }
        })
    }

    pub fn eval_value(&self, p: &Point) -> Result<f64, FieldError> {
        let v = self.value(p.as_slice()).map_err(|reason| FieldError::Eval {
            point: p.as_slice().to_vec(),
            reason,
        })?;
        if !v.is_finite() {
            return Err(FieldError::Eval {
                point: p.as_slice().to_vec(),
                reason: "value is not finite".into(),
            });
        }
        Ok(v)
    }

    pub fn eval_jet(&self, p: &Point) -> Result<Jet2, FieldError> {
        self.taylor(p)
            .map_err(|reason| FieldError::Eval {
                point: p.as_slice().to_vec(),
                reason,
            })?
            .into_jet(p)
    }
}
