//! Truncated second-order Taylor arithmetic.
//!
//! A [`Taylor2`] carries a value, a gradient vector and a Hessian matrix and
//! propagates all three through arithmetic and elementary functions. Running
//! an expression tree on seeded variables yields the exact jet of the
//! expression at a point, up to rounding.

use nalgebra::{DMatrix, DVector};

use super::{FieldError, Jet2, Point};

#[derive(Debug, Clone)]
pub(crate) struct Taylor2 {
    pub v: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
}

fn outer_sym(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose() + b * a.transpose()
}

impl Taylor2 {
    pub fn constant(v: f64, dim: usize) -> Self {
        Self {
            v,
            g: DVector::zeros(dim),
            h: DMatrix::zeros(dim, dim),
        }
    }

    /// The coordinate variable `i` seeded at value `x`.
    pub fn variable(i: usize, x: f64, dim: usize) -> Self {
        let mut g = DVector::zeros(dim);
        g[i] = 1.0;
        Self {
            v: x,
            g,
            h: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    fn is_constant(&self) -> bool {
        self.g.iter().all(|x| *x == 0.0) && self.h.iter().all(|x| *x == 0.0)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self {
            v: self.v + rhs.v,
            g: &self.g + &rhs.g,
            h: &self.h + &rhs.h,
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self {
            v: self.v - rhs.v,
            g: &self.g - &rhs.g,
            h: &self.h - &rhs.h,
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            v: -self.v,
            g: -&self.g,
            h: -&self.h,
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            v: self.v * rhs.v,
            g: &self.g * rhs.v + &rhs.g * self.v,
            h: &self.h * rhs.v + &rhs.h * self.v + outer_sym(&self.g, &rhs.g),
        }
    }

    pub fn div(&self, rhs: &Self) -> Result<Self, String> {
        if rhs.v == 0.0 {
            return Err("division by zero".into());
        }
        let v = self.v / rhs.v;
        let g = (&self.g - &rhs.g * v) / rhs.v;
        let h = (&self.h - outer_sym(&g, &rhs.g) - &rhs.h * v) / rhs.v;
        Ok(Self { v, g, h })
    }

    /// Composes an elementary function given its value and first two
    /// derivatives at `self.v`.
    fn chain(&self, fv: f64, d1: f64, d2: f64) -> Self {
        Self {
            v: fv,
            g: &self.g * d1,
            h: &self.h * d1 + (&self.g * self.g.transpose()) * d2,
        }
    }

    pub fn sin(&self) -> Self {
        self.chain(self.v.sin(), self.v.cos(), -self.v.sin())
    }

    pub fn cos(&self) -> Self {
        self.chain(self.v.cos(), -self.v.sin(), -self.v.cos())
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Result<Self, String> {
        if self.v <= 0.0 {
            return Err(format!("ln of non-positive value {}", self.v));
        }
        Ok(self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v)))
    }

    pub fn sqrt(&self) -> Result<Self, String> {
        if self.v < 0.0 {
            return Err(format!("sqrt of negative value {}", self.v));
        }
        if self.v == 0.0 && !self.is_constant() {
            return Err("sqrt has unbounded derivatives at 0".into());
        }
        let s = self.v.sqrt();
        Ok(self.chain(s, 0.5 / s, -0.25 / (s * self.v)))
    }

    /// Integer power, valid for any base.
    pub fn powi(&self, k: i32) -> Result<Self, String> {
        if self.v == 0.0 && k < 2 {
            match k {
                1 => return Ok(self.clone()),
                0 => return Ok(Self::constant(1.0, self.dim())),
                _ => return Err("negative power of zero".into()),
            }
        }
        let kf = f64::from(k);
        Ok(self.chain(
            self.v.powi(k),
            kf * self.v.powi(k - 1),
            kf * (kf - 1.0) * self.v.powi(k - 2),
        ))
    }

    /// Real power of a positive base.
    pub fn powf(&self, r: f64) -> Result<Self, String> {
        if self.v <= 0.0 {
            return Err(format!(
                "non-integer power of non-positive base {}",
                self.v
            ));
        }
        Ok(self.chain(
            self.v.powf(r),
            r * self.v.powf(r - 1.0),
            r * (r - 1.0) * self.v.powf(r - 2.0),
        ))
    }

    /// General power `self^rhs`. Constant integer exponents work for any
    /// base; everything else requires a positive base.
    pub fn pow(&self, rhs: &Self) -> Result<Self, String> {
        if rhs.is_constant() {
            let r = rhs.v;
            let rounded = r.round();
            if (r - rounded).abs() < 1e-12 && rounded.abs() <= 127.0 {
                return self.powi(rounded as i32);
            }
            return self.powf(r);
        }
        // u^v = exp(v ln u)
        self.ln()
            .map_err(|_| format!("variable exponent needs positive base, got {}", self.v))?
            .mul(rhs)
            .exp_checked()
    }

    fn exp_checked(&self) -> Result<Self, String> {
        Ok(self.exp())
    }

    pub fn into_jet(self, p: &Point) -> Result<Jet2, FieldError> {
        let jet = Jet2::new(self.v, self.g, self.h);
        if !jet.is_finite() {
            return Err(FieldError::Eval {
                point: p.as_slice().to_vec(),
                reason: "jet has non-finite entries".into(),
            });
        }
        Ok(jet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn var(i: usize, x: f64) -> Taylor2 {
        Taylor2::variable(i, x, 2)
    }

    #[test]
    fn product_rule_hessian() {
        // f(x, y) = x * y at (2, 3): grad (3, 2), hessian [[0,1],[1,0]]
        let f = var(0, 2.0).mul(&var(1, 3.0));
        assert_eq!(f.v, 6.0);
        assert_eq!(f.g.as_slice(), &[3.0, 2.0]);
        assert_eq!(f.h[(0, 1)], 1.0);
        assert_eq!(f.h[(0, 0)], 0.0);
    }

    #[test]
    fn quotient_rule() {
        // f = x / y at (1, 2): f = 0.5, fx = 0.5, fy = -0.25,
        // fxx = 0, fxy = -0.25, fyy = 0.25
        let f = var(0, 1.0).div(&var(1, 2.0)).unwrap();
        assert_relative_eq!(f.v, 0.5);
        assert_relative_eq!(f.g[0], 0.5);
        assert_relative_eq!(f.g[1], -0.25);
        assert_relative_eq!(f.h[(0, 1)], -0.25);
        assert_relative_eq!(f.h[(1, 1)], 0.25);
    }

    #[test]
    fn chain_rule_sin_of_square() {
        // f = sin(x^2) at x0: f' = 2x cos(x^2), f'' = 2cos(x^2) - 4x^2 sin(x^2)
        let x0 = 0.7_f64;
        let f = var(0, x0).powi(2).unwrap().sin();
        assert_relative_eq!(f.v, (x0 * x0).sin(), epsilon = 1e-15);
        assert_relative_eq!(f.g[0], 2.0 * x0 * (x0 * x0).cos(), epsilon = 1e-14);
        assert_relative_eq!(
            f.h[(0, 0)],
            2.0 * (x0 * x0).cos() - 4.0 * x0 * x0 * (x0 * x0).sin(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn integer_power_of_negative_base() {
        let f = var(0, -2.0).powi(3).unwrap();
        assert_relative_eq!(f.v, -8.0);
        assert_relative_eq!(f.g[0], 12.0);
        assert_relative_eq!(f.h[(0, 0)], -12.0);
    }

    #[test]
    fn domain_errors() {
        assert!(var(0, -1.0).ln().is_err());
        assert!(var(0, -1.0).sqrt().is_err());
        assert!(var(0, 0.0).div(&Taylor2::constant(0.0, 2)).is_err());
        assert!(var(0, -1.0).powf(0.5).is_err());
    }
}
