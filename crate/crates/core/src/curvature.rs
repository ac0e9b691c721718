//! Mean and Gaussian curvature of level hypersurfaces from second-order
//! jets of the defining field.
//!
//! For a regular point of a level set of `f` in R^(n+1), with Hessian form
//! `Q` and the unit normal chosen as `N = -grad f / |grad f|`:
//!
//! ```text
//! H = (|grad f|^2 Tr Q - Q(grad f)) / (n |grad f|^3)
//! K = Q*(grad f) / |grad f|^(n+2)
//! ```
//!
//! where `Q*` is the quadratic form of the adjugate of `Q`. With this
//! orientation a sphere `f = sum x_i^2` has `H = 1/r` and `K = 1/r^2` at
//! radius `r`; [`divergence_check_h`] pins the same sign through the
//! independent identity `H = (1/n) div(grad f / |grad f|)`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::field::{FieldError, Jet2, Point, ScalarField};

/// Gradient norms at or below this floor are treated as numerically
/// critical; curvature is undefined there.
pub const DEFAULT_GRAD_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Error)]
pub enum CurvatureError {
    #[error("gradient norm {grad_norm:.3e} is below the floor {floor:.3e}; point is numerically critical")]
    NearCritical { grad_norm: f64, floor: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Curvature data of the level set through one regular point.
#[derive(Debug, Clone)]
pub struct CurvatureSample {
    /// Mean curvature (1/length).
    pub mean: f64,
    /// Gaussian curvature (1/length^n).
    pub gaussian: f64,
    /// Unit normal `-grad f / |grad f|`.
    pub normal: DVector<f64>,
    /// `|grad f|` at the point.
    pub grad_norm: f64,
}

/// Adjugate (classical adjoint): `adj(S) * S = det(S) * I`, defined for
/// singular `S` as well.
///
/// Sizes 1-3 use explicit cofactors. Larger matrices go through LU as
/// `det(S) * S^-1` when the determinant is comfortably nonzero, falling
/// back to explicit cofactor minors otherwise.
pub fn adjugate(s: &DMatrix<f64>) -> DMatrix<f64> {
    let d = s.nrows();
    assert_eq!(d, s.ncols(), "adjugate needs a square matrix");
    match d {
        0 => DMatrix::zeros(0, 0),
        1 => DMatrix::from_element(1, 1, 1.0),
        2 => DMatrix::from_row_slice(
            2,
            2,
            &[s[(1, 1)], -s[(0, 1)], -s[(1, 0)], s[(0, 0)]],
        ),
        3 => {
            let m = |r: usize, c: usize| s[(r, c)];
            let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
                m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0)
            };
            // adj = transposed cofactor matrix
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    cof(1, 2, 1, 2),
                    -cof(0, 2, 1, 2),
                    cof(0, 1, 1, 2),
                    -cof(1, 2, 0, 2),
                    cof(0, 2, 0, 2),
                    -cof(0, 1, 0, 2),
                    cof(1, 2, 0, 1),
                    -cof(0, 2, 0, 1),
                    cof(0, 1, 0, 1),
                ],
            )
        }
        _ => {
            let det = s.determinant();
            let norm = s.norm();
            if norm > 0.0 && det.abs() > 1e-12 * norm.powi(d as i32) {
                if let Some(inv) = s.clone().try_inverse() {
                    return inv * det;
                }
            }
            adjugate_by_cofactors(s)
        }
    }
}

fn adjugate_by_cofactors(s: &DMatrix<f64>) -> DMatrix<f64> {
    let d = s.nrows();
    let mut adj = DMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let minor = s.clone().remove_row(r).remove_column(c);
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            // transpose: cofactor of (r, c) lands at (c, r)
            adj[(c, r)] = sign * minor.determinant();
        }
    }
    adj
}

fn require_regular(jet: &Jet2, floor: f64) -> Result<f64, CurvatureError> {
    let grad_norm = jet.grad_norm();
    if grad_norm <= floor {
        return Err(CurvatureError::NearCritical { grad_norm, floor });
    }
    Ok(grad_norm)
}

/// Mean curvature of the level set through the jet's point.
pub fn mean_curvature(jet: &Jet2, n: usize) -> Result<f64, CurvatureError> {
    mean_curvature_with_floor(jet, n, DEFAULT_GRAD_FLOOR)
}

pub fn mean_curvature_with_floor(jet: &Jet2, n: usize, floor: f64) -> Result<f64, CurvatureError> {
    let grad_norm = require_regular(jet, floor)?;
    let trace_q = jet.hessian.trace();
    let q_grad = jet.hessian_form(&jet.gradient);
    Ok((grad_norm * grad_norm * trace_q - q_grad) / (n as f64 * grad_norm.powi(3)))
}

/// Gaussian curvature of the level set through the jet's point.
pub fn gaussian_curvature(jet: &Jet2, n: usize) -> Result<f64, CurvatureError> {
    gaussian_curvature_with_floor(jet, n, DEFAULT_GRAD_FLOOR)
}

pub fn gaussian_curvature_with_floor(
    jet: &Jet2,
    n: usize,
    floor: f64,
) -> Result<f64, CurvatureError> {
    let grad_norm = require_regular(jet, floor)?;
    let adj = adjugate(&jet.hessian);
    let q_star = (jet.gradient.transpose() * adj * &jet.gradient)[(0, 0)];
    Ok(q_star / grad_norm.powi(n as i32 + 2))
}

/// Unit normal `-grad f / |grad f|`.
pub fn unit_normal(jet: &Jet2) -> Result<DVector<f64>, CurvatureError> {
    let grad_norm = require_regular(jet, 0.0)?;
    Ok(-&jet.gradient / grad_norm)
}

/// All curvature quantities at once.
pub fn curvature_sample(jet: &Jet2, n: usize) -> Result<CurvatureSample, CurvatureError> {
    let grad_norm = require_regular(jet, DEFAULT_GRAD_FLOOR)?;
    Ok(CurvatureSample {
        mean: mean_curvature(jet, n)?,
        gaussian: gaussian_curvature(jet, n)?,
        normal: -&jet.gradient / grad_norm,
        grad_norm,
    })
}

/// Estimates the mean curvature as `(1/n) div(grad f / |grad f|)` by
/// central differences of the normalized gradient field.
///
/// Shares no code with [`mean_curvature`]'s Hessian formula beyond jet
/// evaluation, so agreement between the two is evidence rather than
/// tautology.
pub fn divergence_check_h(
    field: &ScalarField,
    p: &Point,
    h: f64,
    n: usize,
) -> Result<f64, CurvatureError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(CurvatureError::Field(FieldError::BadParams(format!(
            "finite-difference step must be positive, got {h}"
        ))));
    }
    let d = p.dim();
    let unit_component = |axis: usize, delta: f64, component: usize| -> Result<f64, CurvatureError> {
        let mut c = p.coords().clone();
        c[axis] += delta;
        let jet = field.jet(&Point::from_vector(c))?;
        let grad_norm = require_regular(&jet, DEFAULT_GRAD_FLOOR)?;
        Ok(jet.gradient[component] / grad_norm)
    };
    let mut divergence = 0.0;
    for axis in 0..d {
        let plus = unit_component(axis, h, axis)?;
        let minus = unit_component(axis, -h, axis)?;
        divergence += (plus - minus) / (2.0 * h);
    }
    Ok(divergence / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::builtin_field;
    use approx::assert_relative_eq;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn adjugate_identity_and_scaling() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_eq!(adjugate(&eye), eye);
        let two_eye = &eye * 2.0;
        assert_eq!(adjugate(&two_eye), &eye * 4.0);
    }

    #[test]
    fn adjugate_of_singular_matrix() {
        // adj(diag(2, 2, 0)) = diag(0, 0, 4)
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0, 0.0]));
        let adj = adjugate(&s);
        assert_eq!(adj[(0, 0)], 0.0);
        assert_eq!(adj[(1, 1)], 0.0);
        assert_eq!(adj[(2, 2)], 4.0);
    }

    #[test]
    fn sphere_curvatures_closed_form() {
        let f = builtin_field("sphere", 3).unwrap();
        for r in [0.5, 1.0, 2.0, 2.9] {
            let jet = f.jet(&pt(&[r, 0.0, 0.0])).unwrap();
            let h = mean_curvature(&jet, 2).unwrap();
            let k = gaussian_curvature(&jet, 2).unwrap();
            assert_relative_eq!(h * r, 1.0, epsilon = 1e-12);
            assert_relative_eq!(k * r * r, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn flat_level_sets_have_zero_curvature() {
        let f = crate::field::parse_field("x", 3).unwrap();
        let jet = f.jet(&pt(&[0.3, 0.2, 0.1])).unwrap();
        assert_eq!(mean_curvature(&jet, 2).unwrap(), 0.0);
        assert_eq!(gaussian_curvature(&jet, 2).unwrap(), 0.0);
        let n = unit_normal(&jet).unwrap();
        assert_eq!(n.as_slice(), &[-1.0, 0.0, 0.0]);
    }

    #[test]
    fn cylinder_has_zero_gaussian_curvature() {
        let f = crate::field::parse_field("x^2+y^2", 3).unwrap();
        let jet = f.jet(&pt(&[1.0, 0.0, 5.0])).unwrap();
        let k = gaussian_curvature(&jet, 2).unwrap();
        assert_relative_eq!(k, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sphere_normal_points_inward() {
        let f = builtin_field("sphere", 3).unwrap();
        let jet = f.jet(&pt(&[2.0, 0.0, 0.0])).unwrap();
        let n = unit_normal(&jet).unwrap();
        assert_relative_eq!(n[0], -1.0);
        assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn divergence_oracle_matches_sphere() {
        let f = builtin_field("sphere", 3).unwrap();
        let h = divergence_check_h(&f, &pt(&[0.0, 0.0, 1.5]), 1e-4, 2).unwrap();
        assert_relative_eq!(h, 1.0 / 1.5, epsilon = 1e-5);
    }

    #[test]
    fn divergence_oracle_flat_field() {
        let f = crate::field::parse_field("x", 3).unwrap();
        let h = divergence_check_h(&f, &pt(&[0.3, 0.2, 0.1]), 1e-4, 2).unwrap();
        assert!(h.abs() < 1e-8);
    }

    #[test]
    fn divergence_oracle_matches_double_well() {
        let f = builtin_field("double_well", 3).unwrap();
        let p = pt(&[1.2, 0.0, 0.0]);
        let jet = f.jet(&p).unwrap();
        let via_hessian = mean_curvature(&jet, 2).unwrap();
        let via_divergence = divergence_check_h(&f, &p, 1e-4, 2).unwrap();
        assert!((via_hessian - via_divergence).abs() < 1e-4);
    }

    #[test]
    fn divergence_oracle_matches_torus_formula() {
        let f = builtin_field("torus(2)", 3).unwrap();
        let p = pt(&[3.0, 0.0, 0.0]);
        let jet = f.jet(&p).unwrap();
        let via_hessian = mean_curvature(&jet, 2).unwrap();
        let via_divergence = divergence_check_h(&f, &p, 1e-4, 2).unwrap();
        assert_relative_eq!(via_hessian, 2.0 / 3.0, epsilon = 1e-12);
        assert!((via_hessian - via_divergence).abs() < 1e-4);
    }

    #[test]
    fn near_critical_point_is_an_error() {
        let f = builtin_field("sphere", 3).unwrap();
        let jet = f.jet(&pt(&[0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(
            mean_curvature(&jet, 2),
            Err(CurvatureError::NearCritical { .. })
        ));
        assert!(unit_normal(&jet).is_err());
    }
}
