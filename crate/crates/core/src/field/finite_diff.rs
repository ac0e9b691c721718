//! Central finite-difference jets: an oracle independent of both the
//! closed-form and Taylor-arithmetic evaluation paths, built from field
//! values alone.

use nalgebra::{DMatrix, DVector};

use super::{FieldError, Jet2, Point, ScalarField};

/// O(h^2) central-difference gradient and Hessian at `p`.
///
/// Every stencil point must lie inside the field's domain box. Intended as
/// a cross-check for exact jets, not as a production evaluation path.
pub fn finite_diff_jet(field: &ScalarField, p: &Point, h: f64) -> Result<Jet2, FieldError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(FieldError::BadParams(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let d = p.dim();
    let value = field.value(p)?;
    let shifted = |offsets: &[(usize, f64)]| -> Result<f64, FieldError> {
        let mut c = p.coords().clone();
        for (axis, delta) in offsets {
            c[*axis] += delta;
        }
        field.value(&Point::from_vector(c))
    };

    let mut gradient = DVector::zeros(d);
    let mut hessian = DMatrix::zeros(d, d);
    for i in 0..d {
        let fp = shifted(&[(i, h)])?;
        let fm = shifted(&[(i, -h)])?;
        gradient[i] = (fp - fm) / (2.0 * h);
        hessian[(i, i)] = (fp - 2.0 * value + fm) / (h * h);
        for j in (i + 1)..d {
            let fpp = shifted(&[(i, h), (j, h)])?;
            let fpm = shifted(&[(i, h), (j, -h)])?;
            let fmp = shifted(&[(i, -h), (j, h)])?;
            let fmm = shifted(&[(i, -h), (j, -h)])?;
            let mixed = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hessian[(i, j)] = mixed;
            hessian[(j, i)] = mixed;
        }
    }
    Ok(Jet2::new(value, gradient, hessian))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{builtin_field, parse_field};

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn sphere_gradient_near_exact() {
        // central differences are exact for quadratics up to rounding
        let f = builtin_field("sphere", 3).unwrap();
        let jet = finite_diff_jet(&f, &pt(&[1.0, 1.0, 1.0]), 1e-4).unwrap();
        for g in jet.gradient.iter() {
            assert!((g - 2.0).abs() < 1e-7, "gradient {g}");
        }
    }

    #[test]
    fn linear_field_has_vanishing_hessian() {
        let f = parse_field("x", 3).unwrap();
        let jet = finite_diff_jet(&f, &pt(&[0.4, -0.8, 0.2]), 1e-4).unwrap();
        for hij in jet.hessian.iter() {
            assert!(hij.abs() < 1e-8, "hessian entry {hij}");
        }
    }

    #[test]
    fn double_well_matches_exact_jet() {
        let f = builtin_field("double_well", 3).unwrap();
        let p = pt(&[0.3, 0.1, -0.2]);
        let exact = f.jet(&p).unwrap();
        let fd = finite_diff_jet(&f, &p, 1e-4).unwrap();
        let scale = exact.grad_norm().max(1.0);
        assert!((&exact.gradient - &fd.gradient).norm() < 1e-5 * scale);
        assert!((&exact.hessian - &fd.hessian).norm() < 1e-5 * exact.hessian.norm().max(1.0));
    }

    #[test]
    fn parsed_double_well_jet_matches_finite_differences() {
        let f = parse_field("(x^2-1)^2+y^2+z^2", 3).unwrap();
        let p = pt(&[0.5, 0.2, 0.0]);
        let ad = f.jet(&p).unwrap();
        let fd = finite_diff_jet(&f, &p, 1e-4).unwrap();
        let gscale = ad.grad_norm().max(1.0);
        let hscale = ad.hessian.norm().max(1.0);
        assert!((&ad.gradient - &fd.gradient).norm() <= 1e-6 * gscale);
        assert!((&ad.hessian - &fd.hessian).norm() <= 1e-6 * hscale);
    }

    #[test]
    fn stencil_must_stay_in_domain() {
        let f = builtin_field("sphere", 3)
            .unwrap()
            .with_domain(crate::field::BoundingBox::centered_cube(3, 1.0))
            .unwrap();
        assert!(finite_diff_jet(&f, &pt(&[1.0, 0.0, 0.0]), 1e-3).is_err());
    }
}
