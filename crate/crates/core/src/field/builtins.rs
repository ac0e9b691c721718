//! Built-in fields with hand-differentiated closed-form jets.

use nalgebra::{DMatrix, DVector};

use super::{FieldError, Jet2, Point, ScalarField};

/// Fraction of the torus minor scale excluded around the z-axis, where the
/// cylindrical radius term stops being differentiable.
const TORUS_AXIS_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) enum BuiltinKind {
    /// `sum x_i^2`
    Sphere,
    /// `(x^2 - 1)^2 + sum_{i>=2} x_i^2`
    DoubleWell,
    /// `(sqrt(x^2 + y^2) - major)^2 + z^2`, 3D only
    Torus { major: f64 },
    /// `sum c_i x_i^2`
    Quadric { coeffs: Vec<f64> },
}

impl BuiltinKind {
    pub fn value(&self, p: &Point) -> Result<f64, FieldError> {
        let x = p.as_slice();
        Ok(match self {
            BuiltinKind::Sphere => x.iter().map(|xi| xi * xi).sum(),
            BuiltinKind::DoubleWell => {
                let s = x[0] * x[0] - 1.0;
                s * s + x[1..].iter().map(|xi| xi * xi).sum::<f64>()
            }
            BuiltinKind::Torus { major } => {
                let rho = x[0].hypot(x[1]);
                let s = rho - major;
                s * s + x[2] * x[2]
            }
            BuiltinKind::Quadric { coeffs } => {
                coeffs.iter().zip(x).map(|(c, xi)| c * xi * xi).sum()
            }
        })
    }

    pub fn jet(&self, p: &Point) -> Result<Jet2, FieldError> {
        let x = p.as_slice();
        let d = x.len();
        match self {
            BuiltinKind::Sphere => {
                let value = x.iter().map(|xi| xi * xi).sum();
                let gradient = DVector::from_iterator(d, x.iter().map(|xi| 2.0 * xi));
                let hessian = DMatrix::from_diagonal_element(d, d, 2.0);
                Ok(Jet2::new(value, gradient, hessian))
            }
            BuiltinKind::DoubleWell => {
                let s = x[0] * x[0] - 1.0;
                let value = s * s + x[1..].iter().map(|xi| xi * xi).sum::<f64>();
                let mut gradient = DVector::from_iterator(d, x.iter().map(|xi| 2.0 * xi));
                gradient[0] = 4.0 * x[0] * s;
                let mut hessian = DMatrix::from_diagonal_element(d, d, 2.0);
                hessian[(0, 0)] = 12.0 * x[0] * x[0] - 4.0;
                Ok(Jet2::new(value, gradient, hessian))
            }
            BuiltinKind::Torus { major } => {
                let rho = x[0].hypot(x[1]);
                if rho <= TORUS_AXIS_FLOOR * major.max(1.0) {
                    return Err(FieldError::ExcludedSet {
                        what: "z-axis of the torus field".into(),
                    });
                }
                let s = rho - major;
                let value = s * s + x[2] * x[2];
                let gradient = DVector::from_vec(vec![
                    2.0 * s * x[0] / rho,
                    2.0 * s * x[1] / rho,
                    2.0 * x[2],
                ]);
                let rho3 = rho * rho * rho;
                let mut hessian = DMatrix::zeros(3, 3);
                hessian[(0, 0)] = 2.0 - 2.0 * major * x[1] * x[1] / rho3;
                hessian[(1, 1)] = 2.0 - 2.0 * major * x[0] * x[0] / rho3;
                hessian[(0, 1)] = 2.0 * major * x[0] * x[1] / rho3;
                hessian[(1, 0)] = hessian[(0, 1)];
                hessian[(2, 2)] = 2.0;
                Ok(Jet2::new(value, gradient, hessian))
            }
            BuiltinKind::Quadric { coeffs } => {
                let value = coeffs.iter().zip(x).map(|(c, xi)| c * xi * xi).sum();
                let gradient =
                    DVector::from_iterator(d, coeffs.iter().zip(x).map(|(c, xi)| 2.0 * c * xi));
                let hessian = DMatrix::from_diagonal(&DVector::from_iterator(
                    d,
                    coeffs.iter().map(|c| 2.0 * c),
                ));
                Ok(Jet2::new(value, gradient, hessian))
            }
        }
    }
}

/// Parses `name` or `name(args)` for one of the builtin fields.
///
/// Accepted specs: `sphere`, `double_well`, `torus` (major radius 2),
/// `torus(R)`, `quadric(c1,...,cd)` and `quadric(diag(c1,...,cd))`. The
/// torus exists only in dimension 3 and its domain excludes a hair-thin
/// cylinder around the z-axis; evaluating a jet there reports the excluded
/// set rather than returning non-finite derivatives.
pub fn builtin_field(spec: &str, d: usize) -> Result<ScalarField, FieldError> {
    if !(3..=5).contains(&d) {
        return Err(FieldError::Dimension {
            dim: d,
            expected: "3, 4 or 5".into(),
        });
    }
    let spec = spec.trim();
    let (name, args) = match spec.find('(') {
        Some(open) => {
            let Some(stripped) = spec[open..].strip_prefix('(').and_then(|s| s.strip_suffix(')'))
            else {
                return Err(FieldError::UnknownBuiltin { name: spec.into() });
            };
            (spec[..open].trim(), Some(stripped.trim()))
        }
        None => (spec, None),
    };
    match name {
        "sphere" => {
            require_no_args(name, args)?;
            Ok(ScalarField::builtin(BuiltinKind::Sphere, d, "sphere".into()))
        }
        "double_well" => {
            require_no_args(name, args)?;
            Ok(ScalarField::builtin(
                BuiltinKind::DoubleWell,
                d,
                "double_well".into(),
            ))
        }
        "torus" => {
            if d != 3 {
                return Err(FieldError::Dimension {
                    dim: d,
                    expected: "3 (torus field)".into(),
                });
            }
            let major = match args {
                None | Some("") => 2.0,
                Some(a) => a.parse::<f64>().map_err(|_| {
                    FieldError::BadParams(format!("torus major radius `{a}` is not a number"))
                })?,
            };
            if !(major.is_finite() && major > 0.0) {
                return Err(FieldError::BadParams(format!(
                    "torus major radius must be positive, got {major}"
                )));
            }
            Ok(ScalarField::builtin(
                BuiltinKind::Torus { major },
                3,
                format!("torus({major})"),
            ))
        }
        "quadric" => {
            let Some(args) = args else {
                return Err(FieldError::BadParams(
                    "quadric needs coefficients, e.g. quadric(1,2,3)".into(),
                ));
            };
            let inner = args
                .strip_prefix("diag(")
                .and_then(|s| s.strip_suffix(')'))
                .unwrap_or(args);
            let coeffs = inner
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|_| {
                    FieldError::BadParams(format!("bad quadric coefficients `{args}`"))
                })?;
            if coeffs.len() != d {
                return Err(FieldError::BadParams(format!(
                    "quadric needs {d} coefficients, got {}",
                    coeffs.len()
                )));
            }
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(FieldError::BadParams(
                    "quadric coefficients must be finite".into(),
                ));
            }
            let desc = format!(
                "quadric({})",
                coeffs
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            );
            Ok(ScalarField::builtin(BuiltinKind::Quadric { coeffs }, d, desc))
        }
        _ => Err(FieldError::UnknownBuiltin { name: spec.into() }),
    }
}

fn require_no_args(name: &str, args: Option<&str>) -> Result<(), FieldError> {
    match args {
        None | Some("") => Ok(()),
        Some(a) => Err(FieldError::BadParams(format!(
            "`{name}` takes no parameters, got `{a}`"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn sphere_jet_hand_values() {
        let f = builtin_field("sphere", 3).unwrap();
        let jet = f.jet(&pt(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(jet.value, 1.0);
        assert_eq!(jet.gradient.as_slice(), &[2.0, 0.0, 0.0]);
        assert_eq!(jet.hessian, DMatrix::from_diagonal_element(3, 3, 2.0));
        assert_eq!(f.value(&pt(&[2.0, 0.0, 0.0])).unwrap(), 4.0);
    }

    #[test]
    fn saddle_quadric_at_origin() {
        let f = builtin_field("quadric(1,-1,1)", 3).unwrap();
        let jet = f.jet(&pt(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(jet.value, 0.0);
        assert_eq!(jet.gradient.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(
            jet.hessian,
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -2.0, 2.0]))
        );
    }

    #[test]
    fn double_well_jets() {
        let f = builtin_field("double_well", 3).unwrap();
        let jet = f.jet(&pt(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(jet.value, 0.0);
        assert_eq!(jet.gradient.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(
            jet.hessian,
            DMatrix::from_diagonal(&DVector::from_vec(vec![8.0, 2.0, 2.0]))
        );
        // saddle at the origin
        let jet0 = f.jet(&pt(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(jet0.value, 1.0);
        assert_eq!(jet0.hessian[(0, 0)], -4.0);
    }

    #[test]
    fn torus_jet_hand_values() {
        let f = builtin_field("torus(2)", 3).unwrap();
        let jet = f.jet(&pt(&[3.0, 0.0, 0.0])).unwrap();
        assert_relative_eq!(jet.value, 1.0);
        assert_relative_eq!(jet.gradient[0], 2.0);
        assert_relative_eq!(jet.gradient[1], 0.0);
        assert_relative_eq!(jet.gradient[2], 0.0);
        // Hessian at the outer equator: diag(2, 2 - 2R/rho, 2)
        assert_relative_eq!(jet.hessian[(0, 0)], 2.0);
        assert_relative_eq!(jet.hessian[(1, 1)], 2.0 / 3.0);
        assert_relative_eq!(jet.hessian[(2, 2)], 2.0);
    }

    #[test]
    fn torus_axis_is_excluded() {
        let f = builtin_field("torus(2)", 3).unwrap();
        assert!(matches!(
            f.jet(&pt(&[0.0, 0.0, 0.5])),
            Err(FieldError::ExcludedSet { .. })
        ));
        // value itself is still defined on the axis
        assert_relative_eq!(f.value(&pt(&[0.0, 0.0, 0.5])).unwrap(), 4.25);
    }

    #[test]
    fn quadric_identity_matches_sphere() {
        use rand::{Rng, SeedableRng};
        let q = builtin_field("quadric(diag(1,1,1))", 3).unwrap();
        let s = builtin_field("sphere", 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let p = pt(&[
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ]);
            let (jq, js) = (q.jet(&p).unwrap(), s.jet(&p).unwrap());
            assert_eq!(jq.value, js.value);
            assert_eq!(jq.gradient, js.gradient);
            assert_eq!(jq.hessian, js.hessian);
        }
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(matches!(
            builtin_field("blob", 3),
            Err(FieldError::UnknownBuiltin { .. })
        ));
        assert!(builtin_field("torus(-1)", 3).is_err());
        assert!(builtin_field("torus(2)", 4).is_err());
        assert!(builtin_field("quadric(1,2)", 3).is_err());
        assert!(builtin_field("sphere(3)", 3).is_err());
    }
}
