//! Property tests: the adjugate identity against a brute-force Laplace
//! oracle, scale invariance of the curvature quantities, and suite
//! determinism.

use nalgebra::DMatrix;
use proptest::prelude::*;

use levelset_metrics::curvature::{adjugate, gaussian_curvature, mean_curvature, unit_normal};
use levelset_metrics::field::{builtin_field, parse_field, Point};

/// Laplace-expansion determinant, independent of any nalgebra kernel.
fn laplace_det(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    if d == 1 {
        return m[(0, 0)];
    }
    let mut det = 0.0;
    for c in 0..d {
        let minor = m.clone().remove_row(0).remove_column(c);
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m[(0, c)] * laplace_det(&minor);
    }
    det
}

/// Brute-force adjugate: transposed cofactor matrix via Laplace minors.
fn laplace_adjugate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let mut adj = DMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let minor = m.clone().remove_row(r).remove_column(c);
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(c, r)] = sign * laplace_det(&minor);
        }
    }
    adj
}

fn symmetric_matrix(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0f64..3.0, d * d).prop_map(move |entries| {
        let m = DMatrix::from_vec(d, d, entries);
        (&m + m.transpose()) * 0.5
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjugate_satisfies_defining_identity_d3(m in symmetric_matrix(3)) {
        check_adjugate(&m);
    }

    #[test]
    fn adjugate_satisfies_defining_identity_d4(m in symmetric_matrix(4)) {
        check_adjugate(&m);
    }

    #[test]
    fn adjugate_satisfies_defining_identity_d5(m in symmetric_matrix(5)) {
        check_adjugate(&m);
    }

    /// H, K and N are invariant under positive rescaling of the field:
    /// quadric(c,c,c) defines the same level surfaces as the sphere field.
    #[test]
    fn curvature_is_scale_invariant(
        c in 0.1f64..50.0,
        x in 0.3f64..2.0,
        y in -2.0f64..2.0,
        z in -2.0f64..2.0,
    ) {
        let base = builtin_field("sphere", 3).unwrap();
        let scaled = builtin_field(&format!("quadric({c},{c},{c})"), 3).unwrap();
        let p = Point::new(vec![x, y, z]).unwrap();
        let (jb, js) = (base.jet(&p).unwrap(), scaled.jet(&p).unwrap());
        let (hb, hs) = (mean_curvature(&jb, 2).unwrap(), mean_curvature(&js, 2).unwrap());
        let (kb, ks) = (gaussian_curvature(&jb, 2).unwrap(), gaussian_curvature(&js, 2).unwrap());
        prop_assert!((hb - hs).abs() <= 1e-10 * hb.abs().max(1.0));
        prop_assert!((kb - ks).abs() <= 1e-10 * kb.abs().max(1.0));
        let (nb, ns) = (unit_normal(&jb).unwrap(), unit_normal(&js).unwrap());
        prop_assert!((nb - ns).norm() <= 1e-12);
    }
}

fn check_adjugate(m: &DMatrix<f64>) {
    let d = m.nrows();
    let adj = adjugate(m);
    let det = laplace_det(m);
    let scale = m.norm().powi(d as i32).max(1.0);
    // defining identity adj(A) * A = det(A) * I
    let lhs = &adj * m;
    let rhs = DMatrix::<f64>::identity(d, d) * det;
    assert!(
        (lhs - rhs).norm() <= 1e-10 * scale,
        "adjugate identity violated for {m}"
    );
    // entrywise agreement with the brute-force cofactor construction
    let oracle = laplace_adjugate(m);
    assert!(
        (&adj - &oracle).norm() <= 1e-10 * scale.max(oracle.norm()),
        "adjugate differs from cofactor oracle for {m}"
    );
}

/// The parsed field `2*(x^2+y^2+z^2)` has the same curvature data as the
/// builtin sphere: both formulas are jointly degree-0 in the gradient and
/// Hessian.
#[test]
fn doubled_sphere_expression_matches_builtin() {
    let base = builtin_field("sphere", 3).unwrap();
    let doubled = parse_field("2*(x^2+y^2+z^2)", 3).unwrap();
    for coords in [[1.0, 0.0, 0.0], [0.3, -0.7, 1.9], [0.0, 1.4, -0.2]] {
        let p = Point::new(coords.to_vec()).unwrap();
        let (jb, jd) = (base.jet(&p).unwrap(), doubled.jet(&p).unwrap());
        let hb = mean_curvature(&jb, 2).unwrap();
        let hd = mean_curvature(&jd, 2).unwrap();
        assert!((hb - hd).abs() <= 1e-12 * hb.abs().max(1.0));
        let kb = gaussian_curvature(&jb, 2).unwrap();
        let kd = gaussian_curvature(&jd, 2).unwrap();
        assert!((kb - kd).abs() <= 1e-12 * kb.abs().max(1.0));
        assert!((unit_normal(&jb).unwrap() - unit_normal(&jd).unwrap()).norm() <= 1e-14);
    }
}

/// |N| = 1 wherever the normal exists.
#[test]
fn unit_normal_is_normalized_everywhere() {
    use rand::{Rng, SeedableRng};
    let field = builtin_field("double_well", 3).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 1000 {
        let p = Point::new((0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let jet = field.jet(&p).unwrap();
        if let Ok(n) = unit_normal(&jet) {
            assert!((n.norm() - 1.0).abs() <= 1e-12);
            checked += 1;
        }
    }
}

/// A fixed configuration reproduces the identity suite bit-for-bit.
#[test]
fn suite_is_deterministic() {
    use levelset_metrics::field::{BoundingBox, Interval};
    use levelset_metrics::identities::{run_suite, to_json_full_precision, SuiteConfig};
    use levelset_metrics::quadrature::QuadratureConfig;

    let make = || {
        let mut cfg = SuiteConfig::new(
            builtin_field("sphere", 3).unwrap(),
            Interval::new(1.0, 4.0).unwrap(),
            BoundingBox::centered_cube(3, 2.5),
            QuadratureConfig::new(100_000, 77).unwrap(),
        );
        cfg.mesh_resolution = 48;
        cfg
    };
    let a = run_suite(&make()).unwrap();
    let b = run_suite(&make()).unwrap();
    assert_eq!(to_json_full_precision(&a), to_json_full_precision(&b));
}
