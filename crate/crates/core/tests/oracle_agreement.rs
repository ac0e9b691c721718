//! Cross-oracle agreement: exact jets against finite differences, the
//! Hessian curvature formula against the divergence form, and purity of
//! evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use levelset_metrics::curvature::{divergence_check_h, mean_curvature};
use levelset_metrics::field::{builtin_field, finite_diff_jet, parse_field, Point, ScalarField};

fn random_point(rng: &mut ChaCha8Rng, half: f64, dim: usize) -> Point {
    Point::new((0..dim).map(|_| rng.random_range(-half..half)).collect()).unwrap()
}

fn jets_agree_with_finite_differences(field: &ScalarField, seed: u64, half: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    while checked < 100 {
        let p = random_point(&mut rng, half, field.dim());
        let exact = match field.jet(&p) {
            Ok(j) => j,
            Err(_) => continue, // excluded set (torus axis)
        };
        let fd = finite_diff_jet(field, &p, 1e-4).unwrap();
        let grad_scale = exact.grad_norm().max(1.0);
        let hess_scale = exact.hessian.norm().max(1.0);
        assert!(
            (&exact.gradient - &fd.gradient).norm() <= 1e-5 * grad_scale,
            "gradient mismatch at {:?}: exact {:?} fd {:?}",
            p.as_slice(),
            exact.gradient.as_slice(),
            fd.gradient.as_slice()
        );
        assert!(
            (&exact.hessian - &fd.hessian).norm() <= 1e-5 * hess_scale,
            "hessian mismatch at {:?}",
            p.as_slice()
        );
        assert!((exact.value - fd.value).abs() <= 1e-12 * exact.value.abs().max(1.0));
        checked += 1;
    }
}

#[test]
fn builtin_jets_match_finite_differences() {
    jets_agree_with_finite_differences(&builtin_field("sphere", 3).unwrap(), 1, 2.0);
    jets_agree_with_finite_differences(&builtin_field("double_well", 3).unwrap(), 2, 2.0);
    jets_agree_with_finite_differences(&builtin_field("torus(2)", 3).unwrap(), 3, 2.0);
    jets_agree_with_finite_differences(&builtin_field("quadric(1,2,3)", 3).unwrap(), 4, 2.0);
    jets_agree_with_finite_differences(&builtin_field("quadric(1,1,2,3)", 4).unwrap(), 5, 2.0);
}

#[test]
fn parsed_jets_match_finite_differences() {
    jets_agree_with_finite_differences(&parse_field("(x^2-1)^2+y^2+z^2", 3).unwrap(), 6, 2.0);
    jets_agree_with_finite_differences(
        &parse_field("sin(x)*cos(y)+exp(z/4)", 3).unwrap(),
        7,
        2.0,
    );
    jets_agree_with_finite_differences(
        &parse_field("ln(4+x)+sqrt(4+y)*z^2", 3).unwrap(),
        8,
        1.5,
    );
    jets_agree_with_finite_differences(
        &parse_field("x^2+y^2+z^2+w^2+v^2", 5).unwrap(),
        9,
        1.5,
    );
}

#[test]
fn parsed_sphere_matches_builtin_to_machine_precision() {
    let parsed = parse_field("x^2+y^2+z^2", 3).unwrap();
    let builtin = builtin_field("sphere", 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let p = random_point(&mut rng, 2.5, 3);
        let (a, b) = (parsed.jet(&p).unwrap(), builtin.jet(&p).unwrap());
        assert!((a.value - b.value).abs() <= 1e-14 * b.value.abs().max(1.0));
        assert!((&a.gradient - &b.gradient).norm() <= 1e-14 * b.grad_norm().max(1.0));
        assert!((&a.hessian - &b.hessian).norm() <= 1e-13);
    }
}

#[test]
fn evaluation_is_pure() {
    let field = parse_field("sin(x)*exp(y)+z^3/(1+x^2)", 3).unwrap();
    let p = Point::new(vec![0.37, -0.81, 1.13]).unwrap();
    let a = field.jet(&p).unwrap();
    let b = field.jet(&p).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    for (x, y) in a.gradient.iter().zip(b.gradient.iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    for (x, y) in a.hessian.iter().zip(b.hessian.iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    // post-symmetrization is exact, not approximate
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(a.hessian[(i, j)].to_bits(), a.hessian[(j, i)].to_bits());
        }
    }
}

/// The Hessian-formula mean curvature against the finite-difference
/// divergence of the unit gradient field, on every builtin.
#[test]
fn mean_curvature_matches_divergence_oracle() {
    let fields = [
        builtin_field("sphere", 3).unwrap(),
        builtin_field("double_well", 3).unwrap(),
        builtin_field("torus(2)", 3).unwrap(),
        builtin_field("quadric(1,2,3)", 3).unwrap(),
    ];
    for (fi, field) in fields.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + fi as u64);
        let mut checked = 0;
        while checked < 1000 {
            let p = random_point(&mut rng, 2.0, 3);
            let jet = match field.jet(&p) {
                Ok(j) => j,
                Err(_) => continue,
            };
            // keep clear of critical sets so the FD stencil is valid
            if jet.grad_norm() < 0.5 {
                continue;
            }
            let h_formula = mean_curvature(&jet, 2).unwrap();
            let h_divergence = divergence_check_h(field, &p, 1e-4, 2).unwrap();
            let tol = 1e-4_f64.max(1e-3 * h_formula.abs());
            assert!(
                (h_formula - h_divergence).abs() <= tol,
                "field {fi} at {:?}: formula {h_formula} vs divergence {h_divergence}",
                p.as_slice()
            );
            checked += 1;
        }
    }
}
