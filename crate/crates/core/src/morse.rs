//! Critical points of scalar fields: seeded Newton search, Hessian
//! classification, the regular decomposition of a level interval, and a
//! probe of the gradient/curvature growth rates near a critical point.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::curvature::{gaussian_curvature, mean_curvature};
use crate::exec;
use crate::field::{BoundingBox, FieldError, Interval, Point, ScalarField};

/// Convergence threshold on the gradient norm.
pub const GRADIENT_TOLERANCE: f64 = 1e-9;

/// Relative determinant floor below which a Hessian counts as degenerate.
pub const NONDEGENERACY_FLOOR: f64 = 1e-6;

/// Deduplication radius in box-normalized coordinates.
const DEDUP_RADIUS: f64 = 1e-6;

const MAX_NEWTON_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Error)]
pub enum MorseError {
    #[error("seed grid must have at least 8 nodes per axis, got {0}")]
    SeedGridTooCoarse(usize),
    #[error("critical point at {location:?} (value {value}) has a degenerate Hessian (|det| / |max eig|^d = {det_ratio:.3e}); the field is not Morse there")]
    NotMorse {
        location: Vec<f64>,
        value: f64,
        det_ratio: f64,
    },
    #[error("another critical point (value {value}) lies inside the probe ball of radius {radius}")]
    ForeignCriticalPoint { value: f64, radius: f64 },
    #[error("invalid probe shape: {0}")]
    BadProbe(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A nondegenerate critical point.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub value: f64,
    /// Count of negative Hessian eigenvalues.
    pub morse_index: usize,
    pub hessian_eigenvalues: Vec<f64>,
}

impl CriticalPoint {
    pub fn point(&self) -> Point {
        Point::new(self.location.clone()).expect("critical point coordinates are finite")
    }
}

/// A converged gradient zero whose Hessian failed the nondegeneracy test.
#[derive(Debug, Clone, Serialize)]
pub struct DegeneratePoint {
    pub location: Vec<f64>,
    pub value: f64,
    /// `|det Q| / max|eig|^d`, compared against [`NONDEGENERACY_FLOOR`].
    pub det_ratio: f64,
}

/// Everything the seeded search found.
#[derive(Debug, Clone, Default)]
pub struct CriticalSurvey {
    pub points: Vec<CriticalPoint>,
    pub degenerate: Vec<DegeneratePoint>,
}

impl CriticalSurvey {
    /// Distinct critical values of the nondegenerate points.
    pub fn critical_values(&self) -> Vec<f64> {
        dedup_values(self.points.iter().map(|p| p.value))
    }

    /// Distinct values of degenerate gradient zeros.
    pub fn degenerate_values(&self) -> Vec<f64> {
        dedup_values(self.degenerate.iter().map(|p| p.value))
    }
}

fn dedup_values(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for value in v {
        match out.last() {
            Some(last) if (value - last).abs() <= 1e-9 * value.abs().max(1.0) => {}
            _ => out.push(value),
        }
    }
    out
}

/// The open intervals of regular values inside `[a, b]`.
#[derive(Debug, Clone, Serialize)]
pub struct RegularDecomposition {
    /// Sorted distinct critical values lying in `[a, b]`.
    pub critical_values: Vec<f64>,
    /// Open intervals `(c_j, c_{j+1})` covering `(a, b)` minus the critical
    /// values.
    pub intervals: Vec<(f64, f64)>,
}

impl RegularDecomposition {
    pub fn describe(&self) -> String {
        let intervals = self
            .intervals
            .iter()
            .map(|(lo, hi)| format!("({lo}, {hi})"))
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "critical values {:?}; regular intervals [{intervals}]",
            self.critical_values
        )
    }
}

/// Newton search for gradient zeros from every node of a uniform seed grid.
///
/// Converged points are deduplicated, re-verified with a fresh jet
/// evaluation and classified by Hessian eigenvalue signs. Degenerate
/// Hessians are reported separately rather than mis-classified; strict
/// callers can use [`find_critical_points`]. The search is heuristic: a
/// zero whose basin misses every seed is not found.
pub fn survey_critical_points(
    field: &ScalarField,
    box_: &BoundingBox,
    seed_grid: usize,
) -> Result<CriticalSurvey, MorseError> {
    if seed_grid < 8 {
        return Err(MorseError::SeedGridTooCoarse(seed_grid));
    }
    let d = field.dim();
    let n_seeds = seed_grid.pow(d as u32);
    let widths = box_.widths();
    let lo = box_.lo();

    let candidates = exec::map_indexed(n_seeds, |seed_idx| -> Option<DVector<f64>> {
        let mut idx = seed_idx;
        let mut coords = DVector::zeros(d);
        for a in 0..d {
            let cell = idx % seed_grid;
            idx /= seed_grid;
            coords[a] = lo[a] + (cell as f64 + 0.5) * widths[a] / seed_grid as f64;
        }
        newton_from(field, box_, coords)
    });

    // normalize, sort lexicographically, cluster within the dedup radius
    let mut found: Vec<DVector<f64>> = candidates.into_iter().flatten().collect();
    let normalized = |p: &DVector<f64>| -> Vec<f64> {
        (0..d).map(|a| (p[a] - lo[a]) / widths[a]).collect()
    };
    found.sort_by(|p, q| {
        let (np, nq) = (normalized(p), normalized(q));
        np.iter()
            .zip(&nq)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| !o.is_eq())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for p in found {
        let close = kept.iter().any(|q| {
            let dist2: f64 = (0..d)
                .map(|a| {
                    let dx = (p[a] - q[a]) / widths[a];
                    dx * dx
                })
                .sum();
            dist2.sqrt() < DEDUP_RADIUS
        });
        if !close {
            kept.push(p);
        }
    }

    let mut survey = CriticalSurvey::default();
    for location in kept {
        let point = Point::from_vector(location.clone());
        let jet = field.jet(&point)?;
        // re-verify convergence with a fresh evaluation
        if jet.grad_norm() > GRADIENT_TOLERANCE {
            continue;
        }
        let eigen = jet.hessian.clone().symmetric_eigen();
        let mut eigenvalues: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        let max_abs = eigenvalues.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        let det: f64 = eigenvalues.iter().product();
        let det_ratio = if max_abs > 0.0 {
            det.abs() / max_abs.powi(field.dim() as i32)
        } else {
            0.0
        };
        if det_ratio < NONDEGENERACY_FLOOR {
            survey.degenerate.push(DegeneratePoint {
                location: location.as_slice().to_vec(),
                value: jet.value,
                det_ratio,
            });
            continue;
        }
        survey.points.push(CriticalPoint {
            location: location.as_slice().to_vec(),
            value: jet.value,
            morse_index: eigenvalues.iter().filter(|e| **e < 0.0).count(),
            hessian_eigenvalues: eigenvalues,
        });
    }
    survey.points.sort_by(|p, q| {
        p.value
            .total_cmp(&q.value)
            .then_with(|| lex_cmp(&p.location, &q.location))
    });
    survey
        .degenerate
        .sort_by(|p, q| p.value.total_cmp(&q.value).then_with(|| lex_cmp(&p.location, &q.location)));
    Ok(survey)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| !o.is_eq())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// One Newton run; `None` if it fails to converge inside the box.
fn newton_from(
    field: &ScalarField,
    box_: &BoundingBox,
    mut x: DVector<f64>,
) -> Option<DVector<f64>> {
    let widths = box_.widths();
    let lo = box_.lo();
    let hi = box_.hi();
    let escape_margin = 0.5;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let p = Point::from_vector(x.clone());
        let jet = field.jet(&p).ok()?;
        if jet.grad_norm() <= GRADIENT_TOLERANCE {
            return box_.contains(&p).then_some(x);
        }
        let lu = jet.hessian.clone().lu();
        let step = lu.solve(&(-&jet.gradient))?;
        x += step;
        for a in 0..x.len() {
            let slack = escape_margin * widths[a];
            if x[a] < lo[a] - slack || x[a] > hi[a] + slack || !x[a].is_finite() {
                return None;
            }
        }
    }
    None
}

/// Strict variant of [`survey_critical_points`]: any degenerate gradient
/// zero is an error naming the point.
pub fn find_critical_points(
    field: &ScalarField,
    box_: &BoundingBox,
    seed_grid: usize,
) -> Result<Vec<CriticalPoint>, MorseError> {
    let survey = survey_critical_points(field, box_, seed_grid)?;
    if let Some(p) = survey.degenerate.first() {
        return Err(MorseError::NotMorse {
            location: p.location.clone(),
            value: p.value,
            det_ratio: p.det_ratio,
        });
    }
    Ok(survey.points)
}

/// Splits `[a, b]` into open intervals of regular values between the
/// critical values inside it.
pub fn regular_decomposition(
    critical_points: &[CriticalPoint],
    interval: &Interval,
) -> RegularDecomposition {
    let critical_values: Vec<f64> = dedup_values(critical_points.iter().map(|p| p.value))
        .into_iter()
        .filter(|v| interval.contains(*v))
        .collect();
    let mut intervals = Vec::new();
    if interval.width() > 0.0 {
        let mut cursor = interval.a();
        for cv in &critical_values {
            if *cv > cursor {
                intervals.push((cursor, *cv));
            }
            cursor = *cv;
        }
        if interval.b() > cursor {
            intervals.push((cursor, interval.b()));
        }
    }
    RegularDecomposition {
        critical_values,
        intervals,
    }
}

/// Probe statistics at one radius around a critical point.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub radius: f64,
    /// `r * max |H|` over the sampled sphere; bounded iff `|H| = O(1/r)`.
    pub r_max_mean_curv: f64,
    /// `r^(n-1) * max |K| |grad f|`; bounded iff `|K grad f| = O(1/r^(n-1))`.
    pub r_pow_max_gauss_grad: f64,
    /// `min |grad f| / r`; bounded away from zero iff `|grad f| >= C r`.
    pub min_grad_over_r: f64,
}

/// Growth-rate table for the singular quantities around a critical point.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeTable {
    pub rows: Vec<ProbeRow>,
}

impl ProbeTable {
    /// `max over radii / value at the largest radius` for the two bounded
    /// statistics; both should stay small (< 10) if the growth rates hold.
    pub fn boundedness_ratios(&self) -> (f64, f64) {
        let first = &self.rows[0];
        let mut r1: f64 = 1.0;
        let mut r2: f64 = 1.0;
        for row in &self.rows {
            r1 = r1.max(row.r_max_mean_curv / first.r_max_mean_curv);
            r2 = r2.max(row.r_pow_max_gauss_grad / first.r_pow_max_gauss_grad);
        }
        (r1, r2)
    }

    /// Smallest `min |grad f| / r` across the ladder.
    pub fn worst_gradient_ratio(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.min_grad_over_r)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Samples spheres of decreasing `radii` around `cp` and records the scaled
/// curvature and gradient statistics of [`ProbeRow`].
///
/// `others` are the remaining known critical points; any of them inside the
/// largest probe ball is an error.
pub fn singularity_probe(
    field: &ScalarField,
    cp: &CriticalPoint,
    others: &[CriticalPoint],
    radii: &[f64],
    directions_per_radius: usize,
    seed: u64,
) -> Result<ProbeTable, MorseError> {
    if radii.is_empty() || directions_per_radius == 0 {
        return Err(MorseError::BadProbe(
            "need at least one radius and one direction".into(),
        ));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted[0] <= 0.0 || !sorted[0].is_finite() {
        return Err(MorseError::BadProbe("radii must be positive".into()));
    }
    let r_max = sorted[0];
    let center = DVector::from_row_slice(&cp.location);
    for other in others {
        let dist = (DVector::from_row_slice(&other.location) - &center).norm();
        if dist < 2.0 * r_max && dist > 0.0 {
            return Err(MorseError::ForeignCriticalPoint {
                value: other.value,
                radius: r_max,
            });
        }
    }
    let d = field.dim();
    let n = field.surface_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(sorted.len());
    for (ri, radius) in sorted.iter().enumerate() {
        rng.set_stream(ri as u64);
        let mut max_h: f64 = 0.0;
        let mut max_kg: f64 = 0.0;
        let mut min_grad = f64::INFINITY;
        for _ in 0..directions_per_radius {
            // isotropic direction via normalized Gaussian coordinates
            let mut dir = DVector::zeros(d);
            loop {
                for a in 0..d {
                    // Box-Muller from two uniforms
                    let (u1, u2): (f64, f64) = (rng.random(), rng.random());
                    dir[a] = (-2.0 * u1.max(1e-300).ln()).sqrt()
                        * (2.0 * std::f64::consts::PI * u2).cos();
                }
                if dir.norm() > 1e-8 {
                    break;
                }
            }
            dir /= dir.norm();
            let p = Point::from_vector(&center + &dir * *radius);
            let jet = match field.jet(&p) {
                Ok(j) => j,
                Err(FieldError::ExcludedSet { .. }) => continue,
                Err(e) => return Err(e.into()),
            };
            min_grad = min_grad.min(jet.grad_norm());
            if let Ok(h) = mean_curvature(&jet, n) {
                max_h = max_h.max(h.abs());
            }
            if let Ok(k) = gaussian_curvature(&jet, n) {
                max_kg = max_kg.max(k.abs() * jet.grad_norm());
            }
        }
        rows.push(ProbeRow {
            radius: *radius,
            r_max_mean_curv: radius * max_h,
            r_pow_max_gauss_grad: radius.powi(n as i32 - 1) * max_kg,
            min_grad_over_r: min_grad / radius,
        });
    }
    Ok(ProbeTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{builtin_field, parse_field};

    fn test_box() -> BoundingBox {
        BoundingBox::centered_cube(3, 2.5)
    }

    #[test]
    fn sphere_has_single_minimum() {
        let f = builtin_field("sphere", 3).unwrap();
        let cps = find_critical_points(&f, &test_box(), 8).unwrap();
        assert_eq!(cps.len(), 1);
        let cp = &cps[0];
        assert!(cp.location.iter().all(|x| x.abs() < 1e-8));
        assert!(cp.value.abs() < 1e-15);
        assert_eq!(cp.morse_index, 0);
    }

    #[test]
    fn double_well_three_critical_points() {
        let f = builtin_field("double_well", 3).unwrap();
        let cps = find_critical_points(&f, &test_box(), 8).unwrap();
        assert_eq!(cps.len(), 3);
        // sorted by value: the two minima first, then the saddle
        assert!(cps[0].value.abs() < 1e-12 && cps[1].value.abs() < 1e-12);
        assert!((cps[2].value - 1.0).abs() < 1e-12);
        assert_eq!(cps[0].morse_index, 0);
        assert_eq!(cps[1].morse_index, 0);
        assert_eq!(cps[2].morse_index, 1);
        assert!((cps[0].location[0] + 1.0).abs() < 1e-8);
        assert!((cps[1].location[0] - 1.0).abs() < 1e-8);
        // saddle Hessian eigenvalues are (-4, 2, 2)
        let eig = &cps[2].hessian_eigenvalues;
        assert!((eig[0] + 4.0).abs() < 1e-8);
        assert!((eig[1] - 2.0).abs() < 1e-8 && (eig[2] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn critical_points_reverify_with_fresh_jets() {
        let f = builtin_field("double_well", 3).unwrap();
        for cp in find_critical_points(&f, &test_box(), 8).unwrap() {
            let jet = f.jet(&cp.point()).unwrap();
            assert!(jet.grad_norm() <= GRADIENT_TOLERANCE, "{cp:?}");
            assert!((jet.value - cp.value).abs() <= 1e-12);
        }
    }

    #[test]
    fn linear_field_has_no_critical_points() {
        let f = parse_field("x", 3).unwrap();
        let cps = find_critical_points(&f, &test_box(), 8).unwrap();
        assert!(cps.is_empty());
    }

    #[test]
    fn torus_critical_circle_is_degenerate() {
        let f = builtin_field("torus(2)", 3).unwrap();
        let survey = survey_critical_points(&f, &test_box(), 8).unwrap();
        assert!(!survey.degenerate.is_empty());
        assert!(survey.degenerate.iter().all(|p| p.value.abs() < 1e-9));
        assert!(matches!(
            find_critical_points(&f, &test_box(), 8),
            Err(MorseError::NotMorse { .. })
        ));
    }

    #[test]
    fn morse_index_stable_under_seed_refinement() {
        let f = builtin_field("double_well", 3).unwrap();
        let coarse = find_critical_points(&f, &test_box(), 8).unwrap();
        let fine = find_critical_points(&f, &test_box(), 16).unwrap();
        assert_eq!(coarse.len(), fine.len());
        for (c, f_) in coarse.iter().zip(&fine) {
            assert_eq!(c.morse_index, f_.morse_index);
        }
    }

    #[test]
    fn decomposition_of_double_well_interval() {
        let f = builtin_field("double_well", 3).unwrap();
        let cps = find_critical_points(&f, &test_box(), 8).unwrap();
        let dec = regular_decomposition(&cps, &Interval::new(0.5, 1.5).unwrap());
        assert_eq!(dec.critical_values, vec![1.0]);
        assert_eq!(dec.intervals, vec![(0.5, 1.0), (1.0, 1.5)]);
    }

    #[test]
    fn decomposition_without_interior_critical_values() {
        let f = builtin_field("sphere", 3).unwrap();
        let cps = find_critical_points(&f, &test_box(), 8).unwrap();
        let dec = regular_decomposition(&cps, &Interval::new(1.0, 4.0).unwrap());
        assert!(dec.critical_values.is_empty());
        assert_eq!(dec.intervals, vec![(1.0, 4.0)]);
    }

    #[test]
    fn degenerate_interval_decomposition_is_empty() {
        let dec = regular_decomposition(&[], &Interval::new(2.0, 2.0).unwrap());
        assert!(dec.critical_values.is_empty());
        assert!(dec.intervals.is_empty());
    }

    #[test]
    fn sphere_probe_statistics_are_exact() {
        let f = builtin_field("sphere", 3).unwrap();
        let cps = find_critical_points(&f, &test_box(), 8).unwrap();
        let radii = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
        let table = singularity_probe(&f, &cps[0], &[], &radii, 32, 17).unwrap();
        for row in &table.rows {
            // H = 1/r and |grad| = 2r exactly on the sphere field
            assert!((row.r_max_mean_curv - 1.0).abs() < 1e-9, "{row:?}");
            assert!((row.min_grad_over_r - 2.0).abs() < 1e-9, "{row:?}");
            assert!((row.r_pow_max_gauss_grad - 2.0).abs() < 1e-9, "{row:?}");
        }
    }

    #[test]
    fn probe_rejects_foreign_critical_point() {
        let f = builtin_field("double_well", 3).unwrap();
        let cps = find_critical_points(&f, &test_box(), 8).unwrap();
        let saddle = cps.iter().find(|c| c.morse_index == 1).unwrap().clone();
        let others: Vec<_> = cps.iter().filter(|c| c.morse_index == 0).cloned().collect();
        let err = singularity_probe(&f, &saddle, &others, &[0.9], 8, 3).unwrap_err();
        assert!(matches!(err, MorseError::ForeignCriticalPoint { .. }));
    }
}
