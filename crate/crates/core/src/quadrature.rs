//! Stratified Monte Carlo estimation of region integrals, level-set
//! integrals and level profiles, with statistical error bars.
//!
//! Sampling is split into work items (stratum cells, further chunked); each
//! item derives an independent ChaCha8 stream from `(seed, item index)` and
//! partial sums are combined in item order. Results are therefore
//! bit-identical for a fixed configuration regardless of thread count, and
//! two sweeps with the same configuration see the same sample positions -
//! which makes estimates of different integrands over one stream exactly
//! comparable.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::DEFAULT_GRAD_FLOOR;
use crate::exec;
use crate::field::{BoundingBox, FieldError, Interval, Jet2, Point, ScalarField};
use crate::identities::{IdentityId, IdentityReport, SideValue, ToleranceSpec};

/// Samples per work item; strata cells with more samples than this are
/// split into several items so that plain (strata = 1) sweeps still
/// parallelize.
const CHUNK_SAMPLES: u64 = 16_384;

/// Minimum samples per stratum cell; the per-axis stratification count is
/// reduced until this holds.
const MIN_SAMPLES_PER_CELL: u64 = 8;

/// Samples inside the region closer to the box boundary than this fraction
/// of the smallest box width are counted as containment suspects.
const BOUNDARY_LAYER_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Error)]
pub enum QuadratureError {
    #[error("invalid quadrature configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("integrand returned a non-finite value at {point:?}")]
    NonFiniteIntegrand { point: Vec<f64> },
    #[error("critical value {value} lies inside the shell [{lo}, {hi}] around t = {t}")]
    CriticalValueInShell { value: f64, t: f64, lo: f64, hi: f64 },
}

/// Monte Carlo configuration. `samples >= 1000`, `shell_epsilon > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Total sample budget for one sweep.
    pub samples: u64,
    /// Seed of the deterministic sample stream.
    pub seed: u64,
    /// Per-axis stratification count (1 = plain uniform sampling).
    pub strata: u32,
    /// Half-width of the slab used for level-set integrals.
    pub shell_epsilon: f64,
    /// Samples per box face in [`containment_check`].
    pub boundary_samples: u64,
}

impl QuadratureConfig {
    pub fn new(samples: u64, seed: u64) -> Result<Self, QuadratureError> {
        let cfg = Self {
            samples,
            seed,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_strata(mut self, strata: u32) -> Self {
        self.strata = strata;
        self
    }

    pub fn with_shell_epsilon(mut self, shell_epsilon: f64) -> Self {
        self.shell_epsilon = shell_epsilon;
        self
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        if self.samples < 1000 {
            return Err(QuadratureError::Config(format!(
                "need at least 1000 samples, got {}",
                self.samples
            )));
        }
        if !(self.shell_epsilon > 0.0 && self.shell_epsilon.is_finite()) {
            return Err(QuadratureError::Config(format!(
                "shell_epsilon must be positive, got {}",
                self.shell_epsilon
            )));
        }
        if self.strata == 0 {
            return Err(QuadratureError::Config("strata must be >= 1".into()));
        }
        if self.boundary_samples == 0 {
            return Err(QuadratureError::Config(
                "boundary_samples must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Default shell half-width for levels inside `interval`.
    pub fn auto_shell_epsilon(interval: &Interval) -> f64 {
        0.005 * interval.width().max(f64::MIN_POSITIVE)
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 0,
            strata: 8,
            shell_epsilon: 0.01,
            boundary_samples: 10_000,
        }
    }
}

/// A Monte Carlo integral value with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples_used: u64,
    /// Fraction of box samples that landed inside the region.
    pub hit_fraction: f64,
    /// Fraction of box samples inside the region that also lie within the
    /// outermost 1% layer of the box; a nonzero value suggests the region
    /// leaks outside the box.
    pub boundary_hit_fraction: f64,
}

impl IntegralEstimate {
    /// True when no sample landed in the region (empty region or wrong box).
    pub fn is_empty_region(&self) -> bool {
        self.hit_fraction == 0.0
    }

    /// Standard error of the difference or sum of two independent estimates.
    pub fn combined_std_error(&self, other: &IntegralEstimate) -> f64 {
        (self.std_error * self.std_error + other.std_error * other.std_error).sqrt()
    }
}

/// Binned estimates of a level profile over an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelProfile {
    /// `bins + 1` strictly increasing edges partitioning the interval.
    pub bin_edges: Vec<f64>,
    /// Per-bin average of the profile over the bin.
    pub values: Vec<f64>,
    /// Per-bin standard errors.
    pub std_errors: Vec<f64>,
}

impl LevelProfile {
    pub fn bins(&self) -> usize {
        self.values.len()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn bin_width(&self, k: usize) -> f64 {
        self.bin_edges[k + 1] - self.bin_edges[k]
    }

    /// Index of the bin containing `t`, if any.
    pub fn bin_of(&self, t: f64) -> Option<usize> {
        if self.values.is_empty() {
            return None;
        }
        let (a, b) = (self.bin_edges[0], *self.bin_edges.last().unwrap());
        if t < a || t > b {
            return None;
        }
        let width = (b - a) / self.bins() as f64;
        Some((((t - a) / width) as usize).min(self.bins() - 1))
    }

    /// Trapezoid integral of the piecewise-linear interpolant through the
    /// bin midpoints, with constant extension over the end half-bins.
    /// Returns `(value, std_error)`. For uniform bins this reduces to the
    /// midpoint sum `sum(width_k * value_k)`.
    pub fn integrate(&self) -> (f64, f64) {
        self.integrate_weighted(|_| 1.0)
    }

    /// As [`LevelProfile::integrate`] but with the profile multiplied by
    /// `weight(t)` evaluated at bin midpoints.
    pub fn integrate_weighted(&self, weight: impl Fn(f64) -> f64) -> (f64, f64) {
        let mids = self.midpoints();
        let n = self.bins();
        if n == 0 {
            return (0.0, 0.0);
        }
        let w: Vec<f64> = mids.iter().map(|m| weight(*m)).collect();
        let y: Vec<f64> = self
            .values
            .iter()
            .zip(&w)
            .map(|(v, wk)| v * wk)
            .collect();
        let mut total = 0.0;
        // interior trapezoids between midpoints
        for k in 0..n.saturating_sub(1) {
            total += 0.5 * (y[k] + y[k + 1]) * (mids[k + 1] - mids[k]);
        }
        // constant end caps over the half-bins beyond the first/last midpoint
        total += y[0] * (mids[0] - self.bin_edges[0]);
        total += y[n - 1] * (self.bin_edges[n] - mids[n - 1]);
        let var: f64 = (0..n)
            .map(|k| {
                let e = self.std_errors[k] * w[k] * self.bin_width(k);
                e * e
            })
            .sum();
        (total, var.sqrt())
    }
}

/// One suspicious box face found by [`containment_check`].
#[derive(Debug, Clone, Serialize)]
pub struct ContainmentWarning {
    pub axis: usize,
    /// `false` for the `lo` face, `true` for the `hi` face.
    pub upper_face: bool,
    /// Samples on this face whose field value fell inside the interval.
    pub hits: u64,
    pub samples: u64,
    pub example_point: Vec<f64>,
    pub example_value: f64,
}

impl ContainmentWarning {
    pub fn describe(&self) -> String {
        format!(
            "box face {}{} has {}/{} samples with field value inside the interval (e.g. f({:?}) = {:.6}); the region may leak outside the box",
            ["x", "y", "z", "w", "v"].get(self.axis).copied().unwrap_or("axis"),
            if self.upper_face { "=hi" } else { "=lo" },
            self.hits,
            self.samples,
            self.example_point,
            self.example_value,
        )
    }
}

struct SamplePlan {
    cells_per_axis: usize,
    items: Vec<WorkItem>,
    cell_volume: f64,
    total_samples: u64,
}

#[derive(Clone, Copy)]
struct WorkItem {
    cell: usize,
    samples: u64,
    stream: u64,
}

fn build_plan(cfg: &QuadratureConfig, box_: &BoundingBox) -> SamplePlan {
    let dim = box_.dim() as u32;
    let mut s = cfg.strata.max(1) as u64;
    while s > 1 && s.pow(dim).saturating_mul(MIN_SAMPLES_PER_CELL) > cfg.samples {
        s -= 1;
    }
    let n_cells = s.pow(dim);
    let base = cfg.samples / n_cells;
    let rem = cfg.samples % n_cells;
    let mut items = Vec::new();
    let mut stream = 0;
    for cell in 0..n_cells {
        let mut left = base + u64::from(cell < rem);
        while left > 0 {
            let take = left.min(CHUNK_SAMPLES);
            items.push(WorkItem {
                cell: cell as usize,
                samples: take,
                stream,
            });
            stream += 1;
            left -= take;
        }
    }
    SamplePlan {
        cells_per_axis: s as usize,
        items,
        cell_volume: box_.volume() / n_cells as f64,
        total_samples: cfg.samples,
    }
}

/// Visits every sample point of one work item with a per-item RNG stream.
fn for_each_point<E>(
    plan: &SamplePlan,
    box_: &BoundingBox,
    item: &WorkItem,
    seed: u64,
    mut visit: impl FnMut(Point) -> Result<(), E>,
) -> Result<(), E> {
    let dim = box_.dim();
    let s = plan.cells_per_axis;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(item.stream);
    let mut cell_coord = vec![0usize; dim];
    let mut idx = item.cell;
    for c in cell_coord.iter_mut() {
        *c = idx % s;
        idx /= s;
    }
    let lo = box_.lo();
    let widths = box_.widths();
    for _ in 0..item.samples {
        let mut coords = DVector::zeros(dim);
        for a in 0..dim {
            let u: f64 = rng.random();
            coords[a] = lo[a] + (cell_coord[a] as f64 + u) * widths[a] / s as f64;
        }
        visit(Point::from_vector(coords))?;
    }
    Ok(())
}

#[derive(Default, Clone)]
struct ItemAcc {
    sum: f64,
    sum_sq: f64,
    hits: u64,
    boundary_hits: u64,
}

/// Stratified Monte Carlo estimate of the integral of `g` over
/// `{p in box : a <= f(p) <= b}`.
///
/// Samples whose gradient norm falls at or below the curvature floor
/// contribute zero (the integrands of interest stay integrable across
/// critical points, so the bias vanishes with the floor); samples on a
/// field's excluded singular set contribute zero likewise.
pub fn region_integral(
    field: &ScalarField,
    g: impl Fn(&Jet2) -> f64 + Sync,
    interval: &Interval,
    box_: &BoundingBox,
    cfg: &QuadratureConfig,
) -> Result<IntegralEstimate, QuadratureError> {
    cfg.validate()?;
    check_box(field, box_)?;
    let plan = build_plan(cfg, box_);
    let accs = exec::map_indexed(plan.items.len(), |i| -> Result<ItemAcc, QuadratureError> {
        let item = &plan.items[i];
        let mut acc = ItemAcc::default();
        for_each_point(&plan, box_, item, cfg.seed, |p| {
            let f = match field.value(&p) {
                Ok(f) => f,
                Err(FieldError::ExcludedSet { .. }) => return Ok(()),
                Err(e) => return Err(e.into()),
            };
            if !interval.contains(f) {
                return Ok(());
            }
            acc.hits += 1;
            if box_.boundary_distance_fraction(&p) < BOUNDARY_LAYER_FRACTION {
                acc.boundary_hits += 1;
            }
            let w = match field.jet(&p) {
                Ok(jet) => {
                    if jet.grad_norm() <= DEFAULT_GRAD_FLOOR {
                        0.0
                    } else {
                        g(&jet)
                    }
                }
                Err(FieldError::ExcludedSet { .. }) => 0.0,
                Err(e) => return Err(e.into()),
            };
            if !w.is_finite() {
                return Err(QuadratureError::NonFiniteIntegrand {
                    point: p.as_slice().to_vec(),
                });
            }
            acc.sum += w;
            acc.sum_sq += w * w;
            Ok(())
        })?;
        Ok(acc)
    });

    // combine per-cell in item order: items of one cell are contiguous
    let mut value = 0.0;
    let mut variance = 0.0;
    let mut hits = 0u64;
    let mut boundary_hits = 0u64;
    let mut i = 0;
    while i < plan.items.len() {
        let cell = plan.items[i].cell;
        let (mut sum, mut sum_sq, mut n) = (0.0, 0.0, 0u64);
        while i < plan.items.len() && plan.items[i].cell == cell {
            let acc = accs[i].as_ref().map_err(Clone::clone)?;
            sum += acc.sum;
            sum_sq += acc.sum_sq;
            n += plan.items[i].samples;
            hits += acc.hits;
            boundary_hits += acc.boundary_hits;
            i += 1;
        }
        let nf = n as f64;
        value += plan.cell_volume * sum / nf;
        if n >= 2 {
            let cell_var = ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0);
            variance += plan.cell_volume * plan.cell_volume * cell_var / nf;
        }
    }
    Ok(IntegralEstimate {
        value,
        std_error: variance.sqrt(),
        samples_used: plan.total_samples,
        hit_fraction: hits as f64 / plan.total_samples as f64,
        boundary_hit_fraction: boundary_hits as f64 / plan.total_samples as f64,
    })
}

/// Estimate of the level-set integral `int_{f = t} g dsigma` as the slab
/// limit `(1/2eps) int_{t-eps <= f <= t+eps} g |grad f| dmu`.
///
/// Fails if a known critical value lies inside the slab.
pub fn level_integral_shell(
    field: &ScalarField,
    g: impl Fn(&Jet2) -> f64 + Sync,
    t: f64,
    box_: &BoundingBox,
    cfg: &QuadratureConfig,
    critical_values: &[f64],
) -> Result<IntegralEstimate, QuadratureError> {
    cfg.validate()?;
    let eps = cfg.shell_epsilon;
    let (lo, hi) = (t - eps, t + eps);
    if let Some(cv) = critical_values.iter().find(|cv| lo <= **cv && **cv <= hi) {
        return Err(QuadratureError::CriticalValueInShell {
            value: *cv,
            t,
            lo,
            hi,
        });
    }
    let interval = Interval::new(lo, hi)?;
    let mut est = region_integral(
        field,
        |jet| g(jet) * jet.grad_norm(),
        &interval,
        box_,
        cfg,
    )?;
    est.value /= 2.0 * eps;
    est.std_error /= 2.0 * eps;
    Ok(est)
}

/// Profile of the level-set volume: bin `k` estimates the average of
/// `nu(t) = int_{f = t} dsigma` over the bin.
pub fn nu_profile(
    field: &ScalarField,
    interval: &Interval,
    bins: usize,
    box_: &BoundingBox,
    cfg: &QuadratureConfig,
) -> Result<LevelProfile, QuadratureError> {
    phi_profile(field, |jet| jet.grad_norm(), interval, bins, box_, cfg)
}

/// Generalized profile: bin `k` estimates the average over the bin of
/// `phi(t) = int_{f = t} (g / |grad f|) dsigma`, computed from one volume
/// sweep with per-sample weight `g`.
///
/// The per-bin standard errors use the unstratified variance formula and
/// are mildly conservative under stratification.
pub fn phi_profile(
    field: &ScalarField,
    g: impl Fn(&Jet2) -> f64 + Sync,
    interval: &Interval,
    bins: usize,
    box_: &BoundingBox,
    cfg: &QuadratureConfig,
) -> Result<LevelProfile, QuadratureError> {
    cfg.validate()?;
    check_box(field, box_)?;
    if bins == 0 {
        return Err(QuadratureError::Config("need at least one bin".into()));
    }
    if interval.width() <= 0.0 {
        return Err(QuadratureError::Config(
            "profile interval must have positive width".into(),
        ));
    }
    let plan = build_plan(cfg, box_);
    let (a, width) = (interval.a(), interval.width());
    let bin_width = width / bins as f64;

    #[derive(Clone)]
    struct BinAcc {
        sums: Vec<f64>,
        sum_sqs: Vec<f64>,
    }
    let accs = exec::map_indexed(plan.items.len(), |i| -> Result<BinAcc, QuadratureError> {
        let item = &plan.items[i];
        let mut acc = BinAcc {
            sums: vec![0.0; bins],
            sum_sqs: vec![0.0; bins],
        };
        for_each_point(&plan, box_, item, cfg.seed, |p| {
            let f = match field.value(&p) {
                Ok(f) => f,
                Err(FieldError::ExcludedSet { .. }) => return Ok(()),
                Err(e) => return Err(e.into()),
            };
            if !interval.contains(f) {
                return Ok(());
            }
            let k = (((f - a) / bin_width) as usize).min(bins - 1);
            let w = match field.jet(&p) {
                Ok(jet) => {
                    if jet.grad_norm() <= DEFAULT_GRAD_FLOOR {
                        0.0
                    } else {
                        g(&jet)
                    }
                }
                Err(FieldError::ExcludedSet { .. }) => 0.0,
                Err(e) => return Err(e.into()),
            };
            if !w.is_finite() {
                return Err(QuadratureError::NonFiniteIntegrand {
                    point: p.as_slice().to_vec(),
                });
            }
            acc.sums[k] += w;
            acc.sum_sqs[k] += w * w;
            Ok(())
        })?;
        Ok(acc)
    });

    let volume = box_.volume();
    let n_total = plan.total_samples as f64;
    let mut sums = vec![0.0; bins];
    let mut sum_sqs = vec![0.0; bins];
    for acc in &accs {
        let acc = acc.as_ref().map_err(Clone::clone)?;
        for k in 0..bins {
            sums[k] += acc.sums[k];
            sum_sqs[k] += acc.sum_sqs[k];
        }
    }
    let mut values = Vec::with_capacity(bins);
    let mut std_errors = Vec::with_capacity(bins);
    for k in 0..bins {
        // bin integral estimate: (V/N) * sum; profile value divides by width
        let integral = volume * sums[k] / n_total;
        values.push(integral / bin_width);
        let var_sample = (sum_sqs[k] - sums[k] * sums[k] / n_total).max(0.0) / (n_total - 1.0);
        let integral_err = volume * (var_sample / n_total).sqrt();
        std_errors.push(integral_err / bin_width);
    }
    let bin_edges = (0..=bins)
        .map(|k| a + k as f64 * bin_width)
        .collect::<Vec<_>>();
    Ok(LevelProfile {
        bin_edges,
        values,
        std_errors,
    })
}

/// Samples every face of the box; a face sample whose field value lies in
/// the interval means the region may extend beyond the box. A heuristic
/// warning, not a proof of containment.
pub fn containment_check(
    field: &ScalarField,
    interval: &Interval,
    box_: &BoundingBox,
    cfg: &QuadratureConfig,
) -> Result<Vec<ContainmentWarning>, QuadratureError> {
    cfg.validate()?;
    check_box(field, box_)?;
    let dim = box_.dim();
    let faces = 2 * dim;
    let per_face = cfg.boundary_samples;
    let lo = box_.lo().to_vec();
    let hi = box_.hi().to_vec();
    let results = exec::map_indexed(faces, |face| -> Result<Option<ContainmentWarning>, QuadratureError> {
        let axis = face / 2;
        let upper_face = face % 2 == 1;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX - face as u64);
        let mut hits = 0u64;
        let mut example: Option<(Vec<f64>, f64)> = None;
        for _ in 0..per_face {
            let mut coords = DVector::zeros(dim);
            for a in 0..dim {
                if a == axis {
                    coords[a] = if upper_face { hi[a] } else { lo[a] };
                } else {
                    let u: f64 = rng.random();
                    coords[a] = lo[a] + u * (hi[a] - lo[a]);
                }
            }
            let p = Point::from_vector(coords);
            let f = match field.value(&p) {
                Ok(f) => f,
                Err(FieldError::ExcludedSet { .. }) => continue,
                Err(e) => return Err(e.into()),
            };
            if interval.contains(f) {
                hits += 1;
                if example.is_none() {
                    example = Some((p.as_slice().to_vec(), f));
                }
            }
        }
        Ok(example.map(|(example_point, example_value)| ContainmentWarning {
            axis,
            upper_face,
            hits,
            samples: per_face,
            example_point,
            example_value,
        }))
    });
    let mut warnings = Vec::new();
    for r in results {
        if let Some(w) = r? {
            warnings.push(w);
        }
    }
    Ok(warnings)
}

/// Verifies the volume-slicing identity: the region integral of `g` equals
/// the level integral of the profile `phi_g(t) = int_{f=t} g/|grad f| ds`
/// over the interval. Both sides share the sample stream; the right side
/// goes through binning and profile integration, so the check exercises
/// the whole profile pipeline against the direct sum.
#[allow(clippy::too_many_arguments)]
pub fn verify_coarea(
    field: &ScalarField,
    g: impl Fn(&Jet2) -> f64 + Sync,
    interval: &Interval,
    box_: &BoundingBox,
    cfg: &QuadratureConfig,
    bins: usize,
    tol: &ToleranceSpec,
    critical_values: &[f64],
) -> Result<IdentityReport, QuadratureError> {
    let lhs = region_integral(field, &g, interval, box_, cfg)?;
    let profile = phi_profile(field, &g, interval, bins, box_, cfg)?;
    let (rhs_value, rhs_err) = profile.integrate();
    let mut notes = Vec::new();
    for cv in critical_values {
        if let Some(bin) = profile.bin_of(*cv) {
            notes.push(format!(
                "profile bin {bin} [{:.6}, {:.6}] contains critical value {cv}",
                profile.bin_edges[bin],
                profile.bin_edges[bin + 1]
            ));
        }
    }
    Ok(IdentityReport::compare(
        IdentityId::Coarea,
        SideValue::new(lhs.value, lhs.std_error),
        SideValue::new(rhs_value, rhs_err),
        tol,
        notes,
    ))
}

fn check_box(field: &ScalarField, box_: &BoundingBox) -> Result<(), QuadratureError> {
    if box_.dim() != field.dim() {
        return Err(QuadratureError::Config(format!(
            "box dimension {} does not match field dimension {}",
            box_.dim(),
            field.dim()
        )));
    }
    if !field.domain().encloses(box_) {
        return Err(QuadratureError::Config(
            "integration box extends beyond the field's domain box".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::builtin_field;
    use std::f64::consts::PI;

    fn sphere() -> ScalarField {
        builtin_field("sphere", 3).unwrap()
    }

    fn test_box() -> BoundingBox {
        BoundingBox::centered_cube(3, 2.5)
    }

    fn cfg(samples: u64, seed: u64) -> QuadratureConfig {
        QuadratureConfig::new(samples, seed).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::new(10, 0).is_err());
        assert!(QuadratureConfig::new(1000, 0).is_ok());
        assert!(cfg(1000, 0).with_shell_epsilon(0.0).validate().is_err());
    }

    #[test]
    fn shell_volume_of_sphere() {
        // volume between radius 1 and 2 = 28 pi / 3
        let est = region_integral(
            &sphere(),
            |_| 1.0,
            &Interval::new(1.0, 4.0).unwrap(),
            &test_box(),
            &cfg(400_000, 7),
        )
        .unwrap();
        let truth = 28.0 * PI / 3.0;
        assert!(
            (est.value - truth).abs() < 3.0 * est.std_error.max(1e-6),
            "est {} +- {} vs {}",
            est.value,
            est.std_error,
            truth
        );
        assert!(est.boundary_hit_fraction == 0.0);
    }

    #[test]
    fn gradient_weighted_region_integral() {
        // int |grad f| over 1 <= f <= 4 is 30 pi for the sphere field
        let est = region_integral(
            &sphere(),
            |jet| jet.grad_norm(),
            &Interval::new(1.0, 4.0).unwrap(),
            &test_box(),
            &cfg(400_000, 11),
        )
        .unwrap();
        let truth = 30.0 * PI;
        assert!((est.value - truth).abs() < 3.0 * est.std_error);
    }

    #[test]
    fn degenerate_interval_is_empty() {
        let est = region_integral(
            &sphere(),
            |_| 1.0,
            &Interval::new(2.0, 2.0).unwrap(),
            &test_box(),
            &cfg(50_000, 3),
        )
        .unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.is_empty_region());
    }

    #[test]
    fn determinism_bitwise() {
        let run = || {
            region_integral(
                &sphere(),
                |jet| jet.value * jet.grad_norm(),
                &Interval::new(1.0, 4.0).unwrap(),
                &test_box(),
                &cfg(100_000, 42),
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn linearity_same_stream_doubling_is_exact() {
        // g and 2g over the same stream differ by an exact exponent shift
        let interval = Interval::new(1.0, 4.0).unwrap();
        let c = cfg(100_000, 9);
        let one = region_integral(&sphere(), |j| j.value, &interval, &test_box(), &c).unwrap();
        let two =
            region_integral(&sphere(), |j| 2.0 * j.value, &interval, &test_box(), &c).unwrap();
        assert_eq!(two.value.to_bits(), (2.0 * one.value).to_bits());
    }

    #[test]
    fn linearity_generic_integrands() {
        let interval = Interval::new(1.0, 4.0).unwrap();
        let c = cfg(100_000, 9);
        let f1 = region_integral(&sphere(), |j| j.value, &interval, &test_box(), &c).unwrap();
        let f2 = region_integral(&sphere(), |j| j.grad_norm(), &interval, &test_box(), &c).unwrap();
        let sum = region_integral(
            &sphere(),
            |j| j.value + j.grad_norm(),
            &interval,
            &test_box(),
            &c,
        )
        .unwrap();
        let scale = sum.value.abs().max(1.0);
        assert!(
            (sum.value - (f1.value + f2.value)).abs() <= 1e-12 * scale,
            "sum {} vs {}",
            sum.value,
            f1.value + f2.value
        );
    }

    #[test]
    fn shell_estimates_sphere_area() {
        // nu(1) = 4 pi
        let est = level_integral_shell(
            &sphere(),
            |_| 1.0,
            1.0,
            &test_box(),
            &cfg(2_000_000, 5).with_shell_epsilon(0.01),
            &[0.0],
        )
        .unwrap();
        let truth = 4.0 * PI;
        let tol = (3.0 * est.std_error).max(0.01 * truth);
        assert!(
            (est.value - truth).abs() < tol,
            "est {} +- {} vs {}",
            est.value,
            est.std_error,
            truth
        );
    }

    #[test]
    fn shell_rejects_critical_value() {
        let err = level_integral_shell(
            &sphere(),
            |_| 1.0,
            0.005,
            &test_box(),
            &cfg(10_000, 5).with_shell_epsilon(0.01),
            &[0.0],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            QuadratureError::CriticalValueInShell { value, .. } if value == 0.0
        ));
    }

    #[test]
    fn nu_profile_tracks_linear_growth() {
        // nu(t) = 4 pi t for the sphere field
        let profile = nu_profile(
            &sphere(),
            &Interval::new(1.0, 4.0).unwrap(),
            10,
            &test_box(),
            &cfg(1_000_000, 13),
        )
        .unwrap();
        for (mid, value) in profile.midpoints().iter().zip(&profile.values) {
            let truth = 4.0 * PI * mid;
            assert!(
                (value - truth).abs() / truth < 0.05,
                "nu({mid}) = {value}, want {truth}"
            );
        }
    }

    #[test]
    fn empty_region_profile_is_zero() {
        let profile = nu_profile(
            &sphere(),
            &Interval::new(100.0, 101.0).unwrap(),
            5,
            &test_box(),
            &cfg(10_000, 1),
        )
        .unwrap();
        assert!(profile.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn containment_warnings_fire_when_region_leaks() {
        let quiet = containment_check(
            &sphere(),
            &Interval::new(1.0, 4.0).unwrap(),
            &test_box(),
            &cfg(10_000, 2),
        )
        .unwrap();
        assert!(quiet.is_empty());
        // level-16 sphere has radius 4 > 2.5: every face sees the region
        let loud = containment_check(
            &sphere(),
            &Interval::new(1.0, 16.0).unwrap(),
            &test_box(),
            &cfg(10_000, 2),
        )
        .unwrap();
        assert_eq!(loud.len(), 6);
    }

    #[test]
    fn containment_quiet_for_degenerate_interval_off_boundary() {
        let warnings = containment_check(
            &sphere(),
            &Interval::new(2.0, 2.0).unwrap(),
            &test_box(),
            &cfg(10_000, 2),
        )
        .unwrap();
        assert!(warnings.is_empty());
    }

    #[test]
    fn profile_integration_rule_matches_midpoint_sum() {
        let profile = LevelProfile {
            bin_edges: vec![0.0, 1.0, 2.0, 3.0],
            values: vec![2.0, 4.0, 6.0],
            std_errors: vec![0.0, 0.0, 0.0],
        };
        let (v, _) = profile.integrate();
        assert!((v - 12.0).abs() < 1e-14);
    }
}
