//! Numerical verification of the integral identities tying level-set
//! volumes, curvature integrals and topology together.
//!
//! Each identity is checked by computing its two sides with estimators
//! that share no code path for the quantity itself (triangle meshes
//! against Monte Carlo region integrals, direct region sums against binned
//! level profiles, Monte Carlo against exact topological constants), so
//! agreement is evidence rather than tautology.
//!
//! The identities, in fixed report order:
//!
//! * `COAREA`: the region integral of `g` equals the level integral of the
//!   profile `phi_g(t) = int_{f=t} g/|grad f| ds`.
//! * `THM_A`: `nu(b) - nu(a) = n int H dmu` over the region between the
//!   levels.
//! * `COR_VPRIME`: `nu'(t0) = n int_{f=t0} H/|grad f| ds`.
//! * `THM_B`: `int (h of f) |grad f| dmu = int h(t) nu(t) dt` for weights
//!   `h`.
//! * `PROP_A`: `int K (df/dx_i) dmu = 0` for every coordinate `i`.
//! * `PROP_B`: for even `n` and a critical-value-free interval,
//!   `int K |grad f| dmu = (b-a)/2 * chi(f^-1(a)) * vol(S^n)`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;
use thiserror::Error;

use crate::curvature::{gaussian_curvature, mean_curvature};
use crate::field::{BoundingBox, Interval, ScalarField};
use crate::meshing::{
    euler_characteristic, extract_level_set, surface_area, surface_integral, GridSpec,
    MeshError, TriangleMesh,
};
use crate::morse::{
    regular_decomposition, survey_critical_points, CriticalSurvey, MorseError,
    RegularDecomposition,
};
use crate::quadrature::{
    containment_check, level_integral_shell, nu_profile, region_integral, verify_coarea,
    IntegralEstimate, LevelProfile, QuadratureConfig, QuadratureError,
};

/// The verifiable identities, in fixed report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum IdentityId {
    #[serde(rename = "COAREA")]
    Coarea,
    #[serde(rename = "THM_A")]
    ThmA,
    #[serde(rename = "COR_VPRIME")]
    CorVprime,
    #[serde(rename = "THM_B")]
    ThmB,
    #[serde(rename = "PROP_A")]
    PropA,
    #[serde(rename = "PROP_B")]
    PropB,
}

impl IdentityId {
    pub const ALL: [IdentityId; 6] = [
        IdentityId::Coarea,
        IdentityId::ThmA,
        IdentityId::CorVprime,
        IdentityId::ThmB,
        IdentityId::PropA,
        IdentityId::PropB,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            IdentityId::Coarea => "COAREA",
            IdentityId::ThmA => "THM_A",
            IdentityId::CorVprime => "COR_VPRIME",
            IdentityId::ThmB => "THM_B",
            IdentityId::PropA => "PROP_A",
            IdentityId::PropB => "PROP_B",
        }
    }

    pub fn parse(s: &str) -> Option<IdentityId> {
        match s.trim().to_ascii_uppercase().as_str() {
            "COAREA" => Some(IdentityId::Coarea),
            "THM_A" => Some(IdentityId::ThmA),
            "COR_VPRIME" => Some(IdentityId::CorVprime),
            "THM_B" => Some(IdentityId::ThmB),
            "PROP_A" => Some(IdentityId::PropA),
            "PROP_B" => Some(IdentityId::PropB),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

/// One side of an identity: a value with a statistical standard error
/// (zero for exact or deterministic sides).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SideValue {
    pub value: f64,
    pub stderr: f64,
}

impl SideValue {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
        }
    }

    pub fn scaled(est: &IntegralEstimate, factor: f64) -> Self {
        Self {
            value: factor * est.value,
            stderr: factor.abs() * est.std_error,
        }
    }
}

impl From<&IntegralEstimate> for SideValue {
    fn from(est: &IntegralEstimate) -> Self {
        Self {
            value: est.value,
            stderr: est.std_error,
        }
    }
}

/// Pass threshold parameters: `tolerance = max(rel_floor * scale,
/// k_sigma * combined stderr)` with `scale = max(|lhs|, |rhs|, 1)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ToleranceSpec {
    pub rel_floor: f64,
    pub k_sigma: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            rel_floor: 1e-3,
            k_sigma: 3.0,
        }
    }
}

/// Verdict of one identity check.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub identity: IdentityId,
    pub lhs: SideValue,
    pub rhs: SideValue,
    #[serde(rename = "diff")]
    pub abs_diff: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl IdentityReport {
    pub fn compare(
        identity: IdentityId,
        lhs: SideValue,
        rhs: SideValue,
        tol: &ToleranceSpec,
        notes: Vec<String>,
    ) -> Self {
        let combined = (lhs.stderr * lhs.stderr + rhs.stderr * rhs.stderr).sqrt();
        let scale = lhs.value.abs().max(rhs.value.abs()).max(1.0);
        let tolerance = (tol.rel_floor * scale).max(tol.k_sigma * combined);
        Self::with_tolerance(identity, lhs, rhs, tolerance, notes)
    }

    pub fn with_tolerance(
        identity: IdentityId,
        lhs: SideValue,
        rhs: SideValue,
        tolerance: f64,
        notes: Vec<String>,
    ) -> Self {
        let abs_diff = (lhs.value - rhs.value).abs();
        let verdict = if abs_diff <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            identity,
            lhs,
            rhs,
            abs_diff,
            tolerance,
            verdict,
            notes,
        }
    }

    pub fn skipped(identity: IdentityId, reason: String) -> Self {
        Self {
            identity,
            lhs: SideValue::exact(0.0),
            rhs: SideValue::exact(0.0),
            abs_diff: 0.0,
            tolerance: 0.0,
            verdict: Verdict::Skipped,
            notes: vec![reason],
        }
    }

    /// One human-readable line, values rounded to four significant digits.
    pub fn summary_line(&self) -> String {
        match self.verdict {
            Verdict::Skipped => format!(
                "{:<10} SKIP  {}",
                self.identity.as_str(),
                self.notes.first().cloned().unwrap_or_default()
            ),
            v => format!(
                "{:<10} {}  lhs={:.3e} rhs={:.3e} |diff|={:.3e} tol={:.3e}{}",
                self.identity.as_str(),
                if v == Verdict::Pass { "PASS " } else { "FAIL " },
                self.lhs.value,
                self.rhs.value,
                self.abs_diff,
                self.tolerance,
                self.notes
                    .iter()
                    .find(|n| n.starts_with("coordinate"))
                    .map(|n| format!(" ({n})"))
                    .unwrap_or_default(),
            ),
        }
    }
}

/// Weight functions `h(t)` for the weighted volume identity.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Constant(f64),
    /// Indicator of `[a, upto]` where `a` is the interval start.
    Indicator { upto: f64 },
    /// Coefficients in ascending degree.
    Polynomial(Vec<f64>),
}

impl WeightSpec {
    pub fn eval(&self, t: f64, interval: &Interval) -> f64 {
        match self {
            WeightSpec::Constant(c) => *c,
            WeightSpec::Indicator { upto } => {
                if interval.a() <= t && t <= *upto {
                    1.0
                } else {
                    0.0
                }
            }
            WeightSpec::Polynomial(coeffs) => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightSpec::Constant(c) => format!("h(t) = {c}"),
            WeightSpec::Indicator { upto } => format!("h = indicator of [a, {upto}]"),
            WeightSpec::Polynomial(coeffs) => {
                let terms: Vec<String> = coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(k, c)| match k {
                        0 => format!("{c}"),
                        1 if *c == 1.0 => "t".to_string(),
                        1 => format!("{c}*t"),
                        _ if *c == 1.0 => format!("t^{k}"),
                        _ => format!("{c}*t^{k}"),
                    })
                    .collect();
                if terms.is_empty() {
                    "h(t) = 0".into()
                } else {
                    format!("h(t) = {}", terms.join(" + "))
                }
            }
        }
    }

    /// Parses `const:<c>`, `indicator:<t0>` or `poly:<c0,c1,...>`.
    pub fn parse(s: &str) -> Result<WeightSpec, String> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| format!("weight `{s}` must look like kind:args"))?;
        let parse_f64 = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number `{x}` in weight `{s}`"))
        };
        match kind.trim() {
            "const" => Ok(WeightSpec::Constant(parse_f64(args)?)),
            "indicator" => Ok(WeightSpec::Indicator {
                upto: parse_f64(args)?,
            }),
            "poly" => Ok(WeightSpec::Polynomial(
                args.split(',').map(parse_f64).collect::<Result<_, _>>()?,
            )),
            other => Err(format!("unknown weight kind `{other}`")),
        }
    }
}

/// Volume of the unit n-sphere: `2 pi^((n+1)/2) / Gamma((n+1)/2)`.
pub fn sphere_volume(n: usize) -> f64 {
    assert!(n >= 1, "sphere dimension must be at least 1");
    use std::f64::consts::PI;
    // Gamma((n+1)/2) at integer or half-integer argument, exactly
    let gamma = if n % 2 == 1 {
        // (n+1)/2 integer m: Gamma(m) = (m-1)!
        let m = n.div_ceil(2);
        (1..m).map(|k| k as f64).product::<f64>()
    } else {
        // (n+1)/2 = m + 1/2: Gamma(m + 1/2) = (2m)! / (4^m m!) sqrt(pi)
        let m = n / 2;
        let fact = |k: usize| (1..=k).map(|j| j as f64).product::<f64>();
        fact(2 * m) / (4.0_f64.powi(m as i32) * fact(m)) * PI.sqrt()
    };
    2.0 * PI.powf((n as f64 + 1.0) / 2.0) / gamma
}

#[derive(Debug, Clone, Error)]
pub enum SuiteError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error("computation failed: {0}")]
    Runtime(String),
}

impl From<QuadratureError> for SuiteError {
    fn from(e: QuadratureError) -> Self {
        match e {
            QuadratureError::Config(msg) => SuiteError::Config(msg),
            other => SuiteError::Runtime(other.to_string()),
        }
    }
}

impl From<MeshError> for SuiteError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::Config(msg) => SuiteError::Config(msg),
            MeshError::UnsupportedDimension(d) => {
                SuiteError::Config(format!("meshing needs dimension 3, got {d}"))
            }
            other => SuiteError::Runtime(other.to_string()),
        }
    }
}

impl From<MorseError> for SuiteError {
    fn from(e: MorseError) -> Self {
        SuiteError::Runtime(e.to_string())
    }
}

/// Everything needed to run the identity suite on one field.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub field: ScalarField,
    pub interval: Interval,
    pub integration_box: BoundingBox,
    pub quadrature: QuadratureConfig,
    /// Marching-cubes cells per axis for mesh-based estimates (d = 3).
    pub mesh_resolution: u32,
    pub identities: Vec<IdentityId>,
    /// Weight functions for the weighted volume identity.
    pub weights: Vec<WeightSpec>,
    pub profile_bins: usize,
    /// Level for the derivative identity; interval midpoint when absent.
    pub t0: Option<f64>,
    /// Half-step of the mesh finite difference for the derivative identity;
    /// 5% of the interval width when absent.
    pub fd_step: Option<f64>,
    pub tolerance: ToleranceSpec,
    /// Seed nodes per axis for the critical point search.
    pub seed_grid: usize,
}

impl SuiteConfig {
    /// A ready-to-run configuration with the library defaults.
    pub fn new(
        field: ScalarField,
        interval: Interval,
        integration_box: BoundingBox,
        quadrature: QuadratureConfig,
    ) -> Self {
        Self {
            field,
            interval,
            integration_box,
            quadrature,
            mesh_resolution: 128,
            identities: IdentityId::ALL.to_vec(),
            weights: vec![
                WeightSpec::Constant(1.0),
                WeightSpec::Polynomial(vec![0.0, 1.0]),
            ],
            profile_bins: 30,
            t0: None,
            fd_step: None,
            tolerance: ToleranceSpec {
                rel_floor: 1e-2,
                k_sigma: 3.0,
            },
            seed_grid: 12,
        }
    }

    fn validate(&self) -> Result<(), SuiteError> {
        if self.integration_box.dim() != self.field.dim() {
            return Err(SuiteError::Config(format!(
                "box dimension {} does not match field dimension {}",
                self.integration_box.dim(),
                self.field.dim()
            )));
        }
        self.quadrature.validate().map_err(SuiteError::from)?;
        if self.identities.is_empty() {
            return Err(SuiteError::Config("no identities requested".into()));
        }
        if self.profile_bins == 0 {
            return Err(SuiteError::Config("profile_bins must be >= 1".into()));
        }
        if self.identities.contains(&IdentityId::ThmB) && self.weights.is_empty() {
            return Err(SuiteError::Config(
                "the weighted volume identity needs at least one weight".into(),
            ));
        }
        if let Some(t0) = self.t0 {
            if !self.interval.contains(t0) {
                return Err(SuiteError::Config(format!(
                    "t0 = {t0} lies outside the interval [{}, {}]",
                    self.interval.a(),
                    self.interval.b()
                )));
            }
        }
        if self.seed_grid < 8 {
            return Err(SuiteError::Config(
                "critical point seed grid must be at least 8 per axis".into(),
            ));
        }
        Ok(())
    }

    /// Default probe level: midpoint of the widest regular subinterval, so
    /// that a critical value at the interval midpoint does not block the
    /// derivative identity.
    fn default_t0(&self, analysis: &SuiteAnalysis) -> f64 {
        analysis
            .decomposition
            .intervals
            .iter()
            .max_by(|(lo1, hi1), (lo2, hi2)| (hi1 - lo1).total_cmp(&(hi2 - lo2)))
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .unwrap_or_else(|| 0.5 * (self.interval.a() + self.interval.b()))
    }

    /// Finite-difference half-step, shrunk to stay inside the regular
    /// subinterval containing `t0`.
    fn fd_step_at(&self, analysis: &SuiteAnalysis, t0: f64) -> f64 {
        if let Some(step) = self.fd_step {
            return step;
        }
        let base = 0.05 * self.interval.width();
        match analysis
            .decomposition
            .intervals
            .iter()
            .find(|(lo, hi)| *lo < t0 && t0 < *hi)
        {
            Some((lo, hi)) => base.min(0.45 * (hi - t0)).min(0.45 * (t0 - lo)),
            None => base,
        }
    }
}

/// Shared field analysis: critical points, interval decomposition,
/// containment warnings and a cache of extracted level-set meshes.
pub struct SuiteAnalysis {
    pub survey: CriticalSurvey,
    pub decomposition: RegularDecomposition,
    /// All values where the gradient vanishes, degenerate zeros included.
    pub guard_values: Vec<f64>,
    pub containment_notes: Vec<String>,
    grid: Option<GridSpec>,
    meshes: Mutex<HashMap<u64, TriangleMesh>>,
}

impl SuiteAnalysis {
    /// Runs the shared analysis and validates endpoint preconditions for
    /// the requested identities. All configuration problems surface here,
    /// before any integral is computed.
    pub fn prepare(cfg: &SuiteConfig) -> Result<Self, SuiteError> {
        cfg.validate()?;
        let survey =
            survey_critical_points(&cfg.field, &cfg.integration_box, cfg.seed_grid)?;
        let decomposition = regular_decomposition(&survey.points, &cfg.interval);
        let mut guard_values = survey.critical_values();
        guard_values.extend(survey.degenerate_values());
        guard_values.sort_by(f64::total_cmp);
        let warnings =
            containment_check(&cfg.field, &cfg.interval, &cfg.integration_box, &cfg.quadrature)?;
        let containment_notes: Vec<String> =
            warnings.iter().map(|w| w.describe()).collect();

        let needs_regular_endpoints = cfg.identities.iter().any(|id| {
            matches!(
                id,
                IdentityId::ThmA | IdentityId::ThmB | IdentityId::CorVprime
            )
        });
        if needs_regular_endpoints {
            for endpoint in [cfg.interval.a(), cfg.interval.b()] {
                if let Some(cv) = nearest_match(&guard_values, endpoint) {
                    return Err(SuiteError::Config(format!(
                        "interval endpoint {endpoint} coincides with critical value {cv}; \
                         level-set volumes need regular endpoints"
                    )));
                }
            }
        }

        let grid = if cfg.field.dim() == 3 {
            Some(
                GridSpec::new(cfg.integration_box.clone(), cfg.mesh_resolution)
                    .map_err(SuiteError::from)?,
            )
        } else {
            None
        };
        Ok(Self {
            survey,
            decomposition,
            guard_values,
            containment_notes,
            grid,
            meshes: Mutex::new(HashMap::new()),
        })
    }

    fn mesh_at(&self, cfg: &SuiteConfig, t: f64) -> Result<TriangleMesh, SuiteError> {
        let grid = self.grid.as_ref().ok_or_else(|| {
            SuiteError::Config("mesh-based estimates need dimension 3".into())
        })?;
        let mut cache = self.meshes.lock().expect("mesh cache lock");
        if let Some(m) = cache.get(&t.to_bits()) {
            return Ok(m.clone());
        }
        let mesh = extract_level_set(&cfg.field, t, grid)?;
        cache.insert(t.to_bits(), mesh.clone());
        Ok(mesh)
    }

    /// Level-set volume `nu(t)`: mesh area in 3D, shell estimate above.
    fn nu_estimate(&self, cfg: &SuiteConfig, t: f64) -> Result<SideValue, SuiteError> {
        if cfg.field.dim() == 3 {
            let mesh = self.mesh_at(cfg, t)?;
            Ok(SideValue::exact(surface_area(&mesh)))
        } else {
            let est = level_integral_shell(
                &cfg.field,
                |_| 1.0,
                t,
                &cfg.integration_box,
                &cfg.quadrature,
                &self.guard_values,
            )?;
            Ok(SideValue::from(&est))
        }
    }

    fn shared_notes(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if !self.decomposition.critical_values.is_empty() {
            notes.push(format!(
                "interval crosses critical values: {}",
                self.decomposition.describe()
            ));
        }
        for dv in self.survey.degenerate_values() {
            notes.push(format!(
                "field has a degenerate (non-Morse) gradient zero at value {dv}"
            ));
        }
        notes.extend(self.containment_notes.iter().cloned());
        notes
    }
}

fn note_boundary_hits(notes: &mut Vec<String>, est: &IntegralEstimate, what: &str) {
    if est.boundary_hit_fraction > 0.0 {
        notes.push(format!(
            "{what}: {:.2e} of the samples lie in the region within the box's outer 1% layer; the region may extend beyond the box",
            est.boundary_hit_fraction
        ));
    }
}

fn nearest_match(values: &[f64], x: f64) -> Option<f64> {
    values
        .iter()
        .find(|v| (*v - x).abs() <= 1e-9 * v.abs().max(1.0))
        .copied()
}

/// The level-set volume difference identity:
/// `nu(b) - nu(a) = n int_{a<=f<=b} H dmu`.
pub fn verify_theorem_a(
    cfg: &SuiteConfig,
    analysis: &SuiteAnalysis,
) -> Result<IdentityReport, SuiteError> {
    let n = cfg.field.surface_dim();
    let nu_a = analysis.nu_estimate(cfg, cfg.interval.a())?;
    let nu_b = analysis.nu_estimate(cfg, cfg.interval.b())?;
    let lhs = SideValue::new(
        nu_b.value - nu_a.value,
        (nu_a.stderr * nu_a.stderr + nu_b.stderr * nu_b.stderr).sqrt(),
    );
    let est = region_integral(
        &cfg.field,
        |jet| mean_curvature(jet, n).unwrap_or(0.0),
        &cfg.interval,
        &cfg.integration_box,
        &cfg.quadrature,
    )?;
    let rhs = SideValue::scaled(&est, n as f64);
    let mut notes = analysis.shared_notes();
    note_boundary_hits(&mut notes, &est, "mean curvature integral");
    notes.push(format!("traversed {}", analysis.decomposition.describe()));
    if cfg.field.dim() == 3 {
        notes.push(format!(
            "nu from mesh areas at resolution {}",
            cfg.mesh_resolution
        ));
    }
    Ok(IdentityReport::compare(
        IdentityId::ThmA,
        lhs,
        rhs,
        &cfg.tolerance,
        notes,
    ))
}

/// The level-volume derivative identity:
/// `nu'(t0) = n int_{f=t0} H / |grad f| ds`.
pub fn verify_corollary_vprime(
    cfg: &SuiteConfig,
    analysis: &SuiteAnalysis,
    t0: f64,
) -> Result<IdentityReport, SuiteError> {
    let n = cfg.field.surface_dim();
    let delta = cfg.fd_step_at(analysis, t0);
    if delta <= 0.0 {
        return Err(SuiteError::Config(
            "finite-difference step must be positive".into(),
        ));
    }
    for cv in &analysis.guard_values {
        if (t0 - delta..=t0 + delta).contains(cv) {
            return Err(SuiteError::Config(format!(
                "critical value {cv} lies inside the derivative stencil [{}, {}]",
                t0 - delta,
                t0 + delta
            )));
        }
    }
    let nu_plus = analysis.nu_estimate(cfg, t0 + delta)?;
    let nu_minus = analysis.nu_estimate(cfg, t0 - delta)?;
    let lhs = SideValue::new(
        (nu_plus.value - nu_minus.value) / (2.0 * delta),
        (nu_plus.stderr * nu_plus.stderr + nu_minus.stderr * nu_minus.stderr).sqrt()
            / (2.0 * delta),
    );
    let rhs = if cfg.field.dim() == 3 {
        let mesh = analysis.mesh_at(cfg, t0)?;
        let si = surface_integral(&mesh, &cfg.field, |jet| {
            mean_curvature(jet, n).unwrap_or(0.0) / jet.grad_norm()
        })
        .map_err(SuiteError::from)?;
        SideValue::exact(n as f64 * si.value)
    } else {
        let est = level_integral_shell(
            &cfg.field,
            |jet| mean_curvature(jet, n).unwrap_or(0.0) / jet.grad_norm(),
            t0,
            &cfg.integration_box,
            &cfg.quadrature,
            &analysis.guard_values,
        )?;
        SideValue::scaled(&est, n as f64)
    };
    let mut notes = analysis.shared_notes();
    notes.push(format!(
        "nu'({t0}) from central difference with half-step {delta}"
    ));
    Ok(IdentityReport::compare(
        IdentityId::CorVprime,
        lhs,
        rhs,
        &cfg.tolerance,
        notes,
    ))
}

/// The weighted volume identity:
/// `int (h of f) |grad f| dmu = int_a^b h(t) nu(t) dt`.
pub fn verify_theorem_b(
    cfg: &SuiteConfig,
    analysis: &SuiteAnalysis,
    weight: &WeightSpec,
) -> Result<IdentityReport, SuiteError> {
    let interval = cfg.interval;
    if let WeightSpec::Indicator { upto } = weight {
        if !interval.contains(*upto) {
            return Err(SuiteError::Config(format!(
                "indicator cut {upto} lies outside the interval"
            )));
        }
    }
    let est = region_integral(
        &cfg.field,
        |jet| weight.eval(jet.value, &interval) * jet.grad_norm(),
        &cfg.interval,
        &cfg.integration_box,
        &cfg.quadrature,
    )?;
    let lhs = SideValue::from(&est);
    let profile = nu_profile(
        &cfg.field,
        &cfg.interval,
        cfg.profile_bins,
        &cfg.integration_box,
        &cfg.quadrature,
    )?;
    let (rhs_value, rhs_err) = match weight {
        WeightSpec::Indicator { upto } => integrate_profile_indicator(&profile, *upto),
        _ => profile.integrate_weighted(|t| weight.eval(t, &interval)),
    };
    let rhs = SideValue::new(rhs_value, rhs_err);
    let mut notes = analysis.shared_notes();
    note_boundary_hits(&mut notes, &est, "weighted gradient integral");
    notes.push(weight.label());
    for cv in &analysis.decomposition.critical_values {
        if let Some(bin) = profile.bin_of(*cv) {
            notes.push(format!("profile bin {bin} contains critical value {cv}"));
        }
    }
    Ok(IdentityReport::compare(
        IdentityId::ThmB,
        lhs,
        rhs,
        &cfg.tolerance,
        notes,
    ))
}

/// Integrates the profile over `[a, upto]`, pro-rating the bin containing
/// the cut so the indicator weight stays exact against binning.
fn integrate_profile_indicator(profile: &LevelProfile, upto: f64) -> (f64, f64) {
    let mut total = 0.0;
    let mut var = 0.0;
    for k in 0..profile.bins() {
        let lo = profile.bin_edges[k];
        let hi = profile.bin_edges[k + 1];
        let overlap = (upto.min(hi) - lo).clamp(0.0, hi - lo);
        if overlap > 0.0 {
            total += profile.values[k] * overlap;
            let e = profile.std_errors[k] * overlap;
            var += e * e;
        }
    }
    (total, var.sqrt())
}

/// The curvature flux identity: `int K (df/dx_i) dmu = 0` per coordinate.
///
/// Returns one report per coordinate; the "zero" tolerance is scaled by the
/// total mass `int |K| |grad f| dmu` so it is meaningful relative to the
/// integrand.
pub fn verify_prop_a(
    cfg: &SuiteConfig,
    analysis: &SuiteAnalysis,
) -> Result<Vec<IdentityReport>, SuiteError> {
    let n = cfg.field.surface_dim();
    let d = cfg.field.dim();
    let mass = region_integral(
        &cfg.field,
        |jet| gaussian_curvature(jet, n).unwrap_or(0.0).abs() * jet.grad_norm(),
        &cfg.interval,
        &cfg.integration_box,
        &cfg.quadrature,
    )?;
    let mut reports = Vec::with_capacity(d);
    for i in 0..d {
        let est = region_integral(
            &cfg.field,
            |jet| gaussian_curvature(jet, n).unwrap_or(0.0) * jet.gradient[i],
            &cfg.interval,
            &cfg.integration_box,
            &cfg.quadrature,
        )?;
        let lhs = SideValue::from(&est);
        let tolerance = (cfg.tolerance.k_sigma * est.std_error)
            .max(cfg.tolerance.rel_floor * mass.value.max(1e-12));
        let mut notes = analysis.shared_notes();
        note_boundary_hits(&mut notes, &est, "curvature flux integral");
        notes.push(format!("coordinate {} of {d}", i + 1));
        notes.push(format!(
            "tolerance scale: int |K| |grad f| dmu = {:.6e}",
            mass.value
        ));
        reports.push(IdentityReport::with_tolerance(
            IdentityId::PropA,
            lhs,
            SideValue::exact(0.0),
            tolerance,
            notes,
        ));
    }
    Ok(reports)
}

/// The topological curvature identity for even `n` over a critical-value-
/// free interval: `int K |grad f| dmu = (b-a)/2 * chi(f^-1(a)) * vol(S^n)`.
///
/// Precondition failures (odd `n`, critical values inside the interval,
/// dimension above 3 where no mesh oracle exists) surface as
/// [`SuiteError::Precondition`]; the suite runner converts them into
/// skipped verdicts.
pub fn verify_prop_b(
    cfg: &SuiteConfig,
    analysis: &SuiteAnalysis,
) -> Result<IdentityReport, SuiteError> {
    let n = cfg.field.surface_dim();
    if !n.is_multiple_of(2) {
        return Err(SuiteError::Precondition(format!(
            "needs even hypersurface dimension, got n = {n}"
        )));
    }
    if cfg.field.dim() != 3 {
        return Err(SuiteError::Precondition(format!(
            "no Euler characteristic oracle beyond dimension 3 (got {})",
            cfg.field.dim()
        )));
    }
    let blocking: Vec<f64> = analysis
        .guard_values
        .iter()
        .copied()
        .filter(|v| cfg.interval.contains(*v))
        .collect();
    if !blocking.is_empty() {
        return Err(SuiteError::Precondition(format!(
            "interval [{}, {}] contains critical values {blocking:?}",
            cfg.interval.a(),
            cfg.interval.b()
        )));
    }
    let est = region_integral(
        &cfg.field,
        |jet| gaussian_curvature(jet, n).unwrap_or(0.0) * jet.grad_norm(),
        &cfg.interval,
        &cfg.integration_box,
        &cfg.quadrature,
    )?;
    let lhs = SideValue::from(&est);

    let mesh_a = analysis.mesh_at(cfg, cfg.interval.a())?;
    if !mesh_a.is_closed() {
        return Err(SuiteError::Runtime(format!(
            "level set at t = {} is not a closed mesh; the box may clip it",
            cfg.interval.a()
        )));
    }
    let chi_a = euler_characteristic(&mesh_a).map_err(SuiteError::from)?;
    let rhs = SideValue::exact(
        0.5 * cfg.interval.width() * chi_a as f64 * sphere_volume(n),
    );
    let mut notes = analysis.shared_notes();
    note_boundary_hits(&mut notes, &est, "total curvature integral");
    notes.push(format!("chi(f^-1({})) = {chi_a}", cfg.interval.a()));

    // the interval is critical-value-free, so chi must match at the far end
    let mesh_b = analysis.mesh_at(cfg, cfg.interval.b())?;
    let chi_b = euler_characteristic(&mesh_b).map_err(SuiteError::from)?;
    let mut report = IdentityReport::compare(IdentityId::PropB, lhs, rhs, &cfg.tolerance, notes);
    if chi_b != chi_a {
        report.verdict = Verdict::Fail;
        report.notes.push(format!(
            "Euler characteristic changed across a supposedly regular interval: \
             chi(a) = {chi_a}, chi(b) = {chi_b}"
        ));
    } else {
        report
            .notes
            .push(format!("chi spot-check at t = {} agrees", cfg.interval.b()));
    }
    Ok(report)
}

/// Per-identity aggregate verdict.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityVerdict {
    pub identity: IdentityId,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary {
    pub identities: Vec<IdentityVerdict>,
    pub identities_passed: usize,
    pub identities_failed: usize,
    pub identities_skipped: usize,
    pub checks_passed: usize,
    pub checks_failed: usize,
    pub checks_skipped: usize,
}

impl SuiteSummary {
    pub fn all_ok(&self) -> bool {
        self.identities_failed == 0
    }

    pub fn summary_line(&self) -> String {
        let total = self.identities.len();
        format!(
            "{}/{} identities passed, {} skipped ({} checks: {} pass, {} fail, {} skip)",
            self.identities_passed,
            total,
            self.identities_skipped,
            self.checks_passed + self.checks_failed + self.checks_skipped,
            self.checks_passed,
            self.checks_failed,
            self.checks_skipped,
        )
    }
}

/// Reports plus aggregate summary for one suite run.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub reports: Vec<IdentityReport>,
    pub summary: SuiteSummary,
}

/// Runs the requested identities in fixed order over one shared field
/// analysis. Precondition failures become skipped verdicts; configuration
/// errors abort before any computation.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResult, SuiteError> {
    let analysis = SuiteAnalysis::prepare(cfg)?;
    let mut reports: Vec<IdentityReport> = Vec::new();
    for id in IdentityId::ALL {
        if !cfg.identities.contains(&id) {
            continue;
        }
        match id {
            IdentityId::Coarea => {
                let report = verify_coarea(
                    &cfg.field,
                    |jet| jet.value,
                    &cfg.interval,
                    &cfg.integration_box,
                    &cfg.quadrature,
                    cfg.profile_bins,
                    &cfg.tolerance,
                    &analysis.guard_values,
                )
                .map_err(SuiteError::from)?;
                reports.push(annotate(report, "g = f"));
            }
            IdentityId::ThmA => reports.push(verify_theorem_a(cfg, &analysis)?),
            IdentityId::CorVprime => {
                let t0 = cfg.t0.unwrap_or_else(|| cfg.default_t0(&analysis));
                reports.push(verify_corollary_vprime(cfg, &analysis, t0)?)
            }
            IdentityId::ThmB => {
                for weight in &cfg.weights {
                    reports.push(verify_theorem_b(cfg, &analysis, weight)?);
                }
            }
            IdentityId::PropA => reports.extend(verify_prop_a(cfg, &analysis)?),
            IdentityId::PropB => match verify_prop_b(cfg, &analysis) {
                Ok(report) => reports.push(report),
                Err(SuiteError::Precondition(reason)) => {
                    reports.push(IdentityReport::skipped(IdentityId::PropB, reason))
                }
                Err(other) => return Err(other),
            },
        }
    }

    let mut identities = Vec::new();
    for id in IdentityId::ALL {
        if !cfg.identities.contains(&id) {
            continue;
        }
        let of_id: Vec<&IdentityReport> =
            reports.iter().filter(|r| r.identity == id).collect();
        let verdict = if of_id.iter().any(|r| r.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if of_id.iter().all(|r| r.verdict == Verdict::Skipped) {
            Verdict::Skipped
        } else {
            Verdict::Pass
        };
        identities.push(IdentityVerdict {
            identity: id,
            verdict,
        });
    }
    let count = |v: Verdict| identities.iter().filter(|i| i.verdict == v).count();
    let check_count = |v: Verdict| reports.iter().filter(|r| r.verdict == v).count();
    let summary = SuiteSummary {
        identities_passed: count(Verdict::Pass),
        identities_failed: count(Verdict::Fail),
        identities_skipped: count(Verdict::Skipped),
        checks_passed: check_count(Verdict::Pass),
        checks_failed: check_count(Verdict::Fail),
        checks_skipped: check_count(Verdict::Skipped),
        identities,
    };
    Ok(SuiteResult { reports, summary })
}

fn annotate(mut report: IdentityReport, note: &str) -> IdentityReport {
    report.notes.push(note.to_string());
    report
}

/// Serializes any value as compact JSON with every float written at full
/// 17-significant-digit precision.
pub fn to_json_full_precision(value: &impl Serialize) -> String {
    struct FullPrecision;
    impl serde_json::ser::Formatter for FullPrecision {
        fn write_f64<W: ?Sized + std::io::Write>(
            &mut self,
            writer: &mut W,
            value: f64,
        ) -> std::io::Result<()> {
            if value.is_finite() {
                write!(writer, "{value:.16e}")
            } else {
                write!(writer, "null")
            }
        }
    }
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    value.serialize(&mut ser).expect("JSON serialization");
    String::from_utf8(out).expect("JSON is UTF-8")
}
