//! Flag/file configuration merging. Precedence: command-line flags, then
//! the `--config` JSON file, then built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use levelset_metrics::identities::{IdentityId, SuiteConfig, ToleranceSpec, WeightSpec};
use levelset_metrics::quadrature::QuadratureConfig;
use levelset_metrics::{field_from_spec, BoundingBox, Interval, ScalarField};

use crate::CommonArgs;

#[derive(Debug)]
pub enum CliError {
    /// Usage or configuration problem; exit code 2.
    Config(String),
    /// Verification, topology or IO failure; exit code 1.
    Failure(String),
}

impl CliError {
    pub fn from_quadrature(e: levelset_metrics::quadrature::QuadratureError) -> Self {
        match e {
            levelset_metrics::quadrature::QuadratureError::Config(msg) => CliError::Config(msg),
            other => CliError::Failure(other.to_string()),
        }
    }
}

/// On-disk run configuration; every field optional so flags can override.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub field: Option<String>,
    pub dim: Option<usize>,
    pub interval: Option<Vec<f64>>,
    #[serde(rename = "box")]
    pub box_: Option<Vec<f64>>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub strata: Option<u32>,
    pub bins: Option<usize>,
    pub resolution: Option<u32>,
    pub identities: Option<String>,
    pub weights: Option<Vec<String>>,
    pub t0: Option<f64>,
    pub fd_step: Option<f64>,
    pub shell_epsilon: Option<f64>,
    pub rel_floor: Option<f64>,
    pub seed_grid: Option<usize>,
    pub level: Option<f64>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }
}

/// The fully resolved configuration echoed into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedEcho {
    pub command: String,
    pub field: String,
    pub dim: usize,
    pub interval: [f64; 2],
    #[serde(rename = "box")]
    pub box_lo_hi: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
    pub strata: u32,
    pub shell_epsilon: f64,
    pub bins: usize,
    pub resolution: u32,
    pub identities: Vec<IdentityId>,
    pub weights: Vec<String>,
    pub t0: Option<f64>,
    pub fd_step: Option<f64>,
    pub rel_floor: f64,
    pub seed_grid: usize,
    pub level: Option<f64>,
}

pub struct Resolved {
    pub command: String,
    pub field_spec: String,
    pub field: ScalarField,
    pub dim: usize,
    pub interval: Interval,
    pub integration_box: BoundingBox,
    pub quadrature: QuadratureConfig,
    pub bins: usize,
    pub resolution: u32,
    pub identities: Vec<IdentityId>,
    pub weights: Vec<WeightSpec>,
    pub weight_specs: Vec<String>,
    pub t0: Option<f64>,
    pub fd_step: Option<f64>,
    pub rel_floor: f64,
    pub seed_grid: usize,
    pub level: Option<f64>,
    pub out: PathBuf,
    pub json: bool,
}

impl Resolved {
    pub fn merge(command: &str, args: &CommonArgs, file: &FileConfig) -> Result<Self, CliError> {
        let field_spec = args
            .field
            .clone()
            .or_else(|| file.field.clone())
            .ok_or_else(|| CliError::Config("missing --field".into()))?;
        let dim = args.dim.or(file.dim).unwrap_or(3);
        let field = field_from_spec(&field_spec, dim)
            .map_err(|e| CliError::Config(format!("bad field spec: {e}")))?;

        let interval_raw = args
            .interval
            .clone()
            .or_else(|| file.interval.clone())
            .unwrap_or(vec![1.0, 4.0]);
        if interval_raw.len() != 2 {
            return Err(CliError::Config(
                "--interval needs exactly two values".into(),
            ));
        }
        let interval = Interval::new(interval_raw[0], interval_raw[1])
            .map_err(|e| CliError::Config(e.to_string()))?;

        let box_raw = args
            .r#box
            .clone()
            .or_else(|| file.box_.clone())
            .unwrap_or(vec![-2.5, 2.5]);
        let integration_box = parse_box(&box_raw, dim)?;

        let samples = args.samples.or(file.samples).unwrap_or(2_000_000);
        let seed = args.seed.or(file.seed).unwrap_or(42);
        let strata = args.strata.or(file.strata).unwrap_or(8);
        let shell_epsilon = args
            .shell_epsilon
            .or(file.shell_epsilon)
            .unwrap_or_else(|| QuadratureConfig::auto_shell_epsilon(&interval));
        let quadrature = QuadratureConfig {
            samples,
            seed,
            strata,
            shell_epsilon,
            ..QuadratureConfig::default()
        };
        quadrature
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;

        let bins = args.bins.or(file.bins).unwrap_or(30);
        if bins == 0 {
            return Err(CliError::Config("--bins must be at least 1".into()));
        }
        let resolution = args.resolution.or(file.resolution).unwrap_or(128);

        let identities_spec = args
            .identities
            .clone()
            .or_else(|| file.identities.clone())
            .unwrap_or_else(|| "all".into());
        let identities = parse_identities(&identities_spec)?;

        let weight_specs: Vec<String> = if !args.weights.is_empty() {
            args.weights.clone()
        } else if let Some(w) = &file.weights {
            w.clone()
        } else {
            vec!["const:1".into(), "poly:0,1".into()]
        };
        let weights = weight_specs
            .iter()
            .map(|w| WeightSpec::parse(w))
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::Config)?;

        Ok(Self {
            command: command.to_string(),
            field_spec,
            field,
            dim,
            interval,
            integration_box,
            quadrature,
            bins,
            resolution,
            identities,
            weights,
            weight_specs,
            t0: args.t0.or(file.t0),
            fd_step: args.fd_step.or(file.fd_step),
            rel_floor: args.rel_floor.or(file.rel_floor).unwrap_or(1e-2),
            seed_grid: args.seed_grid.or(file.seed_grid).unwrap_or(12),
            level: args.level.or(file.level),
            out: args
                .out
                .clone()
                .or_else(|| file.out.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            json: args.json,
        })
    }

    pub fn suite_config(&self) -> Result<SuiteConfig, CliError> {
        let mut cfg = SuiteConfig::new(
            self.field.clone(),
            self.interval,
            self.integration_box.clone(),
            self.quadrature.clone(),
        );
        cfg.mesh_resolution = self.resolution;
        cfg.identities = self.identities.clone();
        cfg.weights = self.weights.clone();
        cfg.profile_bins = self.bins;
        cfg.t0 = self.t0;
        cfg.fd_step = self.fd_step;
        cfg.tolerance = ToleranceSpec {
            rel_floor: self.rel_floor,
            k_sigma: 3.0,
        };
        cfg.seed_grid = self.seed_grid;
        Ok(cfg)
    }

    pub fn echo(&self) -> ResolvedEcho {
        let mut box_lo_hi = Vec::with_capacity(2 * self.dim);
        for a in 0..self.dim {
            box_lo_hi.push(self.integration_box.lo()[a]);
            box_lo_hi.push(self.integration_box.hi()[a]);
        }
        ResolvedEcho {
            command: self.command.clone(),
            field: self.field_spec.clone(),
            dim: self.dim,
            interval: [self.interval.a(), self.interval.b()],
            box_lo_hi,
            samples: self.quadrature.samples,
            seed: self.quadrature.seed,
            strata: self.quadrature.strata,
            shell_epsilon: self.quadrature.shell_epsilon,
            bins: self.bins,
            resolution: self.resolution,
            identities: self.identities.clone(),
            weights: self.weight_specs.clone(),
            t0: self.t0,
            fd_step: self.fd_step,
            rel_floor: self.rel_floor,
            seed_grid: self.seed_grid,
            level: self.level,
        }
    }

    /// One-line echo of the resolved flags for stdout and CSV/OFF headers.
    pub fn echo_line(&self) -> String {
        let e = self.echo();
        let mut line = format!(
            "lsmetrics {} --field {} --dim {} --interval {} {} --box {} --samples {} --seed {} --strata {}",
            e.command,
            e.field,
            e.dim,
            e.interval[0],
            e.interval[1],
            e.box_lo_hi
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" "),
            e.samples,
            e.seed,
            e.strata,
        );
        match e.command.as_str() {
            "verify" => {
                line.push_str(&format!(
                    " --bins {} --resolution {} --identities {} {}",
                    e.bins,
                    e.resolution,
                    e.identities
                        .iter()
                        .map(|i| i.as_str().to_ascii_lowercase())
                        .collect::<Vec<_>>()
                        .join(","),
                    e.weights
                        .iter()
                        .map(|w| format!("--weight {w}"))
                        .collect::<Vec<_>>()
                        .join(" "),
                ));
            }
            "profile" => line.push_str(&format!(" --bins {}", e.bins)),
            "mesh" => {
                line.push_str(&format!(" --resolution {}", e.resolution));
                if let Some(level) = e.level {
                    line.push_str(&format!(" --level {level}"));
                }
            }
            _ => {}
        }
        line
    }
}

fn parse_box(values: &[f64], dim: usize) -> Result<BoundingBox, CliError> {
    let (lo, hi): (Vec<f64>, Vec<f64>) = if values.len() == 2 {
        (vec![values[0]; dim], vec![values[1]; dim])
    } else if values.len() == 2 * dim {
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for a in 0..dim {
            lo.push(values[2 * a]);
            hi.push(values[2 * a + 1]);
        }
        (lo, hi)
    } else {
        return Err(CliError::Config(format!(
            "--box needs 2 values (uniform) or {} (lo hi per axis), got {}",
            2 * dim,
            values.len()
        )));
    };
    BoundingBox::new(lo, hi).map_err(|e| CliError::Config(e.to_string()))
}

fn parse_identities(spec: &str) -> Result<Vec<IdentityId>, CliError> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(IdentityId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        let id = IdentityId::parse(part).ok_or_else(|| {
            CliError::Config(format!(
                "unknown identity `{part}` (expected coarea, thm_a, cor_vprime, thm_b, prop_a, prop_b or all)"
            ))
        })?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("empty identity list".into()));
    }
    Ok(out)
}
