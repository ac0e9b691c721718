//! `lsmetrics`: curvature and measure metrics of level hypersurfaces.
//!
//! Subcommands:
//!
//! * `verify`: run the integral identity suite, write `reports.json`
//! * `profile`: write the binned level-volume profile as `profile.csv`
//! * `critical`: print critical points and the regular decomposition
//! * `mesh`: extract a level-set triangle mesh, write `mesh.off`
//!
//! Exit codes: 0 success (skipped preconditions included), 1 verification
//! or topology failure, 2 usage/configuration error. Every run is fully
//! reproducible from its flags; the resolved configuration is echoed into
//! each output artifact.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use levelset_metrics::identities::{run_suite, SuiteError};
use levelset_metrics::meshing::{
    connected_components, euler_characteristic, extract_level_set, surface_area, GridSpec,
};
use levelset_metrics::morse::{regular_decomposition, survey_critical_points};
use levelset_metrics::quadrature::nu_profile;

use config::{CliError, FileConfig, Resolved};

#[derive(Parser)]
#[command(
    name = "lsmetrics",
    about = "Curvature and measure metrics of level hypersurfaces of Morse functions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the integral identities and write reports.json
    Verify(CommonArgs),
    /// Write the binned level-volume profile nu(t) as profile.csv
    Profile(CommonArgs),
    /// Find and classify critical points; print the regular decomposition
    Critical(CommonArgs),
    /// Extract a level-set triangle mesh and write mesh.off
    Mesh(CommonArgs),
}

#[derive(Args, Clone)]
pub struct CommonArgs {
    /// Field spec: builtin name (sphere, double_well, torus(R),
    /// quadric(c1,..,cd)) or an expression in x,y,z,w,v
    #[arg(long)]
    field: Option<String>,

    /// Ambient dimension d (3..=5)
    #[arg(long)]
    dim: Option<usize>,

    /// Level interval endpoints a b
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    interval: Option<Vec<f64>>,

    /// Box as `lo hi` (uniform across axes) or `lo1 hi1 lo2 hi2 ...`
    #[arg(long, num_args = 2.., allow_negative_numbers = true)]
    r#box: Option<Vec<f64>>,

    /// Monte Carlo samples per sweep
    #[arg(long)]
    samples: Option<u64>,

    /// RNG seed; fixed seed means bit-identical output
    #[arg(long)]
    seed: Option<u64>,

    /// Stratification cells per axis
    #[arg(long)]
    strata: Option<u32>,

    /// Profile bins
    #[arg(long)]
    bins: Option<usize>,

    /// Marching-cubes cells per axis
    #[arg(long)]
    resolution: Option<u32>,

    /// Comma-separated identity list (coarea,thm_a,cor_vprime,thm_b,
    /// prop_a,prop_b) or `all`
    #[arg(long)]
    identities: Option<String>,

    /// Weight h(t) for the weighted identity: `const:<c>`, `indicator:<t0>`
    /// or `poly:<c0,c1,...>`; repeatable
    #[arg(long = "weight")]
    weights: Vec<String>,

    /// Level for the derivative identity (default: interval midpoint)
    #[arg(long, allow_negative_numbers = true)]
    t0: Option<f64>,

    /// Half-step for the mesh finite difference of nu'(t0)
    #[arg(long)]
    fd_step: Option<f64>,

    /// Shell half-width for level integrals (default: 0.5% of the interval)
    #[arg(long)]
    shell_epsilon: Option<f64>,

    /// Relative tolerance floor of identity verdicts
    #[arg(long)]
    rel_floor: Option<f64>,

    /// Seed grid nodes per axis for the critical point search
    #[arg(long)]
    seed_grid: Option<usize>,

    /// Level value for `mesh`
    #[arg(long, allow_negative_numbers = true)]
    level: Option<f64>,

    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,

    /// JSON file with the full run configuration; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,

    /// Also write machine-readable JSON for `critical`
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(args) => dispatch(args, "verify", cmd_verify),
        Command::Profile(args) => dispatch(args, "profile", cmd_profile),
        Command::Critical(args) => dispatch(args, "critical", cmd_critical),
        Command::Mesh(args) => dispatch(args, "mesh", cmd_mesh),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(
    args: &CommonArgs,
    command: &str,
    f: impl Fn(&Resolved) -> Result<ExitCode, CliError>,
) -> Result<ExitCode, CliError> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let resolved = Resolved::merge(command, args, &file)?;
    f(&resolved)
}

fn cmd_verify(cfg: &Resolved) -> Result<ExitCode, CliError> {
    let suite = cfg.suite_config()?;
    let result = run_suite(&suite).map_err(|e| match e {
        SuiteError::Config(msg) | SuiteError::Precondition(msg) => CliError::Config(msg),
        SuiteError::Runtime(msg) => CliError::Failure(msg),
    })?;
    output::write_reports(cfg, &result)?;
    println!("{}", cfg.echo_line());
    for report in &result.reports {
        println!("{}", report.summary_line());
    }
    println!("{}", result.summary.summary_line());
    println!("reports written to {}", cfg.out.join("reports.json").display());
    if result.summary.all_ok() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn cmd_profile(cfg: &Resolved) -> Result<ExitCode, CliError> {
    let profile = nu_profile(
        &cfg.field,
        &cfg.interval,
        cfg.bins,
        &cfg.integration_box,
        &cfg.quadrature,
    )
    .map_err(CliError::from_quadrature)?;
    output::write_profile(cfg, &profile)?;
    println!("{}", cfg.echo_line());
    println!(
        "profile with {} bins over [{}, {}] written to {}",
        cfg.bins,
        cfg.interval.a(),
        cfg.interval.b(),
        cfg.out.join("profile.csv").display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_critical(cfg: &Resolved) -> Result<ExitCode, CliError> {
    let survey = survey_critical_points(&cfg.field, &cfg.integration_box, cfg.seed_grid)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    let decomposition = regular_decomposition(&survey.points, &cfg.interval);
    println!("{}", cfg.echo_line());
    if survey.points.is_empty() && survey.degenerate.is_empty() {
        println!("no critical points found in the box");
    } else {
        println!("{:<14} {:<6} location", "value", "index");
        for cp in &survey.points {
            println!(
                "{:<14.6} {:<6} ({})",
                cp.value,
                cp.morse_index,
                cp.location
                    .iter()
                    .map(|x| format!("{x:.6}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
    }
    println!(
        "decomposition of [{}, {}]: {}",
        cfg.interval.a(),
        cfg.interval.b(),
        decomposition.describe()
    );
    if cfg.json {
        output::write_critical(cfg, &survey, &decomposition)?;
        println!(
            "critical point data written to {}",
            cfg.out.join("critical.json").display()
        );
    }
    if !survey.degenerate.is_empty() {
        for p in &survey.degenerate {
            eprintln!(
                "degenerate (non-Morse) gradient zero at ({}) with value {:.6}",
                p.location
                    .iter()
                    .map(|x| format!("{x:.6}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                p.value
            );
        }
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_mesh(cfg: &Resolved) -> Result<ExitCode, CliError> {
    if cfg.field.dim() != 3 {
        return Err(CliError::Config(format!(
            "mesh extraction needs dimension 3, got {}",
            cfg.field.dim()
        )));
    }
    let level = cfg
        .level
        .ok_or_else(|| CliError::Config("mesh needs --level <t>".into()))?;
    let grid = GridSpec::new(cfg.integration_box.clone(), cfg.resolution)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mesh = extract_level_set(&cfg.field, level, &grid)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    println!("{}", cfg.echo_line());
    if mesh.is_empty() {
        println!("warning: level set f = {level} misses the box; mesh is empty");
    }
    output::write_mesh(cfg, &mesh, level)?;
    let area = surface_area(&mesh);
    let components = connected_components(&mesh);
    match euler_characteristic(&mesh) {
        Ok(chi) => {
            println!("area = {area:.3e}, components = {components}, chi = {chi}");
        }
        Err(e) => {
            eprintln!("topology error: {e}");
            return Ok(ExitCode::from(1));
        }
    }
    println!("mesh written to {}", cfg.out.join("mesh.off").display());
    Ok(ExitCode::SUCCESS)
}
