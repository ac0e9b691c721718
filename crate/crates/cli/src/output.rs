//! Artifact writers. JSON and CSV carry every float at full 17-significant-
//! digit precision; all artifacts echo the resolved configuration.

use std::fs;
use std::io::Write;

use serde::Serialize;

use levelset_metrics::identities::{to_json_full_precision, SuiteResult};
use levelset_metrics::meshing::{write_off, TriangleMesh};
use levelset_metrics::morse::{CriticalSurvey, RegularDecomposition};
use levelset_metrics::quadrature::LevelProfile;

use crate::config::{CliError, Resolved, ResolvedEcho};

fn ensure_out_dir(cfg: &Resolved) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cfg.out.display())))
}

fn write_file(cfg: &Resolved, name: &str, contents: &[u8]) -> Result<(), CliError> {
    ensure_out_dir(cfg)?;
    let path = cfg.out.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct ReportsDocument<'a> {
    config: ResolvedEcho,
    reports: &'a [levelset_metrics::identities::IdentityReport],
    summary: &'a levelset_metrics::identities::SuiteSummary,
}

pub fn write_reports(cfg: &Resolved, result: &SuiteResult) -> Result<(), CliError> {
    let doc = ReportsDocument {
        config: cfg.echo(),
        reports: &result.reports,
        summary: &result.summary,
    };
    let mut json = to_json_full_precision(&doc);
    json.push('\n');
    write_file(cfg, "reports.json", json.as_bytes())
}

pub fn write_profile(cfg: &Resolved, profile: &LevelProfile) -> Result<(), CliError> {
    let mut out = Vec::new();
    writeln!(out, "# {}", cfg.echo_line()).expect("in-memory write");
    writeln!(out, "t,nu,stderr").expect("in-memory write");
    for (k, mid) in profile.midpoints().iter().enumerate() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e}",
            mid, profile.values[k], profile.std_errors[k]
        )
        .expect("in-memory write");
    }
    write_file(cfg, "profile.csv", &out)
}

#[derive(Serialize)]
struct CriticalDocument<'a> {
    config: ResolvedEcho,
    critical_points: &'a [levelset_metrics::morse::CriticalPoint],
    degenerate_points: &'a [levelset_metrics::morse::DegeneratePoint],
    decomposition: &'a RegularDecomposition,
}

pub fn write_critical(
    cfg: &Resolved,
    survey: &CriticalSurvey,
    decomposition: &RegularDecomposition,
) -> Result<(), CliError> {
    let doc = CriticalDocument {
        config: cfg.echo(),
        critical_points: &survey.points,
        degenerate_points: &survey.degenerate,
        decomposition,
    };
    let mut json = to_json_full_precision(&doc);
    json.push('\n');
    write_file(cfg, "critical.json", json.as_bytes())
}

pub fn write_mesh(cfg: &Resolved, mesh: &TriangleMesh, level: f64) -> Result<(), CliError> {
    ensure_out_dir(cfg)?;
    let path = cfg.out.join("mesh.off");
    let file = fs::File::create(&path)
        .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
    let comments = vec![cfg.echo_line(), format!("level t = {level}")];
    write_off(mesh, std::io::BufWriter::new(file), &comments)
        .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
}
