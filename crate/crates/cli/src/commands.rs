use std::path::{Path, PathBuf};

use serde::Serialize;

use frs_core::convergence::convergence_study;
use frs_core::kernel::{kernel_table, KernelParams};
use frs_core::manifest::ConstantsManifest;
use frs_core::quadrature::QuadratureConfig;
use frs_core::solvers::{
    solve, write_grid_csv, write_trace_csv, write_trace_json, CoercivityRow, ProblemKind,
};
use frs_core::verify::{self, Suite, VerifyOptions};

use crate::config::{ConvergenceConfig, Format, RunConfig};
use crate::failure::Failure;
use crate::output::{emit, json_bytes, persist_all, Artifact};

/// Everything a user needs to judge a run, written next to the trace.
#[derive(Serialize)]
struct DiagnosticsDocument {
    problem: ProblemKind,
    rho: f64,
    gamma: f64,
    horizon: f64,
    modes: usize,
    nodes: usize,
    residual_max: Option<f64>,
    residual_plain_l1_max: Option<f64>,
    kernel_error: f64,
    nonlocal_gap: Option<f64>,
    terminal_gap: Option<f64>,
    stability_ratio: Option<f64>,
    /// `λ_N² h_N²` of the data (φ, φ̂ or ψ).
    data_tail_estimate: f64,
    /// `λ_N² f_N(T)²`.
    source_tail_estimate: f64,
    warnings: Vec<String>,
    coercivity: Vec<CoercivityRow>,
}

pub fn solve_cmd(config_path: &Path, out_dir: Option<&Path>) -> Result<Vec<PathBuf>, Failure> {
    let config = RunConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let prepared = config.prepare(base)?;
    let spec = &prepared.spec;
    let source_tail = spec
        .source_field(spec.horizon())
        .map_err(Failure::config)?
        .tail_estimate();

    let trace = solve(spec, &prepared.quadrature).map_err(Failure::solver)?;

    let mut warnings = prepared.warnings.clone();
    warnings.extend(trace.warnings.iter().cloned());
    if trace.diagnostics.is_none() {
        warnings.push("time grid too coarse for residual and coercivity diagnostics".into());
    }
    let diagnostics = DiagnosticsDocument {
        problem: spec.kind,
        rho: spec.rho,
        gamma: spec.gamma,
        horizon: spec.horizon(),
        modes: spec.operator().modes(),
        nodes: trace.nodes.len(),
        residual_max: trace.diagnostics.as_ref().map(|d| d.residual_max),
        residual_plain_l1_max: trace.diagnostics.as_ref().map(|d| d.residual_plain_l1_max),
        kernel_error: trace.kernel_error,
        nonlocal_gap: trace.nonlocal_gap,
        terminal_gap: trace.terminal_gap,
        stability_ratio: trace.stability_ratio,
        data_tail_estimate: spec.data.tail_estimate(),
        source_tail_estimate: source_tail,
        warnings,
        coercivity: trace
            .diagnostics
            .as_ref()
            .map(|d| d.coercivity.clone())
            .unwrap_or_default(),
    };

    let prefix = &config.output.prefix;
    let mut artifacts = vec![Artifact {
        name: format!("{prefix}_diagnostics.json"),
        bytes: json_bytes(&diagnostics)?,
    }];
    for format in &config.output.formats {
        let mut bytes = Vec::new();
        let name = match format {
            Format::Csv => {
                write_trace_csv(&trace, &mut bytes).map_err(Failure::output)?;
                format!("{prefix}_coefficients.csv")
            }
            Format::Json => {
                write_trace_json(&trace, &mut bytes).map_err(Failure::output)?;
                format!("{prefix}_trace.json")
            }
            Format::Grid => {
                write_grid_csv(&trace, config.output.grid_points, &mut bytes).map_err(Failure::output)?;
                format!("{prefix}_grid.csv")
            }
        };
        artifacts.push(Artifact { name, bytes });
    }
    persist_all(out_dir.unwrap_or(Path::new(".")), artifacts)
}

fn number(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct KernelArgs {
    pub rho: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub t_steps: usize,
}

/// CSV table `t,A,B,dA_dt,dB_dt` on standard output; refused derivatives are blank.
pub fn kernel_cmd(args: &KernelArgs) -> Result<(), Failure> {
    let p = KernelParams::new(args.rho, args.gamma, args.lambda).map_err(Failure::config)?;
    let q = QuadratureConfig::default();
    let rows = kernel_table(&p, args.t_start, args.t_end, args.t_steps, &q).map_err(|e| match e {
        frs_core::Error::InvalidArgument(_) => Failure::config(e),
        _ => Failure::solver(e),
    })?;
    let mut text = String::from("t,A,B,dA_dt,dB_dt\n");
    for r in rows {
        let opt = |x: Option<f64>| x.map(number).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            number(r.t),
            number(r.a),
            number(r.b),
            opt(r.da_dt),
            opt(r.db_dt)
        ));
    }
    emit(None, text.into_bytes())
}

pub fn verify_cmd(
    suites: &[String],
    tolerance_scale: f64,
    oracle_step: f64,
    report: Option<&Path>,
) -> Result<(), Failure> {
    let selected: Vec<Suite> = if suites.is_empty() {
        Suite::ALL.to_vec()
    } else {
        suites
            .iter()
            .map(|s| s.parse::<Suite>())
            .collect::<Result<_, _>>()
            .map_err(Failure::config)?
    };
    let opts = VerifyOptions {
        tolerance_scale,
        oracle_step,
        ..VerifyOptions::default()
    };
    let result = verify::run(&selected, &opts).map_err(|e| match e {
        frs_core::Error::InvalidArgument(_) => Failure::config(e),
        frs_core::Error::Data(_) | frs_core::Error::Io(_) | frs_core::Error::Json(_) => Failure::data(e),
        _ => Failure::solver(e),
    })?;
    emit(report, json_bytes(&result)?)?;
    if result.passed {
        Ok(())
    } else {
        let failed: Vec<String> = result
            .failures()
            .map(|c| format!("{}: {} (worst {:e}, tolerance {:e})", c.suite, c.property, c.worst, c.tolerance))
            .collect();
        Err(Failure::Verify(failed.join("; ")))
    }
}

pub fn convergence_cmd(config_path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let config: ConvergenceConfig = crate::config::read_json(config_path)?;
    let p = config.params()?;
    let steps = config.steps()?;
    let q = config.quadrature.resolve()?;
    let study = convergence_study(config.target, &p, config.horizon.0, &steps, &q).map_err(|e| match e {
        frs_core::Error::InvalidArgument(_) => Failure::config(e),
        _ => Failure::solver(e),
    })?;
    emit(out, json_bytes(&study)?)
}

pub fn constants_cmd(out: Option<&Path>) -> Result<(), Failure> {
    let manifest =
        ConstantsManifest::measure_standard(&QuadratureConfig::default()).map_err(Failure::solver)?;
    emit(out, json_bytes(&manifest)?)
}
