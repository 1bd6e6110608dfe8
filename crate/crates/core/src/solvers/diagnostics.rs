//! Checks a trace against the equation using only the trace itself: central
//! differences for `u'` and L1 weights for `D_t^ρ u`.
//!
//! Plain L1 on 512 nodes is off by `O(h^{2-ρ})`, which after multiplication by
//! `γλ_k` can exceed any useful residual threshold even for the exact solution (about
//! `6e-2` for `u = t²`, `ρ = 0.9`, `λ = 64`). The residual therefore uses the
//! extrapolated L1 derivative; the plain-L1 residual is reported alongside.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{caputo_l1_extrapolated, caputo_l1_nonuniform};
use crate::solvers::{ProblemSpec, SolutionTrace};

/// Interior nodes required before finite-difference diagnostics are meaningful.
pub const MIN_INTERIOR_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityRow {
    pub t: f64,
    pub norm_dt_u: f64,
    pub norm_au: f64,
    pub norm_a_dt_rho_u: f64,
    /// `t^{1-ρ} ‖u'(t)‖`.
    pub weighted_dt_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    /// Residual norm at nodes `1..n-1`; node 0 and the last node have none.
    pub residual: Vec<Option<f64>>,
    /// Largest residual over interior nodes with `t ≥ T/32`.
    pub residual_max: f64,
    /// The same maximum with the unextrapolated L1 derivative.
    pub residual_plain_l1_max: f64,
    pub coercivity: Vec<CoercivityRow>,
    /// `‖u(t)‖` at every node.
    pub norm_u: Vec<f64>,
}

/// `u'` at nodes `1..=n`: three-point central differences inside, the one-sided
/// three-point formula at the last node.
fn time_derivative(times: &[f64], u: &[f64]) -> Vec<f64> {
    let n = times.len() - 1;
    let mut out = vec![f64::NAN; n + 1];
    for i in 1..n {
        let h1 = times[i] - times[i - 1];
        let h2 = times[i + 1] - times[i];
        out[i] = -h2 / (h1 * (h1 + h2)) * u[i - 1]
            + (h2 - h1) / (h1 * h2) * u[i]
            + h1 / (h2 * (h1 + h2)) * u[i + 1];
    }
    if n >= 2 {
        let h0 = times[n - 1] - times[n - 2];
        let h1 = times[n] - times[n - 1];
        out[n] = h1 / (h0 * (h0 + h1)) * u[n - 2] - (h0 + h1) / (h0 * h1) * u[n - 1]
            + (h0 + 2.0 * h1) / ((h0 + h1) * h1) * u[n];
    }
    out
}

fn check_grid(trace: &SolutionTrace) -> Result<()> {
    let interior = trace.nodes.len().saturating_sub(2);
    if interior < MIN_INTERIOR_NODES {
        return Err(Error::GridTooCoarse(format!(
            "{interior} interior nodes; at least {MIN_INTERIOR_NODES} are needed"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum FractionalRule {
    Plain,
    Extrapolated,
}

/// Per-mode derivative histories: `(u', D_t^ρ u)` at every node.
fn mode_derivatives(
    trace: &SolutionTrace,
    rho: f64,
    k: usize,
    rule: FractionalRule,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let u = trace.mode_history(k);
    let du = time_derivative(&trace.nodes, &u);
    let frac = match rule {
        FractionalRule::Plain => caputo_l1_nonuniform(&trace.nodes, &u, rho)?,
        FractionalRule::Extrapolated => caputo_l1_extrapolated(&trace.nodes, &u, rho)?,
    };
    Ok((du, frac))
}

/// `‖u' + A u + γ A D_t^ρ u - f‖` at nodes `1..n-1` (index 0 of the result is node 1).
pub fn residual(trace: &SolutionTrace, spec: &ProblemSpec) -> Result<Vec<f64>> {
    residual_with(trace, spec, FractionalRule::Extrapolated)
}

fn residual_with(
    trace: &SolutionTrace,
    spec: &ProblemSpec,
    rule: FractionalRule,
) -> Result<Vec<f64>> {
    check_grid(trace)?;
    let modes = spec.modes()?;
    let n = trace.nodes.len() - 1;
    let mut squares = vec![0.0; n - 1];
    for m in &modes {
        let (du, frac) = mode_derivatives(trace, spec.rho, m.index, rule)?;
        let u = trace.mode_history(m.index);
        let lambda = m.params.lambda();
        for i in 1..n {
            let f = spec.source.mode_value(m, trace.nodes[i]);
            let r = du[i] + lambda * u[i] + spec.gamma * lambda * frac[i] - f;
            squares[i - 1] += r * r;
        }
    }
    Ok(squares.into_iter().map(f64::sqrt).collect())
}

/// Rows for nodes `1..=n` of `(t, ‖u'‖, ‖Au‖, ‖A D_t^ρ u‖, t^{1-ρ}‖u'‖)`.
pub fn coercivity_report(trace: &SolutionTrace, spec: &ProblemSpec) -> Result<Vec<CoercivityRow>> {
    check_grid(trace)?;
    let modes = spec.modes()?;
    let n = trace.nodes.len() - 1;
    let mut dt = vec![0.0; n];
    let mut au = vec![0.0; n];
    let mut afrac = vec![0.0; n];
    for m in &modes {
        let (du, frac) = mode_derivatives(trace, spec.rho, m.index, FractionalRule::Extrapolated)?;
        let u = trace.mode_history(m.index);
        let lambda = m.params.lambda();
        for i in 1..=n {
            dt[i - 1] += du[i] * du[i];
            au[i - 1] += (lambda * u[i]).powi(2);
            afrac[i - 1] += (lambda * frac[i]).powi(2);
        }
    }
    Ok((1..=n)
        .map(|i| {
            let t = trace.nodes[i];
            let norm_dt_u = dt[i - 1].sqrt();
            CoercivityRow {
                t,
                norm_dt_u,
                norm_au: au[i - 1].sqrt(),
                norm_a_dt_rho_u: afrac[i - 1].sqrt(),
                weighted_dt_u: t.powf(1.0 - spec.rho) * norm_dt_u,
            }
        })
        .collect())
}

/// Full diagnostics, or `None` when the grid is too coarse for them.
pub(crate) fn diagnose(trace: &SolutionTrace, spec: &ProblemSpec) -> Result<Option<TraceDiagnostics>> {
    if check_grid(trace).is_err() {
        return Ok(None);
    }
    let interior = residual(trace, spec)?;
    let cutoff = spec.horizon() / 32.0;
    let late_max = |values: &[f64]| {
        values
            .iter()
            .zip(&trace.nodes[1..])
            .filter(|(_, t)| **t >= cutoff)
            .map(|(r, _)| *r)
            .fold(0.0, f64::max)
    };
    let residual_max = late_max(&interior);
    let residual_plain_l1_max = late_max(&residual_with(trace, spec, FractionalRule::Plain)?);
    let mut residual: Vec<Option<f64>> = vec![None];
    residual.extend(interior.into_iter().map(Some));
    residual.push(None);
    Ok(Some(TraceDiagnostics {
        residual,
        residual_max,
        residual_plain_l1_max,
        coercivity: coercivity_report(trace, spec)?,
        norm_u: trace.fields.iter().map(|f| f.norm_tau(0.0)).collect(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureConfig;
    use crate::solvers::{solve_forward, ProblemKind, Source, TimeGrid};
    use crate::spectral::{CoefficientField, SpectralOperator};
    use std::sync::Arc;

    fn forward(data: Vec<f64>, source: Source, intervals: usize) -> (ProblemSpec, SolutionTrace) {
        let op = Arc::new(SpectralOperator::dirichlet_laplacian_1d(std::f64::consts::PI, data.len()).unwrap());
        let spec = ProblemSpec::new(
            ProblemKind::Forward,
            0.5,
            1.0,
            CoefficientField::new(op, data).unwrap(),
            source,
            TimeGrid::uniform(1.0, intervals).unwrap(),
        )
        .unwrap();
        let trace = solve_forward(&spec, &QuadratureConfig::default()).unwrap();
        (spec, trace)
    }

    #[test]
    fn derivative_formulas_are_exact_on_quadratics() {
        let times = [0.0, 0.1, 0.25, 0.3, 0.6];
        let u: Vec<f64> = times.iter().map(|t| 3.0 * t * t - t + 2.0).collect();
        let d = time_derivative(&times, &u);
        for i in 1..times.len() {
            assert!((d[i] - (6.0 * times[i] - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_grids_are_refused() {
        let (spec, trace) = forward(vec![1.0], Source::Zero, 32);
        assert!(matches!(residual(&trace, &spec), Err(Error::GridTooCoarse(_))));
        assert!(trace.diagnostics.is_none());
    }

    #[test]
    fn zero_solution_has_zero_residual() {
        let (spec, trace) = forward(vec![0.0, 0.0], Source::Zero, 128);
        assert!(residual(&trace, &spec).unwrap().iter().all(|r| *r == 0.0));
        let rows = coercivity_report(&trace, &spec).unwrap();
        assert!(rows.iter().all(|r| r.norm_dt_u == 0.0 && r.norm_au == 0.0));
    }

    #[test]
    fn single_mode_residual_is_small_and_sensitive() {
        let (spec, trace) = forward(vec![1.0], Source::Zero, 511);
        let d = trace.diagnostics.as_ref().unwrap();
        assert!(d.residual_max <= 1e-3, "{}", d.residual_max);

        let mut bumped = trace.clone();
        let k = 300;
        let c = bumped.fields[k].coefficients()[0] + 0.01;
        bumped.fields[k] = CoefficientField::new(Arc::clone(spec.operator()), vec![c]).unwrap();
        let base = residual(&trace, &spec).unwrap();
        let perturbed = residual(&bumped, &spec).unwrap();
        assert!(perturbed[k - 1] >= 10.0 * base[k - 1]);
    }
}
