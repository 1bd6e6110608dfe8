use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{eval_a, lower_bound_a, lower_bound_b};
use crate::quadrature::QuadratureConfig;
use crate::solvers::convolution::ConvolutionPlan;
use crate::solvers::diagnostics::diagnose;
use crate::solvers::{ModeContext, ProblemKind, ProblemSpec, SolutionTrace, Source};
use crate::spectral::CoefficientField;

/// Per-mode time histories of `A_ρ(λ_k, t_n)` and of the Duhamel term `V_k(t_n)`.
struct ModeSeries {
    relaxation: Vec<f64>,
    duhamel: Vec<f64>,
    kernel_error: f64,
}

fn mode_series(
    spec: &ProblemSpec,
    mode: &ModeContext,
    q: &QuadratureConfig,
) -> Result<ModeSeries> {
    let nodes = spec.time_grid.nodes();
    let mut kernel_error: f64 = 0.0;
    let mut relaxation = Vec::with_capacity(nodes.len());
    // u(0) is the datum itself, so A(λ, 0) is taken as exactly 1.
    relaxation.push(1.0);
    for &t in &nodes[1..] {
        let a = eval_a(&mode.params, t, q)?;
        kernel_error = kernel_error.max(a.error);
        relaxation.push(a.value);
    }
    let duhamel = if spec.source.is_zero() {
        vec![0.0; nodes.len()]
    } else {
        let plan = ConvolutionPlan::for_grid(mode.params, &spec.time_grid, q)?;
        let f = |t: f64| spec.source.mode_value(mode, t);
        nodes
            .iter()
            .map(|&t| plan.convolve(f, t))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ModeSeries {
        relaxation,
        duhamel,
        kernel_error,
    })
}

fn all_series(spec: &ProblemSpec, q: &QuadratureConfig) -> Result<Vec<ModeSeries>> {
    q.validate()?;
    spec.validate()?;
    spec.modes()?
        .par_iter()
        .map(|m| mode_series(spec, m, q).map_err(|e| e.in_mode(m.index)))
        .collect()
}

fn require_kind(spec: &ProblemSpec, kind: ProblemKind) -> Result<()> {
    if spec.kind == kind {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "expected a {kind:?} problem, got {:?}",
            spec.kind
        )))
    }
}

fn finish(
    spec: &ProblemSpec,
    per_mode: Vec<Vec<f64>>,
    kernel_error: f64,
    warnings: Vec<String>,
) -> Result<SolutionTrace> {
    let nodes = spec.time_grid.nodes().to_vec();
    let fields = SolutionTrace::from_modes(&nodes, spec.operator(), per_mode)?;
    let mut trace = SolutionTrace {
        nodes,
        fields,
        kernel_error,
        nonlocal_gap: None,
        terminal_gap: None,
        stability_ratio: None,
        warnings,
        diagnostics: None,
    };
    trace.diagnostics = diagnose(&trace, spec)?;
    Ok(trace)
}

fn max_kernel_error(series: &[ModeSeries]) -> f64 {
    series.iter().map(|s| s.kernel_error).fold(0.0, f64::max)
}

/// `u_k(t) = A_ρ(λ_k, t) φ_k + V_k(t)`.
pub fn solve_forward(spec: &ProblemSpec, q: &QuadratureConfig) -> Result<SolutionTrace> {
    require_kind(spec, ProblemKind::Forward)?;
    let series = all_series(spec, q)?;
    let phi = spec.data.coefficients();
    let per_mode = series
        .iter()
        .zip(phi)
        .map(|(s, &p)| {
            s.relaxation
                .iter()
                .zip(&s.duhamel)
                .map(|(a, v)| a * p + v)
                .collect()
        })
        .collect();
    finish(spec, per_mode, max_kernel_error(&series), Vec::new())
}

/// Coefficient multipliers `A(λ_k, t) / (A(λ_k, T) - 1)` and the warnings raised
/// when a denominator is smaller than the lower bound of A allows.
fn w_factors(
    spec: &ProblemSpec,
    series: &[ModeSeries],
    q: &QuadratureConfig,
) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let horizon = spec.horizon();
    let c_b = lower_bound_b(
        spec.rho,
        spec.gamma,
        spec.operator().first_eigenvalue(),
        horizon,
        q,
    )?;
    let mut warnings = Vec::new();
    let factors = series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let denominator = s.relaxation[s.relaxation.len() - 1] - 1.0;
            if denominator.abs() < 0.5 * c_b * horizon {
                warnings.push(format!(
                    "mode {}: |A(T) - 1| = {:e} is below half the lower bound {:e}",
                    i + 1,
                    denominator.abs(),
                    c_b * horizon
                ));
            }
            s.relaxation.iter().map(|a| a / denominator).collect()
        })
        .collect();
    Ok((factors, warnings))
}

/// `W(t) = Σ A(λ_k, t) / (A(λ_k, T) - 1) ψ_k v_k`, the homogeneous solution with
/// `W(T) - W(0) = ψ`. The source and data of `spec` are ignored.
pub fn solve_auxiliary_w(
    psi: &CoefficientField,
    spec: &ProblemSpec,
    q: &QuadratureConfig,
) -> Result<SolutionTrace> {
    let aux = spec.with(ProblemKind::Nonlocal, psi.clone(), Source::Zero);
    let series = all_series(&aux, q)?;
    let (factors, warnings) = w_factors(&aux, &series, q)?;
    let per_mode = factors
        .iter()
        .zip(psi.coefficients())
        .map(|(f, &p)| f.iter().map(|x| x * p).collect())
        .collect();
    let mut trace = finish(&aux, per_mode, max_kernel_error(&series), warnings)?;
    trace.nonlocal_gap = Some(nonlocal_gap(&trace, psi));
    Ok(trace)
}

fn nonlocal_gap(trace: &SolutionTrace, target: &CoefficientField) -> f64 {
    trace
        .initial()
        .coefficients()
        .iter()
        .zip(trace.terminal().coefficients())
        .zip(target.coefficients())
        .map(|((u0, ut), t)| (ut - u0 - t).abs())
        .fold(0.0, f64::max)
}

/// `u = W + V` with `V` the forward solution from zero data and
/// `W` the auxiliary solution for `ψ = φ̂ - V(T)`.
pub fn solve_nonlocal(spec: &ProblemSpec, q: &QuadratureConfig) -> Result<SolutionTrace> {
    require_kind(spec, ProblemKind::Nonlocal)?;
    let series = all_series(spec, q)?;
    let (factors, warnings) = w_factors(spec, &series, q)?;
    let per_mode = series
        .iter()
        .zip(&factors)
        .zip(spec.data.coefficients())
        .map(|((s, f), &target)| {
            let psi = target - s.duhamel[s.duhamel.len() - 1];
            f.iter().zip(&s.duhamel).map(|(w, v)| w * psi + v).collect()
        })
        .collect();
    let mut trace = finish(spec, per_mode, max_kernel_error(&series), warnings)?;
    trace.nonlocal_gap = Some(nonlocal_gap(&trace, &spec.data));
    Ok(trace)
}

/// Recovers `φ_k = (ψ_k - V_k(T)) / A(λ_k, T)` and evolves it forward.
///
/// Fails when a kernel error bound at `T` exceeds half of the uniform lower bound on
/// `A(λ_k, T)`, since the division would then be meaningless.
pub fn solve_backward(spec: &ProblemSpec, q: &QuadratureConfig) -> Result<SolutionTrace> {
    require_kind(spec, ProblemKind::Backward)?;
    let horizon = spec.horizon();
    let c_a = lower_bound_a(
        spec.rho,
        spec.gamma,
        spec.operator().first_eigenvalue(),
        horizon,
        q,
    )?;
    let modes = spec.modes()?;
    let series = all_series(spec, q)?;
    for (m, s) in modes.iter().zip(&series) {
        let a_t = eval_a(&m.params, horizon, q).map_err(|e| e.in_mode(m.index))?;
        if a_t.error > 0.5 * c_a {
            return Err(Error::IllConditioned(format!(
                "mode {}: kernel error {:e} at T exceeds half the lower bound {:e}",
                m.index, a_t.error, c_a
            ))
            .in_mode(m.index));
        }
        debug_assert_eq!(a_t.value, s.relaxation[s.relaxation.len() - 1]);
    }
    let psi = spec.data.coefficients();
    let mut shifted = Vec::with_capacity(psi.len());
    let per_mode = series
        .iter()
        .zip(psi)
        .map(|(s, &target)| {
            let last = s.relaxation.len() - 1;
            let rest = target - s.duhamel[last];
            shifted.push(rest);
            let phi = rest / s.relaxation[last];
            s.relaxation
                .iter()
                .zip(&s.duhamel)
                .map(|(a, v)| a * phi + v)
                .collect()
        })
        .collect();
    let mut trace = finish(spec, per_mode, max_kernel_error(&series), Vec::new())?;
    trace.terminal_gap = Some(
        trace
            .terminal()
            .coefficients()
            .iter()
            .zip(psi)
            .map(|(u, p)| (u - p).abs())
            .fold(0.0, f64::max),
    );
    let shifted_norm = CoefficientField::new(Arc::clone(spec.operator()), shifted)?.norm_tau(0.0);
    trace.stability_ratio = Some(if shifted_norm > 0.0 {
        trace.initial().norm_tau(0.0) * c_a / shifted_norm
    } else {
        0.0
    });
    Ok(trace)
}

/// Dispatches on the problem kind.
pub fn solve(spec: &ProblemSpec, q: &QuadratureConfig) -> Result<SolutionTrace> {
    match spec.kind {
        ProblemKind::Forward => solve_forward(spec, q),
        ProblemKind::Nonlocal => solve_nonlocal(spec, q),
        ProblemKind::Backward => solve_backward(spec, q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelParams;
    use crate::solvers::TimeGrid;
    use crate::spectral::SpectralOperator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn op(n: usize) -> Arc<SpectralOperator> {
        Arc::new(SpectralOperator::dirichlet_laplacian_1d(std::f64::consts::PI, n).unwrap())
    }

    fn spec(kind: ProblemKind, data: CoefficientField, source: Source, nodes: usize) -> ProblemSpec {
        ProblemSpec::new(kind, 0.5, 1.0, data, source, TimeGrid::uniform(1.0, nodes).unwrap())
            .unwrap()
    }

    #[test]
    fn zero_problems_have_zero_solutions() {
        for kind in [ProblemKind::Forward, ProblemKind::Nonlocal, ProblemKind::Backward] {
            let s = spec(kind, CoefficientField::zeros(op(3)), Source::Zero, 16);
            let t = solve(&s, &q()).unwrap();
            assert!(t.fields.iter().all(CoefficientField::is_zero));
        }
    }

    #[test]
    fn forward_unit_datum_follows_relaxation_kernel() {
        let s = spec(
            ProblemKind::Forward,
            CoefficientField::unit(op(3), 1).unwrap(),
            Source::Zero,
            8,
        );
        let t = solve_forward(&s, &q()).unwrap();
        let p = KernelParams::new(0.5, 1.0, 1.0).unwrap();
        assert_eq!(t.fields[0].coefficients(), &[1.0, 0.0, 0.0]);
        for (n, &time) in t.nodes.iter().enumerate().skip(1) {
            let c = t.fields[n].coefficients();
            assert_eq!(c[0], eval_a(&p, time, &q()).unwrap().value);
            assert_eq!(&c[1..], &[0.0, 0.0]);
        }
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let s = spec(ProblemKind::Backward, CoefficientField::zeros(op(1)), Source::Zero, 4);
        assert!(solve_forward(&s, &q()).is_err());
    }

    #[test]
    fn auxiliary_w_telescopes() {
        let s = spec(ProblemKind::Nonlocal, CoefficientField::zeros(op(2)), Source::Zero, 8);
        let psi = CoefficientField::unit(op(2), 1).unwrap();
        let w = solve_auxiliary_w(&psi, &s, &q()).unwrap();
        let h = w.mode_history(1);
        assert!((h[8] - h[0] - 1.0).abs() < 1e-12);
        assert!(w.mode_history(2).iter().all(|v| *v == 0.0));
        let c_b = lower_bound_b(0.5, 1.0, 1.0, 1.0, &q()).unwrap();
        assert!(h[0].abs() <= 1.0 / c_b);
        assert!(w.warnings.is_empty());
    }

    #[test]
    fn nonlocal_condition_and_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let operator = op(4);
        let hat: Vec<f64> = operator
            .eigenvalues()
            .iter()
            .map(|l| rng.gen_range(-1.0..1.0) / (l * l))
            .collect();
        let data = CoefficientField::new(Arc::clone(&operator), hat).unwrap();
        let s = spec(ProblemKind::Nonlocal, data.clone(), Source::Constant(1.0), 32);
        let u = solve_nonlocal(&s, &q()).unwrap();
        assert!(u.nonlocal_gap.unwrap() <= 1e-12);

        let v = solve_forward(
            &s.with(ProblemKind::Forward, CoefficientField::zeros(Arc::clone(&operator)), s.source.clone()),
            &q(),
        )
        .unwrap();
        let psi = data.combine(1.0, v.terminal(), -1.0).unwrap();
        let w = solve_auxiliary_w(&psi, &s, &q()).unwrap();
        for n in 0..u.nodes.len() {
            let sum = w.fields[n].combine(1.0, &v.fields[n], 1.0).unwrap();
            for (a, b) in sum.coefficients().iter().zip(u.fields[n].coefficients()) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn backward_unit_terminal_value() {
        let s = spec(
            ProblemKind::Backward,
            CoefficientField::unit(op(2), 1).unwrap(),
            Source::Zero,
            8,
        );
        let t = solve_backward(&s, &q()).unwrap();
        let p = KernelParams::new(0.5, 1.0, 1.0).unwrap();
        let a_t = eval_a(&p, 1.0, &q()).unwrap().value;
        assert!((t.initial().coefficients()[0] - 1.0 / a_t).abs() < 1e-14);
        assert!(t.terminal_gap.unwrap() < 1e-14);
        assert!(t.stability_ratio.unwrap() <= 1.0);
    }

    #[test]
    fn mode_solves_are_independent_and_linear() {
        let operator = op(3);
        let a = CoefficientField::new(Arc::clone(&operator), vec![0.3, -0.2, 0.1]).unwrap();
        let b = CoefficientField::new(Arc::clone(&operator), vec![-1.0, 0.5, 0.25]).unwrap();
        let s = |data: CoefficientField, source: Source| spec(ProblemKind::Forward, data, source, 16);
        let fa = Source::Constant(1.0);
        let fb = Source::ManufacturedT2;
        let ua = solve_forward(&s(a.clone(), fa.clone()), &q()).unwrap();
        let ub = solve_forward(&s(b.clone(), fb.clone()), &q()).unwrap();
        let combined_source = {
            let (sa, sb) = (s(a.clone(), fa), s(b.clone(), fb));
            let (ma, mb) = (sa.modes().unwrap(), sb.modes().unwrap());
            Source::Modal(Arc::new(move |k, t| {
                2.0 * sa.source.mode_value(&ma[k - 1], t) - 3.0 * sb.source.mode_value(&mb[k - 1], t)
            }))
        };
        let uab = solve_forward(&s(a.combine(2.0, &b, -3.0).unwrap(), combined_source), &q()).unwrap();
        for n in 0..uab.nodes.len() {
            let expect = ua.fields[n].combine(2.0, &ub.fields[n], -3.0).unwrap();
            for (x, y) in uab.fields[n].coefficients().iter().zip(expect.coefficients()) {
                assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
            }
        }

        // Mode 2 alone, as a one-mode problem with the same eigenvalue.
        let single = Arc::new(SpectralOperator::explicit(vec![4.0]).unwrap());
        let us = solve_forward(
            &s(CoefficientField::new(single, vec![0.5]).unwrap(), Source::ManufacturedT2),
            &q(),
        )
        .unwrap();
        let ub2 = ub.mode_history(2);
        for (x, y) in us.mode_history(1).iter().zip(&ub2) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}
