//! Refinement studies of the L1 oracle against the quadrature-based kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{eval_a, KernelParams};
use crate::oracle::{manufactured_t2_forcing, solve_scalar, L1Grid};
use crate::quadrature::QuadratureConfig;
use crate::solvers::convolve_b;

/// The default step sequence.
pub const DEFAULT_STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyTarget {
    /// `y(0) = 1`, `f = 0`: the oracle approximates `A(λ,T)`.
    AKernel,
    /// `y(0) = 0` with the forcing whose solution is `t²`: compared with the
    /// quadrature convolution `∫B f`.
    ManufacturedT2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub step: f64,
    pub oracle: f64,
    pub error: f64,
    /// Observed order against the previous row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub target: StudyTarget,
    pub rho: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub horizon: f64,
    /// Quadrature value the oracle is compared with.
    pub reference: f64,
    /// Closed-form value where one exists.
    pub exact: Option<f64>,
    pub rows: Vec<StudyRow>,
    /// True when every refinement lowered the error.
    pub monotone: bool,
}

/// Oracle value at `horizon` for each step, compared with the quadrature reference.
pub fn convergence_study(
    target: StudyTarget,
    p: &KernelParams,
    horizon: f64,
    steps: &[f64],
    q: &QuadratureConfig,
) -> Result<ConvergenceStudy> {
    if steps.is_empty() {
        return Err(Error::invalid("the step list is empty"));
    }
    let (lambda, gamma, rho) = (p.lambda(), p.gamma(), p.rho());
    let forcing = |t: f64| manufactured_t2_forcing(lambda, gamma, rho, t);
    let (reference, exact) = match target {
        StudyTarget::AKernel => (eval_a(p, horizon, q)?.value, None),
        StudyTarget::ManufacturedT2 => (convolve_b(p, forcing, horizon, q)?, Some(horizon * horizon)),
    };
    let mut rows: Vec<StudyRow> = Vec::with_capacity(steps.len());
    for &step in steps {
        let count = (horizon / step).round();
        if !(count >= 1.0) || ((count * step - horizon) / horizon).abs() > 1e-9 {
            return Err(Error::invalid(format!("step {step} does not divide the horizon {horizon}")));
        }
        let count = count as usize;
        let grid = L1Grid::covering(horizon, count, rho)?;
        let y = match target {
            StudyTarget::AKernel => solve_scalar(lambda, gamma, 1.0, |_| 0.0, &grid)?,
            StudyTarget::ManufacturedT2 => solve_scalar(lambda, gamma, 0.0, forcing, &grid)?,
        };
        let oracle = y[count];
        let error = (oracle - reference).abs();
        let order = rows
            .last()
            .map(|prev| (prev.error / error).ln() / (prev.step / step).ln());
        rows.push(StudyRow {
            step,
            oracle,
            error,
            order,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].error < w[0].error);
    Ok(ConvergenceStudy {
        target,
        rho,
        gamma,
        lambda,
        horizon,
        reference,
        exact,
        rows,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_kernel_errors_fall_with_the_step() {
        let p = KernelParams::new(0.5, 1.0, 1.0).unwrap();
        let s = convergence_study(StudyTarget::AKernel, &p, 1.0, &[1e-2, 1e-3], &QuadratureConfig::default())
            .unwrap();
        assert!(s.monotone);
        assert!(s.rows[1].order.unwrap() > 0.9);
        assert!(s.rows[0].order.is_none());
    }

    #[test]
    fn manufactured_reference_is_the_square() {
        let p = KernelParams::new(0.7, 2.0, 10.0).unwrap();
        let s = convergence_study(StudyTarget::ManufacturedT2, &p, 0.5, &[1e-3], &QuadratureConfig::default())
            .unwrap();
        assert!((s.reference - 0.25).abs() < 1e-6);
        assert_eq!(s.exact, Some(0.25));
        assert!(s.rows[0].error < 1e-3);
    }

    #[test]
    fn bad_step_lists_are_rejected() {
        let p = KernelParams::new(0.5, 1.0, 1.0).unwrap();
        let q = QuadratureConfig::default();
        assert!(convergence_study(StudyTarget::AKernel, &p, 1.0, &[], &q).is_err());
        assert!(convergence_study(StudyTarget::AKernel, &p, 1.0, &[0.3], &q).is_err());
    }
}
