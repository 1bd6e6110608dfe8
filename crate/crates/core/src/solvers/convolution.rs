//! Duhamel term `∫₀^t B(t-τ) f(τ) dτ = ∫₀^t B(s) f(t-s) ds` by product integration.
//!
//! `f(t - s)` is interpolated linearly on a uniform mesh in `s`; the kernel is never
//! frozen. On a panel `[s_j, s_j + h]` the weights need `∫₀^h B(s_j + σ) σ^m dσ`
//! for `m = 0, 1`, and the spectral representation gives these exactly:
//! `∫ K_B(r) e^{-r s_j} h^{m+1} φ_{m+1}(rh) dr`. The `(t-τ)^{-ρ}`-type behaviour of
//! `B'` near `s = 0` therefore costs no accuracy, and a uniform mesh suffices.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::quadrature::{integrate_semiinfinite, EndpointBehavior, QuadratureConfig};
use crate::solvers::TimeGrid;

/// Sub-mesh panels over the horizon when nothing else dictates the count.
pub const DEFAULT_CONVOLUTION_PANELS: usize = 1024;

/// `(1 - e^{-x}) / x`.
fn phi1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(1 - (1 + x) e^{-x}) / x²`.
fn phi2(x: f64) -> f64 {
    if x < 0.5 {
        // Σ_{m≥2} (-1)^m (m-1) x^{m-2} / m!
        let mut term: f64 = 0.5;
        let mut sum: f64 = 0.5;
        let mut m = 2.0;
        while term.abs() > 1e-17 * sum.abs() {
            term *= -x * m / ((m + 1.0) * (m - 1.0));
            sum += term;
            m += 1.0;
        }
        sum
    } else {
        (1.0 - (1.0 + x) * (-x).exp()) / (x * x)
    }
}

/// Weights of the endpoint values of a panel starting at `start` with width `width`:
/// `(∫ B·(1 - σ/w), ∫ B·σ/w, error bound)`.
fn panel_weights(
    p: &KernelParams,
    start: f64,
    width: f64,
    q: &QuadratureConfig,
) -> Result<(f64, f64, f64)> {
    let shape = p.peak_breakpoints(
        EndpointBehavior::new(p.rho())
            .decay(start)
            .tail_power(3.0 - p.rho())
            .breakpoint(1.0 / width),
    );
    let decay = |r: f64| p.density_b_at(r) * (-r * start).exp();
    let m0 = integrate_semiinfinite(|r| decay(r) * width * phi1(r * width), &shape, q)?;
    let m1 = integrate_semiinfinite(|r| decay(r) * width * phi2(r * width), &shape, q)?;
    // m1 already carries one factor of width less than ∫ B σ dσ, i.e. it is m1/w.
    Ok((m0.value - m1.value, m1.value, m0.error + 2.0 * m1.error))
}

/// Precomputed panel weights for one mode on a uniform sub-mesh of `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct ConvolutionPlan {
    params: KernelParams,
    step: f64,
    horizon: f64,
    left: Vec<f64>,
    right: Vec<f64>,
    error: f64,
    q: QuadratureConfig,
}

impl ConvolutionPlan {
    pub fn new(
        params: KernelParams,
        horizon: f64,
        panels: usize,
        q: &QuadratureConfig,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!("horizon {horizon} must be positive")));
        }
        if panels == 0 {
            return Err(Error::invalid("convolution needs at least one panel"));
        }
        let step = horizon / panels as f64;
        let weights: Vec<(f64, f64, f64)> = (0..panels)
            .into_par_iter()
            .map(|j| panel_weights(&params, j as f64 * step, step, q))
            .collect::<Result<_>>()?;
        let error = weights.iter().map(|w| w.2).sum();
        let (left, right) = weights.iter().map(|w| (w.0, w.1)).unzip();
        Ok(Self {
            params,
            step,
            horizon,
            left,
            right,
            error,
            q: *q,
        })
    }

    /// Plan whose sub-mesh contains every node of `grid` when the grid is uniform.
    pub fn for_grid(params: KernelParams, grid: &TimeGrid, q: &QuadratureConfig) -> Result<Self> {
        let n = grid.intervals();
        let panels = if grid.is_uniform() {
            n * DEFAULT_CONVOLUTION_PANELS.div_ceil(n)
        } else {
            DEFAULT_CONVOLUTION_PANELS.max(2 * n)
        };
        Self::new(params, grid.horizon(), panels, q)
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// Sum of kernel-moment error bounds; multiply by `max |f|` for a bound on a result.
    pub fn error_bound(&self) -> f64 {
        self.error
    }

    /// `∫₀^t B(t-τ) f(τ) dτ` for `0 ≤ t ≤ horizon`.
    pub fn convolve<F: Fn(f64) -> f64>(&self, f: F, t: f64) -> Result<f64> {
        if !(t >= 0.0) || t > self.horizon * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "convolution time {t} outside [0, {}]",
                self.horizon
            )));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let x = t / self.step;
        let nearest = x.round();
        let (full, partial) = if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
            (nearest as usize, None)
        } else {
            let full = x.floor() as usize;
            (full, Some(t - full as f64 * self.step))
        };
        let full = full.min(self.left.len());
        let samples: Vec<f64> = (0..=full)
            .map(|j| f((t - j as f64 * self.step).max(0.0)))
            .collect();
        let mut sum = 0.0;
        for j in 0..full {
            sum += self.left[j] * samples[j] + self.right[j] * samples[j + 1];
        }
        if let Some(width) = partial {
            let (l, r, _) = panel_weights(&self.params, full as f64 * self.step, width, &self.q)?;
            sum += l * samples[full] + r * f(0.0);
        }
        Ok(sum)
    }
}

/// One-off `∫₀^t B_ρ(λ, t-τ) f(τ) dτ` on [`DEFAULT_CONVOLUTION_PANELS`] panels.
pub fn convolve_b<F: Fn(f64) -> f64>(
    p: &KernelParams,
    f: F,
    t: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    ConvolutionPlan::new(*p, t, DEFAULT_CONVOLUTION_PANELS, q)?.convolve(f, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{integrate_kernel_in_time, Kernel};
    use crate::oracle::manufactured_t2_forcing;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn phi_functions_are_continuous_at_switch() {
        let below = phi2(0.5 - 1e-12);
        let above = phi2(0.5 + 1e-12);
        assert!((below - above).abs() < 1e-12);
        assert_eq!(phi2(0.0), 0.5);
        assert_eq!(phi1(0.0), 1.0);
        assert!((phi1(1e-10) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_source_gives_zero() {
        let p = KernelParams::new(0.5, 1.0, 1.0).unwrap();
        assert_eq!(convolve_b(&p, |_| 0.0, 1.0, &q()).unwrap(), 0.0);
    }

    #[test]
    fn unit_source_integrates_kernel_and_stays_below_inverse_lambda() {
        for (rho, gamma, lambda) in [(0.5, 1.0, 1.0), (0.3, 2.0, 10.0), (0.9, 0.5, 100.0)] {
            let p = KernelParams::new(rho, gamma, lambda).unwrap();
            let v = convolve_b(&p, |_| 1.0, 1.0, &q()).unwrap();
            let direct = integrate_kernel_in_time(Kernel::B, &p, 1.0, &q()).unwrap().value;
            assert!((v - direct).abs() < 1e-9, "{v} vs {direct}");
            assert!(v < 1.0 / lambda);
        }
    }

    #[test]
    fn manufactured_source_reproduces_square() {
        let (rho, gamma, lambda) = (0.5, 1.0, 4.0);
        let p = KernelParams::new(rho, gamma, lambda).unwrap();
        let plan = ConvolutionPlan::new(p, 1.0, 1024, &q()).unwrap();
        for t in [0.25, 0.5, 1.0, 0.3337] {
            let v = plan
                .convolve(|s| manufactured_t2_forcing(lambda, gamma, rho, s), t)
                .unwrap();
            assert!((v - t * t).abs() < 1e-6, "t = {t}: {v}");
        }
    }

    #[test]
    fn rejects_times_beyond_plan() {
        let p = KernelParams::new(0.5, 1.0, 1.0).unwrap();
        let plan = ConvolutionPlan::new(p, 1.0, 8, &q()).unwrap();
        assert!(plan.convolve(|_| 1.0, 1.5).is_err());
        assert!(plan.convolve(|_| 1.0, -0.1).is_err());
    }
}
