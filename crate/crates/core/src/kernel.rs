//! Relaxation kernels `A_ρ(λ,t)` and `B_ρ(λ,t)` of the scalar equation
//! `y' + λ(1 + γ D_t^ρ) y = f`.
//!
//! Both kernels are Laplace-type integrals `∫₀^∞ e^{-rt} K(r) dr` over a nonnegative
//! spectral density supported on the negative real axis of the transform variable.
//! The A-density behaves like `r^{ρ-1}` at the origin and `r^{ρ-3}` at infinity; the
//! B-density is `r/λ` times the A-density. The real part of the density denominator
//! vanishes at a single point `r*`, where the density peaks; its width shrinks with
//! `sin(ρπ)` and becomes a near-delta as `ρ → 1`, so `r*` is always a breakpoint.

use std::cell::RefCell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{
    integrate, integrate_graded, integrate_semiinfinite, integrate_semiinfinite_with_remainder,
    EndpointBehavior, Estimate, QuadratureConfig,
};

/// One scalar mode of the equation: fractional order, relaxation coefficient, eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    rho: f64,
    gamma: f64,
    lambda: f64,
    sin: f64,
    cos: f64,
    peak: f64,
    peak_width: f64,
}

impl KernelParams {
    pub fn new(rho: f64, gamma: f64, lambda: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid(format!("rho = {rho} must lie in (0, 1)")));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma = {gamma} must be positive")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda = {lambda} must be positive")));
        }
        let (sin, cos) = (rho * PI).sin_cos();
        let mut p = Self {
            rho,
            gamma,
            lambda,
            sin,
            cos,
            peak: 0.0,
            peak_width: 0.0,
        };
        p.peak = p.locate_peak();
        let slope = (-1.0 + lambda * gamma * cos * rho * p.peak.powf(rho - 1.0)).abs();
        let height = lambda * gamma * p.peak.powf(rho) * sin;
        p.peak_width = if slope > 1e-12 * height {
            height / slope
        } else {
            p.peak
        };
        Ok(p)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same `(ρ, γ)` at another eigenvalue.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.rho, self.gamma, lambda)
    }

    /// Zero of `λ - r + λγ r^ρ cos(ρπ)`, the real part of the density denominator.
    fn locate_peak(&self) -> f64 {
        let c = |r: f64| self.lambda - r + self.lambda * self.gamma * self.cos * r.powf(self.rho);
        let (mut lo, mut hi) = if self.cos >= 0.0 {
            let mut hi = 2.0 * self.lambda;
            while c(hi) > 0.0 {
                hi *= 2.0;
            }
            (self.lambda, hi)
        } else {
            (0.0, self.lambda)
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if c(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    #[inline]
    fn denominator_parts(&self, r: f64) -> (f64, f64) {
        let lg = self.lambda * self.gamma;
        let rr = r.powf(self.rho);
        let re = self.lambda - r + lg * rr * self.cos;
        let im = lg * rr * self.sin;
        (rr, re * re + im * im)
    }

    #[inline]
    pub(crate) fn density_a_at(&self, r: f64) -> f64 {
        if r > 1e100 {
            // r^2 would overflow the denominator; divide through by r^2 first.
            let lg = self.lambda * self.gamma;
            let s = r.powf(self.rho - 1.0);
            let re = self.lambda / r - 1.0 + lg * s * self.cos;
            let im = lg * s * self.sin;
            return self.gamma / PI * self.lambda * self.lambda * self.sin * s / (r * r)
                / (re * re + im * im);
        }
        let (rr, den) = self.denominator_parts(r);
        self.gamma / PI * self.lambda * self.lambda * self.sin * (rr / r) / den
    }

    #[inline]
    pub(crate) fn density_b_at(&self, r: f64) -> f64 {
        if r > 1e100 {
            let lg = self.lambda * self.gamma;
            let s = r.powf(self.rho - 1.0);
            let re = self.lambda / r - 1.0 + lg * s * self.cos;
            let im = lg * s * self.sin;
            return self.gamma / PI * self.lambda * self.sin * s / r / (re * re + im * im);
        }
        let (rr, den) = self.denominator_parts(r);
        self.gamma / PI * self.lambda * self.sin * rr / den
    }

    /// `∫_R^∞ K_B(r) dr` for `R` far beyond `λ`. With `x = r^{ρ-1}` the density
    /// becomes a rational function of `x` (up to `λ/r`), integrable in closed form.
    /// The tail decays only like `R^{ρ-1}`, so near `ρ = 1` it is not negligible.
    fn density_b_remainder(&self, cut: f64) -> f64 {
        let x = cut.powf(self.rho - 1.0);
        let lg = self.lambda * self.gamma;
        (((lg * x - self.cos) / self.sin).atan() + (self.cos / self.sin).atan())
            / (PI * (1.0 - self.rho))
    }

    /// Breakpoints that resolve the density peak.
    pub(crate) fn peak_breakpoints(&self, shape: EndpointBehavior) -> EndpointBehavior {
        let w = 5.0 * self.peak_width;
        // Beyond `(λγ)^{1/(1-ρ)}` the densities switch to their final power law.
        let crossover = (self.lambda * self.gamma).powf(1.0 / (1.0 - self.rho));
        let shape = shape
            .breakpoint(self.peak)
            .breakpoint(self.peak + w)
            .breakpoint(if crossover < 1e250 { crossover } else { 0.0 });
        if self.peak - w > 0.0 {
            shape.breakpoint(self.peak - w)
        } else {
            shape
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {v} must be positive")))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("time t = {t} must be finite and nonnegative")))
    }
}

/// Spectral density of `A_ρ(λ,·)`.
pub fn density_a(r: f64, p: &KernelParams) -> Result<f64> {
    check_positive("r", r)?;
    Ok(p.density_a_at(r))
}

/// Spectral density of `B_ρ(λ,·)`; equals `(r/λ)` times [`density_a`].
pub fn density_b(r: f64, p: &KernelParams) -> Result<f64> {
    check_positive("r", r)?;
    Ok(p.density_b_at(r))
}

/// `A_ρ(λ,t)`: solution of the homogeneous scalar problem with `y(0) = 1`.
pub fn eval_a(p: &KernelParams, t: f64, q: &QuadratureConfig) -> Result<Estimate> {
    check_time(t)?;
    let shape = p.peak_breakpoints(
        EndpointBehavior::new(p.rho - 1.0)
            .decay(t)
            .tail_power(3.0 - p.rho),
    );
    integrate_semiinfinite(|r| p.density_a_at(r) * (-r * t).exp(), &shape, q)
}

/// `B_ρ(λ,t)`: the impulse response appearing in the Duhamel term.
pub fn eval_b(p: &KernelParams, t: f64, q: &QuadratureConfig) -> Result<Estimate> {
    check_time(t)?;
    let shape = p.peak_breakpoints(
        EndpointBehavior::new(p.rho)
            .decay(t)
            .tail_power(2.0 - p.rho),
    );
    if t == 0.0 {
        return integrate_semiinfinite_with_remainder(|r| p.density_b_at(r), &shape, q, |cut| {
            p.density_b_remainder(cut)
        });
    }
    integrate_semiinfinite(|r| p.density_b_at(r) * (-r * t).exp(), &shape, q)
}

/// `∂_t A_ρ(λ,t) = -λ B_ρ(λ,t)`.
pub fn eval_da_dt(p: &KernelParams, t: f64, q: &QuadratureConfig) -> Result<Estimate> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("dA/dt needs t > 0, got {t}")));
    }
    let b = eval_b(p, t, q)?;
    Ok(Estimate {
        value: -p.lambda * b.value,
        error: p.lambda * b.error,
        evaluations: b.evaluations,
    })
}

/// `∂_t B_ρ(λ,t) = -∫ r e^{-rt} K_B(r) dr`. Refused below `q.min_derivative_time`
/// because the integrand mass escapes to `r ~ 1/t`.
pub fn eval_db_dt(p: &KernelParams, t: f64, q: &QuadratureConfig) -> Result<Estimate> {
    if !(t > 0.0) || t < q.min_derivative_time || !t.is_finite() {
        return Err(Error::invalid(format!(
            "dB/dt is not evaluated for t = {t} (minimum {})",
            q.min_derivative_time
        )));
    }
    let shape = p.peak_breakpoints(EndpointBehavior::new(p.rho + 1.0).decay(t));
    integrate_semiinfinite(|r| -r * p.density_b_at(r) * (-r * t).exp(), &shape, q)
}

fn check_bound_args(rho: f64, gamma: f64, lambda_1: f64, horizon: f64) -> Result<()> {
    KernelParams::new(rho, gamma, lambda_1)?;
    check_positive("T", horizon)
}

/// Uniform lower bound `A_ρ(λ_k, t) ≥ C` for `λ_k ≥ λ₁`, `t ∈ [0, T]`.
pub fn lower_bound_a(
    rho: f64,
    gamma: f64,
    lambda_1: f64,
    horizon: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    check_bound_args(rho, gamma, lambda_1, horizon)?;
    let shape = EndpointBehavior::new(rho - 1.0)
        .decay(horizon)
        .tail_power(3.0 - rho)
        .breakpoint(lambda_1);
    let est = integrate_semiinfinite(
        |r| {
            r.powf(rho - 1.0) * (-r * horizon).exp()
                / (r * r / (lambda_1 * lambda_1) + gamma * gamma * r.powf(2.0 * rho) + 1.0)
        },
        &shape,
        q,
    )?;
    Ok(gamma * (rho * PI).sin() / (3.0 * PI) * est.value)
}

/// Constant `C` of the bound `λ_k B_ρ(λ_k, t) ≥ C` with the prefactor `γ sin(ρπ)/4`.
///
/// The prefactor is not implied by the density bound used for [`lower_bound_a`]
/// (which would give `γ sin(ρπ)/(3π)`), and the inequality is violated by about 1%
/// for `ρ < 1/2`, large `λ` and `t` near `T`. Treat it as an empirical bound.
pub fn lower_bound_b(
    rho: f64,
    gamma: f64,
    lambda_1: f64,
    horizon: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    check_bound_args(rho, gamma, lambda_1, horizon)?;
    let shape = EndpointBehavior::new(rho)
        .decay(horizon)
        .tail_power(2.0 - rho)
        .breakpoint(lambda_1);
    let est = integrate_semiinfinite(
        |r| {
            r.powf(rho) * (-r * horizon).exp()
                / (r * r / (lambda_1 * lambda_1) + gamma * gamma * r.powf(2.0 * rho) + 1.0)
        },
        &shape,
        q,
    )?;
    Ok(gamma * (rho * PI).sin() / 4.0 * est.value)
}

/// Both lower-bound constants for one `(ρ, γ, λ₁, T)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c_lower_a: f64,
    pub c_lower_b: f64,
    pub horizon: f64,
}

impl BoundConstants {
    pub fn compute(
        rho: f64,
        gamma: f64,
        lambda_1: f64,
        horizon: f64,
        q: &QuadratureConfig,
    ) -> Result<Self> {
        Ok(Self {
            c_lower_a: lower_bound_a(rho, gamma, lambda_1, horizon, q)?,
            c_lower_b: lower_bound_b(rho, gamma, lambda_1, horizon, q)?,
            horizon,
        })
    }
}

/// Laplace transform of `A_ρ(λ,·)`: `(1 + λγ z^{ρ-1}) / (z + λ + λγ z^ρ)`.
pub fn laplace_a_closed_form(p: &KernelParams, z: f64) -> Result<f64> {
    check_positive("z", z)?;
    let lg = p.lambda * p.gamma;
    Ok((1.0 + lg * z.powf(p.rho - 1.0)) / (z + p.lambda + lg * z.powf(p.rho)))
}

/// Laplace transform of `B_ρ(λ,·)`: `1 / (z + λ + λγ z^ρ)`.
pub fn laplace_b_closed_form(p: &KernelParams, z: f64) -> Result<f64> {
    check_positive("z", z)?;
    let lg = p.lambda * p.gamma;
    Ok(1.0 / (z + p.lambda + lg * z.powf(p.rho)))
}

/// Which kernel a time-domain helper applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    A,
    B,
}

impl Kernel {
    pub fn eval(self, p: &KernelParams, t: f64, q: &QuadratureConfig) -> Result<Estimate> {
        match self {
            Kernel::A => eval_a(p, t, q),
            Kernel::B => eval_b(p, t, q),
        }
    }

    /// Exponent of the leading non-smooth term at `t = 0` (`t^{2-ρ}` for A, `t^{1-ρ}` for B).
    fn cusp_exponent(self, rho: f64) -> f64 {
        match self {
            Kernel::A => 2.0 - rho,
            Kernel::B => 1.0 - rho,
        }
    }
}

/// Runs `body` with a closure that maps kernel failures to NaN (aborting the outer
/// quadrature) and reports the first inner error instead of the outer one.
fn with_inner_errors<T>(
    body: impl FnOnce(&dyn Fn(Result<Estimate>) -> f64) -> Result<T>,
) -> Result<T> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let unwrap = |r: Result<Estimate>| match r {
        Ok(e) => e.value,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let out = body(&unwrap);
    match failure.into_inner() {
        Some(e) => Err(e),
        None => out,
    }
}

/// `∫₀^{t_end} kernel(s) ds` on a mesh graded toward `s = 0`.
pub fn integrate_kernel_in_time(
    kernel: Kernel,
    p: &KernelParams,
    t_end: f64,
    q: &QuadratureConfig,
) -> Result<Estimate> {
    check_time(t_end)?;
    let grading = 1.0 / (1.0 - p.rho).min(kernel.cusp_exponent(p.rho)).min(1.0);
    with_inner_errors(|unwrap| {
        integrate_graded(|s| unwrap(kernel.eval(p, s, q)), 0.0, t_end, grading, q)
    })
}

/// Running integrals `∫₀^{t_i} kernel(s) ds` for an increasing list of times.
pub fn cumulative_kernel_integral(
    kernel: Kernel,
    p: &KernelParams,
    times: &[f64],
    q: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &t in times {
        if t < prev {
            return Err(Error::invalid("times must be nondecreasing"));
        }
        let piece = if prev == 0.0 {
            integrate_kernel_in_time(kernel, p, t, q)?
        } else {
            with_inner_errors(|unwrap| integrate(|s| unwrap(kernel.eval(p, s, q)), prev, t, q))?
        };
        acc += piece.value;
        out.push(acc);
        prev = t;
    }
    Ok(out)
}

/// Truncated numerical Laplace transform `∫₀^{50/z} e^{-zt} kernel(t) dt`.
pub fn numerical_laplace(
    kernel: Kernel,
    p: &KernelParams,
    z: f64,
    q: &QuadratureConfig,
) -> Result<Estimate> {
    check_positive("z", z)?;
    let grading = 1.0 / (1.0 - p.rho).min(1.0);
    with_inner_errors(|unwrap| {
        integrate_graded(
            |t| (-z * t).exp() * unwrap(kernel.eval(p, t, q)),
            0.0,
            50.0 / z,
            grading,
            q,
        )
    })
}

/// One row of a kernel table. Derivatives are absent where they are refused
/// (`t = 0`, or below `min_derivative_time` for `∂_t B`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub da_dt: Option<f64>,
    pub db_dt: Option<f64>,
}

/// `A`, `B` and their time derivatives at `points` equally spaced times in `[start, end]`.
pub fn kernel_table(
    p: &KernelParams,
    start: f64,
    end: f64,
    points: usize,
    q: &QuadratureConfig,
) -> Result<Vec<KernelRow>> {
    check_time(start)?;
    check_time(end)?;
    if points == 0 || end < start || (points == 1 && end != start) {
        return Err(Error::invalid(format!(
            "cannot place {points} points on [{start}, {end}]"
        )));
    }
    let times = (0..points).map(|i| {
        if points == 1 {
            start
        } else {
            start + (end - start) * i as f64 / (points - 1) as f64
        }
    });
    times
        .map(|t| {
            let derivative_ok = t > 0.0;
            Ok(KernelRow {
                t,
                a: eval_a(p, t, q)?.value,
                b: eval_b(p, t, q)?.value,
                da_dt: derivative_ok.then(|| eval_da_dt(p, t, q)).transpose()?.map(|e| e.value),
                db_dt: (derivative_ok && t >= q.min_derivative_time)
                    .then(|| eval_db_dt(p, t, q))
                    .transpose()?
                    .map(|e| e.value),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn params(rho: f64, gamma: f64, lambda: f64) -> KernelParams {
        KernelParams::new(rho, gamma, lambda).unwrap()
    }

    #[test]
    fn kernel_table_rows() {
        let p = params(0.5, 1.0, 1.0);
        let rows = kernel_table(&p, 0.0, 1.0, 3, &q()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].da_dt, None);
        assert_eq!(rows[1].t, 0.5);
        assert_eq!(rows[2].a, eval_a(&p, 1.0, &q()).unwrap().value);
        assert_eq!(rows[2].db_dt, Some(eval_db_dt(&p, 1.0, &q()).unwrap().value));
        assert_eq!(kernel_table(&p, 0.3, 0.3, 1, &q()).unwrap().len(), 1);
        assert!(kernel_table(&p, 0.0, 1.0, 1, &q()).is_err());
        assert!(kernel_table(&p, 1.0, 0.0, 2, &q()).is_err());
    }

    #[test]
    fn construction_rejects_endpoints() {
        assert!(KernelParams::new(0.0, 1.0, 1.0).is_err());
        assert!(KernelParams::new(1.0, 1.0, 1.0).is_err());
        assert!(KernelParams::new(0.5, 0.0, 1.0).is_err());
        assert!(KernelParams::new(0.5, 1.0, -2.0).is_err());
        assert!(KernelParams::new(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn density_at_half_order_unit_point() {
        let p = params(0.5, 1.0, 1.0);
        assert_relative_eq!(density_a(1.0, &p).unwrap(), 1.0 / PI, max_relative = 1e-15);
        assert_relative_eq!(density_b(1.0, &p).unwrap(), 1.0 / PI, max_relative = 1e-15);
        assert!(density_a(0.0, &p).is_err());
        assert!(density_b(-1.0, &p).is_err());
    }

    #[test]
    fn density_vanishes_as_order_tends_to_one() {
        let p = params(1.0 - 1e-9, 1.0, 1.0);
        for r in [0.1, 1.0, 3.0] {
            assert!(density_a(r, &p).unwrap() < 1e-7);
        }
    }

    #[test]
    fn density_b_small_r_is_finite() {
        let p = params(0.3, 1.0, 1.0);
        let v = density_b(0.01, &p).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn scaled_density_branch_is_continuous() {
        let p = params(0.7, 0.5, 4.0);
        let below = p.density_a_at(0.999_999e100);
        let above = p.density_a_at(1.000_001e100);
        assert_relative_eq!(below, above, max_relative = 1e-5);
    }

    #[test]
    fn peak_zeroes_real_part() {
        for (rho, gamma, lambda) in [(0.3, 2.0, 100.0), (0.5, 1.0, 1.0), (0.9, 0.5, 10.0)] {
            let p = params(rho, gamma, lambda);
            let re = lambda - p.peak + lambda * gamma * p.cos * p.peak.powf(rho);
            assert!(re.abs() < 1e-9 * lambda, "residual {re}");
        }
    }

    #[test]
    fn kernels_start_at_one() {
        let p = params(0.5, 1.0, 1.0);
        assert_relative_eq!(eval_a(&p, 0.0, &q()).unwrap().value, 1.0, epsilon = 1e-8);
        assert_relative_eq!(eval_b(&p, 0.0, &q()).unwrap().value, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn near_unit_order_matches_exponential_limit() {
        let p = params(0.999, 1.0, 2.0);
        let a = eval_a(&p, 1.0, &q()).unwrap().value;
        let b = eval_b(&p, 1.0, &q()).unwrap().value;
        let da = eval_da_dt(&p, 1.0, &q()).unwrap().value;
        let limit = (-2.0f64 / 3.0).exp();
        assert!((a - limit).abs() < 1e-2, "{a} vs {limit}");
        assert!((b - limit / 3.0).abs() < 1e-2, "{b}");
        assert!((da + 2.0 * limit / 3.0).abs() < 2e-2, "{da}");
    }

    #[test]
    fn derivative_of_a_is_minus_lambda_b() {
        let p = params(0.5, 1.0, 1.0);
        let b = eval_b(&p, 1.0, &q()).unwrap();
        let da = eval_da_dt(&p, 1.0, &q()).unwrap();
        assert_eq!(da.value, -b.value);
        assert!(eval_da_dt(&p, 0.0, &q()).is_err());
    }

    #[test]
    fn derivatives_match_central_differences() {
        let tight = q().tightened(1e-3);
        let p = params(0.5, 1.0, 1.0);
        let h = 1e-4;
        let fd_a = (eval_a(&p, 1.0 + h, &tight).unwrap().value
            - eval_a(&p, 1.0 - h, &tight).unwrap().value)
            / (2.0 * h);
        assert!((fd_a - eval_da_dt(&p, 1.0, &tight).unwrap().value).abs() < 1e-5);
        let fd_b = (eval_b(&p, 1.0 + h, &tight).unwrap().value
            - eval_b(&p, 1.0 - h, &tight).unwrap().value)
            / (2.0 * h);
        assert!((fd_b - eval_db_dt(&p, 1.0, &tight).unwrap().value).abs() < 1e-5);
    }

    #[test]
    fn db_dt_is_negative_and_refuses_tiny_times() {
        for (rho, gamma, lambda, t) in [(0.3, 2.0, 100.0, 1e-3), (0.9, 0.5, 1.0, 2.0)] {
            let p = params(rho, gamma, lambda);
            assert!(eval_db_dt(&p, t, &q()).unwrap().value < 0.0);
        }
        let p = params(0.5, 1.0, 1.0);
        assert!(eval_db_dt(&p, 1e-7, &q()).is_err());
        assert!(eval_db_dt(&p, 0.0, &q()).is_err());
        let permissive = QuadratureConfig {
            min_derivative_time: 0.0,
            ..q()
        };
        assert!(eval_db_dt(&p, 1e-7, &permissive).unwrap().value < 0.0);
    }

    #[test]
    fn laplace_closed_forms_at_unit_point() {
        let p = params(0.5, 1.0, 1.0);
        assert_relative_eq!(laplace_a_closed_form(&p, 1.0).unwrap(), 2.0 / 3.0);
        assert_relative_eq!(laplace_b_closed_form(&p, 1.0).unwrap(), 1.0 / 3.0);
        let z = 1e12;
        assert_relative_eq!(z * laplace_a_closed_form(&p, z).unwrap(), 1.0, epsilon = 1e-5);
        assert_relative_eq!(z * laplace_b_closed_form(&p, z).unwrap(), 1.0, epsilon = 1e-5);
        assert!(laplace_a_closed_form(&p, 0.0).is_err());
    }

    #[test]
    fn numerical_transform_matches_closed_form() {
        let p = params(0.5, 1.0, 1.0);
        let a = numerical_laplace(Kernel::A, &p, 2.0, &q()).unwrap().value;
        let b = numerical_laplace(Kernel::B, &p, 2.0, &q()).unwrap().value;
        assert!((a - laplace_a_closed_form(&p, 2.0).unwrap()).abs() < 1e-4);
        assert!((b - laplace_b_closed_form(&p, 2.0).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn lower_bounds_hold_for_reference_cell() {
        let c_a = lower_bound_a(0.5, 1.0, 1.0, 1.0, &q()).unwrap();
        let c_b = lower_bound_b(0.5, 1.0, 1.0, 1.0, &q()).unwrap();
        assert!(c_a > 0.0 && c_b > 0.0);
        for lambda in [1.0, 100.0] {
            let p = params(0.5, 1.0, lambda);
            assert!(eval_a(&p, 1.0, &q()).unwrap().value >= c_a);
            assert!(lambda * eval_b(&p, 1.0, &q()).unwrap().value >= c_b);
        }
        let sin = (0.5 * PI).sin();
        assert!(c_a <= statrs::function::gamma::gamma(0.5) * sin / (3.0 * PI));
    }

    #[test]
    fn lower_bounds_shrink_with_horizon() {
        let mut prev_a = f64::INFINITY;
        let mut prev_b = f64::INFINITY;
        for horizon in [0.5, 1.0, 4.0, 16.0, 256.0, 1e5] {
            let c = BoundConstants::compute(0.5, 1.0, 1.0, horizon, &q()).unwrap();
            assert!(c.c_lower_a < prev_a && c.c_lower_b < prev_b);
            prev_a = c.c_lower_a;
            prev_b = c.c_lower_b;
        }
        assert!(prev_a < 1e-2 && prev_b < 1e-4);
    }

    #[test]
    fn a_equals_one_minus_lambda_integral_of_b() {
        let p = params(0.5, 1.0, 1.0);
        let a = eval_a(&p, 0.5, &q()).unwrap().value;
        let int_b = integrate_kernel_in_time(Kernel::B, &p, 0.5, &q()).unwrap().value;
        assert!((a - (1.0 - int_b)).abs() < 1e-7);
    }
}
