//! Globally adaptive Gauss–Kronrod (G10/K21) quadrature.
//!
//! Every integral in the crate goes through [`adaptive`], which works on a list of
//! *pieces*. A piece is an interval in some mapped coordinate together with the
//! change of variables back to the original one. The mappings remove the two
//! endpoint behaviours the kernel integrals have:
//!
//! * an algebraic singularity `r^α` (α > -1) at the origin, removed by `r = b u^{1/(1+α)}`;
//! * an unbounded range with algebraic decay `r^{-p}` (p > 1), mapped onto `(0, 1]`
//!   by `r = b u^{-1/(p-1)}`, which turns the leading tail term into a constant.
//!
//! Interior pieces that span more than a decade are integrated in `ln r`.
//! The panel with the largest error estimate is bisected until the summed error
//! meets `max(abs_tol, rel_tol * |value|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_PANELS: usize = 4000;

/// Largest abscissa the tail mapping is allowed to reach before the remainder is
/// estimated instead of integrated.
const R_MAX: f64 = 1e300;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances and splitting used by every kernel integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum bisection depth of any single panel.
    pub max_refinements: usize,
    /// Breakpoint separating the singular range near `r = 0` from the decaying range.
    pub split_point: f64,
    /// Times below this are refused by the kernel time derivative `dB/dt`.
    pub min_derivative_time: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_refinements: 30,
            split_point: 1.0,
            min_derivative_time: 1e-6,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::invalid("quadrature tolerances must be positive"));
        }
        if self.max_refinements < 1 {
            return Err(Error::invalid("max_refinements must be at least 1"));
        }
        if !(self.split_point > 0.0) || !self.split_point.is_finite() {
            return Err(Error::invalid("split_point must be positive and finite"));
        }
        if !(self.min_derivative_time >= 0.0) {
            return Err(Error::invalid("min_derivative_time must be nonnegative"));
        }
        Ok(())
    }

    /// Same config with both tolerances scaled by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

/// Value of an integral with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// What the caller knows about an integrand on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointBehavior {
    /// The integrand behaves like `r^singular_exponent` as `r → 0`; must lie in `(-1, ∞)`.
    pub singular_exponent: f64,
    /// Rate of an `e^{-r * decay_scale}` factor; zero when there is none.
    pub decay_scale: f64,
    /// Algebraic decay `r^{-p}` at infinity, when known. Required when `decay_scale == 0`.
    pub tail_power: Option<f64>,
    /// Extra interior breakpoints (peaks, scale changes).
    pub breakpoints: Vec<f64>,
}

impl EndpointBehavior {
    pub fn new(singular_exponent: f64) -> Self {
        Self {
            singular_exponent,
            decay_scale: 0.0,
            tail_power: None,
            breakpoints: Vec::new(),
        }
    }

    pub fn decay(mut self, scale: f64) -> Self {
        self.decay_scale = scale;
        self
    }

    pub fn tail_power(mut self, p: f64) -> Self {
        self.tail_power = Some(p);
        self
    }

    pub fn breakpoint(mut self, r: f64) -> Self {
        if r.is_finite() && r > 0.0 {
            self.breakpoints.push(r);
        }
        self
    }
}

#[derive(Debug, Clone, Copy)]
enum Map {
    /// `x = origin + scale * u^exponent`, `u ∈ [0, 1]`.
    Power { origin: f64, scale: f64, exponent: f64 },
    /// `x = u`.
    Linear,
    /// `x = e^u`.
    Log,
    /// `x = base * u^{-kappa}`, `u ∈ [u_min, 1]`.
    Tail { base: f64, kappa: f64 },
}

impl Map {
    #[inline]
    fn eval(&self, u: f64) -> (f64, f64) {
        match *self {
            Map::Power {
                origin,
                scale,
                exponent,
            } => {
                if exponent == 1.0 {
                    (origin + scale * u, scale)
                } else {
                    let p = u.powf(exponent - 1.0);
                    (origin + scale * p * u, scale * exponent * p)
                }
            }
            Map::Linear => (u, 1.0),
            Map::Log => {
                let x = u.exp();
                (x, x)
            }
            Map::Tail { base, kappa } => {
                let p = u.powf(-kappa - 1.0);
                (base * p * u, base * kappa * p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    map: Map,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    piece: usize,
    lo: f64,
    hi: f64,
    depth: usize,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, map: Map, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let g = |u: f64| -> Result<f64> {
        let (x, jac) = map.eval(u);
        let v = f(x) * jac;
        if v.is_finite() {
            Ok(v)
        } else if jac == 0.0 || !x.is_finite() {
            Ok(0.0)
        } else {
            Err(Error::invalid(format!("integrand is not finite at x = {x:e}")))
        }
    };

    let f_center = g(center)?;
    let mut res_g = 0.0;
    let mut res_k = f_center * WGK[10];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let y1 = g(center - dx)?;
        let y2 = g(center + dx)?;
        fv1[j] = y1;
        fv2[j] = y2;
        res_k += WGK[j] * (y1 + y2);
        res_abs += WGK[j] * (y1.abs() + y2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (y1 + y2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();

    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    pieces: &[Piece],
    q: &QuadratureConfig,
    extra_error: f64,
) -> Result<Estimate> {
    q.validate()?;
    let mut heap = BinaryHeap::with_capacity(64);
    let mut frozen: Vec<Panel> = Vec::new();
    let mut evaluations = 0usize;
    for (i, piece) in pieces.iter().enumerate() {
        if piece.hi <= piece.lo {
            continue;
        }
        let (value, error) = gk21(f, piece.map, piece.lo, piece.hi)?;
        evaluations += 21;
        heap.push(Panel {
            piece: i,
            lo: piece.lo,
            hi: piece.hi,
            depth: 0,
            value,
            error,
        });
    }

    let totals = |heap: &BinaryHeap<Panel>, frozen: &[Panel]| {
        let mut v = 0.0;
        let mut e = extra_error;
        for p in heap.iter().chain(frozen.iter()) {
            v += p.value;
            e += p.error;
        }
        (v, e)
    };

    loop {
        let (value, error) = totals(&heap, &frozen);
        if error <= q.abs_tol.max(q.rel_tol * value.abs()) {
            return Ok(Estimate {
                value,
                error,
                evaluations,
            });
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::NotConverged { value, error });
        };
        if worst.depth >= q.max_refinements {
            frozen.push(worst);
            continue;
        }
        if heap.len() + frozen.len() + 2 > MAX_PANELS {
            frozen.push(worst);
            frozen.extend(heap.drain());
            continue;
        }
        let map = pieces[worst.piece].map;
        let mid = 0.5 * (worst.lo + worst.hi);
        let (v1, e1) = gk21(f, map, worst.lo, mid)?;
        let (v2, e2) = gk21(f, map, mid, worst.hi)?;
        evaluations += 42;
        for (lo, hi, value, error) in [(worst.lo, mid, v1, e1), (mid, worst.hi, v2, e2)] {
            heap.push(Panel {
                piece: worst.piece,
                lo,
                hi,
                depth: worst.depth + 1,
                value,
                error,
            });
        }
    }
}

fn middle_piece(a: f64, b: f64) -> Piece {
    if b / a > 10.0 {
        Piece {
            map: Map::Log,
            lo: a.ln(),
            hi: b.ln(),
        }
    } else {
        Piece {
            map: Map::Linear,
            lo: a,
            hi: b,
        }
    }
}

/// Integrates `f` over `[0, ∞)` given its endpoint behaviour.
///
/// The range is cut at `split_point`, at `1/decay_scale`, and at every caller
/// breakpoint. When the tail mapping would overflow, the remainder beyond
/// `1e300` is estimated from the algebraic tail and added to the error bound.
pub fn integrate_semiinfinite<F: Fn(f64) -> f64>(
    f: F,
    shape: &EndpointBehavior,
    q: &QuadratureConfig,
) -> Result<Estimate> {
    semiinfinite(&f, shape, q, None)
}

/// As [`integrate_semiinfinite`], but with the caller supplying `∫_R^∞ f` for the
/// range beyond the largest representable mapped point `R`. Needed when the
/// algebraic tail is so slow (`p` close to 1) that the mass past `1e300` matters.
pub fn integrate_semiinfinite_with_remainder<F, G>(
    f: F,
    shape: &EndpointBehavior,
    q: &QuadratureConfig,
    remainder: G,
) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    semiinfinite(&f, shape, q, Some(&remainder))
}

fn semiinfinite<F: Fn(f64) -> f64>(
    f: &F,
    shape: &EndpointBehavior,
    q: &QuadratureConfig,
    exact_remainder: Option<&dyn Fn(f64) -> f64>,
) -> Result<Estimate> {
    q.validate()?;
    let alpha = shape.singular_exponent;
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!(
            "singular exponent {alpha} must lie in (-1, inf)"
        )));
    }
    if !(shape.decay_scale >= 0.0) || !shape.decay_scale.is_finite() {
        return Err(Error::invalid("decay scale must be finite and nonnegative"));
    }
    let kappa = match (shape.tail_power, shape.decay_scale > 0.0) {
        (Some(p), _) if p > 1.0 => 1.0 / (p - 1.0),
        (Some(_), true) => 1.0,
        (Some(p), false) => {
            return Err(Error::invalid(format!(
                "tail power {p} gives a divergent integral without exponential decay"
            )))
        }
        (None, true) => 1.0,
        (None, false) => {
            return Err(Error::invalid(
                "integrand without exponential decay needs a tail power",
            ))
        }
    };

    let mut cuts: Vec<f64> = shape
        .breakpoints
        .iter()
        .copied()
        .chain(std::iter::once(q.split_point))
        .chain((shape.decay_scale > 0.0).then(|| 1.0 / shape.decay_scale))
        .filter(|r| r.is_finite() && *r > 0.0 && *r < R_MAX)
        // Past `e^{-700}` the exponential factor has underflowed; cuts there only
        // create panels whose mass sits at one end.
        .filter(|r| *r * shape.decay_scale < 700.0)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(cuts.len());
    for c in cuts {
        match merged.last() {
            Some(&last) if c / last < 1.0 + 1e-3 => {}
            _ => merged.push(c),
        }
    }

    let first = merged[0];
    let last = *merged.last().unwrap_or(&first);
    let mut pieces = Vec::with_capacity(merged.len() + 1);
    pieces.push(Piece {
        map: Map::Power {
            origin: 0.0,
            scale: first,
            exponent: 1.0 / (1.0 + alpha),
        },
        lo: 0.0,
        hi: 1.0,
    });
    for w in merged.windows(2) {
        pieces.push(middle_piece(w[0], w[1]));
    }
    let u_min = (last / R_MAX).powf(1.0 / kappa);
    pieces.push(Piece {
        map: Map::Tail { base: last, kappa },
        lo: u_min,
        hi: 1.0,
    });

    if u_min > 0.0 {
        if let Some(rest) = exact_remainder {
            let cut = last * u_min.powf(-kappa);
            let mut est = adaptive(f, &pieces, q, 0.0)?;
            est.value += rest(cut);
            return Ok(est);
        }
    }
    let remainder = match shape.tail_power {
        Some(p) if p > 1.0 && u_min > 0.0 => (f(R_MAX) * R_MAX / (p - 1.0)).abs(),
        _ => 0.0,
    };
    let remainder = if remainder.is_finite() { remainder } else { f64::INFINITY };
    adaptive(f, &pieces, q, remainder)
}

/// Adaptive integral over a finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, q: &QuadratureConfig) -> Result<Estimate> {
    check_interval(a, b)?;
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let pieces = [Piece {
        map: Map::Linear,
        lo: a,
        hi: b,
    }];
    adaptive(&f, &pieces, q, 0.0)
}

/// Adaptive integral over `[a, b]` after the substitution `x = a + (b - a) u^grading`,
/// which clusters nodes toward `a` where the integrand has a weak singularity.
pub fn integrate_graded<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    grading: f64,
    q: &QuadratureConfig,
) -> Result<Estimate> {
    check_interval(a, b)?;
    if !(grading >= 1.0) || !grading.is_finite() {
        return Err(Error::invalid("grading exponent must be at least 1"));
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let pieces = [Piece {
        map: Map::Power {
            origin: a,
            scale: b - a,
            exponent: grading,
        },
        lo: 0.0,
        hi: 1.0,
    }];
    adaptive(&f, &pieces, q, 0.0)
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !a.is_finite() || !b.is_finite() || b < a {
        return Err(Error::invalid(format!("bad interval [{a}, {b}]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::function::gamma::gamma;
    use std::f64::consts::PI;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn inverse_sqrt_times_exponential_is_gamma_half() {
        let shape = EndpointBehavior::new(-0.5).decay(1.0);
        let est = integrate_semiinfinite(|r| r.powf(-0.5) * (-r).exp(), &shape, &q()).unwrap();
        assert_relative_eq!(est.value, PI.sqrt(), max_relative = 1e-10);
        assert!(est.error <= 1e-8 * est.value);
    }

    #[test]
    fn plain_exponential_integrates_to_one() {
        let shape = EndpointBehavior::new(0.0).decay(1.0);
        let est = integrate_semiinfinite(|r| (-r).exp(), &shape, &q()).unwrap();
        assert_relative_eq!(est.value, 1.0, max_relative = 1e-11);
    }

    #[test]
    fn scaled_power_exponential_matches_gamma_ratio() {
        let (rho, t) = (0.5, 2.0);
        let shape = EndpointBehavior::new(rho - 1.0).decay(t);
        let est =
            integrate_semiinfinite(|r| r.powf(rho - 1.0) * (-r * t).exp(), &shape, &q()).unwrap();
        assert_relative_eq!(est.value, gamma(rho) / t.powf(rho), max_relative = 1e-10);
    }

    #[test]
    fn slow_algebraic_tail_without_decay() {
        // ∫ r^{-0.7} / (1 + r) dr over (0,∞) = π / sin(0.3π)
        let shape = EndpointBehavior::new(-0.7).tail_power(1.7);
        let est = integrate_semiinfinite(|r| r.powf(-0.7) / (1.0 + r), &shape, &q()).unwrap();
        assert_relative_eq!(est.value, PI / (0.3 * PI).sin(), max_relative = 1e-9);
    }

    #[test]
    fn missing_tail_information_is_rejected() {
        let shape = EndpointBehavior::new(0.0);
        assert!(integrate_semiinfinite(|r| 1.0 / (1.0 + r * r), &shape, &q()).is_err());
        let shape = EndpointBehavior::new(-1.0).decay(1.0);
        assert!(integrate_semiinfinite(|r| (-r).exp() / r, &shape, &q()).is_err());
    }

    #[test]
    fn depth_limit_reports_nonconvergence_with_estimate() {
        let tight = QuadratureConfig {
            rel_tol: 1e-15,
            abs_tol: 1e-300,
            max_refinements: 1,
            ..q()
        };
        let shape = EndpointBehavior::new(0.0).decay(1.0);
        match integrate_semiinfinite(|r| (r * 40.0).sin().abs() * (-r).exp(), &shape, &tight) {
            Err(Error::NotConverged { value, error }) => {
                assert!(value.is_finite() && error > 0.0);
            }
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }

    #[test]
    fn graded_interval_handles_endpoint_power() {
        let est = integrate_graded(|x| x.powf(-0.9), 0.0, 1.0, 10.0, &q()).unwrap();
        assert_relative_eq!(est.value, 10.0, max_relative = 1e-9);
        let est = integrate(|x| x.cos(), 0.0, PI / 2.0, &q()).unwrap();
        assert_relative_eq!(est.value, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sharp_peak_is_found_with_breakpoint() {
        let w = 1e-4;
        let shape = EndpointBehavior::new(0.0).decay(1.0).breakpoint(2.0);
        let lorentz = |r: f64| w / PI / ((r - 2.0).powi(2) + w * w) * (-r).exp();
        let est = integrate_semiinfinite(lorentz, &shape, &q()).unwrap();
        assert_relative_eq!(est.value, (-2.0f64).exp(), max_relative = 1e-3);
    }
}
