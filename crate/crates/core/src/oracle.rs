//! Finite-difference reference solver for `y' + λ(1 + γ D_t^ρ) y = f`.
//!
//! Implicit Euler for `y'` and the L1 scheme for the Caputo derivative. The whole
//! history is kept and summed at every step, so a solve with `n` steps costs `O(n²)`.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Uniform step, step count and the L1 weights `b_j = (j+1)^{1-ρ} - j^{1-ρ}`.
#[derive(Debug, Clone)]
pub struct L1Grid {
    step: f64,
    count: usize,
    rho: f64,
    weights: Vec<f64>,
}

impl L1Grid {
    pub fn new(step: f64, count: usize, rho: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::invalid(format!("step {step} must be positive")));
        }
        if count == 0 {
            return Err(Error::invalid("an L1 grid needs at least one step"));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid(format!("rho = {rho} must lie in (0, 1)")));
        }
        let e = 1.0 - rho;
        let weights = (0..=count)
            .map(|j| {
                let j = j as f64;
                (j + 1.0).powf(e) - j.powf(e)
            })
            .collect();
        Ok(Self {
            step,
            count,
            rho,
            weights,
        })
    }

    /// Grid with `count` steps covering `[0, horizon]`.
    pub fn covering(horizon: f64, count: usize, rho: f64) -> Result<Self> {
        Self::new(horizon / count as f64, count, rho)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, n: usize) -> f64 {
        n as f64 * self.step
    }

    /// `dt^{-ρ} / Γ(2-ρ)`.
    fn scale(&self) -> f64 {
        self.step.powf(-self.rho) / gamma(2.0 - self.rho)
    }
}

/// L1 approximation of `D_t^ρ y` at the last node of `history = (y_0, …, y_n)`.
pub fn caputo_l1(history: &[f64], grid: &L1Grid) -> Result<f64> {
    let n = history.len().saturating_sub(1);
    if n == 0 {
        return Err(Error::invalid("L1 derivative needs at least two history values"));
    }
    if n > grid.count {
        return Err(Error::invalid(format!(
            "history of {n} steps exceeds the grid's {} steps",
            grid.count
        )));
    }
    let sum: f64 = (0..n)
        .map(|j| grid.weights[j] * (history[n - j] - history[n - j - 1]))
        .sum();
    Ok(grid.scale() * sum)
}

/// L1 approximation of `D_t^ρ y` at every node of a nonuniform grid (node 0 gets 0).
pub fn caputo_l1_nonuniform(times: &[f64], values: &[f64], rho: f64) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(Error::invalid("times and values differ in length"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho = {rho} must lie in (0, 1)")));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("times must be strictly increasing"));
    }
    let e = 1.0 - rho;
    let c = 1.0 / gamma(2.0 - rho);
    let mut out = vec![0.0; times.len()];
    for n in 1..times.len() {
        let tn = times[n];
        out[n] = c * (1..=n)
            .map(|j| {
                let slope = (values[j] - values[j - 1]) / (times[j] - times[j - 1]);
                slope * ((tn - times[j - 1]).powf(e) - (tn - times[j]).powf(e))
            })
            .sum::<f64>();
    }
    Ok(out)
}

/// L1 derivative at every node with its leading `h^{2-ρ}` error removed.
///
/// The trace is differentiated on its own nodes and on every other node (nodes of
/// the same parity as the target, plus `t = 0`), and the two results are combined by
/// Richardson extrapolation with the known order `2 - ρ`. Node 1 has no coarse
/// counterpart and keeps the plain value.
pub fn caputo_l1_extrapolated(times: &[f64], values: &[f64], rho: f64) -> Result<Vec<f64>> {
    let fine = caputo_l1_nonuniform(times, values, rho)?;
    let factor = 2f64.powf(2.0 - rho);
    let mut out = fine.clone();
    for parity in [0, 1] {
        let idx: Vec<usize> = std::iter::once(0)
            .chain((1..times.len()).filter(|i| i % 2 == parity))
            .collect();
        let t: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
        let v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        let coarse = caputo_l1_nonuniform(&t, &v, rho)?;
        for (pos, &i) in idx.iter().enumerate().skip(1) {
            if i >= 2 {
                out[i] = (factor * fine[i] - coarse[pos]) / (factor - 1.0);
            }
        }
    }
    Ok(out)
}

/// `Σ a_i b_i` with eight independent partial sums so the loop vectorises.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let chunks_a = a.chunks_exact(8);
    let chunks_b = b.chunks_exact(8);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for k in 0..8 {
            acc[k] += ca[k] * cb[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Values `y_0, …, y_count` of the scalar problem on the grid nodes.
pub fn solve_scalar<F: Fn(f64) -> f64>(
    lambda: f64,
    gamma: f64,
    y0: f64,
    f: F,
    grid: &L1Grid,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !(gamma > 0.0) || !lambda.is_finite() || !gamma.is_finite() {
        return Err(Error::invalid("lambda and gamma must be positive"));
    }
    let n_steps = grid.count;
    let dt = grid.step;
    let memory = lambda * gamma * grid.scale();
    let diag = 1.0 / dt + lambda + memory;

    // History dot product Σ_{j=1}^{n-1} b_j Δ_{n-j} = Σ_{m=1}^{n-1} b_{n-m} Δ_m runs
    // over contiguous slices: deltas forward, weights reversed.
    let reversed: Vec<f64> = grid.weights[..=n_steps].iter().rev().copied().collect();
    let mut deltas = Vec::with_capacity(n_steps);
    let mut y = Vec::with_capacity(n_steps + 1);
    y.push(y0);
    let mut prev = y0;
    for n in 1..=n_steps {
        let history = dot(&deltas, &reversed[n_steps + 1 - n..n_steps]);
        let rhs = f(grid.node(n)) + prev / dt + memory * prev - memory * history;
        let next = rhs / diag;
        deltas.push(next - prev);
        y.push(next);
        prev = next;
    }
    Ok(y)
}

/// `f` for which `y(t) = t²`, `y(0) = 0` solves the scalar problem.
pub fn manufactured_t2_forcing(lambda: f64, gamma: f64, rho: f64, t: f64) -> f64 {
    2.0 * t + lambda * t * t + 2.0 * lambda * gamma * t.powf(2.0 - rho) / self::gamma(3.0 - rho)
}

/// Outcome of extrapolating a sequence of step-halved results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub value: f64,
    /// Observed convergence order, or the assumed order 1 when `observed` is false.
    pub order: f64,
    pub observed: bool,
    /// False when successive differences disagree in sign.
    pub reliable: bool,
}

/// Richardson extrapolation of values computed at `dt, dt/2, dt/4, …`.
///
/// Two values assume first order; three or more observe the order from the last three.
pub fn richardson_extrapolate(values: &[f64]) -> Result<Extrapolation> {
    if values.len() < 2 {
        return Err(Error::invalid("extrapolation needs at least two values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("extrapolation inputs must be finite"));
    }
    let k = values.len();
    let fine = values[k - 1];
    let d_fine = fine - values[k - 2];
    if d_fine == 0.0 && (k < 3 || values[k - 2] == values[k - 3]) {
        return Ok(Extrapolation {
            value: fine,
            order: f64::INFINITY,
            observed: k >= 3,
            reliable: true,
        });
    }
    if k == 2 {
        return Ok(Extrapolation {
            value: fine + d_fine,
            order: 1.0,
            observed: false,
            reliable: true,
        });
    }
    let d_coarse = values[k - 2] - values[k - 3];
    let ratio = d_coarse / d_fine;
    if !(ratio > 1.0) || !ratio.is_finite() {
        return Ok(Extrapolation {
            value: fine,
            order: if ratio > 0.0 { ratio.log2() } else { f64::NAN },
            observed: true,
            reliable: false,
        });
    }
    let order = ratio.log2();
    Ok(Extrapolation {
        value: fine + d_fine / (ratio - 1.0),
        order,
        observed: true,
        reliable: true,
    })
}
