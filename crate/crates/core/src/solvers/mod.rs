//! Series solutions of the forward, non-local and backward problems.
//!
//! Every problem decouples into scalar modes `u_k' + λ_k(1 + γ D_t^ρ) u_k = f_k`,
//! solved by combining `A_ρ(λ_k, t)` with the Duhamel term `∫₀^t B_ρ(λ_k, t-τ) f_k(τ) dτ`.

mod convolution;
mod diagnostics;
mod export;
mod problems;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::oracle::manufactured_t2_forcing;
use crate::spectral::{CoefficientField, OperatorKind, SpectralOperator};

pub use convolution::{convolve_b, ConvolutionPlan, DEFAULT_CONVOLUTION_PANELS};
pub use diagnostics::{
    coercivity_report, residual, CoercivityRow, TraceDiagnostics, MIN_INTERIOR_NODES,
};
pub use export::{write_grid_csv, write_trace_csv, write_trace_json, TraceDocument};
pub use problems::{solve, solve_auxiliary_w, solve_backward, solve_forward, solve_nonlocal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// `u(0) = φ`.
    Forward,
    /// `u(T) = u(0) + φ̂`.
    Nonlocal,
    /// `u(T) = ψ`.
    Backward,
}

/// Strictly increasing time nodes from `0` to the horizon `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    uniform: bool,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, intervals: usize) -> Result<Self> {
        Self::graded(horizon, intervals, 1.0).map(|mut g| {
            g.uniform = true;
            g
        })
    }

    /// Nodes `T (i/n)^g`, clustered toward `t = 0` for `g > 1`.
    pub fn graded(horizon: f64, intervals: usize, exponent: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!("horizon {horizon} must be positive")));
        }
        if intervals == 0 {
            return Err(Error::invalid("a time grid needs at least one interval"));
        }
        if !(exponent >= 1.0) || !exponent.is_finite() {
            return Err(Error::invalid(format!("grading exponent {exponent} must be >= 1")));
        }
        let n = intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals)
            .map(|i| horizon * (i as f64 / n).powf(exponent))
            .collect();
        nodes[intervals] = horizon;
        Ok(Self {
            nodes,
            uniform: exponent == 1.0,
        })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("a time grid needs at least two nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::invalid("the first time node must be 0"));
        }
        if nodes.iter().any(|t| !t.is_finite()) || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("time nodes must be finite and strictly increasing"));
        }
        Ok(Self {
            nodes,
            uniform: false,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Same kind of grid with twice as many intervals.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.horizon());
        Self {
            nodes,
            uniform: self.uniform,
        }
    }
}

pub type ModalFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Right-hand side `f(t) = Σ f_k(t) v_k`. Mode indices are 1-based.
#[derive(Clone)]
pub enum Source {
    Zero,
    /// The spatially constant function `c`, expanded in the eigenbasis. For an
    /// operator without eigenfunctions every coefficient is `c`.
    Constant(f64),
    /// `g(t) h`.
    Separable { time: TimeFn, field: CoefficientField },
    /// Arbitrary `f_k(t)`.
    Modal(ModalFn),
    /// Per-mode samples at `times`, interpolated linearly. `values[i][k-1]` is `f_k(times[i])`.
    Sampled { times: Vec<f64>, values: Vec<Vec<f64>> },
    /// In every mode, the forcing whose solution from zero data is `u_k(t) = t²`.
    ManufacturedT2,
}

impl std::fmt::Debug for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Zero => write!(f, "Zero"),
            Source::Constant(c) => write!(f, "Constant({c})"),
            Source::Separable { field, .. } => write!(f, "Separable({:?})", field.coefficients()),
            Source::Modal(_) => write!(f, "Modal(..)"),
            Source::Sampled { times, .. } => write!(f, "Sampled({} times)", times.len()),
            Source::ManufacturedT2 => write!(f, "ManufacturedT2"),
        }
    }
}

impl Source {
    /// Reads per-mode samples from CSV with header `t,k,value` (modes 1-based). Every
    /// time must list all `modes` modes.
    pub fn read_sampled_csv<R: std::io::Read>(reader: R, modes: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if headers != ["t", "k", "value"] {
            return Err(Error::Data(format!("expected header t,k,value, got {}", headers.join(","))));
        }
        let mut rows: Vec<(f64, usize, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Data(format!("not a number: {:?}", &rec[i])))
            };
            let k: usize = rec[1]
                .parse()
                .map_err(|_| Error::Data(format!("not a mode index: {:?}", &rec[1])))?;
            if k == 0 || k > modes {
                return Err(Error::Data(format!("mode index {k} outside 1..={modes}")));
            }
            rows.push((num(0)?, k, num(2)?));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut times: Vec<f64> = Vec::new();
        let mut values: Vec<Vec<Option<f64>>> = Vec::new();
        for (t, k, v) in rows {
            if times.last() != Some(&t) {
                times.push(t);
                values.push(vec![None; modes]);
            }
            let row = values.last_mut().expect("row pushed above");
            if row[k - 1].replace(v).is_some() {
                return Err(Error::Data(format!("mode {k} given twice at t = {t}")));
            }
        }
        let values = values
            .into_iter()
            .zip(&times)
            .map(|(row, t)| {
                row.into_iter()
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| Error::Data(format!("missing modes at t = {t}")))
            })
            .collect::<Result<_>>()?;
        Ok(Source::Sampled { times, values })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Source::Zero => true,
            Source::Constant(c) => *c == 0.0,
            Source::Separable { field, .. } => field.is_zero(),
            _ => false,
        }
    }

    fn validate(&self, operator: &SpectralOperator, horizon: f64) -> Result<()> {
        match self {
            Source::Constant(c) if !c.is_finite() => {
                Err(Error::invalid("constant source must be finite"))
            }
            Source::Separable { field, .. } if field.operator().as_ref() != operator => Err(
                Error::invalid("separable source field belongs to a different operator"),
            ),
            Source::Sampled { times, values } => {
                if times.len() < 2 || times.len() != values.len() {
                    return Err(Error::invalid(
                        "sampled source needs at least two times and one row per time",
                    ));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("sampled source times must increase"));
                }
                if times[0] > 0.0 || times[times.len() - 1] < horizon {
                    return Err(Error::invalid(format!(
                        "sampled source covers [{}, {}], not [0, {horizon}]",
                        times[0],
                        times[times.len() - 1]
                    )));
                }
                if values.iter().any(|row| row.len() != operator.modes()) {
                    return Err(Error::invalid(format!(
                        "each sampled source row needs {} mode values",
                        operator.modes()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `f_k(t)` for mode `k` (1-based) of `ctx`.
    pub fn mode_value(&self, ctx: &ModeContext, t: f64) -> f64 {
        let k = ctx.index;
        match self {
            Source::Zero => 0.0,
            Source::Constant(c) => c * ctx.constant_projection,
            Source::Separable { time, field } => time(t) * field.coefficients()[k - 1],
            Source::Modal(f) => f(k, t),
            Source::Sampled { times, values } => {
                let i = times.partition_point(|s| *s <= t).clamp(1, times.len() - 1);
                let (t0, t1) = (times[i - 1], times[i]);
                let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                (1.0 - w) * values[i - 1][k - 1] + w * values[i][k - 1]
            }
            Source::ManufacturedT2 => {
                manufactured_t2_forcing(ctx.params.lambda(), ctx.params.gamma(), ctx.params.rho(), t)
            }
        }
    }
}

/// What a single mode needs to know about its problem.
#[derive(Debug, Clone, Copy)]
pub struct ModeContext {
    /// 1-based mode index.
    pub index: usize,
    pub params: KernelParams,
    /// Coefficient of the constant function 1 along this mode.
    constant_projection: f64,
}

/// Full description of one problem instance.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub rho: f64,
    pub gamma: f64,
    /// `φ` (forward), `φ̂` (non-local) or `ψ` (backward).
    pub data: CoefficientField,
    pub source: Source,
    pub time_grid: TimeGrid,
}

impl ProblemSpec {
    pub fn new(
        kind: ProblemKind,
        rho: f64,
        gamma: f64,
        data: CoefficientField,
        source: Source,
        time_grid: TimeGrid,
    ) -> Result<Self> {
        let spec = Self {
            kind,
            rho,
            gamma,
            data,
            source,
            time_grid,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        KernelParams::new(self.rho, self.gamma, self.operator().first_eigenvalue())?;
        self.source.validate(self.operator(), self.horizon())
    }

    pub fn operator(&self) -> &Arc<SpectralOperator> {
        self.data.operator()
    }

    pub fn horizon(&self) -> f64 {
        self.time_grid.horizon()
    }

    pub fn modes(&self) -> Result<Vec<ModeContext>> {
        let op = self.operator();
        op.eigenvalues()
            .iter()
            .enumerate()
            .map(|(i, &lambda)| {
                let k = i + 1;
                let constant_projection = match (op.kind(), op.length()) {
                    (OperatorKind::DirichletLaplacian1d, Some(l)) => {
                        // ∫₀^L √(2/L) sin(kπx/L) dx = √(2L) (1 - (-1)^k) / (kπ)
                        if k % 2 == 1 {
                            2.0 * (2.0 * l).sqrt() / (k as f64 * std::f64::consts::PI)
                        } else {
                            0.0
                        }
                    }
                    _ => 1.0,
                };
                Ok(ModeContext {
                    index: k,
                    params: KernelParams::new(self.rho, self.gamma, lambda)?,
                    constant_projection,
                })
            })
            .collect()
    }

    /// Coefficients of `f(t)`.
    pub fn source_field(&self, t: f64) -> Result<CoefficientField> {
        let values = self
            .modes()?
            .iter()
            .map(|m| self.source.mode_value(m, t))
            .collect();
        CoefficientField::new(Arc::clone(self.operator()), values)
    }

    /// The same problem with different data, source or kind.
    pub fn with(&self, kind: ProblemKind, data: CoefficientField, source: Source) -> Self {
        Self {
            kind,
            data,
            source,
            ..self.clone()
        }
    }
}

/// Solution coefficients at every time node plus consistency diagnostics.
#[derive(Debug, Clone)]
pub struct SolutionTrace {
    pub nodes: Vec<f64>,
    pub fields: Vec<CoefficientField>,
    /// Largest quadrature error bound among the kernel values used.
    pub kernel_error: f64,
    /// `max_k |u_k(T) - u_k(0) - φ̂_k|` for non-local runs.
    pub nonlocal_gap: Option<f64>,
    /// `max_k |u_k(T) - ψ_k|` for backward runs.
    pub terminal_gap: Option<f64>,
    /// For backward runs, `‖u(0)‖ · C_A / ‖ψ - V(T)‖`, at most 1 when the stability
    /// estimate holds.
    pub stability_ratio: Option<f64>,
    pub warnings: Vec<String>,
    pub diagnostics: Option<TraceDiagnostics>,
}

impl SolutionTrace {
    /// `u_k` at every node for the 1-based mode `k`.
    pub fn mode_history(&self, k: usize) -> Vec<f64> {
        self.fields.iter().map(|f| f.coefficients()[k - 1]).collect()
    }

    pub fn initial(&self) -> &CoefficientField {
        &self.fields[0]
    }

    pub fn terminal(&self) -> &CoefficientField {
        &self.fields[self.fields.len() - 1]
    }

    fn from_modes(
        nodes: &[f64],
        operator: &Arc<SpectralOperator>,
        per_mode: Vec<Vec<f64>>,
    ) -> Result<Vec<CoefficientField>> {
        (0..nodes.len())
            .map(|n| {
                CoefficientField::new(
                    Arc::clone(operator),
                    per_mode.iter().map(|m| m[n]).collect(),
                )
            })
            .collect()
    }
}
