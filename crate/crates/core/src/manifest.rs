//! Measured values for the constants the kernel and coercivity bounds leave open.
//!
//! Each entry is keyed by `(ρ, γ, λ₁, T, ε)` and holds the supremum of the bounded
//! ratio over a reference grid of [`REFERENCE_POINTS`] times. The grids are nested,
//! so any later measurement on a coarser grid must come out no larger.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{eval_b, eval_db_dt, KernelParams};
use crate::quadrature::QuadratureConfig;
use crate::solvers::{solve_forward, ProblemKind, ProblemSpec, Source, TimeGrid};
use crate::spectral::{CoefficientField, SpectralOperator};

/// Environment variable naming a manifest file to use instead of the built-in one.
pub const MANIFEST_ENV: &str = "FRS_CONSTANTS_MANIFEST";

/// Time points of the reference measurement. `(REFERENCE_POINTS - 1)` is a multiple of
/// 4 and 2, so the 101- and 201-point grids are subsets.
pub const REFERENCE_POINTS: usize = 401;

pub const MANIFEST_VERSION: u32 = 1;

const EMBEDDED: &str = include_str!("../data/constants.json");

/// Modes used for the coercivity measurement.
const COERCIVITY_MODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantKey {
    pub rho: f64,
    pub gamma: f64,
    pub lambda_1: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub epsilon: f64,
}

impl ConstantKey {
    /// The twelve `(ρ, γ)` cells with `λ₁ = 1`, `T = 1`, `ε = 1/2`.
    pub fn standard() -> Vec<Self> {
        let mut keys = Vec::new();
        for rho in [0.3, 0.5, 0.7, 0.9] {
            for gamma in [0.5, 1.0, 2.0] {
                keys.push(Self {
                    rho,
                    gamma,
                    lambda_1: 1.0,
                    horizon: 1.0,
                    epsilon: 0.5,
                });
            }
        }
        keys
    }

    fn matches(&self, other: &Self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        close(self.rho, other.rho)
            && close(self.gamma, other.gamma)
            && close(self.lambda_1, other.lambda_1)
            && close(self.horizon, other.horizon)
            && close(self.epsilon, other.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredConstants {
    /// `sup λ B(λ,t) / min{t⁻¹, t^{ρ-1}}` over `λ ∈ {1, 10, 100}·λ₁`, `t ∈ [10⁻³T, T]`.
    pub lambda_b_bound: f64,
    /// `sup t^{1-ε(1-ρ)} λ^{-ε} |∂_t B(λ,t)|` over the same `λ`, `t ∈ [10⁻²T, T]`.
    pub dtb_bound: f64,
    /// `sup_t ‖Au(t)‖ / max_t ‖f(t)‖_ε` for zero data and a smooth source.
    pub coercivity_au: f64,
}

impl MeasuredConstants {
    /// True when every constant here is at most the corresponding one in `reference`.
    pub fn within(&self, reference: &Self) -> bool {
        let slack = |x: f64| x * (1.0 + 1e-9);
        self.lambda_b_bound <= slack(reference.lambda_b_bound)
            && self.dtb_bound <= slack(reference.dtb_bound)
            && self.coercivity_au <= slack(reference.coercivity_au)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub key: ConstantKey,
    pub constants: MeasuredConstants,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsManifest {
    pub version: u32,
    pub reference_points: usize,
    pub entries: Vec<ManifestEntry>,
}

impl ConstantsManifest {
    pub fn embedded() -> Result<Self> {
        Self::parse(EMBEDDED)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let manifest: Self = serde_json::from_str(text)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Data(format!(
                "constants manifest version {} is not {MANIFEST_VERSION}",
                manifest.version
            )));
        }
        Ok(manifest)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The manifest named by [`MANIFEST_ENV`], or the built-in one.
    pub fn load() -> Result<Self> {
        match std::env::var_os(MANIFEST_ENV) {
            Some(path) => Self::from_path(Path::new(&path)),
            None => Self::embedded(),
        }
    }

    pub fn lookup(&self, key: &ConstantKey) -> Option<&MeasuredConstants> {
        self.entries
            .iter()
            .find(|e| e.key.matches(key))
            .map(|e| &e.constants)
    }

    /// Measures every standard cell on the reference grid.
    pub fn measure_standard(q: &QuadratureConfig) -> Result<Self> {
        let entries = ConstantKey::standard()
            .into_iter()
            .map(|key| {
                Ok(ManifestEntry {
                    key,
                    constants: measure(&key, REFERENCE_POINTS, q)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            version: MANIFEST_VERSION,
            reference_points: REFERENCE_POINTS,
            entries,
        })
    }
}

/// `points` log-spaced times from `start` to `end` inclusive.
fn log_grid(start: f64, end: f64, points: usize) -> Vec<f64> {
    let ratio = (end / start).ln();
    (0..points)
        .map(|i| start * (ratio * i as f64 / (points - 1) as f64).exp())
        .collect()
}

fn lambdas(key: &ConstantKey) -> [f64; 3] {
    [1.0, 10.0, 100.0].map(|m| m * key.lambda_1)
}

/// Measures all three constants for one cell on a grid of `points` times.
pub fn measure(key: &ConstantKey, points: usize, q: &QuadratureConfig) -> Result<MeasuredConstants> {
    if points < 2 {
        return Err(Error::invalid("a measurement grid needs at least two points"));
    }
    let t_end = key.horizon;
    let mut lambda_b_bound = 0.0f64;
    let mut dtb_bound = 0.0f64;
    for lambda in lambdas(key) {
        let p = KernelParams::new(key.rho, key.gamma, lambda)?;
        for t in log_grid(1e-3 * t_end, t_end, points) {
            let envelope = (1.0 / t).min(t.powf(key.rho - 1.0));
            lambda_b_bound = lambda_b_bound.max(lambda * eval_b(&p, t, q)?.value / envelope);
        }
        for t in log_grid(1e-2 * t_end, t_end, points) {
            let weight = t.powf(1.0 - key.epsilon * (1.0 - key.rho)) * lambda.powf(-key.epsilon);
            dtb_bound = dtb_bound.max(weight * eval_db_dt(&p, t, q)?.value.abs());
        }
    }
    Ok(MeasuredConstants {
        lambda_b_bound,
        dtb_bound,
        coercivity_au: measure_coercivity(key, points - 1, q)?,
    })
}

/// `sup_t ‖Au(t)‖ / ‖f‖_ε` for `u(0) = 0`, `f = Σ k⁻³ v_k` constant in time, on the
/// Dirichlet Laplacian whose first eigenvalue is `λ₁`.
fn measure_coercivity(key: &ConstantKey, intervals: usize, q: &QuadratureConfig) -> Result<f64> {
    let length = std::f64::consts::PI / key.lambda_1.sqrt();
    let op = Arc::new(SpectralOperator::dirichlet_laplacian_1d(length, COERCIVITY_MODES)?);
    let shape: Vec<f64> = (1..=COERCIVITY_MODES).map(|k| (k as f64).powi(-3)).collect();
    let field = CoefficientField::new(Arc::clone(&op), shape)?;
    let source_norm = field.norm_tau(key.epsilon);
    let spec = ProblemSpec::new(
        ProblemKind::Forward,
        key.rho,
        key.gamma,
        CoefficientField::zeros(op),
        Source::Separable {
            time: Arc::new(|_| 1.0),
            field,
        },
        TimeGrid::uniform(key.horizon, intervals)?,
    )?;
    let trace = solve_forward(&spec, q)?;
    Ok(trace
        .fields
        .iter()
        .map(|u| u.norm_tau(1.0))
        .fold(0.0, f64::max)
        / source_norm)
}
