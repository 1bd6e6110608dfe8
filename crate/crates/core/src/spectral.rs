//! Discrete spectrum of the positive self-adjoint operator and fields expanded in its
//! eigenbasis.
//!
//! Two operators are modelled: the Dirichlet Laplacian on `(0, L)` with eigenfunctions
//! `√(2/L) sin(kπx/L)`, and an abstract operator known only by its eigenvalues.

use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    DirichletLaplacian1d,
    ExplicitSpectrum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOperator {
    kind: OperatorKind,
    eigenvalues: Vec<f64>,
    length: Option<f64>,
}

impl SpectralOperator {
    /// `-d²/dx²` on `(0, L)` with zero boundary values, truncated to `modes` modes.
    pub fn dirichlet_laplacian_1d(length: f64, modes: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("length {length} must be positive")));
        }
        if modes == 0 {
            return Err(Error::invalid("mode count must be at least 1"));
        }
        let eigenvalues = (1..=modes)
            .map(|k| (k as f64 * std::f64::consts::PI / length).powi(2))
            .collect();
        Ok(Self {
            kind: OperatorKind::DirichletLaplacian1d,
            eigenvalues,
            length: Some(length),
        })
    }

    /// Operator given only by a positive, nondecreasing list of eigenvalues.
    pub fn explicit(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("spectrum must contain at least one eigenvalue"));
        }
        if eigenvalues.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::invalid("eigenvalues must be positive and finite"));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("eigenvalues must be nondecreasing"));
        }
        Ok(Self {
            kind: OperatorKind::ExplicitSpectrum,
            eigenvalues,
            length: None,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn first_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Domain length, for operators with eigenfunctions.
    pub fn length(&self) -> Option<f64> {
        self.length
    }

    pub fn supports_synthesis(&self) -> bool {
        self.length.is_some()
    }

    /// `v_k(x)` for the 1-based mode index `k`; `None` without eigenfunctions.
    pub fn eigenfunction(&self, k: usize, x: f64) -> Option<f64> {
        let l = self.length?;
        Some((2.0 / l).sqrt() * (k as f64 * std::f64::consts::PI * x / l).sin())
    }

    /// `points` equally spaced nodes on `[0, L]`, endpoints included.
    pub fn uniform_grid(&self, points: usize) -> Result<Vec<f64>> {
        let l = self.require_length()?;
        if points < 2 {
            return Err(Error::invalid("a spatial grid needs at least two points"));
        }
        let h = l / (points - 1) as f64;
        Ok((0..points).map(|i| i as f64 * h).collect())
    }

    fn require_length(&self) -> Result<f64> {
        self.length.ok_or_else(|| {
            Error::invalid("operator has no eigenfunctions; supply coefficients directly")
        })
    }
}

/// Coefficients `h_k = (h, v_k)` of an element of the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    coefficients: Vec<f64>,
    operator: Arc<SpectralOperator>,
}

impl CoefficientField {
    pub fn new(operator: Arc<SpectralOperator>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != operator.modes() {
            return Err(Error::invalid(format!(
                "{} coefficients for an operator with {} modes",
                coefficients.len(),
                operator.modes()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(Self {
            coefficients,
            operator,
        })
    }

    pub fn zeros(operator: Arc<SpectralOperator>) -> Self {
        Self {
            coefficients: vec![0.0; operator.modes()],
            operator,
        }
    }

    /// Coordinate vector `e_k` (1-based).
    pub fn unit(operator: Arc<SpectralOperator>, k: usize) -> Result<Self> {
        if k == 0 || k > operator.modes() {
            return Err(Error::invalid(format!("mode {k} outside 1..={}", operator.modes())));
        }
        let mut f = Self::zeros(operator);
        f.coefficients[k - 1] = 1.0;
        Ok(f)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn operator(&self) -> &Arc<SpectralOperator> {
        &self.operator
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|c| *c == 0.0)
    }

    /// `(Σ λ_k^{2τ} h_k²)^{1/2}`.
    pub fn norm_tau(&self, tau: f64) -> f64 {
        self.coefficients
            .iter()
            .zip(self.operator.eigenvalues())
            .map(|(h, l)| (l.powf(tau) * h).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `A^τ h`, i.e. `h_k ↦ λ_k^τ h_k`.
    pub fn apply_a(&self, tau: f64) -> Self {
        let coefficients = self
            .coefficients
            .iter()
            .zip(self.operator.eigenvalues())
            .map(|(h, l)| l.powf(tau) * h)
            .collect();
        Self {
            coefficients,
            operator: Arc::clone(&self.operator),
        }
    }

    /// `λ_N² h_N²`: size of the last retained term of `‖h‖₁²`, a truncation indicator.
    pub fn tail_estimate(&self) -> f64 {
        let n = self.coefficients.len() - 1;
        (self.operator.eigenvalues()[n] * self.coefficients[n]).powi(2)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.operator != other.operator {
            return Err(Error::invalid("fields belong to different operators"));
        }
        let coefficients = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            coefficients,
            operator: Arc::clone(&self.operator),
        })
    }
}

/// A projected field together with a note when the sampling grid was too coarse.
#[derive(Debug, Clone)]
pub struct Projection {
    pub field: CoefficientField,
    pub aliasing_warning: Option<String>,
}

/// Minimum samples per wavelength of the highest mode before projection warns.
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 8.0;

/// Trapezoid-rule coefficients of `samples` taken on [`SpectralOperator::uniform_grid`].
pub fn project(samples: &[f64], operator: Arc<SpectralOperator>) -> Result<Projection> {
    let grid = operator.uniform_grid(samples.len())?;
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("samples must be finite".into()));
    }
    let h = grid[1] - grid[0];
    let last = samples.len() - 1;
    let coefficients = (1..=operator.modes())
        .map(|k| {
            h * samples
                .iter()
                .zip(&grid)
                .enumerate()
                .map(|(i, (s, x))| {
                    let w = if i == 0 || i == last { 0.5 } else { 1.0 };
                    w * s * operator.eigenfunction(k, *x).unwrap_or(0.0)
                })
                .sum::<f64>()
        })
        .collect();
    let per_wavelength = 2.0 * last as f64 / operator.modes() as f64;
    let aliasing_warning = (per_wavelength < MIN_POINTS_PER_WAVELENGTH).then(|| {
        format!(
            "{} samples give {per_wavelength:.1} points per wavelength of mode {}; \
             at least {MIN_POINTS_PER_WAVELENGTH} are needed to avoid aliasing",
            samples.len(),
            operator.modes()
        )
    });
    Ok(Projection {
        field: CoefficientField::new(operator, coefficients)?,
        aliasing_warning,
    })
}

/// `Σ h_k v_k(x)` at each point of `grid`.
pub fn synthesize(field: &CoefficientField, grid: &[f64]) -> Result<Vec<f64>> {
    let op = field.operator();
    let l = op.require_length()?;
    if grid.iter().any(|x| !(*x >= 0.0 && *x <= l)) {
        return Err(Error::invalid(format!("grid points must lie in [0, {l}]")));
    }
    Ok(grid
        .iter()
        .map(|&x| {
            field
                .coefficients()
                .iter()
                .enumerate()
                .map(|(i, h)| h * op.eigenfunction(i + 1, x).unwrap_or(0.0))
                .sum()
        })
        .collect())
}

/// Reads a field from CSV with header `x,value` (samples on the uniform grid of the
/// operator, projected) or `k,coefficient` (1-based modes; omitted modes are zero).
pub fn read_field_csv<R: Read>(reader: R, operator: Arc<SpectralOperator>) -> Result<Projection> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let rows: Vec<(f64, f64)> = rdr
        .records()
        .map(|rec| {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Data(format!("expected two columns, got {}", rec.len())));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Data(format!("not a number: {s:?}")))
            };
            Ok((parse(&rec[0])?, parse(&rec[1])?))
        })
        .collect::<Result<_>>()?;
    match (headers.first().map(String::as_str), headers.get(1).map(String::as_str)) {
        (Some("x"), Some("value")) => {
            let grid = operator
                .uniform_grid(rows.len())
                .map_err(|e| Error::Data(e.to_string()))?;
            let tol = 1e-9 * operator.length().unwrap_or(1.0);
            for ((x, _), node) in rows.iter().zip(&grid) {
                if (x - node).abs() > tol {
                    return Err(Error::Data(format!(
                        "sample at x = {x} is off the uniform grid (expected {node})"
                    )));
                }
            }
            let samples: Vec<f64> = rows.iter().map(|r| r.1).collect();
            project(&samples, operator)
        }
        (Some("k"), Some("coefficient")) => {
            let mut coefficients = vec![None; operator.modes()];
            for (k, c) in rows {
                if k.fract() != 0.0 || k < 1.0 || k > operator.modes() as f64 {
                    return Err(Error::Data(format!(
                        "mode index {k} outside 1..={}",
                        operator.modes()
                    )));
                }
                let slot = &mut coefficients[k as usize - 1];
                if slot.replace(c).is_some() {
                    return Err(Error::Data(format!("mode {k} given twice")));
                }
            }
            let coefficients = coefficients.into_iter().map(|c| c.unwrap_or(0.0)).collect();
            Ok(Projection {
                field: CoefficientField::new(operator, coefficients)
                    .map_err(|e| Error::Data(e.to_string()))?,
                aliasing_warning: None,
            })
        }
        _ => Err(Error::Data(format!(
            "unrecognised header {headers:?}; expected x,value or k,coefficient"
        ))),
    }
}
