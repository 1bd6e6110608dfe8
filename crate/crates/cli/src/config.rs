//! Declarative run configurations. Numbers may be written as JSON numbers or as
//! decimal strings (`"0.1"`), which are parsed with correct rounding.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use frs_core::convergence::{StudyTarget, DEFAULT_STEPS};
use frs_core::kernel::KernelParams;
use frs_core::quadrature::QuadratureConfig;
use frs_core::solvers::{ProblemKind, ProblemSpec, Source, TimeGrid};
use frs_core::spectral::{read_field_csv, CoefficientField, SpectralOperator};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decimal(pub f64);

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        let value = match Repr::deserialize(d)? {
            Repr::Number(x) => x,
            Repr::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("{s:?} is not a decimal number")))?,
        };
        if value.is_finite() {
            Ok(Decimal(value))
        } else {
            Err(serde::de::Error::custom("numbers must be finite"))
        }
    }
}

fn values(list: &[Decimal]) -> Vec<f64> {
    list.iter().map(|d| d.0).collect()
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    Forward,
    Nonlocal,
    Backward,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridConfig {
    pub intervals: Option<usize>,
    /// Exponent `g` of the nodes `T (i/n)^g`; 1 gives a uniform grid.
    pub grading: Option<Decimal>,
    pub nodes: Option<Vec<Decimal>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    #[serde(rename = "dirichlet_laplacian_1d")]
    DirichletLaplacian1d { length: Decimal, modes: usize },
    Explicit { eigenvalues: Vec<Decimal> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Zero,
    /// Mode `mode` (1-based) set to one, all others zero.
    Unit { mode: usize },
    Coefficients { values: Vec<Decimal> },
    /// `x,value` samples or `k,coefficient` rows; relative to the config file.
    Csv { path: PathBuf },
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    #[default]
    Zero,
    Constant { value: Decimal },
    #[serde(rename = "manufactured_t2")]
    ManufacturedT2,
    /// `t,k,value` rows; relative to the config file.
    Sampled { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// `t,k,coefficient`.
    Csv,
    /// Nodes, coefficient fields and diagnostics.
    Json,
    /// `t,x,u` on a uniform spatial grid.
    Grid,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_prefix")]
    pub prefix: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_prefix() -> String {
    "trace".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

fn default_grid_points() -> usize {
    101
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            prefix: default_prefix(),
            formats: default_formats(),
            grid_points: default_grid_points(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverrides {
    pub rel_tol: Option<Decimal>,
    pub abs_tol: Option<Decimal>,
    pub max_refinements: Option<usize>,
    pub split_point: Option<Decimal>,
    pub min_derivative_time: Option<Decimal>,
}

impl QuadratureOverrides {
    pub fn resolve(&self) -> Result<QuadratureConfig, Failure> {
        let d = QuadratureConfig::default();
        let q = QuadratureConfig {
            rel_tol: self.rel_tol.map_or(d.rel_tol, |x| x.0),
            abs_tol: self.abs_tol.map_or(d.abs_tol, |x| x.0),
            max_refinements: self.max_refinements.unwrap_or(d.max_refinements),
            split_point: self.split_point.map_or(d.split_point, |x| x.0),
            min_derivative_time: self.min_derivative_time.map_or(d.min_derivative_time, |x| x.0),
        };
        q.validate().map_err(Failure::config)?;
        Ok(q)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemName,
    pub rho: Decimal,
    pub gamma: Decimal,
    pub horizon: Decimal,
    pub time_grid: TimeGridConfig,
    pub operator: OperatorConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
}

/// A problem ready to solve, plus anything learned while ingesting its data.
pub struct Prepared {
    pub spec: ProblemSpec,
    pub quadrature: QuadratureConfig,
    pub warnings: Vec<String>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let file = File::open(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        read_json(path)
    }

    fn operator(&self) -> Result<Arc<SpectralOperator>, Failure> {
        let op = match &self.operator {
            OperatorConfig::DirichletLaplacian1d { length, modes } => {
                SpectralOperator::dirichlet_laplacian_1d(length.0, *modes)
            }
            OperatorConfig::Explicit { eigenvalues } => SpectralOperator::explicit(values(eigenvalues)),
        };
        op.map(Arc::new).map_err(Failure::config)
    }

    fn time_grid(&self) -> Result<TimeGrid, Failure> {
        let g = &self.time_grid;
        let grid = match (&g.nodes, g.intervals) {
            (Some(nodes), None) if g.grading.is_none() => {
                let grid = TimeGrid::from_nodes(values(nodes)).map_err(Failure::config)?;
                if grid.horizon() != self.horizon.0 {
                    return Err(Failure::config(format!(
                        "last time node {} differs from the horizon {}",
                        grid.horizon(),
                        self.horizon.0
                    )));
                }
                Ok(grid)
            }
            (None, Some(n)) => match g.grading {
                None => TimeGrid::uniform(self.horizon.0, n),
                Some(exponent) => TimeGrid::graded(self.horizon.0, n, exponent.0),
            },
            _ => {
                return Err(Failure::config(
                    "time_grid needs either `intervals` (with optional `grading`) or `nodes`",
                ))
            }
        };
        grid.map_err(Failure::config)
    }

    /// Validates the configuration, then reads any referenced files. Nothing is
    /// solved or written.
    pub fn prepare(&self, base: &Path) -> Result<Prepared, Failure> {
        KernelParams::new(self.rho.0, self.gamma.0, 1.0).map_err(Failure::config)?;
        let quadrature = self.quadrature.resolve()?;
        let op = self.operator()?;
        let time_grid = self.time_grid()?;
        if self.output.formats.contains(&Format::Grid) && !op.supports_synthesis() {
            return Err(Failure::config("grid output needs an operator with eigenfunctions"));
        }
        let mut warnings = Vec::new();

        let data = match &self.data {
            DataConfig::Zero => CoefficientField::zeros(Arc::clone(&op)),
            DataConfig::Unit { mode } => CoefficientField::unit(Arc::clone(&op), *mode).map_err(Failure::config)?,
            DataConfig::Coefficients { values: v } => {
                CoefficientField::new(Arc::clone(&op), values(v)).map_err(Failure::config)?
            }
            DataConfig::Csv { path } => {
                let path = base.join(path);
                let file = File::open(&path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
                let projection = read_field_csv(file, Arc::clone(&op))
                    .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
                warnings.extend(projection.aliasing_warning);
                projection.field
            }
        };
        let source = match &self.source {
            SourceConfig::Zero => Source::Zero,
            SourceConfig::Constant { value } => Source::Constant(value.0),
            SourceConfig::ManufacturedT2 => Source::ManufacturedT2,
            SourceConfig::Sampled { path } => {
                let path = base.join(path);
                let file = File::open(&path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
                Source::read_sampled_csv(file, op.modes())
                    .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?
            }
        };
        let kind = match self.problem {
            ProblemName::Forward => ProblemKind::Forward,
            ProblemName::Nonlocal => ProblemKind::Nonlocal,
            ProblemName::Backward => ProblemKind::Backward,
        };
        let spec = ProblemSpec::new(kind, self.rho.0, self.gamma.0, data, source, time_grid)
            .map_err(|e| match self.source {
                SourceConfig::Sampled { .. } => Failure::data(e),
                _ => Failure::config(e),
            })?;
        Ok(Prepared {
            spec,
            quadrature,
            warnings,
        })
    }
}

/// Configuration of an oracle refinement study.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub target: StudyTarget,
    pub rho: Decimal,
    pub gamma: Decimal,
    pub lambda: Decimal,
    #[serde(default = "unit_horizon")]
    pub horizon: Decimal,
    #[serde(default = "default_steps")]
    pub steps: Vec<Decimal>,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
}

fn unit_horizon() -> Decimal {
    Decimal(1.0)
}

fn default_steps() -> Vec<Decimal> {
    DEFAULT_STEPS.iter().map(|s| Decimal(*s)).collect()
}

impl ConvergenceConfig {
    pub fn params(&self) -> Result<KernelParams, Failure> {
        KernelParams::new(self.rho.0, self.gamma.0, self.lambda.0).map_err(Failure::config)
    }

    pub fn steps(&self) -> Result<Vec<f64>, Failure> {
        if self.steps.is_empty() {
            return Err(Failure::config("the step list is empty"));
        }
        if self.steps.iter().any(|s| !(s.0 > 0.0)) {
            return Err(Failure::config("steps must be positive"));
        }
        Ok(values(&self.steps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> serde_json::Result<T> {
        serde_json::from_str(text)
    }

    #[test]
    fn decimals_accept_strings_and_numbers() {
        let v: Vec<Decimal> = parse(r#"["0.1", 0.1, " 2e-3 "]"#).unwrap();
        assert_eq!(v, vec![Decimal(0.1), Decimal(0.1), Decimal(2e-3)]);
        assert!(parse::<Decimal>(r#""one""#).is_err());
        assert!(parse::<Decimal>(r#""inf""#).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse::<OutputConfig>(r#"{"prefix": "a", "colour": "red"}"#).is_err());
        assert!(parse::<SourceConfig>(r#"{"kind": "constant", "value": 1, "x": 2}"#).is_err());
    }

    #[test]
    fn time_grid_needs_exactly_one_form() {
        let base = r#"{"problem": "forward", "rho": "0.5", "gamma": 1, "horizon": 1,
            "operator": {"kind": "explicit", "eigenvalues": [1]}, "data": {"kind": "zero"}, "time_grid": "#;
        let with = |grid: &str| parse::<RunConfig>(&format!("{base}{grid}}}")).unwrap();
        assert!(with(r#"{"intervals": 4}"#).prepare(Path::new(".")).is_ok());
        assert!(with(r#"{"nodes": [0, 0.5, 1]}"#).prepare(Path::new(".")).is_ok());
        assert!(with(r#"{"nodes": [0, 0.5]}"#).prepare(Path::new(".")).is_err());
        assert!(with(r#"{}"#).prepare(Path::new(".")).is_err());
        assert!(with(r#"{"intervals": 4, "nodes": [0, 1]}"#).prepare(Path::new(".")).is_err());
    }
}
