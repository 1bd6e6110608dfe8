use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{SolutionTrace, TraceDiagnostics};
use crate::spectral::synthesize;

/// Round-trip-exact formatting (17 significant digits).
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t,k,coefficient` rows, modes 1-based.
pub fn write_trace_csv<W: Write>(trace: &SolutionTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "k", "coefficient"])?;
    for (t, field) in trace.nodes.iter().zip(&trace.fields) {
        for (i, c) in field.coefficients().iter().enumerate() {
            w.write_record([num(*t), (i + 1).to_string(), num(*c)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t,x,u` rows on `points` equally spaced spatial nodes.
pub fn write_grid_csv<W: Write>(trace: &SolutionTrace, points: usize, out: W) -> Result<()> {
    let op = trace.initial().operator();
    let grid = op.uniform_grid(points)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "u"])?;
    for (t, field) in trace.nodes.iter().zip(&trace.fields) {
        let values = synthesize(field, &grid)?;
        for (x, u) in grid.iter().zip(values) {
            w.write_record([num(*t), num(*x), num(u)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Serialised form of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub nodes: Vec<f64>,
    /// `fields[n][k-1]` is `u_k(t_n)`.
    pub fields: Vec<Vec<f64>>,
    pub kernel_error: f64,
    pub nonlocal_gap: Option<f64>,
    pub terminal_gap: Option<f64>,
    pub stability_ratio: Option<f64>,
    pub warnings: Vec<String>,
    pub diagnostics: Option<TraceDiagnostics>,
}

impl From<&SolutionTrace> for TraceDocument {
    fn from(t: &SolutionTrace) -> Self {
        Self {
            nodes: t.nodes.clone(),
            fields: t.fields.iter().map(|f| f.coefficients().to_vec()).collect(),
            kernel_error: t.kernel_error,
            nonlocal_gap: t.nonlocal_gap,
            terminal_gap: t.terminal_gap,
            stability_ratio: t.stability_ratio,
            warnings: t.warnings.clone(),
            diagnostics: t.diagnostics.clone(),
        }
    }
}

pub fn write_trace_json<W: Write>(trace: &SolutionTrace, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &TraceDocument::from(trace))?;
    out.write_all(b"\n").map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureConfig;
    use crate::solvers::{solve_forward, ProblemKind, ProblemSpec, Source, TimeGrid};
    use crate::spectral::{CoefficientField, SpectralOperator};
    use std::sync::Arc;

    fn trace() -> SolutionTrace {
        let op = Arc::new(SpectralOperator::dirichlet_laplacian_1d(1.0, 2).unwrap());
        let spec = ProblemSpec::new(
            ProblemKind::Forward,
            0.5,
            1.0,
            CoefficientField::new(op, vec![1.0, 0.25]).unwrap(),
            Source::Zero,
            TimeGrid::uniform(0.5, 4).unwrap(),
        )
        .unwrap();
        solve_forward(&spec, &QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn csv_values_round_trip_exactly() {
        let t = trace();
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut rows = text.lines();
        assert_eq!(rows.next(), Some("t,k,coefficient"));
        let parsed: Vec<(f64, usize, f64)> = rows
            .map(|l| {
                let c: Vec<&str> = l.split(',').collect();
                (c[0].parse().unwrap(), c[1].parse().unwrap(), c[2].parse().unwrap())
            })
            .collect();
        assert_eq!(parsed.len(), 10);
        for (t_val, k, c) in parsed {
            let n = t.nodes.iter().position(|x| *x == t_val).unwrap();
            assert_eq!(c, t.fields[n].coefficients()[k - 1]);
        }
    }

    #[test]
    fn json_and_grid_exports() {
        let t = trace();
        let mut buf = Vec::new();
        write_trace_json(&t, &mut buf).unwrap();
        let doc: TraceDocument = serde_json::from_slice(&buf).unwrap();
        assert_eq!(doc, TraceDocument::from(&t));

        let mut grid = Vec::new();
        write_grid_csv(&t, 5, &mut grid).unwrap();
        let text = String::from_utf8(grid).unwrap();
        assert_eq!(text.lines().count(), 1 + 5 * 5);
        assert!(text.starts_with("t,x,u\n"));
    }
}
