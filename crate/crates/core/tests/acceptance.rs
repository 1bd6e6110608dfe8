//! Acceptance gate: one line per criterion, nonzero exit if any fails.
//!
//! Tolerances and runtime budgets below are fixed; the suites themselves live in
//! `frs_core::verify` so the CLI and this gate measure the same things.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use frs_core::quadrature::QuadratureConfig;
use frs_core::verify::{self, standard_cells, CheckResult, TraceRecord, STANDARD_LAMBDAS};
use frs_core::Result;

const INITIAL_TOL: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-6;
const FINITE_DIFFERENCE_TOL: f64 = 1e-5;
const LAPLACE_TOL: f64 = 1e-4;
const ORACLE_STEP: f64 = 1e-5;
const ORACLE_LAMBDAS: [f64; 2] = [1.0, 10.0];
const ORACLE_TOL: f64 = 1e-4;
const LIMIT_TOL: f64 = 1e-2;
const MANUFACTURED_TOL: f64 = 1e-4;
const NONLOCAL_GAP_TOL: f64 = 1e-6;
const SPLIT_TOL: f64 = 1e-10;
const RECOVERY_TOL: f64 = 1e-4;
const TERMINAL_TOL: f64 = 1e-6;
const COERCIVITY_CHANGE_TOL: f64 = 0.1;
const RESIDUAL_TOL: f64 = 1e-3;
const LOG_GRID_POINTS: usize = 50;

struct Criterion {
    number: usize,
    title: &'static str,
    budget: Option<Duration>,
    checks: Vec<CheckResult>,
    error: Option<String>,
    elapsed: Duration,
}

impl Criterion {
    fn passed(&self) -> bool {
        self.error.is_none()
            && !self.checks.is_empty()
            && self.checks.iter().all(|c| c.passed)
            && self.budget.map_or(true, |b| self.elapsed < b)
    }

    fn report(&self) {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let budget = self
            .budget
            .map(|b| format!(" (budget {} s)", b.as_secs()))
            .unwrap_or_default();
        println!(
            "criterion {:>2} {verdict}  {}  [{:.1} s{budget}]",
            self.number,
            self.title,
            self.elapsed.as_secs_f64()
        );
        if let Some(e) = &self.error {
            println!("      error: {e}");
        }
        for c in &self.checks {
            let cmp = if c.passed { "within" } else { "OUTSIDE" };
            println!(
                "      {}: worst {:.3e} {cmp} {:.1e} over {} cases{}",
                c.property,
                c.worst,
                c.tolerance,
                c.cases,
                if c.detail.is_empty() { String::new() } else { format!("; {}", c.detail) }
            );
        }
    }
}

fn measure(
    number: usize,
    title: &'static str,
    budget: Option<u64>,
    run: impl FnOnce() -> Result<Vec<CheckResult>>,
) -> Criterion {
    let start = Instant::now();
    let (checks, error) = match run() {
        Ok(checks) => (checks, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let criterion = Criterion {
        number,
        title,
        budget: budget.map(Duration::from_secs),
        checks,
        error,
        elapsed: start.elapsed(),
    };
    criterion.report();
    criterion
}

/// Runs a solver check, keeping its traces for the residual gate.
fn with_traces(
    traces: &mut Vec<TraceRecord>,
    run: Result<(Vec<CheckResult>, Vec<TraceRecord>)>,
) -> Result<Vec<CheckResult>> {
    let (checks, records) = run?;
    traces.extend(records);
    Ok(checks)
}

fn main() -> ExitCode {
    let q = QuadratureConfig::default();
    let cells = standard_cells();
    let lambdas = STANDARD_LAMBDAS;
    let mut traces = Vec::new();

    let criteria = vec![
        measure(1, "kernels start at one", Some(10), || {
            Ok(vec![verify::initial_values(&cells, &lambdas, INITIAL_TOL, &q)?])
        }),
        measure(2, "A decreasing, in (0,1), above its lower bound", Some(30), || {
            verify::a_properties(&cells, &lambdas, LOG_GRID_POINTS, &q)
        }),
        measure(3, "integral and derivative identities", None, || {
            verify::identities(&cells, &lambdas, IDENTITY_TOL, FINITE_DIFFERENCE_TOL, &q)
        }),
        measure(4, "Laplace transforms match closed forms", None, || {
            verify::laplace(&cells, &lambdas, LAPLACE_TOL, &q)
        }),
        measure(5, "L1 oracle agrees with A and converges", Some(300), || {
            verify::oracle_agreement(&cells, &ORACLE_LAMBDAS, ORACLE_STEP, ORACLE_TOL, &q)
        }),
        measure(6, "A tends to the exponential as the order tends to one", None, || {
            let checks = verify::rho_one_limit(LIMIT_TOL, &q)?;
            Ok(checks.into_iter().filter(|c| c.property.starts_with("A ")).collect())
        }),
        measure(7, "manufactured forward solution", None, || {
            let (check, records) = verify::manufactured(&cells, MANUFACTURED_TOL, &q)?;
            traces.extend(records);
            Ok(vec![check])
        }),
        measure(8, "non-local condition and W + V split", None, || {
            with_traces(&mut traces, verify::nonlocal(&cells, NONLOCAL_GAP_TOL, SPLIT_TOL, &q))
        }),
        measure(9, "backward recovery and stability", Some(120), || {
            with_traces(&mut traces, verify::backward(&cells, RECOVERY_TOL, TERMINAL_TOL, &q))
        }),
        measure(10, "coercivity quantities finite and grid-stable", None, || {
            with_traces(&mut traces, verify::coercivity(&cells, COERCIVITY_CHANGE_TOL, &q))
        }),
        measure(11, "interior residual of every solver trace", None, || {
            Ok(vec![verify::residual_gate(&traces, RESIDUAL_TOL)])
        }),
    ];

    let failed: Vec<usize> = criteria.iter().filter(|c| !c.passed()).map(|c| c.number).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
