//! Kernel values against a 30-digit mpmath evaluation of the same integrals
//! (`tools/kernel_reference.py`). Each line: kind, rho, gamma, lambda, t, value.

use frs_core::kernel::{eval_a, eval_b, eval_db_dt, KernelParams};
use frs_core::quadrature::QuadratureConfig;

const TABLE: &str = include_str!("data/kernel_reference.txt");

#[test]
fn kernels_agree_with_extended_precision_within_reported_error() {
    let q = QuadratureConfig {
        min_derivative_time: 0.0,
        ..QuadratureConfig::default()
    };
    let mut failures = Vec::new();
    for line in TABLE.lines() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| cols[i].parse::<f64>().unwrap();
        let (rho, gamma, lambda, t, expected) = (num(1), num(2), num(3), num(4), num(5));
        let p = KernelParams::new(rho, gamma, lambda).unwrap();
        let est = match cols[0] {
            "A" => eval_a(&p, t, &q),
            "B" => eval_b(&p, t, &q),
            "dB" => eval_db_dt(&p, t, &q),
            other => panic!("unknown kind {other}"),
        }
        .unwrap_or_else(|e| panic!("{line}: {e}"));
        let diff = (est.value - expected).abs();
        let contract = q.abs_tol.max(q.rel_tol * expected.abs());
        if diff > 2.0 * est.error + 1e-15 || diff > contract {
            failures.push(format!("{line}: got {:e} (error bound {:e})", est.value, est.error));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
