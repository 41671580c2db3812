#![allow(dead_code)]

use thermoctl_core::dynamics::equilibrium_energy;
use thermoctl_core::speed_limit::tau_min_scaled;
use thermoctl_core::{validate_problem, Boundary, Problem, SystemParams};

/// Benchmark: r in {0.1, 0.5, 1, 2} x tau/tau_min in {2, 5, 20}, alternating
/// heating (0.1 -> 0.5) and cooling (0.5 -> 0.1), between equilibrium states.
pub fn benchmark_instances() -> Vec<(String, Problem)> {
    let mut out = Vec::new();
    for (i, &r) in [0.1, 0.5, 1.0, 2.0].iter().enumerate() {
        for (j, &ratio) in [2.0, 5.0, 20.0].iter().enumerate() {
            let (p0, p1, label) = if (i + j) % 2 == 0 { (0.1, 0.5, "heat") } else { (0.5, 0.1, "cool") };
            out.push((format!("r={r} {label} x{ratio}"), problem(r, p0, p1, ratio)));
        }
    }
    out
}

pub fn problem(r: f64, p0: f64, p1: f64, ratio: f64) -> Problem {
    let params = SystemParams::from_ratio(r).unwrap();
    let tau = ratio * tau_min_scaled(p0, p1, r).unwrap();
    let b = Boundary::fixed(p0, p1, tau).with_energies(equilibrium_energy(p0, r), equilibrium_energy(p1, r));
    validate_problem(&params, &b).unwrap()
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Centered five-point derivative of uniformly spaced samples (interior only).
pub fn five_point_derivative(ys: &[f64], h: f64) -> Vec<(usize, f64)> {
    (2..ys.len().saturating_sub(2))
        .map(|i| (i, (ys[i - 2] - 8.0 * ys[i - 1] + 8.0 * ys[i + 1] - ys[i + 2]) / (12.0 * h)))
        .collect()
}
