//! Bit erasure: drive `p = 1/2` to `p_tau << 1` between equilibrium states,
//! with durations normalized by the speed limit so that different `r` compare.

use rayon::prelude::*;
use serde::Serialize;

use crate::control::{self, SolverConfig};
use crate::dynamics;
use crate::error::{Error, Result};
use crate::speed_limit::tau_min_scaled;
use crate::types::{validate_problem, Boundary, Problem, Protocol, Segment, SystemParams, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErasureSpec {
    pub p_tau: f64,
    /// `tau / tau_min` used by single-problem helpers.
    pub tau_ratio: f64,
    pub r_grid: Vec<f64>,
    /// `tau / tau_min` values swept by [`erasure_sweep`].
    pub duration_grid: Vec<f64>,
}

/// `n` log-spaced values over `[lo, hi]`, endpoints exact.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| match i {
                0 => lo,
                i if i == n - 1 => hi,
                i => (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp(),
            })
            .collect(),
    }
}

impl Default for ErasureSpec {
    fn default() -> Self {
        ErasureSpec {
            p_tau: 1e-5,
            tau_ratio: 5.0,
            r_grid: log_grid(1e-2, 1e2, 41),
            duration_grid: vec![2.0, 5.0, 10.0, 20.0],
        }
    }
}

impl ErasureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_tau > 0.0 && self.p_tau < 0.5) {
            return Err(Error::domain(format!("p_tau = {} must lie in (0, 0.5)", self.p_tau)));
        }
        if self.tau_ratio.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater)
            || self.duration_grid.iter().any(|&x| x.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::domain("tau_ratio values must exceed 1"));
        }
        if self.r_grid.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::domain("r values must be positive and finite"));
        }
        Ok(())
    }
}

/// Erasure at `r` with duration `tau_ratio * tau_min(r)`.
pub fn erasure_problem_at(r: f64, p_tau: f64, tau_ratio: f64) -> Result<Problem> {
    let params = SystemParams::from_ratio(r)?;
    let tau = tau_ratio * tau_min_scaled(0.5, p_tau, r)?;
    let boundary = Boundary::fixed(0.5, p_tau, tau).with_equilibrium_energies(r);
    validate_problem(&params, &boundary)
}

pub fn erasure_problem(r: f64, spec: &ErasureSpec) -> Result<Problem> {
    spec.validate()?;
    erasure_problem_at(r, spec.p_tau, spec.tau_ratio)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub tau_ratio: f64,
    pub w_min: f64,
    pub kappa_tau: f64,
    pub delta_f_neq: f64,
    /// `"ok"` or the error message of the failed solve.
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn sweep_row(r: f64, tau_ratio: f64, p_tau: f64) -> SweepRow {
    let cfg = SolverConfig {
        samples: 2,
        ..Default::default()
    };
    let run = || -> Result<(f64, f64, f64)> {
        let problem = erasure_problem_at(r, p_tau, tau_ratio)?;
        let sol = control::solve_with(&problem, &cfg)?;
        let df = dynamics::delta_f_neq(&problem.boundary, &problem.params)?;
        Ok((sol.w_min, sol.kappa_tau, df))
    };
    match run() {
        Ok((w_min, kappa_tau, delta_f_neq)) => SweepRow {
            r,
            tau_ratio,
            w_min,
            kappa_tau,
            delta_f_neq,
            status: "ok".into(),
        },
        Err(e) => SweepRow {
            r,
            tau_ratio,
            w_min: f64::NAN,
            kappa_tau: f64::NAN,
            delta_f_neq: f64::NAN,
            status: e.to_string(),
        },
    }
}

/// One solve per `(tau_ratio, r)` pair, run in parallel on the current rayon
/// pool. Rows are sorted by `(tau_ratio, r)`; failures are reported per row.
pub fn erasure_sweep(spec: &ErasureSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let jobs: Vec<(f64, f64)> = spec
        .duration_grid
        .iter()
        .flat_map(|&d| spec.r_grid.iter().map(move |&r| (d, r)))
        .collect();
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(d, r)| sweep_row(r, d, spec.p_tau))
        .collect();
    rows.sort_by(|a, b| a.tau_ratio.total_cmp(&b.tau_ratio).then(a.r.total_cmp(&b.r)));
    Ok(rows)
}

/// Optimal protocol and trajectory at `r` and `spec.tau_ratio`.
pub fn erasure_protocol_export(r: f64, spec: &ErasureSpec, samples: usize) -> Result<(Protocol, Trajectory)> {
    let problem = erasure_problem(r, spec)?;
    let cfg = SolverConfig {
        samples,
        ..Default::default()
    };
    let sol = control::solve_with(&problem, &cfg)?;
    Ok((sol.protocol, sol.trajectory))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ShapeReport {
    /// Exactly two energy discontinuities, at `t = 0` and `t = tau`.
    pub two_quenches: bool,
    /// Bulk energy increases monotonically.
    pub monotone_bulk: bool,
    /// Bulk energy at `tau` lies beyond the final energy.
    pub overshoot: bool,
    /// Population decreases monotonically.
    pub monotone_population: bool,
}

impl ShapeReport {
    pub fn all(&self) -> bool {
        self.two_quenches && self.monotone_bulk && self.overshoot && self.monotone_population
    }
}

pub fn shape_check(protocol: &Protocol, trajectory: &Trajectory) -> ShapeReport {
    let tau = protocol.duration();
    let quenches = protocol.quenches();
    let two_quenches = quenches.len() == 2 && quenches[0].time == 0.0 && quenches[1].time == tau;
    let bulk: Vec<f64> = protocol
        .segments()
        .iter()
        .flat_map(|s| match s {
            Segment::Sampled { energies, .. } => energies.clone(),
            Segment::Constant { energy, .. } => vec![*energy],
        })
        .collect();
    let monotone_bulk = bulk.windows(2).all(|w| w[1] > w[0]);
    let overshoot = quenches
        .last()
        .map(|q| q.time == tau && q.before > q.after)
        .unwrap_or(false);
    let monotone_population = trajectory.samples.windows(2).all(|w| w[1].p < w[0].p);
    ShapeReport {
        two_quenches,
        monotone_bulk,
        overshoot,
        monotone_population,
    }
}

/// Sweep ordering: every successful row above `ln 2`, and at each `r`
/// the work strictly decreasing with `tau_ratio`.
pub fn sweep_ordering_holds(rows: &[SweepRow]) -> bool {
    let ln2 = std::f64::consts::LN_2;
    if rows.iter().any(|row| !row.is_ok() || row.w_min <= ln2) {
        return false;
    }
    let mut by_r: Vec<&SweepRow> = rows.iter().collect();
    by_r.sort_by(|a, b| a.r.total_cmp(&b.r).then(a.tau_ratio.total_cmp(&b.tau_ratio)));
    by_r.windows(2)
        .filter(|w| w[0].r == w[1].r)
        .all(|w| w[1].w_min < w[0].w_min)
}
