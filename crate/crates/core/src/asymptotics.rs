//! Leading-order solutions for very degenerate systems (`r << 1`), and for
//! `r >> 1` through the duality `(p, E, r, t) -> (1 - p, -E, 1 / r, r t)`.

use serde::Serialize;

use crate::dynamics::{fermi, p_eq};
use crate::error::{Error, Result};
use crate::speed_limit::tau_min_scaled;
use crate::types::{Direction, Problem, Sample, Trajectory};

const INV_E: f64 = 0.367_879_441_171_442_33;

/// Principal branch of the Lambert W function.
pub fn lambert_w0(z: f64) -> Result<f64> {
    if z.is_nan() || z < -INV_E {
        return Err(Error::domain(format!("lambert_w0 is undefined for z = {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z == -INV_E {
        return Ok(-1.0);
    }
    if z.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut w = if z < -0.25 {
        // Branch-point series in p = sqrt(2 (e z + 1)).
        let p = (2.0 * (std::f64::consts::E * z + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if z > 3.0 {
        let l1 = z.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    } else {
        z.ln_1p()
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        if !next.is_finite() {
            break;
        }
        let done = (next - w).abs() <= 1e-15 * next.abs().max(1e-300);
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

/// `W(a e^b)` for `a > 0`, staying in log space when `a e^b` would overflow.
fn lambert_w0_scaled(a: f64, b: f64) -> Result<f64> {
    let log_z = a.ln() + b;
    if log_z < 700.0 {
        return lambert_w0(a * b.exp());
    }
    // Solve w + ln w = log_z.
    let mut w = log_z - log_z.ln();
    for _ in 0..64 {
        let step = (w + w.ln() - log_z) / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 1e-15 * w {
            break;
        }
    }
    Ok(w)
}

/// Leading-order `kappa_tau = |p_tau - p0| / (tau - tau_min)`.
pub fn kappa_asymptotic(p0: f64, p_tau: f64, tau: f64, r: f64) -> Result<f64> {
    let tau_min = tau_min_scaled(p0, p_tau, r)?;
    if tau <= tau_min {
        return Err(Error::InfeasibleDuration { tau, tau_min });
    }
    Ok((p_tau - p0).abs() / (tau - tau_min))
}

/// Closed-form leading-order trajectory for `r << 1`.
pub fn trajectory_asymptotic(p0: f64, kappa: f64, r: f64, direction: Direction, t_grid: &[f64]) -> Result<Trajectory> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
    }
    let samples = t_grid
        .iter()
        .map(|&t| {
            let p = match direction {
                Direction::Heating => {
                    let x = (1.0 - p0) / kappa;
                    1.0 - kappa * lambert_w0_scaled(x, x - t)?
                }
                Direction::Cooling => {
                    let x = r * p0 / kappa;
                    kappa / r * lambert_w0_scaled(x, x - r * t)?
                }
                Direction::Identity => p0,
            };
            let e = match direction {
                Direction::Identity => crate::dynamics::equilibrium_energy(p0, r),
                _ => energy_curve_asymptotic(p, kappa, r, direction),
            };
            Ok(Sample { t, p, e })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory::new(samples, Some(kappa)))
}

/// Leading-order optimal energy as a function of `p` for `r << 1`.
pub fn energy_curve_asymptotic(p: f64, kappa: f64, r: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Heating => ((1.0 - p) / kappa).ln(),
        Direction::Cooling => (kappa * (1.0 - p) / (r * r * p * p)).ln(),
        Direction::Identity => crate::dynamics::equilibrium_energy(p, r),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    SmallRatio,
    LargeRatio,
}

impl Regime {
    pub fn of(r: f64) -> Regime {
        if r <= 1.0 {
            Regime::SmallRatio
        } else {
            Regime::LargeRatio
        }
    }
}

/// Relaxation rate with only the dominant sector's transitions retained.
pub fn limiting_rhs(p: f64, e: f64, r: f64, regime: Regime) -> f64 {
    let f = fermi(e);
    let rate = match regime {
        Regime::SmallRatio => f,
        Regime::LargeRatio => r * (1.0 - f),
    };
    rate * (p_eq(e, r) - p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticSolution {
    pub kappa_tau: f64,
    pub direction: Direction,
    pub trajectory: Trajectory,
    /// `(p, E)` pairs along the trajectory.
    pub energy_curve: Vec<(f64, f64)>,
    /// Size of the neglected terms: `r` or `1 / r`.
    pub error_order: f64,
}

/// Leading-order solution of a fixed-final-state problem on a uniform grid.
/// `r > 1` is solved as the dual small-ratio problem and mapped back.
pub fn asymptotic_solution(problem: &Problem, samples: usize) -> Result<AsymptoticSolution> {
    let b = &problem.boundary;
    let p_tau = b.p_tau.ok_or(Error::MissingBoundary("p_tau"))?;
    let n = samples.max(2) - 1;
    let r = problem.r();
    let dual = r > 1.0;
    let (p0, p1, rr, tau, dir) = if dual {
        (1.0 - b.p0, 1.0 - p_tau, 1.0 / r, r * b.tau, problem.direction.flipped())
    } else {
        (b.p0, p_tau, r, b.tau, problem.direction)
    };
    let grid: Vec<f64> = (0..=n).map(|i| if i == n { tau } else { tau * i as f64 / n as f64 }).collect();
    let kappa = if dir == Direction::Identity { 0.0 } else { kappa_asymptotic(p0, p1, tau, rr)? };
    let trajectory = if dir == Direction::Identity {
        Trajectory::new(
            grid.iter()
                .map(|&t| Sample { t, p: p0, e: crate::dynamics::equilibrium_energy(p0, rr) })
                .collect(),
            Some(0.0),
        )
    } else {
        trajectory_asymptotic(p0, kappa, rr, dir, &grid)?
    };
    let (trajectory, kappa, direction) = if dual {
        let samples = trajectory
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| Sample {
                t: if i == n { b.tau } else { s.t / r },
                p: 1.0 - s.p,
                e: -s.e,
            })
            .collect();
        (Trajectory::new(samples, Some(kappa * r)), kappa * r, dir.flipped())
    } else {
        (trajectory, kappa, dir)
    };
    let energy_curve = trajectory.samples.iter().map(|s| (s.p, s.e)).collect();
    Ok(AsymptoticSolution {
        kappa_tau: kappa,
        direction,
        trajectory,
        energy_curve,
        error_order: rr,
    })
}
