//! Minimum transformation times and the fastest (diverging-control) trajectories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{Direction, Sample, SystemParams, Trajectory, PROBABILITY_FLOOR};

fn check_open_unit(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("{name} = {p} must lie strictly inside (0, 1)")));
    }
    Ok(())
}

/// Speed limit in units of `1 / (n gamma)`.
///
/// Heating is limited by the excited sector (rate `n gamma = 1`), cooling by the
/// ground sector (rate `m gamma = r`).
pub fn tau_min_scaled(p0: f64, p_tau: f64, r: f64) -> Result<f64> {
    check_open_unit("p0", p0)?;
    check_open_unit("p_tau", p_tau)?;
    Ok(match Direction::between(p0, p_tau) {
        Direction::Heating => ((1.0 - p0) / (1.0 - p_tau)).ln(),
        Direction::Cooling => (p0 / p_tau).ln() / r,
        Direction::Identity => 0.0,
    })
}

/// Speed limit in units of `1 / (n gamma)` for the given system.
pub fn tau_min(p0: f64, p_tau: f64, params: &SystemParams) -> Result<f64> {
    tau_min_scaled(p0, p_tau, params.r)
}

/// Speed limit in physical time units (`1 / gamma` with explicit `n`, `m`).
pub fn tau_min_physical(p0: f64, p_tau: f64, params: &SystemParams) -> Result<f64> {
    Ok(tau_min(p0, p_tau, params)? * params.time_unit())
}

/// Fastest possible evolution, reached only with `E = -inf` (heating) or
/// `E = +inf` (cooling). The sampled energies carry those infinities.
pub fn fastest_trajectory(p0: f64, direction: Direction, params: &SystemParams, t_grid: &[f64]) -> Trajectory {
    let r = params.r;
    let samples = t_grid
        .iter()
        .map(|&t| match direction {
            Direction::Heating => Sample {
                t,
                p: p0 * (-t).exp() - (-t).exp_m1(),
                e: f64::NEG_INFINITY,
            },
            Direction::Cooling => Sample {
                t,
                p: p0 * (-r * t).exp(),
                e: f64::INFINITY,
            },
            Direction::Identity => Sample {
                t,
                p: p0,
                e: crate::dynamics::equilibrium_energy(p0.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR), r),
            },
        })
        .collect();
    Trajectory::new(samples, Some(f64::INFINITY))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub tau_min: f64,
    /// `tau / tau_min`.
    pub margin: f64,
    pub direction: Direction,
}

/// `tau = tau_min` is infeasible: it needs unbounded control.
pub fn feasibility(p0: f64, p_tau: f64, tau: f64, params: &SystemParams) -> Result<Feasibility> {
    let tau_min = tau_min(p0, p_tau, params)?;
    Ok(Feasibility {
        feasible: tau > tau_min,
        tau_min,
        margin: if tau_min > 0.0 { tau / tau_min } else { f64::INFINITY },
        direction: Direction::between(p0, p_tau),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics;
    use crate::types::Protocol;

    #[test]
    fn erasure_speed_limit() {
        for r in [0.01, 1.0, 3.0] {
            let t = tau_min_scaled(0.5, 1e-5, r).unwrap();
            assert!((t - 5e4f64.ln() / r).abs() <= 1e-12 * t);
        }
        assert!((tau_min_scaled(0.5, 1e-5, 1.0).unwrap() - 10.8198).abs() < 1e-4);
    }

    #[test]
    fn heating_ignores_ground_degeneracy_and_cooling_ignores_excited() {
        let a = SystemParams::from_degeneracies(2, 3).unwrap();
        let b = SystemParams::from_degeneracies(2, 30).unwrap();
        assert_eq!(
            tau_min_physical(0.1, 0.6, &a).unwrap(),
            tau_min_physical(0.1, 0.6, &b).unwrap()
        );
        let c = SystemParams::from_degeneracies(5, 3).unwrap();
        let d = SystemParams::from_degeneracies(50, 3).unwrap();
        let tc = tau_min_physical(0.6, 0.1, &c).unwrap();
        let td = tau_min_physical(0.6, 0.1, &d).unwrap();
        assert!((tc - td).abs() <= 1e-15 * tc);
        assert!((tc - 6.0f64.ln() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identity_and_domain() {
        assert_eq!(tau_min_scaled(0.3, 0.3, 2.0).unwrap(), 0.0);
        assert!(tau_min_scaled(0.0, 0.3, 2.0).is_err());
        assert!(tau_min_scaled(0.3, 1.0, 2.0).is_err());
    }

    #[test]
    fn duality_of_limits() {
        let p = SystemParams::from_degeneracies(2, 7).unwrap();
        for (a, b) in [(0.2, 0.7), (0.9, 0.05)] {
            let direct = tau_min_physical(a, b, &p).unwrap();
            let dual = tau_min_physical(1.0 - a, 1.0 - b, &p.dual()).unwrap();
            assert!((direct - dual).abs() <= 1e-14 * direct);
        }
    }

    #[test]
    fn feasibility_margins() {
        let p = SystemParams::from_ratio(1.0).unwrap();
        let tm = tau_min(0.5, 1e-5, &p).unwrap();
        let f = feasibility(0.5, 1e-5, 2.0 * tm, &p).unwrap();
        assert!(f.feasible && (f.margin - 2.0).abs() < 1e-15);
        assert!(!feasibility(0.5, 1e-5, tm, &p).unwrap().feasible);
        assert!(!feasibility(0.5, 1e-5, 0.9 * tm, &p).unwrap().feasible);
    }

    #[test]
    fn fastest_trajectories_match_saturated_simulation() {
        let t_grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        for (r, p0, dir, e) in [(0.7, 0.2, Direction::Heating, -40.0), (0.7, 0.8, Direction::Cooling, 40.0)] {
            let params = SystemParams::from_ratio(r).unwrap();
            let fast = fastest_trajectory(p0, dir, &params, &t_grid);
            assert_eq!(fast.first().p, p0);
            // Twenty equal constant segments put a sample on every grid time.
            let proto = Protocol::piecewise_constant(&[e; 20], 5.0, e, e).unwrap();
            let sim = dynamics::simulate(&proto, p0, &params).unwrap();
            for s in &fast.samples {
                let hit = sim.samples.iter().find(|x| (x.t - s.t).abs() < 1e-12).unwrap();
                assert!((hit.p - s.p).abs() < 1e-6);
            }
        }
        let params = SystemParams::from_ratio(1.0).unwrap();
        let far = fastest_trajectory(0.3, Direction::Heating, &params, &[50.0]);
        assert!((far.last().p - 1.0).abs() < 1e-15);
    }
}
