//! Equilibrium statistics, the coarse-grained master equation, forward
//! simulation of arbitrary protocols and work / free-energy bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Dopri5;
use crate::types::{Boundary, Piece, Protocol, Sample, SystemParams, Trajectory};

/// Fermi factor `1 / (1 + e^E)`, stable for any finite `E`.
pub fn fermi(e: f64) -> f64 {
    if e > 0.0 {
        let x = (-e).exp();
        x / (1.0 + x)
    } else {
        1.0 / (1.0 + e.exp())
    }
}

/// Thermal excitation probability `1 / (1 + r e^E)`.
pub fn p_eq(e: f64, r: f64) -> f64 {
    fermi(e + r.ln())
}

/// Energy gap for which `p` is the equilibrium population.
pub fn equilibrium_energy(p: f64, r: f64) -> f64 {
    ((1.0 - p) / (r * p)).ln()
}

/// `pdot = a - b p` at fixed energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCoefficients {
    pub a: f64,
    pub b: f64,
}

impl RateCoefficients {
    pub fn at(e: f64, r: f64) -> Self {
        let f = fermi(e);
        RateCoefficients {
            a: f,
            b: r + (1.0 - r) * f,
        }
    }

    /// Exact solution of the linear ODE after `dt`.
    pub fn propagate(&self, p: f64, dt: f64) -> f64 {
        let target = self.a / self.b;
        target + (p - target) * (-self.b * dt).exp()
    }
}

pub fn master_rhs(p: f64, e: f64, r: f64) -> f64 {
    let RateCoefficients { a, b } = RateCoefficients::at(e, r);
    a - b * p
}

/// Coarse-grained entropy with uniform intra-sector populations, up to the
/// additive constant `ln m`.
fn sector_entropy(p: f64, r: f64) -> f64 {
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    -xlogx(p) - xlogx(1.0 - p) - p * r.ln()
}

/// Nonequilibrium free energy `E p - S(p)` (ground energy set to zero).
pub fn free_energy(p: f64, e: f64, r: f64) -> f64 {
    e * p - sector_entropy(p, r)
}

pub fn delta_f_neq(boundary: &Boundary, params: &SystemParams) -> Result<f64> {
    let p_tau = boundary.p_tau.ok_or(Error::MissingBoundary("p_tau"))?;
    let e0 = boundary.e0.ok_or(Error::MissingBoundary("E0"))?;
    let e_tau = boundary.e_tau.ok_or(Error::MissingBoundary("E_tau"))?;
    Ok(free_energy(p_tau, e_tau, params.r) - free_energy(boundary.p0, e0, params.r))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step on smooth pieces, as a fraction of the protocol duration.
    pub max_step_fraction: f64,
    /// Extra output points inside each constant segment.
    pub constant_samples: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            rtol: 1e-10,
            atol: 1e-12,
            max_step_fraction: 1e-3,
            constant_samples: 8,
        }
    }
}

pub fn simulate(protocol: &Protocol, p0: f64, params: &SystemParams) -> Result<Trajectory> {
    simulate_with(protocol, p0, params, &SimConfig::default())
}

/// Integrate the master equation along `protocol`.
///
/// Constant pieces use the exact exponential propagator; all other pieces are
/// integrated with the adaptive Dormand–Prince pair, recording every accepted
/// step. Every piece boundary appears on the output grid.
pub fn simulate_with(
    protocol: &Protocol,
    p0: f64,
    params: &SystemParams,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::domain(format!("p0 = {p0} outside [0, 1]")));
    }
    let r = params.r;
    let tau = protocol.duration();
    let pieces = protocol.pieces();
    let solver = Dopri5::with_tolerances(cfg.rtol, cfg.atol).max_step(tau * cfg.max_step_fraction);

    let mut samples = vec![Sample {
        t: 0.0,
        p: p0,
        e: pieces[0].energy(0.0),
    }];
    let mut p = p0;
    let mut h = None;
    for piece in &pieces {
        let (t0, t1) = piece.span();
        match *piece {
            Piece::Constant { energy, .. } => {
                let coeffs = RateCoefficients::at(energy, r);
                let n = cfg.constant_samples + 1;
                for k in 1..=n {
                    let t = if k == n { t1 } else { t0 + (t1 - t0) * k as f64 / n as f64 };
                    samples.push(Sample {
                        t,
                        p: coeffs.propagate(p, t - t0),
                        e: energy,
                    });
                }
                p = samples.last().expect("pushed").p;
            }
            _ => {
                let rhs = |t: f64, y: f64| master_rhs(y, piece.energy(t), r);
                let (y, h_last) = solver.integrate(rhs, t0, p, t1, h, |t, y| {
                    samples.push(Sample {
                        t,
                        p: y,
                        e: piece.energy(t),
                    })
                })?;
                p = y;
                h = Some(h_last);
            }
        }
        // Right-continuous energy at internal knots.
        let last = samples.last_mut().expect("non-empty");
        if t1 < tau {
            last.e = protocol.energy_at(t1);
        }
    }
    Ok(Trajectory::new(samples, None))
}

fn find_sample(times: &[f64], t: f64, tol: f64) -> Option<usize> {
    let idx = times.partition_point(|&x| x < t - tol);
    (idx < times.len() && (times[idx] - t).abs() <= tol).then_some(idx)
}

/// Composite Simpson rule on a nonuniform grid.
fn simpson(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * (ts[1] - ts[0]) * (ys[0] + ys[1]),
        _ => {
            let mut sum = 0.0;
            let mut i = 0;
            while i + 2 < n {
                let h0 = ts[i + 1] - ts[i];
                let h1 = ts[i + 2] - ts[i + 1];
                sum += (h0 + h1) / 6.0
                    * ((2.0 - h1 / h0) * ys[i]
                        + (h0 + h1).powi(2) / (h0 * h1) * ys[i + 1]
                        + (2.0 - h0 / h1) * ys[i + 2]);
                i += 2;
            }
            if i + 1 < n {
                // Last lone interval: integrate the parabola through the final
                // three points over the final interval only.
                let (h0, h1) = (ts[n - 2] - ts[n - 3], ts[n - 1] - ts[n - 2]);
                sum += ys[n - 1] * (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1))
                    + ys[n - 2] * (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0)
                    - ys[n - 3] * h1.powi(3) / (6.0 * h0 * (h0 + h1));
            }
            sum
        }
    }
}

/// Expected work `sum_quenches dE p + integral Edot p dt`.
///
/// Each quench contributes `(after - before) p(t_quench)`; the smooth part is
/// integrated piece by piece on the trajectory grid.
pub fn work_of(protocol: &Protocol, trajectory: &Trajectory) -> Result<f64> {
    let times = trajectory.times();
    let tau = protocol.duration();
    let tol = 1e-9 * tau.max(1.0);
    let lookup = |t: f64| {
        find_sample(&times, t, tol)
            .ok_or_else(|| Error::GridMismatch(format!("no trajectory sample at t = {t}")))
    };
    if (times.last().copied().unwrap_or(f64::NAN) - tau).abs() > tol {
        return Err(Error::GridMismatch(format!(
            "trajectory ends at {:?}, protocol at {tau}",
            times.last()
        )));
    }
    let mut work = 0.0;
    for q in protocol.quenches() {
        let i = lookup(q.time)?;
        work += (q.after - q.before) * trajectory.samples[i].p;
    }
    for piece in protocol.pieces() {
        if piece.is_constant() {
            continue;
        }
        let (t0, t1) = piece.span();
        let (i0, i1) = (lookup(t0)?, lookup(t1)?);
        let ts = &times[i0..=i1];
        let ys: Vec<f64> = trajectory.samples[i0..=i1]
            .iter()
            .map(|s| piece.rate(s.t) * s.p)
            .collect();
        work += simpson(ts, &ys);
    }
    Ok(work)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Quench, Segment};

    #[test]
    fn fermi_values() {
        assert_eq!(fermi(0.0), 0.5);
        assert!((fermi(2.0f64.ln()) - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(fermi(800.0), 0.0);
        assert_eq!(fermi(-800.0), 1.0);
        assert!(fermi(700.0) > 0.0);
    }

    #[test]
    fn equilibrium_values() {
        assert_eq!(p_eq(0.0, 1.0), 0.5);
        for r in [0.01, 0.3, 7.0] {
            assert!((p_eq(-f64::ln(r), r) - 0.5).abs() < 1e-15);
        }
        let expected = 1.0 / (1.0 + 2.0 * std::f64::consts::E);
        assert!((p_eq(1.0, 2.0) - expected).abs() < 1e-15);
        assert!((p_eq(1.0, 2.0) - 0.15536).abs() < 1e-5);
    }

    #[test]
    fn master_rhs_values_and_relaxation_form() {
        assert!((master_rhs(0.0, 0.0, 1.0) - 0.5).abs() < 1e-16);
        assert_eq!(master_rhs(1.0, -800.0, 0.3), 0.0);
        for &(p, e, r) in &[(0.2, 0.7, 0.1), (0.9, -3.0, 4.0), (0.5, 10.0, 1.0)] {
            assert!(master_rhs(p_eq(e, r), e, r).abs() < 1e-15);
            let b = r + (1.0 - r) * fermi(e);
            assert!((master_rhs(p, e, r) - b * (p_eq(e, r) - p)).abs() < 1e-14);
        }
    }

    #[test]
    fn free_energy_examples() {
        let params = SystemParams::from_degeneracies(1, 2).unwrap();
        let b = Boundary::fixed(0.5, 0.5, 1.0).with_energies(0.0, 1.0);
        assert!((delta_f_neq(&b, &params).unwrap() - 0.5).abs() < 1e-15);

        let same = Boundary::fixed(0.3, 0.3, 1.0).with_energies(0.4, 0.4);
        assert_eq!(delta_f_neq(&same, &params).unwrap(), 0.0);

        let one = SystemParams::from_ratio(1.0).unwrap();
        let p_tau = 1e-9;
        let erase = Boundary::fixed(0.5, p_tau, 1.0).with_equilibrium_energies(1.0);
        assert!((delta_f_neq(&erase, &one).unwrap() - 2.0f64.ln()).abs() < 1e-7);

        let missing = Boundary::fixed(0.5, 0.4, 1.0);
        assert!(matches!(delta_f_neq(&missing, &one), Err(Error::MissingBoundary(_))));
    }

    #[test]
    fn constant_protocol_from_zero() {
        let params = SystemParams::from_ratio(1.0).unwrap();
        let traj = simulate(&Protocol::constant(0.0, 3.0).unwrap(), 0.0, &params).unwrap();
        traj.check().unwrap();
        for s in &traj.samples {
            assert!((s.p - 0.5 * (1.0 - (-s.t).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn stationary_start_stays_put() {
        let params = SystemParams::from_ratio(0.4).unwrap();
        let e = 1.3;
        let traj = simulate(&Protocol::constant(e, 5.0).unwrap(), p_eq(e, 0.4), &params).unwrap();
        for s in &traj.samples {
            assert!((s.p - p_eq(e, 0.4)).abs() < 1e-15);
        }
    }

    #[test]
    fn simpson_is_exact_for_quadratics_on_uneven_grids() {
        let ts = [0.0, 0.1, 0.35, 0.5, 0.9, 1.0];
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * t * t - t + 2.0).collect();
        let exact = 1.0 - 0.5 + 2.0;
        assert!((simpson(&ts, &ys) - exact).abs() < 1e-14);
        assert!((simpson(&ts[..5], &ys[..5]) - (0.729 - 0.405 + 1.8)).abs() < 1e-14);
    }

    #[test]
    fn work_of_quench_and_constant() {
        let params = SystemParams::from_ratio(1.0).unwrap();
        let constant = Protocol::constant(0.7, 2.0).unwrap();
        let traj = simulate(&constant, 0.3, &params).unwrap();
        assert_eq!(work_of(&constant, &traj).unwrap(), 0.0);

        let quenched = Protocol::new(
            vec![Segment::Constant {
                t_start: 0.0,
                t_end: 1.0,
                energy: 1.0,
            }],
            vec![Quench {
                time: 0.0,
                before: 0.0,
                after: 1.0,
            }],
        )
        .unwrap();
        let traj = simulate(&quenched, 0.5, &params).unwrap();
        assert!((work_of(&quenched, &traj).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn work_of_detects_grid_mismatch() {
        let params = SystemParams::from_ratio(1.0).unwrap();
        let a = Protocol::piecewise_constant(&[0.0, 1.0], 2.0, 0.0, 1.0).unwrap();
        let b = Protocol::piecewise_constant(&[0.0, 1.0], 3.0, 0.0, 1.0).unwrap();
        let traj = simulate(&a, 0.5, &params).unwrap();
        assert!(matches!(work_of(&b, &traj), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn linear_ramp_work_converges() {
        // Slow ramp: work approaches the free-energy difference from above.
        let r = 0.5;
        let params = SystemParams::from_ratio(r).unwrap();
        let ramp = |tau: f64| {
            Protocol::new(
                vec![Segment::Sampled {
                    times: vec![0.0, tau],
                    energies: vec![0.0, 2.0],
                    slopes: None,
                }],
                vec![],
            )
            .unwrap()
        };
        let p0 = p_eq(0.0, r);
        let mut prev = f64::INFINITY;
        for tau in [1.0, 10.0, 100.0] {
            let proto = ramp(tau);
            let traj = simulate(&proto, p0, &params).unwrap();
            let w = work_of(&proto, &traj).unwrap();
            let df = free_energy(traj.last().p, 2.0, r) - free_energy(p0, 0.0, r);
            assert!(w >= df - 1e-8);
            assert!(w < prev);
            prev = w;
        }
    }
}
