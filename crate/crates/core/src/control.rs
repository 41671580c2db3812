//! Minimal-work driving: the conserved quantity `K` of the work Lagrangian,
//! the separable `t(p)` quadrature, the selection of `kappa_tau` from the
//! duration, and the resulting optimal energy curve, trajectory and work.

use serde::Serialize;

use crate::dynamics;
use crate::error::{Error, Result};
use crate::numeric::{self, Dopri5, QuadConfig, RootConfig};
use crate::speed_limit;
use crate::types::{Direction, OptimalSolution, Problem, Protocol, Quench, Sample, Segment, Trajectory, Units, PROBABILITY_FLOOR};

/// Integration constant of an optimal trajectory together with the direction
/// of motion, which selects the root of the quadratic for `pdot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservedK {
    pub k: f64,
    pub direction: Direction,
}

impl ConservedK {
    pub fn new(k: f64, direction: Direction) -> Result<Self> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::domain(format!("K must be finite and non-negative, got {k}")));
        }
        Ok(ConservedK { k, direction })
    }

    pub fn is_static(&self) -> bool {
        self.k == 0.0 || self.direction == Direction::Identity
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Points on the uniform output time grid.
    pub samples: usize,
    pub quad: QuadConfig,
    pub root: RootConfig,
    pub ode_rtol: f64,
    pub ode_atol: f64,
    /// Points in the coarse `ln K` scan of the free-final-state objective.
    pub free_final_scan: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            samples: 2001,
            quad: QuadConfig::default(),
            root: RootConfig::default(),
            ode_rtol: 1e-12,
            ode_atol: 1e-14,
            free_final_scan: 64,
        }
    }
}

fn weight(p: f64, r: f64) -> f64 {
    1.0 - (1.0 - r) * p
}

pub fn discriminant(p: f64, k: f64, r: f64) -> f64 {
    let c = weight(p, r);
    k * k * c * c + 4.0 * k * r * p * (1.0 - p) * c
}

fn check_branch(p: f64, pdot: f64, r: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) || !(pdot > -r * p && pdot < 1.0 - p) {
        return Err(Error::BranchViolation { p, pdot });
    }
    Ok(())
}

/// Energy gap that produces the rate `pdot` at population `p`.
pub fn energy_from_state(p: f64, pdot: f64, r: f64) -> Result<f64> {
    check_branch(p, pdot, r)?;
    Ok(((1.0 - p - pdot) / (pdot + r * p)).ln())
}

/// `K` evaluated from a state and its rate.
pub fn conserved_quantity(p: f64, pdot: f64, r: f64) -> Result<f64> {
    check_branch(p, pdot, r)?;
    Ok(pdot * pdot * weight(p, r) / ((1.0 - p - pdot) * (pdot + r * p)))
}

/// Rate of change of `p` on the optimal trajectory with constant `K`.
///
/// Both roots of the quadratic `(c + K) x^2 - K (1 - (1 + r) p) x - K r p (1 - p) = 0`
/// are real with opposite signs and always lie in the physical window
/// `-r p < x < 1 - p`; the sign of motion picks one.
pub fn pdot_of(p: f64, k: &ConservedK, r: f64) -> f64 {
    if k.is_static() {
        return 0.0;
    }
    let kk = k.k;
    let c = weight(p, r);
    let a = c + kk;
    let b = -kk * (1.0 - (1.0 + r) * p);
    let cc = -kk * r * p * (1.0 - p);
    let sq = discriminant(p, kk, r).sqrt();
    let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
    if q == 0.0 {
        return 0.0;
    }
    let (x1, x2) = (q / a, cc / q);
    let (hi, lo) = if x1 >= x2 { (x1, x2) } else { (x2, x1) };
    match k.direction {
        Direction::Heating => hi,
        Direction::Cooling => lo,
        Direction::Identity => 0.0,
    }
}

/// `(1 - p - pdot, pdot + r p)` evaluated without cancellation, using
/// `(1 - p - pdot)(pdot + r p) = pdot^2 c / K`.
fn rate_factors(p: f64, pdot: f64, k: f64, r: f64, direction: Direction) -> (f64, f64) {
    let c = weight(p, r);
    match direction {
        Direction::Heating => {
            let gain = pdot + r * p;
            (pdot * pdot * c / (k * gain), gain)
        }
        _ => {
            let loss = 1.0 - p - pdot;
            (loss, pdot * pdot * c / (k * loss))
        }
    }
}

/// Optimal energy gap as a function of the population, in closed form.
///
/// The near-cancelling numerator (heating) or denominator (cooling) is
/// evaluated in rationalized form.
pub fn optimal_energy(p: f64, k: &ConservedK, r: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::BranchViolation { p, pdot: f64::NAN });
    }
    if k.is_static() {
        return Ok(dynamics::equilibrium_energy(p, r));
    }
    let kk = k.k;
    let c = weight(p, r);
    let sq = discriminant(p, kk, r).sqrt();
    let up = c * (kk + 2.0 * (1.0 - p));
    let down = c * (kk + 2.0 * r * p);
    let ratio = match k.direction {
        Direction::Heating => {
            let num = 4.0 * c * (1.0 - p).powi(2) * (kk + c) / (up + sq);
            num / (down + sq)
        }
        _ => {
            let den = 4.0 * c * (r * p).powi(2) * (kk + c) / (down + sq);
            (up + sq) / den
        }
    };
    Ok(ratio.ln())
}

/// `dE/dp` along the optimal energy curve.
pub fn optimal_energy_slope(p: f64, k: &ConservedK, r: f64) -> f64 {
    if k.is_static() {
        return -1.0 / (1.0 - p) - 1.0 / p;
    }
    let kk = k.k;
    let pdot = pdot_of(p, k, r);
    // Implicit derivative of the quadratic; its pdot-derivative is +-sqrt(Delta).
    let dq_dp = -(1.0 - r) * pdot * pdot + kk * (1.0 + r) * pdot - kk * r * (1.0 - 2.0 * p);
    let dq_dx = k.direction.sign() * discriminant(p, kk, r).sqrt();
    let dpdot = -dq_dp / dq_dx;
    let (loss, gain) = rate_factors(p, pdot, kk, r, k.direction);
    (-1.0 - dpdot) / loss - (dpdot + r) / gain
}

/// Population on the optimal trajectory as a closed-form function of the
/// instantaneous energy gap.
pub fn closed_form_probability(e: f64, k: &ConservedK, r: f64) -> f64 {
    let peq = dynamics::p_eq(e, r);
    if k.is_static() {
        return peq;
    }
    let kk = k.k;
    let em = (-e).exp();
    let a = 0.5 * kk * (1.0 - r) / (r + em);
    // (1 + e^E) / (r + e^-E)
    let ratio = (1.0 + em) / (r * em + em * em);
    let root = (a * a + r * kk * ratio).sqrt();
    match k.direction {
        Direction::Heating => peq * (1.0 - a - root),
        _ => peq * (1.0 - a + root),
    }
}

/// `integral_{p0}^{p1} g(p) dp`, using `u = ln p` below one half and
/// `v = ln(1 - p)` above, so logarithmic behaviour near either end is smooth.
fn integrate_over_p<G: Fn(f64) -> f64>(g: G, p0: f64, p1: f64, cfg: &QuadConfig) -> Result<f64> {
    if p0 == p1 {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if p0 < p1 { (p0, p1, 1.0) } else { (p1, p0, -1.0) };
    let mut total = 0.0;
    if lo < 0.5 {
        let top = hi.min(0.5);
        total += numeric::integrate(
            |u: f64| {
                let p = u.exp();
                g(p) * p
            },
            lo.ln(),
            top.ln(),
            cfg,
        )?
        .value;
    }
    if hi > 0.5 {
        let bottom = lo.max(0.5);
        // p = 1 - e^v, dp = -e^v dv
        total += numeric::integrate(
            |v: f64| {
                let q = v.exp();
                g(1.0 - q) * q
            },
            (-hi).ln_1p(),
            (-bottom).ln_1p(),
            cfg,
        )?
        .value;
    }
    Ok(sign * total)
}

/// `F_K(p_target)`: time for the optimal trajectory with constant `K` to go
/// from `p0` to `p_target`.
pub fn time_of_p(p_target: f64, p0: f64, k: &ConservedK, r: f64) -> Result<f64> {
    time_of_p_with(p_target, p0, k, r, &QuadConfig::default())
}

pub fn time_of_p_with(p_target: f64, p0: f64, k: &ConservedK, r: f64, cfg: &QuadConfig) -> Result<f64> {
    for p in [p0, p_target] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::BranchViolation { p, pdot: f64::NAN });
        }
    }
    if p_target == p0 {
        return Ok(0.0);
    }
    if Direction::between(p0, p_target) != k.direction {
        return Err(Error::domain(format!(
            "p_target = {p_target} is not reachable from p0 = {p0} moving in direction {:?}",
            k.direction
        )));
    }
    if k.k == 0.0 {
        return Ok(f64::INFINITY);
    }
    integrate_over_p(|p| 1.0 / pdot_of(p, k, r), p0, p_target, cfg)
}

/// Select `kappa_tau` so that the optimal trajectory reaches `p_tau` exactly at `tau`.
///
/// `F_K(p_tau)` decreases monotonically from infinity (K -> 0) to `tau_min`
/// (K -> infinity), so the root is bracketed in `ln K` and refined with Brent.
pub fn solve_kappa(problem: &Problem) -> Result<ConservedK> {
    solve_kappa_with(problem, &SolverConfig::default())
}

pub fn solve_kappa_with(problem: &Problem, cfg: &SolverConfig) -> Result<ConservedK> {
    let p_tau = problem
        .boundary
        .p_tau
        .ok_or(Error::MissingBoundary("p_tau"))?;
    let (p0, tau, r, direction) = (problem.boundary.p0, problem.boundary.tau, problem.r(), problem.direction);
    if direction == Direction::Identity {
        return ConservedK::new(0.0, Direction::Identity);
    }
    if tau <= problem.tau_min {
        return Err(Error::InfeasibleDuration {
            tau,
            tau_min: problem.tau_min,
        });
    }
    let excess = |ln_k: f64| -> Result<f64> {
        let k = ConservedK::new(ln_k.exp(), direction)?;
        Ok(time_of_p_with(p_tau, p0, &k, r, &cfg.quad)? - tau)
    };
    let (min_ln, max_ln) = (1e-300f64.ln(), 1e300f64.ln());
    let mut lo = 1e-12f64.ln();
    while excess(lo)? < 0.0 {
        lo -= 10.0;
        if lo < min_ln {
            return Err(Error::NoConvergence { iterations: 0 });
        }
    }
    let mut hi = 1e12f64.ln();
    while excess(hi)? > 0.0 {
        hi += 10.0;
        if hi > max_ln {
            return Err(Error::InfeasibleDuration {
                tau,
                tau_min: problem.tau_min,
            });
        }
    }
    let ln_k = numeric::brent(excess, lo, hi, &cfg.root)?;
    ConservedK::new(ln_k.exp(), direction)
}

/// Sample the optimal trajectory on a uniform time grid by integrating the
/// first-order equation `pdot = pdot(p; K)`.
pub fn optimal_trajectory(problem: &Problem, k: &ConservedK, samples: usize) -> Result<Trajectory> {
    let cfg = SolverConfig {
        samples,
        ..Default::default()
    };
    optimal_trajectory_with(problem, k, &cfg)
}

fn uniform_grid(tau: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2) - 1;
    (0..=n)
        .map(|i| if i == n { tau } else { tau * i as f64 / n as f64 })
        .collect()
}

/// Population after running the optimal dynamics for each time in `times`.
///
/// Heating integrates `ln(1 - p)`, cooling `ln p`, which keeps relative
/// precision as `p` approaches the sector being filled.
fn propagate_optimal(p0: f64, k: &ConservedK, r: f64, times: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>> {
    if k.is_static() {
        return Ok(vec![p0; times.len()]);
    }
    let solver = Dopri5::with_tolerances(cfg.ode_rtol, cfg.ode_atol);
    match k.direction {
        Direction::Heating => {
            let rhs = |_: f64, y: f64| {
                let p = -y.exp_m1();
                if p == 1.0 {
                    // Limit of the fastest heating rate as 1 - p underflows.
                    return -1.0;
                }
                -pdot_of(p, k, r) / (1.0 - p)
            };
            let ys = solver.solve_at(rhs, (-p0).ln_1p(), times)?;
            Ok(ys.into_iter().map(|y| -y.exp_m1()).collect())
        }
        _ => {
            let rhs = |_: f64, y: f64| {
                let p = y.exp();
                if p == 0.0 {
                    return -r;
                }
                pdot_of(p, k, r) / p
            };
            let ys = solver.solve_at(rhs, p0.ln(), times)?;
            Ok(ys.into_iter().map(f64::exp).collect())
        }
    }
}

pub fn optimal_trajectory_with(problem: &Problem, k: &ConservedK, cfg: &SolverConfig) -> Result<Trajectory> {
    let r = problem.r();
    let times = uniform_grid(problem.boundary.tau, cfg.samples);
    let ps = propagate_optimal(problem.boundary.p0, k, r, &times, cfg)?;
    let samples = times
        .iter()
        .zip(ps)
        .map(|(&t, p)| Ok(Sample { t, p, e: optimal_energy(p, k, r)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory::new(samples, Some(k.k)))
}

/// Protocol that realizes `trajectory`: cubic Hermite bulk energies with
/// exact slopes, plus quenches from `e0` and to `e_tau` when those differ.
pub fn emit_protocol(trajectory: &Trajectory, k: &ConservedK, r: f64, e0: Option<f64>, e_tau: Option<f64>) -> Result<Protocol> {
    let times = trajectory.times();
    let energies: Vec<f64> = trajectory.samples.iter().map(|s| s.e).collect();
    let slopes: Vec<f64> = trajectory
        .samples
        .iter()
        .map(|s| optimal_energy_slope(s.p, k, r) * pdot_of(s.p, k, r))
        .collect();
    let (start, end) = (energies[0], *energies.last().expect("non-empty"));
    let tau = *times.last().expect("non-empty");
    let mut quenches = Vec::new();
    if let Some(e) = e0.filter(|e| *e != start) {
        quenches.push(Quench {
            time: 0.0,
            before: e,
            after: start,
        });
    }
    if let Some(e) = e_tau.filter(|e| *e != end) {
        quenches.push(Quench {
            time: tau,
            before: end,
            after: e,
        });
    }
    Protocol::new(
        vec![Segment::Sampled {
            times,
            energies,
            slopes: Some(slopes),
        }],
        quenches,
    )
}

/// `-integral_{p0}^{p1} E_K(p) dp`, the heat term of the work.
pub fn heat_term(p0: f64, p1: f64, k: &ConservedK, r: f64, cfg: &QuadConfig) -> Result<f64> {
    if k.is_static() && p0 == p1 {
        return Ok(0.0);
    }
    let failure = std::cell::RefCell::new(None);
    let integral = integrate_over_p(
        |p| match optimal_energy(p, k, r) {
            Ok(e) => e,
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                f64::NAN
            }
        },
        p0,
        p1,
        cfg,
    );
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    Ok(-integral?)
}

fn assemble(
    problem: &Problem,
    k: ConservedK,
    trajectory: Trajectory,
    protocol: Protocol,
    p_final: f64,
    heat: f64,
) -> Result<OptimalSolution> {
    let b = &problem.boundary;
    let delta_e = match (b.e0, b.e_tau) {
        (Some(e0), Some(e1)) => Some(e1 * p_final - e0 * b.p0),
        _ => None,
    };
    let tau_min = speed_limit::tau_min_scaled(b.p0, p_final, problem.r())?;
    Ok(OptimalSolution {
        kappa_tau: k.k,
        direction: k.direction,
        quench_in: protocol.quench_at(0.0).copied(),
        quench_out: protocol.quench_at(b.tau).copied(),
        trajectory,
        protocol,
        w_min: delta_e.unwrap_or(0.0) + heat,
        heat,
        delta_e,
        tau_min,
        p_final,
        units: Units::Scaled,
    })
}

/// Work-minimizing solution for a fixed final population and a given `K`.
pub fn minimal_work(problem: &Problem, k: &ConservedK) -> Result<OptimalSolution> {
    minimal_work_with(problem, k, &SolverConfig::default())
}

pub fn minimal_work_with(problem: &Problem, k: &ConservedK, cfg: &SolverConfig) -> Result<OptimalSolution> {
    let p_tau = problem
        .boundary
        .p_tau
        .ok_or(Error::MissingBoundary("p_tau"))?;
    let r = problem.r();
    let b = &problem.boundary;
    if problem.direction == Direction::Identity || k.is_static() {
        return static_solution(problem, b.p0, b.e_tau, cfg);
    }
    let heat = heat_term(b.p0, p_tau, k, r, &cfg.quad)?;
    let trajectory = optimal_trajectory_with(problem, k, cfg)?;
    let protocol = emit_protocol(&trajectory, k, r, b.e0, b.e_tau)?;
    assemble(problem, *k, trajectory, protocol, p_tau, heat)
}

/// Hold the population fixed: jump to the energy that keeps `p0` stationary
/// (or straight to `hold` when given), wait, then jump to `E_tau`.
fn static_solution(problem: &Problem, p0: f64, hold: Option<f64>, cfg: &SolverConfig) -> Result<OptimalSolution> {
    let b = &problem.boundary;
    let r = problem.r();
    let e_hold = if problem.is_free_final() {
        hold.expect("free-final problems carry E_tau")
    } else {
        dynamics::equilibrium_energy(p0, r)
    };
    let samples = uniform_grid(b.tau, cfg.samples)
        .into_iter()
        .map(|t| Sample { t, p: p0, e: e_hold })
        .collect();
    let trajectory = Trajectory::new(samples, Some(0.0));
    let mut quenches = Vec::new();
    if let Some(e0) = b.e0.filter(|e| *e != e_hold) {
        quenches.push(Quench {
            time: 0.0,
            before: e0,
            after: e_hold,
        });
    }
    if let Some(e1) = b.e_tau.filter(|e| *e != e_hold) {
        quenches.push(Quench {
            time: b.tau,
            before: e_hold,
            after: e1,
        });
    }
    let protocol = Protocol::new(
        vec![Segment::Constant {
            t_start: 0.0,
            t_end: b.tau,
            energy: e_hold,
        }],
        quenches,
    )?;
    let k = ConservedK::new(0.0, Direction::Identity)?;
    assemble(problem, k, trajectory, protocol, p0, 0.0)
}

/// Solve any validated problem: identity, fixed final population, or free
/// final population.
pub fn solve(problem: &Problem) -> Result<OptimalSolution> {
    solve_with(problem, &SolverConfig::default())
}

pub fn solve_with(problem: &Problem, cfg: &SolverConfig) -> Result<OptimalSolution> {
    if problem.is_free_final() {
        return solve_free_final_with(problem, cfg).map(|s| s.solution);
    }
    let k = solve_kappa_with(problem, cfg)?;
    minimal_work_with(problem, &k, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeFinalSolution {
    pub solution: OptimalSolution,
    /// `p(tau) E_tau - integral E_K dp` at the optimum.
    pub objective: f64,
    /// Whether the coarse scan looked unimodal. When it does not, the result
    /// is the best of the scan argmin and its local refinement.
    pub unimodal: bool,
    /// Coarse scan as `(K, objective)` pairs.
    pub scan: Vec<(f64, f64)>,
}

/// `(p(tau), objective)` for the free-final-state problem at a given `K`.
pub fn free_final_objective(problem: &Problem, k: &ConservedK, cfg: &SolverConfig) -> Result<(f64, f64)> {
    let e_tau = problem
        .boundary
        .e_tau
        .ok_or(Error::MissingBoundary("E_tau"))?;
    let (p0, tau, r) = (problem.boundary.p0, problem.boundary.tau, problem.r());
    let p_end = *propagate_optimal(p0, k, r, &[0.0, tau], cfg)?
        .last()
        .expect("two points");
    // Driving so hard that the population leaves the representable range
    // is never optimal.
    if !(PROBABILITY_FLOOR..=1.0 - PROBABILITY_FLOOR).contains(&p_end) {
        return Ok((p_end, f64::INFINITY));
    }
    let heat = heat_term(p0, p_end, k, r, &cfg.quad)?;
    Ok((p_end, p_end * e_tau + heat))
}

pub fn solve_free_final(problem: &Problem) -> Result<FreeFinalSolution> {
    solve_free_final_with(problem, &SolverConfig::default())
}

/// Minimize the free-final-state work over `K`: a coarse scan in `ln K`
/// isolates a bracket, which golden-section search then refines.
pub fn solve_free_final_with(problem: &Problem, cfg: &SolverConfig) -> Result<FreeFinalSolution> {
    if !problem.is_free_final() {
        return Err(Error::domain("problem has a fixed final population"));
    }
    let e_tau = problem
        .boundary
        .e_tau
        .ok_or(Error::MissingBoundary("E_tau"))?;
    let (p0, r) = (problem.boundary.p0, problem.r());
    let direction = problem.direction;
    if direction == Direction::Identity {
        let solution = static_solution(problem, p0, Some(e_tau), cfg)?;
        return Ok(FreeFinalSolution {
            objective: p0 * e_tau,
            solution,
            unimodal: true,
            scan: vec![],
        });
    }

    let objective = |ln_k: f64| -> Result<f64> {
        let k = ConservedK::new(ln_k.exp(), direction)?;
        Ok(free_final_objective(problem, &k, cfg)?.1)
    };
    let (lo, hi) = (1e-12f64.ln(), 1e4f64.ln());
    let n = cfg.free_final_scan.max(3);
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let values = grid.iter().map(|&x| objective(x)).collect::<Result<Vec<_>>>()?;
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty scan");
    let slack = 1e-12 * values[best].abs().max(1.0);
    let unimodal = values[..=best].windows(2).all(|w| w[1] <= w[0] + slack)
        && values[best..].windows(2).all(|w| w[1] >= w[0] - slack);

    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(n - 1)];
    let (mut ln_k, mut value) = numeric::golden_section(objective, a, b, 1e-10, 200)?;
    if value > values[best] {
        ln_k = grid[best];
        value = values[best];
    }

    let k = ConservedK::new(ln_k.exp(), direction)?;
    let (p_end, _) = free_final_objective(problem, &k, cfg)?;
    let heat = heat_term(p0, p_end, &k, r, &cfg.quad)?;
    let trajectory = optimal_trajectory_with(problem, &k, cfg)?;
    let protocol = emit_protocol(&trajectory, &k, r, problem.boundary.e0, Some(e_tau))?;
    let solution = assemble(problem, k, trajectory, protocol, p_end, heat)?;
    Ok(FreeFinalSolution {
        solution,
        objective: value,
        unimodal,
        scan: grid.iter().map(|x| x.exp()).zip(values).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{validate_problem, Boundary, SystemParams};

    fn heating(k: f64) -> ConservedK {
        ConservedK::new(k, Direction::Heating).unwrap()
    }

    fn cooling(k: f64) -> ConservedK {
        ConservedK::new(k, Direction::Cooling).unwrap()
    }

    #[test]
    fn energy_from_state_examples() {
        assert_eq!(energy_from_state(0.5, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(energy_from_state(0.25, 0.25, 1.0).unwrap(), 0.0);
        for (p, r) in [(0.2, 0.5), (0.7, 3.0)] {
            let e = energy_from_state(p, 0.0, r).unwrap();
            assert!((e - ((1.0 - p) / (r * p)).ln()).abs() < 1e-15);
        }
        assert!(matches!(energy_from_state(0.5, 0.6, 1.0), Err(Error::BranchViolation { .. })));
        assert!(matches!(energy_from_state(0.5, -0.6, 1.0), Err(Error::BranchViolation { .. })));
    }

    #[test]
    fn pdot_examples() {
        assert_eq!(pdot_of(0.3, &heating(0.0), 0.7), 0.0);
        // p = 1/2, K = 1, r = 1: Delta = 2 and the cooling root is -sqrt(2)/4,
        // which lies inside the physical window (-1/2, 1/2).
        let x = pdot_of(0.5, &cooling(1.0), 1.0);
        assert!((discriminant(0.5, 1.0, 1.0) - 2.0).abs() < 1e-15);
        assert!((x + 2.0f64.sqrt() / 4.0).abs() < 1e-15);
        assert!(energy_from_state(0.5, x, 1.0).is_ok());
        // K -> infinity approaches the fastest rates.
        for p in [0.1, 0.5, 0.9] {
            let fast = pdot_of(p, &heating(1e10), 0.4);
            assert!((fast - (1.0 - p)).abs() < 1e-8);
            let slow = pdot_of(p, &cooling(1e10), 0.4);
            assert!((slow + 0.4 * p).abs() < 1e-8);
        }
    }

    #[test]
    fn pdot_round_trips_through_k() {
        for &(p, k, r) in &[(0.3, 0.7, 0.2), (0.9, 1e-6, 5.0), (0.01, 300.0, 1.0), (0.6, 2.0, 0.01)] {
            for kk in [heating(k), cooling(k)] {
                let x = pdot_of(p, &kk, r);
                let back = conserved_quantity(p, x, r).unwrap();
                assert!((back - k).abs() <= 1e-10 * k, "{p} {k} {r}: {back}");
            }
        }
    }

    #[test]
    fn eq15_matches_state_route_and_equilibrium_limit() {
        for &(p, k, r) in &[(0.3, 0.7, 0.2), (0.9, 1e-4, 5.0), (0.02, 30.0, 1.0)] {
            for kk in [heating(k), cooling(k)] {
                let direct = optimal_energy(p, &kk, r).unwrap();
                let via = energy_from_state(p, pdot_of(p, &kk, r), r).unwrap();
                assert!((direct - via).abs() < 1e-10);
            }
        }
        let eq = optimal_energy(0.3, &heating(0.0), 2.0).unwrap();
        assert!((eq - (0.7f64 / 0.6).ln()).abs() < 1e-15);
        // Diverging control as K grows.
        assert!(optimal_energy(0.3, &heating(1e12), 1.0).unwrap() < -20.0);
        assert!(optimal_energy(0.3, &cooling(1e12), 1.0).unwrap() > 20.0);
    }

    #[test]
    fn energy_slope_matches_finite_difference() {
        for &(p, k, r) in &[(0.3, 0.7, 0.2), (0.6, 0.01, 3.0)] {
            for kk in [heating(k), cooling(k)] {
                let h = 1e-6;
                let fd = (optimal_energy(p + h, &kk, r).unwrap() - optimal_energy(p - h, &kk, r).unwrap()) / (2.0 * h);
                let an = optimal_energy_slope(p, &kk, r);
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn closed_form_probability_inverts_energy_curve() {
        for &(p, k, r) in &[(0.3, 0.7, 0.2), (0.8, 0.05, 4.0), (0.4, 2.0, 1.0)] {
            for kk in [heating(k), cooling(k)] {
                let e = optimal_energy(p, &kk, r).unwrap();
                assert!((closed_form_probability(e, &kk, r) - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn time_of_p_basics() {
        assert_eq!(time_of_p(0.4, 0.4, &cooling(1.0), 1.0).unwrap(), 0.0);
        assert!(time_of_p(0.6, 0.4, &cooling(1.0), 1.0).is_err());
        // Fastest heating limit.
        let (p0, p) = (0.2, 0.7);
        let t = time_of_p(p, p0, &heating(1e8), 0.3).unwrap();
        let limit = ((1.0 - p0) / (1.0 - p)).ln();
        assert!((t - limit).abs() < 1e-6 * limit);
    }

    /// Independent oracle: fixed-step RK4 of the naive quadratic root in `t`.
    fn naive_pdot(p: f64, k: f64, r: f64, s: f64) -> f64 {
        let c = 1.0 - (1.0 - r) * p;
        let d = k * k * c * c + 4.0 * k * r * p * (1.0 - p) * c;
        0.5 * (k * (1.0 - (1.0 + r) * p) + s * d.sqrt()) / (c + k)
    }

    fn arrival_time(p0: f64, target: f64, k: f64, r: f64, s: f64) -> f64 {
        let h = 1e-3;
        let (mut t, mut p) = (0.0, p0);
        let f = |p: f64| naive_pdot(p, k, r, s);
        loop {
            let k1 = f(p);
            let k2 = f(p + 0.5 * h * k1);
            let k3 = f(p + 0.5 * h * k2);
            let k4 = f(p + h * k3);
            let next = p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (next - target) * s >= 0.0 {
                // Finish with a Newton step in time on the last interval.
                let mut dt = (target - p) / f(p);
                for _ in 0..3 {
                    let q = {
                        let k1 = f(p);
                        let k2 = f(p + 0.5 * dt * k1);
                        let k3 = f(p + 0.5 * dt * k2);
                        let k4 = f(p + dt * k3);
                        p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                    };
                    dt -= (q - target) / f(q);
                }
                return t + dt;
            }
            p = next;
            t += h;
        }
    }

    #[test]
    fn time_of_p_matches_ode_arrival() {
        let oracle = arrival_time(0.5, 0.4, 1.0, 1.0, -1.0);
        let t = time_of_p(0.4, 0.5, &cooling(1.0), 1.0).unwrap();
        assert!((t - oracle).abs() < 1e-8, "{t} vs {oracle}");
        let oracle = arrival_time(0.2, 0.55, 0.3, 0.25, 1.0);
        let t = time_of_p(0.55, 0.2, &heating(0.3), 0.25).unwrap();
        assert!((t - oracle).abs() < 1e-8, "{t} vs {oracle}");
    }

    fn erasure(ratio: f64) -> Problem {
        let params = SystemParams::from_ratio(1.0).unwrap();
        let tm = 5e4f64.ln();
        let b = Boundary::fixed(0.5, 1e-5, ratio * tm).with_equilibrium_energies(1.0);
        validate_problem(&params, &b).unwrap()
    }

    /// Shooting oracle: bisection on ln K over RK4 integration of ln p.
    fn shoot_kappa(p0: f64, p_tau: f64, tau: f64, r: f64) -> f64 {
        let reach = |k: f64| {
            let n = 20_000;
            let h = tau / n as f64;
            let f = |y: f64| naive_pdot(y.exp(), k, r, -1.0) / y.exp();
            let mut y = p0.ln();
            for _ in 0..n {
                let k1 = f(y);
                let k2 = f(y + 0.5 * h * k1);
                let k3 = f(y + 0.5 * h * k2);
                let k4 = f(y + h * k3);
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            y
        };
        let (mut lo, mut hi) = ((1e-8f64).ln(), (1.0f64).ln());
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if reach(mid.exp()) > p_tau.ln() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }

    #[test]
    fn erasure_kappa_matches_shooting_and_reference() {
        let problem = erasure(5.0);
        let k = solve_kappa(&problem).unwrap();
        assert_eq!(k.direction, Direction::Cooling);
        let shot = shoot_kappa(0.5, 1e-5, problem.boundary.tau, 1.0);
        assert!((k.k - shot).abs() < 1e-7 * shot, "{} vs {shot}", k.k);
        // Reference from an independent scipy implementation.
        assert!((k.k - 0.0010843490350446183).abs() < 1e-9 * k.k);
        let f = time_of_p(1e-5, 0.5, &k, 1.0).unwrap();
        assert!((f - problem.boundary.tau).abs() < 1e-9 * problem.boundary.tau);
    }

    #[test]
    fn erasure_work_reference_values() {
        // (tau / tau_min, kappa, W_min) from an independent scipy implementation.
        let reference = [
            (2.0, 0.012569175439908794, 0.862889962683623),
            (5.0, 0.0010843490350446183, 0.7442636186369849),
            (20.0, 5.5082626266114284e-05, 0.704739102471422),
        ];
        let mut prev = f64::INFINITY;
        for (ratio, kappa, w) in reference {
            let sol = solve(&erasure(ratio)).unwrap();
            assert!((sol.kappa_tau - kappa).abs() < 1e-8 * kappa);
            assert!((sol.w_min - w).abs() < 1e-9, "{ratio}: {} vs {w}", sol.w_min);
            assert!(sol.w_min > 2.0f64.ln() && sol.w_min < prev);
            prev = sol.w_min;
        }
    }

    #[test]
    fn long_protocols_approach_free_energy() {
        let problem = erasure(200.0);
        let sol = solve(&problem).unwrap();
        let df = dynamics::delta_f_neq(&problem.boundary, &problem.params).unwrap();
        assert!(sol.kappa_tau < 1e-6);
        assert!(sol.w_min > df && sol.w_min - df < 0.02 * df);
    }

    #[test]
    fn identity_problem_is_static() {
        let params = SystemParams::from_ratio(1.0).unwrap();
        let problem = validate_problem(&params, &Boundary::fixed(0.3, 0.3, 1.0)).unwrap();
        let sol = solve(&problem).unwrap();
        assert_eq!(sol.w_min, 0.0);
        assert_eq!(sol.kappa_tau, 0.0);
        assert!(sol.trajectory.samples.iter().all(|s| s.p == 0.3));

        let with_e = Boundary::fixed(0.3, 0.3, 1.0).with_energies(0.0, 1.0);
        let sol = solve(&validate_problem(&params, &with_e).unwrap()).unwrap();
        assert!((sol.w_min - 0.3).abs() < 1e-15);
    }

    #[test]
    fn trajectory_endpoints_and_monotone() {
        let problem = erasure(5.0);
        let sol = solve(&problem).unwrap();
        let traj = &sol.trajectory;
        traj.check().unwrap();
        assert_eq!(traj.first().p, 0.5);
        assert!((traj.last().p - 1e-5).abs() < 1e-8);
        assert!(traj.samples.windows(2).all(|w| w[1].p < w[0].p));
        // Overshoot: the bulk ends beyond the final equilibrium energy.
        let e_tau = problem.boundary.e_tau.unwrap();
        assert!(sol.quench_out.unwrap().before > e_tau);
        assert_eq!(sol.quench_in.unwrap().before, 0.0);
    }

    #[test]
    fn missing_energies_report_heat_only() {
        let params = SystemParams::from_ratio(0.5).unwrap();
        let b = Boundary::fixed(0.2, 0.6, 10.0);
        let sol = solve(&validate_problem(&params, &b).unwrap()).unwrap();
        assert_eq!(sol.delta_e, None);
        assert_eq!(sol.w_min, sol.heat);
        assert!(sol.quench_in.is_none() && sol.quench_out.is_none());
    }

    #[test]
    fn free_final_lags_behind_equilibrium() {
        let params = SystemParams::from_ratio(1.0).unwrap();
        let p_tau: f64 = 1e-5;
        let e_tau = ((1.0 - p_tau) / p_tau).ln();
        let tau = 5.0 * 10.8198;
        let b = Boundary::free_final(0.5, e_tau, tau).with_initial_energy(0.0);
        let problem = validate_problem(&params, &b).unwrap();
        let cfg = SolverConfig {
            samples: 201,
            ..Default::default()
        };
        let free = solve_free_final_with(&problem, &cfg).unwrap();
        assert!(free.unimodal);
        assert!(free.solution.p_final > p_tau);

        // Dense grid scan of the objective as an oracle for the minimizer.
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=400 {
            let k = (1e-7f64.ln() + (1.0f64.ln() - 1e-7f64.ln()) * i as f64 / 400.0).exp();
            let (_, v) = free_final_objective(&problem, &cooling(k), &cfg).unwrap();
            if v < best.0 {
                best = (v, k);
            }
        }
        assert!(free.objective <= best.0 + 1e-12);
        assert!((free.solution.kappa_tau / best.1).ln().abs() < 0.05);

        // Relaxing the final constraint can only help.
        let fixed = Boundary::fixed(0.5, p_tau, tau).with_energies(0.0, e_tau);
        let fixed_sol = solve(&validate_problem(&params, &fixed).unwrap()).unwrap();
        assert!(free.solution.w_min <= fixed_sol.w_min + 1e-12);

        // No overshoot: the final quench starts short of E_tau.
        assert!(free.solution.quench_out.unwrap().before < e_tau);
    }

    #[test]
    fn free_final_long_duration_is_quasistatic() {
        let params = SystemParams::from_ratio(2.0).unwrap();
        let e_tau = 1.5;
        let b = Boundary::free_final(0.4, e_tau, 2000.0).with_initial_energy(dynamics::equilibrium_energy(0.4, 2.0));
        let problem = validate_problem(&params, &b).unwrap();
        let cfg = SolverConfig {
            samples: 51,
            ..Default::default()
        };
        let free = solve_free_final_with(&problem, &cfg).unwrap();
        assert!(free.solution.kappa_tau < 1e-4);
        assert!((free.solution.p_final - dynamics::p_eq(e_tau, 2.0)).abs() < 1e-3);
    }
}
