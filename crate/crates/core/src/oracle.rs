//! Brute-force reference optimizer over piecewise-constant energy schedules.
//!
//! It shares only the exact constant-energy propagator with the rest of the
//! crate, so it can check the analytic solution: it should approach `W_min`
//! from above as the number of levels grows, and never go below it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{equilibrium_energy, RateCoefficients};
use crate::error::{Error, Result};
use crate::numeric::{brent, RootConfig};
use crate::types::{Problem, Protocol};

/// Fermi factors saturate well before this.
pub const ENERGY_CAP: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseProtocol {
    pub levels: Vec<f64>,
    pub e0: f64,
    pub e_tau: f64,
    pub tau: f64,
}

impl PiecewiseProtocol {
    pub fn new(levels: Vec<f64>, e0: f64, e_tau: f64, tau: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidProtocol("no levels".into()));
        }
        if levels.iter().any(|e| !(e.abs() <= ENERGY_CAP)) {
            return Err(Error::InvalidProtocol(format!("levels must lie within +-{ENERGY_CAP}")));
        }
        if !(tau > 0.0 && tau.is_finite() && e0.is_finite() && e_tau.is_finite()) {
            return Err(Error::InvalidProtocol("boundary energies and duration must be finite".into()));
        }
        Ok(PiecewiseProtocol { levels, e0, e_tau, tau })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Segment durations on the same grid as [`Protocol::piecewise_constant`].
    fn durations(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.levels.len();
        let dt = self.tau / n as f64;
        (0..n).map(move |i| {
            let end = if i + 1 == n { self.tau } else { (i + 1) as f64 * dt };
            end - i as f64 * dt
        })
    }

    pub fn to_protocol(&self) -> Result<Protocol> {
        Protocol::piecewise_constant(&self.levels, self.tau, self.e0, self.e_tau)
    }

    /// Each level repeated `factor` times: same dynamics, `factor` times the levels.
    pub fn refine(&self, factor: usize) -> PiecewiseProtocol {
        PiecewiseProtocol {
            levels: self
                .levels
                .iter()
                .flat_map(|&e| std::iter::repeat(e).take(factor.max(1)))
                .collect(),
            ..self.clone()
        }
    }
}

/// Final population and work of a piecewise-constant schedule, propagated
/// exactly segment by segment. Work is the sum of `dE p` over all jumps.
pub fn propagate_exact(protocol: &PiecewiseProtocol, p0: f64, r: f64) -> (f64, f64) {
    let levels = &protocol.levels;
    let mut p = p0;
    let mut work = (levels[0] - protocol.e0) * p;
    for (i, dt) in protocol.durations().enumerate() {
        p = RateCoefficients::at(levels[i], r).propagate(p, dt);
        let next = levels.get(i + 1).copied().unwrap_or(protocol.e_tau);
        work += (next - levels[i]) * p;
    }
    (p, work)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub restarts: usize,
    pub penalty: f64,
    pub initial_step: f64,
    pub min_step: f64,
    /// Objective evaluations per restart.
    pub max_evaluations: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            restarts: 3,
            penalty: 1e4,
            initial_step: 1.0,
            min_step: 1e-9,
            max_evaluations: 400_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub protocol: PiecewiseProtocol,
    /// Penalty-free work of the projected schedule.
    pub work: f64,
    pub p_reached: f64,
    /// Whether the terminal level could hit `p_tau` exactly.
    pub feasible: bool,
    /// The search never improved on its starting point.
    pub no_improvement: bool,
    pub evaluations: usize,
    pub seed: u64,
}

struct Objective<'a> {
    p0: f64,
    p_tau: f64,
    r: f64,
    e0: f64,
    e_tau: f64,
    tau: f64,
    n: usize,
    penalty: f64,
    root: &'a RootConfig,
}

struct Evaluation {
    last_level: f64,
    p_reached: f64,
    work: f64,
    feasible: bool,
}

impl Evaluation {
    fn penalized(&self, penalty: f64, p_tau: f64) -> f64 {
        self.work + penalty * (self.p_reached - p_tau).abs()
    }
}

impl Objective<'_> {
    /// Fill in the terminal level so that `p(tau) = p_tau`, then score.
    fn evaluate(&self, free: &[f64]) -> Evaluation {
        let dt = self.tau / self.n as f64;
        let mut p = self.p0;
        let mut work = 0.0;
        let mut prev = self.e0;
        for (i, &e) in free.iter().enumerate() {
            work += (e - prev) * p;
            let end = if i + 1 == self.n { self.tau } else { (i + 1) as f64 * dt };
            p = RateCoefficients::at(e, self.r).propagate(p, end - i as f64 * dt);
            prev = e;
        }
        let last_dt = self.tau - (self.n - 1) as f64 * dt;
        let reach = |e: f64| RateCoefficients::at(e, self.r).propagate(p, last_dt);
        // Reached population decreases monotonically with the level.
        let (hi_p, lo_p) = (reach(-ENERGY_CAP), reach(ENERGY_CAP));
        let (last_level, feasible) = if self.p_tau > hi_p {
            (-ENERGY_CAP, false)
        } else if self.p_tau < lo_p {
            (ENERGY_CAP, false)
        } else {
            match brent(|e| Ok(reach(e) - self.p_tau), -ENERGY_CAP, ENERGY_CAP, self.root) {
                Ok(e) => (e, true),
                Err(_) => (if (hi_p - self.p_tau).abs() < (lo_p - self.p_tau).abs() { -ENERGY_CAP } else { ENERGY_CAP }, false),
            }
        };
        work += (last_level - prev) * p;
        let p_end = reach(last_level);
        work += (self.e_tau - last_level) * p_end;
        Evaluation {
            last_level,
            p_reached: p_end,
            work,
            feasible,
        }
    }

    fn score(&self, free: &[f64]) -> f64 {
        self.evaluate(free).penalized(self.penalty, self.p_tau)
    }
}

/// Pattern search with per-coordinate adaptive steps: a successful trial
/// doubles that coordinate's step, a failed pair halves it, and each sweep
/// ends with an extrapolation along the net displacement.
fn descend(obj: &Objective, start: Vec<f64>, cfg: &OracleConfig) -> (Vec<f64>, f64, usize, bool) {
    let mut x = start;
    let mut fx = obj.score(&x);
    let initial = fx;
    let mut evals = 1;
    let mut steps = vec![cfg.initial_step; x.len()];
    while evals < cfg.max_evaluations && steps.iter().any(|&s| s > cfg.min_step) {
        let anchor = x.clone();
        for i in 0..x.len() {
            if steps[i] <= cfg.min_step {
                continue;
            }
            let mut moved = false;
            for dir in [1.0, -1.0] {
                let old = x[i];
                let trial = (old + dir * steps[i]).clamp(-ENERGY_CAP, ENERGY_CAP);
                if trial == old {
                    continue;
                }
                x[i] = trial;
                let f = obj.score(&x);
                evals += 1;
                if f < fx {
                    fx = f;
                    moved = true;
                    break;
                }
                x[i] = old;
            }
            steps[i] = if moved { (steps[i] * 2.0).min(10.0) } else { steps[i] * 0.5 };
        }
        if x.len() > 1 && x != anchor {
            let pattern: Vec<f64> = x
                .iter()
                .zip(&anchor)
                .map(|(a, b)| (2.0 * a - b).clamp(-ENERGY_CAP, ENERGY_CAP))
                .collect();
            let f = obj.score(&pattern);
            evals += 1;
            if f < fx {
                x = pattern;
                fx = f;
            }
        }
    }
    (x, fx, evals, fx >= initial)
}

fn finish(obj: &Objective, free: Vec<f64>, evaluations: usize, no_improvement: bool, seed: u64) -> Result<OracleResult> {
    let eval = obj.evaluate(&free);
    let mut levels = free;
    levels.push(eval.last_level);
    Ok(OracleResult {
        protocol: PiecewiseProtocol::new(levels, obj.e0, obj.e_tau, obj.tau)?,
        work: eval.work,
        p_reached: eval.p_reached,
        feasible: eval.feasible,
        no_improvement,
        evaluations,
        seed,
    })
}

fn objective<'a>(n: usize, problem: &Problem, cfg: &OracleConfig, root: &'a RootConfig) -> Result<Objective<'a>> {
    let b = &problem.boundary;
    if n == 0 {
        return Err(Error::domain("need at least one level"));
    }
    Ok(Objective {
        p0: b.p0,
        p_tau: b.p_tau.ok_or(Error::MissingBoundary("p_tau"))?,
        r: problem.r(),
        e0: b.e0.ok_or(Error::MissingBoundary("E0"))?,
        e_tau: b.e_tau.ok_or(Error::MissingBoundary("E_tau"))?,
        tau: b.tau,
        n,
        penalty: cfg.penalty,
        root,
    })
}

const ROOT: RootConfig = RootConfig {
    x_tol: 1e-14,
    max_iter: 200,
};

/// Optimize `n` levels from a ramp between the boundary equilibrium energies
/// and from `restarts - 1` random perturbations of it; return the best.
pub fn optimize(n: usize, problem: &Problem, seed: u64) -> Result<OracleResult> {
    optimize_with(n, problem, seed, &OracleConfig::default())
}

pub fn optimize_with(n: usize, problem: &Problem, seed: u64, cfg: &OracleConfig) -> Result<OracleResult> {
    let obj = objective(n, problem, cfg, &ROOT)?;
    let r = obj.r;
    let e_start = equilibrium_energy(obj.p0, r);
    let e_end = equilibrium_energy(obj.p_tau, r);
    let ramp: Vec<f64> = (0..n - 1)
        .map(|i| {
            let s = (i as f64 + 0.5) / n as f64;
            (e_start + s * (e_end - e_start)).clamp(-ENERGY_CAP, ENERGY_CAP)
        })
        .collect();
    let starts: Vec<Vec<f64>> = (0..cfg.restarts.max(1))
        .map(|k| {
            if k == 0 {
                return ramp.clone();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            ramp.iter()
                .map(|&e| (e + rng.gen_range(-2.0..2.0)).clamp(-ENERGY_CAP, ENERGY_CAP))
                .collect()
        })
        .collect();
    let runs: Vec<(Vec<f64>, f64, usize, bool)> = starts.into_par_iter().map(|s| descend(&obj, s, cfg)).collect();
    let evaluations = runs.iter().map(|r| r.2).sum();
    let no_improvement = runs.iter().all(|r| r.3);
    let best = runs
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one restart");
    finish(&obj, best.0, evaluations, no_improvement, seed)
}

/// Continue the search from a given schedule (its last level is re-projected).
pub fn optimize_from(start: &PiecewiseProtocol, problem: &Problem, seed: u64, cfg: &OracleConfig) -> Result<OracleResult> {
    let n = start.len();
    let obj = objective(n, problem, cfg, &ROOT)?;
    let free = start.levels[..n - 1].to_vec();
    let (x, _, evals, none) = descend(&obj, free, cfg);
    finish(&obj, x, evals, none, seed)
}

/// Optimize at each count in `counts`, seeding every stage with the previous
/// optimum repeated level-wise. When each count divides the next, the
/// feasible sets are nested and work cannot increase along the chain.
pub fn optimize_chain(counts: &[usize], problem: &Problem, seed: u64, cfg: &OracleConfig) -> Result<Vec<OracleResult>> {
    let mut out: Vec<OracleResult> = Vec::with_capacity(counts.len());
    for &n in counts {
        let result = match out.last() {
            Some(prev) if n % prev.protocol.len() == 0 => {
                let seeded = prev.protocol.refine(n / prev.protocol.len());
                optimize_from(&seeded, problem, seed, cfg)?
            }
            _ => optimize_with(n, problem, seed, cfg)?,
        };
        out.push(result);
    }
    Ok(out)
}
