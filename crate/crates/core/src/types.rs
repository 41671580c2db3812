//! Shared domain types.
//!
//! Everything in this crate works in scaled units: energies in units of
//! `k_B T` (so `beta = 1`) and times in units of `1 / (n gamma)`. Conversion to
//! physical units happens only through [`SystemParams::energy_unit`] and
//! [`SystemParams::time_unit`].

use serde::{Deserialize, Serialize};

use crate::dynamics;
use crate::error::{Error, Result};
use crate::speed_limit;

/// Smallest admissible distance of a probability from 0 or 1.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Degeneracy of the excited sector, when known.
    pub n: Option<u32>,
    /// Degeneracy of the ground sector, when known.
    pub m: Option<u32>,
    /// Degeneracy ratio `m / n`.
    pub r: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl SystemParams {
    pub fn from_degeneracies(n: u32, m: u32) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::domain("degeneracies must be positive"));
        }
        Ok(SystemParams {
            n: Some(n),
            m: Some(m),
            r: m as f64 / n as f64,
            beta: 1.0,
            gamma: 1.0,
        })
    }

    pub fn from_ratio(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::domain(format!("degeneracy ratio must be positive, got {r}")));
        }
        Ok(SystemParams {
            n: None,
            m: None,
            r,
            beta: 1.0,
            gamma: 1.0,
        })
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// `k_B T` in physical energy units.
    pub fn energy_unit(&self) -> f64 {
        1.0 / self.beta
    }

    /// `1 / (n gamma)` in physical time units; `n = 1` when only `r` is known.
    pub fn time_unit(&self) -> f64 {
        1.0 / (self.n.unwrap_or(1) as f64 * self.gamma)
    }

    /// The system with the two sectors exchanged (`n <-> m`, `r -> 1/r`).
    pub fn dual(&self) -> SystemParams {
        SystemParams {
            n: self.m,
            m: self.n,
            r: 1.0 / self.r,
            beta: self.beta,
            gamma: self.gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Heating,
    Cooling,
    Identity,
}

impl Direction {
    pub fn between(p0: f64, p1: f64) -> Direction {
        if p1 > p0 {
            Direction::Heating
        } else if p1 < p0 {
            Direction::Cooling
        } else {
            Direction::Identity
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Heating => 1.0,
            Direction::Cooling => -1.0,
            Direction::Identity => 0.0,
        }
    }

    pub fn flipped(self) -> Direction {
        match self {
            Direction::Heating => Direction::Cooling,
            Direction::Cooling => Direction::Heating,
            Direction::Identity => Direction::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Units {
    /// `k_B T = 1`, `n gamma = 1`.
    Scaled,
    Physical { energy_unit: f64, time_unit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub p0: f64,
    /// Absent for free-final-state problems.
    pub p_tau: Option<f64>,
    pub e0: Option<f64>,
    pub e_tau: Option<f64>,
    pub tau: f64,
}

impl Boundary {
    pub fn fixed(p0: f64, p_tau: f64, tau: f64) -> Self {
        Boundary {
            p0,
            p_tau: Some(p_tau),
            e0: None,
            e_tau: None,
            tau,
        }
    }

    pub fn free_final(p0: f64, e_tau: f64, tau: f64) -> Self {
        Boundary {
            p0,
            p_tau: None,
            e0: None,
            e_tau: Some(e_tau),
            tau,
        }
    }

    pub fn with_energies(mut self, e0: f64, e_tau: f64) -> Self {
        self.e0 = Some(e0);
        self.e_tau = Some(e_tau);
        self
    }

    pub fn with_initial_energy(mut self, e0: f64) -> Self {
        self.e0 = Some(e0);
        self
    }

    /// Boundary energies that put both endpoints at equilibrium.
    pub fn with_equilibrium_energies(self, r: f64) -> Self {
        let e0 = dynamics::equilibrium_energy(self.p0, r);
        match self.p_tau {
            Some(p) => self.with_energies(e0, dynamics::equilibrium_energy(p, r)),
            None => self.with_initial_energy(e0),
        }
    }
}

/// A problem that passed [`validate_problem`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Problem {
    pub params: SystemParams,
    pub boundary: Boundary,
    pub direction: Direction,
    /// Speed limit towards `p_tau`, or towards `p_eq(E_tau)` in free-final mode.
    pub tau_min: f64,
}

impl Problem {
    pub fn r(&self) -> f64 {
        self.params.r
    }

    pub fn is_free_final(&self) -> bool {
        self.boundary.p_tau.is_none()
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(PROBABILITY_FLOOR..=1.0 - PROBABILITY_FLOOR).contains(&p) {
        return Err(Error::domain(format!(
            "{name} = {p} outside [{PROBABILITY_FLOOR:e}, 1 - {PROBABILITY_FLOOR:e}]"
        )));
    }
    Ok(())
}

fn check_energy(name: &str, e: Option<f64>) -> Result<()> {
    match e {
        Some(v) if !v.is_finite() => Err(Error::domain(format!("{name} must be finite"))),
        _ => Ok(()),
    }
}

pub fn validate_problem(params: &SystemParams, boundary: &Boundary) -> Result<Problem> {
    if !(params.r.is_finite() && params.r > 0.0) {
        return Err(Error::domain("degeneracy ratio must be positive"));
    }
    check_probability("p0", boundary.p0)?;
    if !(boundary.tau.is_finite() && boundary.tau > 0.0) {
        return Err(Error::domain(format!("tau must be positive, got {}", boundary.tau)));
    }
    check_energy("E0", boundary.e0)?;
    check_energy("E_tau", boundary.e_tau)?;

    let r = params.r;
    let (target, fixed) = match (boundary.p_tau, boundary.e_tau) {
        (Some(p), _) => {
            check_probability("p_tau", p)?;
            (p, true)
        }
        (None, Some(e)) => (dynamics::p_eq(e, r), false),
        (None, None) => return Err(Error::MissingBoundary("p_tau or E_tau")),
    };
    let direction = Direction::between(boundary.p0, target);
    let tau_min = if direction == Direction::Identity {
        0.0
    } else {
        speed_limit::tau_min_scaled(boundary.p0, target, r)?
    };
    if fixed && direction != Direction::Identity && boundary.tau <= tau_min {
        return Err(Error::InfeasibleDuration {
            tau: boundary.tau,
            tau_min,
        });
    }
    Ok(Problem {
        params: *params,
        boundary: *boundary,
        direction,
        tau_min,
    })
}

/// An instantaneous jump of the energy gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quench {
    pub time: f64,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Constant {
        t_start: f64,
        t_end: f64,
        energy: f64,
    },
    /// Energies at strictly increasing times. Interpolated linearly, or by
    /// cubic Hermite polynomials when `slopes` (dE/dt at each sample) is given.
    Sampled {
        times: Vec<f64>,
        energies: Vec<f64>,
        slopes: Option<Vec<f64>>,
    },
}

impl Segment {
    pub fn t_start(&self) -> f64 {
        match self {
            Segment::Constant { t_start, .. } => *t_start,
            Segment::Sampled { times, .. } => times[0],
        }
    }

    pub fn t_end(&self) -> f64 {
        match self {
            Segment::Constant { t_end, .. } => *t_end,
            Segment::Sampled { times, .. } => *times.last().expect("validated segment"),
        }
    }

    pub fn start_energy(&self) -> f64 {
        match self {
            Segment::Constant { energy, .. } => *energy,
            Segment::Sampled { energies, .. } => energies[0],
        }
    }

    pub fn end_energy(&self) -> f64 {
        match self {
            Segment::Constant { energy, .. } => *energy,
            Segment::Sampled { energies, .. } => *energies.last().expect("validated segment"),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Segment::Constant {
                t_start,
                t_end,
                energy,
            } => {
                if !(t_end > t_start) {
                    return Err(Error::InvalidProtocol(format!(
                        "segment [{t_start}, {t_end}] has non-positive length"
                    )));
                }
                if !energy.is_finite() {
                    return Err(Error::InvalidProtocol("non-finite energy".into()));
                }
            }
            Segment::Sampled {
                times,
                energies,
                slopes,
            } => {
                if times.len() < 2 || times.len() != energies.len() {
                    return Err(Error::InvalidProtocol(
                        "sampled segment needs at least two (t, E) pairs".into(),
                    ));
                }
                if let Some(s) = slopes {
                    if s.len() != times.len() || s.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidProtocol("bad slope samples".into()));
                    }
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidProtocol(
                        "sample times must be strictly increasing".into(),
                    ));
                }
                if energies.iter().any(|e| !e.is_finite()) {
                    return Err(Error::InvalidProtocol("non-finite energy".into()));
                }
            }
        }
        Ok(())
    }
}

/// Smooth stretch of a protocol between two consecutive knots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Constant {
        t0: f64,
        t1: f64,
        energy: f64,
    },
    Linear {
        t0: f64,
        t1: f64,
        e0: f64,
        e1: f64,
    },
    Hermite {
        t0: f64,
        t1: f64,
        e0: f64,
        e1: f64,
        d0: f64,
        d1: f64,
    },
}

impl Piece {
    pub fn span(&self) -> (f64, f64) {
        match *self {
            Piece::Constant { t0, t1, .. } | Piece::Linear { t0, t1, .. } | Piece::Hermite { t0, t1, .. } => {
                (t0, t1)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            Piece::Constant { .. } => true,
            Piece::Linear { e0, e1, .. } => e0 == e1,
            Piece::Hermite { e0, e1, d0, d1, .. } => e0 == e1 && d0 == 0.0 && d1 == 0.0,
        }
    }

    pub fn energy(&self, t: f64) -> f64 {
        match *self {
            Piece::Constant { energy, .. } => energy,
            Piece::Linear { t0, t1, e0, e1 } => e0 + (e1 - e0) * (t - t0) / (t1 - t0),
            Piece::Hermite {
                t0,
                t1,
                e0,
                e1,
                d0,
                d1,
            } => {
                let h = t1 - t0;
                let s = (t - t0) / h;
                let s2 = s * s;
                let s3 = s2 * s;
                (2.0 * s3 - 3.0 * s2 + 1.0) * e0
                    + (s3 - 2.0 * s2 + s) * h * d0
                    + (-2.0 * s3 + 3.0 * s2) * e1
                    + (s3 - s2) * h * d1
            }
        }
    }

    /// dE/dt inside the piece.
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            Piece::Constant { .. } => 0.0,
            Piece::Linear { t0, t1, e0, e1 } => (e1 - e0) / (t1 - t0),
            Piece::Hermite {
                t0,
                t1,
                e0,
                e1,
                d0,
                d1,
            } => {
                let h = t1 - t0;
                let s = (t - t0) / h;
                let s2 = s * s;
                ((6.0 * s2 - 6.0 * s) * e0 + (-6.0 * s2 + 6.0 * s) * e1) / h
                    + (3.0 * s2 - 4.0 * s + 1.0) * d0
                    + (3.0 * s2 - 2.0 * s) * d1
            }
        }
    }
}

/// Time-dependent energy gap on `[0, tau]` with explicit quenches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    segments: Vec<Segment>,
    quenches: Vec<Quench>,
    pub units: Units,
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1.0)
}

impl Protocol {
    /// Build and validate a protocol. Segments must tile `[0, tau]`; every
    /// energy discontinuity between segments must be listed as a quench.
    pub fn new(segments: Vec<Segment>, quenches: Vec<Quench>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidProtocol("no segments".into()))?;
        if first.t_start() != 0.0 {
            return Err(Error::InvalidProtocol("protocol must start at t = 0".into()));
        }
        for s in &segments {
            s.validate()?;
        }
        let tau = segments.last().map(Segment::t_end).unwrap_or(0.0);
        for w in segments.windows(2) {
            if !close(w[0].t_end(), w[1].t_start(), tau) {
                return Err(Error::InvalidProtocol(format!(
                    "gap or overlap between segments at t = {}",
                    w[0].t_end()
                )));
            }
        }
        for q in &quenches {
            if !(q.before.is_finite() && q.after.is_finite()) {
                return Err(Error::InvalidProtocol("non-finite quench energy".into()));
            }
        }
        if quenches.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::InvalidProtocol("quench times must be strictly increasing".into()));
        }
        for q in &quenches {
            let on_boundary = close(q.time, 0.0, tau)
                || close(q.time, tau, tau)
                || segments.windows(2).any(|w| close(q.time, w[0].t_end(), tau));
            if !on_boundary {
                return Err(Error::InvalidProtocol(format!(
                    "quench at t = {} is not on a segment boundary",
                    q.time
                )));
            }
        }
        let protocol = Protocol {
            segments,
            quenches,
            units: Units::Scaled,
        };
        protocol.check_quench_consistency(tau)?;
        Ok(protocol)
    }

    fn check_quench_consistency(&self, tau: f64) -> Result<()> {
        let tol = |e: f64| 1e-9 * e.abs().max(1.0);
        for w in self.segments.windows(2) {
            let t = w[0].t_end();
            let (before, after) = (w[0].end_energy(), w[1].start_energy());
            match self.quench_at(t) {
                Some(q) => {
                    if (q.before - before).abs() > tol(before) || (q.after - after).abs() > tol(after) {
                        return Err(Error::InvalidProtocol(format!(
                            "quench at t = {t} disagrees with adjacent segments"
                        )));
                    }
                }
                None if (before - after).abs() > tol(before) => {
                    return Err(Error::InvalidProtocol(format!(
                        "undeclared discontinuity at t = {t}"
                    )));
                }
                None => {}
            }
        }
        if let Some(q) = self.quench_at(0.0) {
            let e = self.segments[0].start_energy();
            if (q.after - e).abs() > tol(e) {
                return Err(Error::InvalidProtocol("initial quench does not land on E(0+)".into()));
            }
        }
        if let Some(q) = self.quench_at(tau) {
            let e = self.segments.last().expect("non-empty").end_energy();
            if (q.before - e).abs() > tol(e) {
                return Err(Error::InvalidProtocol("final quench does not start at E(tau-)".into()));
            }
        }
        Ok(())
    }

    /// A single constant segment with no quenches.
    pub fn constant(energy: f64, tau: f64) -> Result<Self> {
        Protocol::new(
            vec![Segment::Constant {
                t_start: 0.0,
                t_end: tau,
                energy,
            }],
            vec![],
        )
    }

    /// Piecewise-constant levels of equal duration, with boundary quenches
    /// from `e0` and to `e_tau`.
    pub fn piecewise_constant(levels: &[f64], tau: f64, e0: f64, e_tau: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidProtocol("no levels".into()));
        }
        let n = levels.len();
        let dt = tau / n as f64;
        let edge = |i: usize| if i == n { tau } else { i as f64 * dt };
        let segments = levels
            .iter()
            .enumerate()
            .map(|(i, &energy)| Segment::Constant {
                t_start: edge(i),
                t_end: edge(i + 1),
                energy,
            })
            .collect();
        let mut quenches = Vec::new();
        if e0 != levels[0] {
            quenches.push(Quench {
                time: 0.0,
                before: e0,
                after: levels[0],
            });
        }
        for i in 1..n {
            if levels[i] != levels[i - 1] {
                quenches.push(Quench {
                    time: edge(i),
                    before: levels[i - 1],
                    after: levels[i],
                });
            }
        }
        if e_tau != levels[n - 1] {
            quenches.push(Quench {
                time: tau,
                before: levels[n - 1],
                after: e_tau,
            });
        }
        Protocol::new(segments, quenches)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn quenches(&self) -> &[Quench] {
        &self.quenches
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().expect("non-empty").t_end()
    }

    pub fn quench_at(&self, t: f64) -> Option<&Quench> {
        let tau = self.duration();
        self.quenches.iter().find(|q| close(q.time, t, tau))
    }

    /// Energy before the protocol starts (before any quench at `t = 0`).
    pub fn initial_energy(&self) -> f64 {
        self.quench_at(0.0)
            .map(|q| q.before)
            .unwrap_or_else(|| self.segments[0].start_energy())
    }

    /// Energy after the protocol ends (after any quench at `t = tau`).
    pub fn final_energy(&self) -> f64 {
        self.quench_at(self.duration())
            .map(|q| q.after)
            .unwrap_or_else(|| self.segments.last().expect("non-empty").end_energy())
    }

    /// Smooth pieces in time order.
    pub fn pieces(&self) -> Vec<Piece> {
        let mut out = Vec::new();
        for seg in &self.segments {
            match seg {
                Segment::Constant {
                    t_start,
                    t_end,
                    energy,
                } => out.push(Piece::Constant {
                    t0: *t_start,
                    t1: *t_end,
                    energy: *energy,
                }),
                Segment::Sampled {
                    times,
                    energies,
                    slopes,
                } => {
                    for i in 0..times.len() - 1 {
                        out.push(match slopes {
                            Some(d) => Piece::Hermite {
                                t0: times[i],
                                t1: times[i + 1],
                                e0: energies[i],
                                e1: energies[i + 1],
                                d0: d[i],
                                d1: d[i + 1],
                            },
                            None => Piece::Linear {
                                t0: times[i],
                                t1: times[i + 1],
                                e0: energies[i],
                                e1: energies[i + 1],
                            },
                        });
                    }
                }
            }
        }
        out
    }

    /// Bulk energy at `t`, right-continuous except at `t = tau`.
    pub fn energy_at(&self, t: f64) -> f64 {
        let pieces = self.pieces();
        let idx = pieces
            .iter()
            .position(|p| t < p.span().1)
            .unwrap_or(pieces.len() - 1);
        pieces[idx].energy(t)
    }

    /// Dual protocol for the sector-exchanged system: `E -> -E`, and times
    /// rescaled by `r` because the time unit becomes `1 / (m gamma)`.
    pub fn dual(&self, r: f64) -> Protocol {
        let segments = self
            .segments
            .iter()
            .map(|s| match s {
                Segment::Constant {
                    t_start,
                    t_end,
                    energy,
                } => Segment::Constant {
                    t_start: t_start * r,
                    t_end: t_end * r,
                    energy: -energy,
                },
                Segment::Sampled {
                    times,
                    energies,
                    slopes,
                } => Segment::Sampled {
                    times: times.iter().map(|t| t * r).collect(),
                    energies: energies.iter().map(|e| -e).collect(),
                    slopes: slopes.as_ref().map(|d| d.iter().map(|v| -v / r).collect()),
                },
            })
            .collect();
        let quenches = self
            .quenches
            .iter()
            .map(|q| Quench {
                time: q.time * r,
                before: -q.before,
                after: -q.after,
            })
            .collect();
        Protocol {
            segments,
            quenches,
            units: self.units,
        }
    }

    /// Copy expressed in physical units.
    pub fn to_physical(&self, params: &SystemParams) -> Protocol {
        let (eu, tu) = (params.energy_unit(), params.time_unit());
        let segments = self
            .segments
            .iter()
            .map(|s| match s {
                Segment::Constant {
                    t_start,
                    t_end,
                    energy,
                } => Segment::Constant {
                    t_start: t_start * tu,
                    t_end: t_end * tu,
                    energy: energy * eu,
                },
                Segment::Sampled {
                    times,
                    energies,
                    slopes,
                } => Segment::Sampled {
                    times: times.iter().map(|t| t * tu).collect(),
                    energies: energies.iter().map(|e| e * eu).collect(),
                    slopes: slopes.as_ref().map(|d| d.iter().map(|v| v * eu / tu).collect()),
                },
            })
            .collect();
        let quenches = self
            .quenches
            .iter()
            .map(|q| Quench {
                time: q.time * tu,
                before: q.before * eu,
                after: q.after * eu,
            })
            .collect();
        Protocol {
            segments,
            quenches,
            units: Units::Physical {
                energy_unit: eu,
                time_unit: tu,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub p: f64,
    /// Bulk energy gap at `t` (quenches are recorded on the protocol).
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Conserved constant along the trajectory, when it is an optimal one.
    pub kappa: Option<f64>,
    pub units: Units,
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>, kappa: Option<f64>) -> Self {
        Trajectory {
            samples,
            kappa,
            units: Units::Scaled,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.p).collect()
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("non-empty trajectory")
    }

    /// Checks the structural invariants: strictly increasing times and
    /// probabilities within `[0, 1]`.
    pub fn check(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::domain("empty trajectory"));
        }
        if self.samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::domain("trajectory times must be strictly increasing"));
        }
        if self.samples.iter().any(|s| !(0.0..=1.0).contains(&s.p)) {
            return Err(Error::domain("probability outside [0, 1]"));
        }
        Ok(())
    }

    pub fn to_physical(&self, params: &SystemParams) -> Trajectory {
        let (eu, tu) = (params.energy_unit(), params.time_unit());
        Trajectory {
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    t: s.t * tu,
                    p: s.p,
                    e: s.e * eu,
                })
                .collect(),
            kappa: self.kappa,
            units: Units::Physical {
                energy_unit: eu,
                time_unit: tu,
            },
        }
    }
}

/// Output of the optimal-control solver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSolution {
    pub kappa_tau: f64,
    pub direction: Direction,
    pub trajectory: Trajectory,
    pub protocol: Protocol,
    /// Minimal work; only the heat part when boundary energies are missing.
    pub w_min: f64,
    /// `-integral E_kappa(p) dp`.
    pub heat: f64,
    /// `E(tau) p(tau) - E(0) p(0)`; `None` when boundary energies are missing.
    pub delta_e: Option<f64>,
    pub tau_min: f64,
    pub p_final: f64,
    pub quench_in: Option<Quench>,
    pub quench_out: Option<Quench>,
    pub units: Units,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn erasure(tau: f64) -> Boundary {
        Boundary::fixed(0.5, 1e-5, tau)
    }

    #[test]
    fn erasure_problem_is_cooling() {
        let params = SystemParams::from_ratio(1.0).unwrap();
        let tm = 5e4f64.ln();
        let p = validate_problem(&params, &erasure(5.0 * tm)).unwrap();
        assert_eq!(p.direction, Direction::Cooling);
        assert_eq!(p.direction.sign(), -1.0);
    }

    #[test]
    fn too_short_duration_is_infeasible() {
        let params = SystemParams::from_ratio(1.0).unwrap();
        let tm = 5e4f64.ln();
        match validate_problem(&params, &erasure(0.5 * tm)) {
            Err(Error::InfeasibleDuration { tau_min, .. }) => {
                assert!((tau_min - 10.819778284410283).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_is_not_an_error() {
        let params = SystemParams::from_ratio(1.0).unwrap();
        let p = validate_problem(&params, &Boundary::fixed(0.3, 0.3, 1.0)).unwrap();
        assert_eq!(p.direction, Direction::Identity);
        assert_eq!(p.tau_min, 0.0);
    }

    #[test]
    fn probabilities_at_the_edges_are_rejected() {
        let params = SystemParams::from_ratio(1.0).unwrap();
        for (p0, p1) in [(0.0, 0.5), (0.5, 1.0), (0.5, 1e-13), (1.5, 0.5)] {
            assert!(matches!(
                validate_problem(&params, &Boundary::fixed(p0, p1, 100.0)),
                Err(Error::Domain(_))
            ));
        }
    }

    #[test]
    fn missing_target_is_reported() {
        let params = SystemParams::from_ratio(1.0).unwrap();
        let b = Boundary {
            p0: 0.5,
            p_tau: None,
            e0: None,
            e_tau: None,
            tau: 1.0,
        };
        assert_eq!(
            validate_problem(&params, &b),
            Err(Error::MissingBoundary("p_tau or E_tau"))
        );
    }

    #[test]
    fn degeneracies_and_ratio_agree() {
        let a = SystemParams::from_degeneracies(3, 6).unwrap();
        let b = SystemParams::from_ratio(2.0).unwrap();
        assert_eq!(a.r.to_bits(), b.r.to_bits());
        assert!(SystemParams::from_degeneracies(0, 1).is_err());
        assert!(SystemParams::from_ratio(-1.0).is_err());
    }

    #[test]
    fn protocol_rejects_gaps_and_undeclared_jumps() {
        let gap = Protocol::new(
            vec![
                Segment::Constant {
                    t_start: 0.0,
                    t_end: 1.0,
                    energy: 0.0,
                },
                Segment::Constant {
                    t_start: 1.5,
                    t_end: 2.0,
                    energy: 0.0,
                },
            ],
            vec![],
        );
        assert!(gap.is_err());
        let jump = Protocol::new(
            vec![
                Segment::Constant {
                    t_start: 0.0,
                    t_end: 1.0,
                    energy: 0.0,
                },
                Segment::Constant {
                    t_start: 1.0,
                    t_end: 2.0,
                    energy: 1.0,
                },
            ],
            vec![],
        );
        assert!(jump.is_err());
        let off_grid = Protocol::new(
            vec![Segment::Constant {
                t_start: 0.0,
                t_end: 1.0,
                energy: 0.0,
            }],
            vec![Quench {
                time: 0.5,
                before: 0.0,
                after: 1.0,
            }],
        );
        assert!(off_grid.is_err());
    }

    #[test]
    fn piecewise_constant_records_all_quenches() {
        let p = Protocol::piecewise_constant(&[1.0, 2.0, 2.0], 3.0, 0.0, 5.0).unwrap();
        let times: Vec<f64> = p.quenches().iter().map(|q| q.time).collect();
        assert_eq!(times, vec![0.0, 1.0, 3.0]);
        assert_eq!(p.initial_energy(), 0.0);
        assert_eq!(p.final_energy(), 5.0);
        assert_eq!(p.energy_at(1.5), 2.0);
    }

    #[test]
    fn hermite_piece_matches_cubic() {
        // E(t) = t^3 on [1, 2]
        let piece = Piece::Hermite {
            t0: 1.0,
            t1: 2.0,
            e0: 1.0,
            e1: 8.0,
            d0: 3.0,
            d1: 12.0,
        };
        for t in [1.0, 1.25, 1.5, 1.9, 2.0] {
            assert!((piece.energy(t) - t * t * t).abs() < 1e-13);
            assert!((piece.rate(t) - 3.0 * t * t).abs() < 1e-12);
        }
    }
}
