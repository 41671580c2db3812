use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thermoctl_core::control::{self, SolverConfig};
use thermoctl_core::dynamics::{self, equilibrium_energy};
use thermoctl_core::erasure::{self, log_grid, ErasureSpec};
use thermoctl_core::oracle;
use thermoctl_core::speed_limit::{self, tau_min_scaled};
use thermoctl_core::{validate_problem, Boundary, Direction, OptimalSolution, Problem, Protocol, Quench, SystemParams, Trajectory};

use crate::args::{DurationArgs, Format, FreeFinalArgs, ModelArgs, OptimalArgs, OracleArgs, OutputArgs, SimulateArgs, SpeedLimitArgs, SweepArgs, UnitsArg};
use crate::error::CliError;
use crate::protocol_file;

/// Physical size of one scaled energy and time unit (both 1 in scaled mode).
#[derive(Debug, Clone, Copy)]
pub struct Scale {
    pub energy: f64,
    pub time: f64,
    pub physical: bool,
}

impl Scale {
    fn label(&self) -> &'static str {
        if self.physical {
            "physical"
        } else {
            "scaled"
        }
    }
}

pub fn build_params(model: &ModelArgs) -> Result<(SystemParams, Scale), CliError> {
    let mut params = match (model.n, model.m, model.r) {
        (Some(n), Some(m), None) => SystemParams::from_degeneracies(n, m)?,
        (None, None, Some(r)) => SystemParams::from_ratio(r)?,
        _ => return Err(CliError::usage("give either --r or both --n and --m")),
    };
    let physical = model.units == UnitsArg::Physical;
    if !physical && (model.beta.is_some() || model.gamma.is_some()) {
        return Err(CliError::usage("--beta and --gamma require --units physical"));
    }
    if let Some(beta) = model.beta {
        params = params.with_beta(beta)?;
    }
    if let Some(gamma) = model.gamma {
        params = params.with_gamma(gamma)?;
    }
    let scale = if physical {
        Scale {
            energy: params.energy_unit(),
            time: params.time_unit(),
            physical,
        }
    } else {
        Scale {
            energy: 1.0,
            time: 1.0,
            physical,
        }
    };
    Ok((params, scale))
}

fn resolve_tau(d: &DurationArgs, p0: f64, p_tau: f64, r: f64, scale: Scale) -> Result<f64, CliError> {
    match (d.tau, d.tau_ratio) {
        (Some(tau), None) => Ok(tau / scale.time),
        (None, Some(ratio)) => Ok(ratio * tau_min_scaled(p0, p_tau, r)?),
        (Some(_), Some(_)) => Err(CliError::usage("--tau and --tau-ratio are mutually exclusive")),
        (None, None) => Err(CliError::usage("one of --tau or --tau-ratio is required")),
    }
}

fn fixed_problem(
    model: &ModelArgs,
    p0: f64,
    p_tau: f64,
    e0: Option<f64>,
    e_tau: Option<f64>,
    duration: &DurationArgs,
) -> Result<(Problem, Scale), CliError> {
    let (params, scale) = build_params(model)?;
    let r = params.r;
    // Validate the probabilities before they reach tau_min or the equilibrium energies.
    validate_problem(&params, &Boundary::fixed(p0, p_tau, f64::MAX))?;
    let tau = resolve_tau(duration, p0, p_tau, r, scale)?;
    let e0 = e0.map(|e| e / scale.energy).unwrap_or_else(|| equilibrium_energy(p0, r));
    let e_tau = e_tau.map(|e| e / scale.energy).unwrap_or_else(|| equilibrium_energy(p_tau, r));
    let boundary = Boundary::fixed(p0, p_tau, tau).with_energies(e0, e_tau);
    Ok((validate_problem(&params, &boundary)?, scale))
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t,p,E` rows with the boundary quenches written as repeated times.
pub fn trajectory_rows(traj: &Trajectory, quench_in: Option<&Quench>, quench_out: Option<&Quench>) -> Vec<[f64; 3]> {
    let mut rows = Vec::with_capacity(traj.samples.len() + 2);
    if let Some(q) = quench_in {
        rows.push([traj.first().t, traj.first().p, q.before]);
    }
    rows.extend(traj.samples.iter().map(|s| [s.t, s.p, s.e]));
    if let Some(q) = quench_out {
        rows.push([traj.last().t, traj.last().p, q.after]);
    }
    rows
}

pub fn rows_to_csv(rows: &[[f64; 3]]) -> String {
    let mut out = String::from("t,p,E\n");
    for [t, p, e] in rows {
        let _ = writeln!(out, "{},{},{}", fmt(*t), fmt(*p), fmt(*e));
    }
    out
}

#[derive(Serialize)]
struct Row {
    t: f64,
    p: f64,
    #[serde(rename = "E")]
    e: f64,
}

fn rows_to_json(rows: &[[f64; 3]]) -> String {
    let rows: Vec<Row> = rows.iter().map(|&[t, p, e]| Row { t, p, e }).collect();
    serde_json::to_string_pretty(&rows).expect("serializable") + "\n"
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Write the trajectory file (when `--out` is given) and return the summary.
fn emit(output: &OutputArgs, rows: &[[f64; 3]], summary: String) -> Result<String, CliError> {
    if let Some(prefix) = &output.out {
        let (body, ext) = match output.format {
            Format::Csv => (rows_to_csv(rows), ".csv"),
            Format::Json => (rows_to_json(rows), ".json"),
        };
        write_file(&with_suffix(prefix, ext), &body)?;
        write_file(&with_suffix(prefix, ".summary.json"), &summary)?;
    }
    Ok(summary)
}

fn scale_quench(q: Option<Quench>, scale: Scale) -> Option<Quench> {
    q.map(|q| Quench {
        time: q.time * scale.time,
        before: q.before * scale.energy,
        after: q.after * scale.energy,
    })
}

fn scale_trajectory(traj: &Trajectory, params: &SystemParams, scale: Scale) -> Trajectory {
    if scale.physical {
        traj.to_physical(params)
    } else {
        traj.clone()
    }
}

#[derive(Serialize)]
pub struct OptimalSummary {
    pub kappa_tau: f64,
    #[serde(rename = "W_min")]
    pub w_min: f64,
    pub heat: f64,
    #[serde(rename = "delta_E")]
    pub delta_e: Option<f64>,
    pub tau: f64,
    pub tau_min: f64,
    #[serde(rename = "delta_F_neq")]
    pub delta_f_neq: Option<f64>,
    pub p_final: f64,
    pub direction: Direction,
    pub quenches: Vec<Quench>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unimodal: Option<bool>,
    pub units: &'static str,
}

fn summarize(problem: &Problem, sol: &OptimalSolution, scale: Scale, unimodal: Option<bool>) -> Result<OptimalSummary, CliError> {
    let b = &problem.boundary;
    let end = Boundary {
        p_tau: Some(sol.p_final),
        ..*b
    };
    let delta_f = match (b.e0, b.e_tau) {
        (Some(_), Some(_)) => Some(dynamics::delta_f_neq(&end, &problem.params)? * scale.energy),
        _ => None,
    };
    Ok(OptimalSummary {
        kappa_tau: sol.kappa_tau,
        w_min: sol.w_min * scale.energy,
        heat: sol.heat * scale.energy,
        delta_e: sol.delta_e.map(|x| x * scale.energy),
        tau: b.tau * scale.time,
        tau_min: sol.tau_min * scale.time,
        delta_f_neq: delta_f,
        p_final: sol.p_final,
        direction: sol.direction,
        quenches: [sol.quench_in, sol.quench_out]
            .into_iter()
            .filter_map(|q| scale_quench(q, scale))
            .collect(),
        unimodal,
        units: scale.label(),
    })
}

fn solution_output(
    problem: &Problem,
    sol: &OptimalSolution,
    scale: Scale,
    output: &OutputArgs,
    unimodal: Option<bool>,
) -> Result<String, CliError> {
    let traj = scale_trajectory(&sol.trajectory, &problem.params, scale);
    let rows = trajectory_rows(
        &traj,
        scale_quench(sol.quench_in, scale).as_ref(),
        scale_quench(sol.quench_out, scale).as_ref(),
    );
    let summary = to_json(&summarize(problem, sol, scale, unimodal)?);
    if let Some(prefix) = &output.out {
        let protocol = if scale.physical { sol.protocol.to_physical(&problem.params) } else { sol.protocol.clone() };
        write_file(&with_suffix(prefix, ".protocol"), &protocol_file::write(&protocol))?;
    }
    emit(output, &rows, summary)
}

pub fn solver_config(output: &OutputArgs) -> Result<SolverConfig, CliError> {
    if output.samples < 2 {
        return Err(CliError::usage("--samples must be at least 2"));
    }
    Ok(SolverConfig {
        samples: output.samples,
        ..Default::default()
    })
}

pub fn optimal(args: &OptimalArgs) -> Result<String, CliError> {
    let (problem, scale) = fixed_problem(&args.model, args.p0, args.p_tau, args.e0, args.e_tau, &args.duration)?;
    let sol = control::solve_with(&problem, &solver_config(&args.output)?)?;
    solution_output(&problem, &sol, scale, &args.output, None)
}

pub fn free_final(args: &FreeFinalArgs) -> Result<String, CliError> {
    let (params, scale) = build_params(&args.model)?;
    let r = params.r;
    validate_problem(&params, &Boundary::fixed(args.p0, args.p0, 1.0))?;
    let e0 = args.e0.map(|e| e / scale.energy).unwrap_or_else(|| equilibrium_energy(args.p0, r));
    let boundary = Boundary::free_final(args.p0, args.e_tau / scale.energy, args.tau / scale.time).with_initial_energy(e0);
    let problem = validate_problem(&params, &boundary)?;
    let free = control::solve_free_final_with(&problem, &solver_config(&args.output)?)?;
    solution_output(&problem, &free.solution, scale, &args.output, Some(free.unimodal))
}

#[derive(Serialize)]
struct SpeedLimitReport {
    tau_min: f64,
    direction: Direction,
    feasible: Option<bool>,
    margin: Option<f64>,
    units: &'static str,
}

pub fn speed_limit(args: &SpeedLimitArgs) -> Result<String, CliError> {
    let (params, scale) = build_params(&args.model)?;
    let tau_min = speed_limit::tau_min(args.p0, args.p_tau, &params)?;
    let (feasible, margin) = match args.tau {
        Some(tau) => {
            let f = speed_limit::feasibility(args.p0, args.p_tau, tau / scale.time, &params)?;
            (Some(f.feasible), Some(f.margin))
        }
        None => (None, None),
    };
    Ok(to_json(&SpeedLimitReport {
        tau_min: tau_min * scale.time,
        direction: Direction::between(args.p0, args.p_tau),
        feasible,
        margin,
        units: scale.label(),
    }))
}

/// Returns the CSV and whether any row succeeded.
pub fn erasure_sweep(args: &SweepArgs) -> Result<(String, bool), CliError> {
    if args.r_points == 0 || !(args.r_min > 0.0 && args.r_max >= args.r_min) {
        return Err(CliError::usage("need 0 < r-min <= r-max and r-points >= 1"));
    }
    let spec = ErasureSpec {
        p_tau: args.p_tau,
        r_grid: log_grid(args.r_min, args.r_max, args.r_points),
        duration_grid: args.durations.clone(),
        ..Default::default()
    };
    let rows = erasure::erasure_sweep(&spec)?;
    let mut out = String::from("r,tau_ratio,W_min,kappa_tau,delta_F_neq,status\n");
    for row in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt(row.r),
            fmt(row.tau_ratio),
            fmt(row.w_min),
            fmt(row.kappa_tau),
            fmt(row.delta_f_neq),
            row.status.replace([',', '\n'], ";")
        );
    }
    if let Some(path) = &args.out {
        write_file(path, &out)?;
    }
    Ok((out, rows.iter().any(|r| r.is_ok())))
}

#[derive(Serialize)]
struct SimulationReport {
    work: f64,
    p_final: f64,
    tau: f64,
    units: &'static str,
}

pub fn simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let (params, scale) = build_params(&args.model)?;
    let text = fs::read_to_string(&args.protocol).map_err(|e| CliError::io(format!("reading {}", args.protocol.display()), e))?;
    let protocol: Protocol = protocol_file::parse(&text, 1.0 / scale.time, 1.0 / scale.energy)?;
    let cfg = dynamics::SimConfig::default();
    let traj = dynamics::simulate_with(&protocol, args.p0, &params, &cfg)?;
    let work = dynamics::work_of(&protocol, &traj)?;
    let tau = protocol.duration();
    let shown = scale_trajectory(&traj, &params, scale);
    let rows = trajectory_rows(
        &shown,
        scale_quench(protocol.quench_at(0.0).copied(), scale).as_ref(),
        scale_quench(protocol.quench_at(tau).copied(), scale).as_ref(),
    );
    let summary = to_json(&SimulationReport {
        work: work * scale.energy,
        p_final: traj.last().p,
        tau: tau * scale.time,
        units: scale.label(),
    });
    emit(&args.output, &rows, summary)
}

#[derive(Serialize)]
struct OracleReport {
    #[serde(rename = "N")]
    n: usize,
    work: f64,
    #[serde(rename = "W_min")]
    w_min: f64,
    #[serde(rename = "gap_to_Wmin")]
    gap_to_w_min: f64,
    seed: u64,
    feasible: bool,
    p_reached: f64,
    no_improvement: bool,
    units: &'static str,
}

pub fn oracle(args: &OracleArgs) -> Result<String, CliError> {
    let (problem, scale) = fixed_problem(&args.model, args.p0, args.p_tau, args.e0, args.e_tau, &args.duration)?;
    if args.levels == 0 {
        return Err(CliError::usage("--levels must be at least 1"));
    }
    let found = oracle::optimize(args.levels, &problem, args.seed)?;
    let cfg = SolverConfig {
        samples: 2,
        ..Default::default()
    };
    let w_min = control::solve_with(&problem, &cfg)?.w_min;
    if let Some(path) = &args.out {
        let protocol = found.protocol.to_protocol()?;
        let protocol = if scale.physical { protocol.to_physical(&problem.params) } else { protocol };
        write_file(path, &protocol_file::write(&protocol))?;
    }
    Ok(to_json(&OracleReport {
        n: args.levels,
        work: found.work * scale.energy,
        w_min: w_min * scale.energy,
        gap_to_w_min: (found.work - w_min) * scale.energy,
        seed: args.seed,
        feasible: found.feasible,
        p_reached: found.p_reached,
        no_improvement: found.no_improvement,
        units: scale.label(),
    }))
}
