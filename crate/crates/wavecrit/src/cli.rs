//! Command-line orchestration.
//!
//! One binary, seven subcommands, one configuration tree (see
//! [`crate::config`]). Every subcommand loads the same configuration
//! (file, then `--override` dot-paths, then `--out`), runs its slice of the
//! pipeline, prints a human-readable summary to stdout, and writes the
//! artifacts its `[emit]` toggles allow into `output_dir`:
//!
//! * `spectral` — closed-form wave data (speed, decay rate, kernel roots)
//!   as JSON on stdout.
//! * `verify-bounds` — barrier-constant selection plus the certified
//!   inequality sweep; writes `bounds.json`.
//! * `solve` — the fixed-point solve; writes `wave_profile.csv`,
//!   `trace.csv`, `solve.json`. A failed solve still writes the trace for
//!   forensics.
//! * `diagnose` — the full check suite on a solved (or `--profile`-loaded)
//!   wave; writes `wave_report.json`; exits nonzero if any check fails.
//! * `simulate` — the initial-value run; writes `front.csv`, field
//!   snapshots, and `sim.json` with the fitted front speeds.
//! * `crosscheck` — solve + simulate + comoving comparison; writes
//!   `crosscheck.json`; exits nonzero if the profiles disagree.
//! * `report` — merges the JSON artifacts present in `output_dir` into
//!   `report.json` with an overall verdict.
//!
//! Module errors leave as one JSON object `{"kind", "message"}` on stderr
//! with exit code 2; failed checks exit 1; success exits 0.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::bounds::{certify_inequalities, select_constants, BoundSet};
use crate::config::{load_config, split_override, RunConfig};
use crate::diagnostics::diagnose;
use crate::error::WaveError;
use crate::io::{
    read_json_value, read_profile_csv, write_front_csv, write_json, write_profile_csv,
    write_snapshot_csv, write_trace_csv,
};
use crate::model::{derive_spectral, SpectralData};
use crate::pdesim::{extract_comoving_profile, measure_front_speed, run as run_sim};
use crate::solver::{solve_critical_wave, SolveOutcome};
use crate::tolerances::{
    TOL_CROSSCHECK_PLATEAU_REL, TOL_CROSSCHECK_SHAPE_REL, TOL_CROSSCHECK_SUP_REL,
};
use crate::waveop::{WaveGrid, WaveProfile};

/// Points per inequality in the `verify-bounds` certification sweep.
const CERT_SWEEP_POINTS: usize = 4096;

#[derive(Debug, Parser)]
#[command(
    name = "wavecrit",
    version,
    about = "Critical traveling waves of a diffusive epidemic model: solver, certification, diagnostics, and direct-simulation cross-checks"
)]
pub struct Cli {
    /// Configuration file (TOML; every key optional).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory for artifacts (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Dot-path configuration override, e.g. `model.beta=2.5`; repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the closed-form spectral data for the configured model.
    Spectral,
    /// Select barrier constants and certify the comparison inequalities.
    VerifyBounds,
    /// Compute the critical wave profile.
    Solve,
    /// Run every diagnostic check on a wave profile.
    Diagnose {
        /// Read this profile CSV instead of solving first.
        #[arg(long, value_name = "PATH")]
        profile: Option<PathBuf>,
    },
    /// Simulate the initial-value problem and fit the front speed.
    Simulate,
    /// Compare the solved wave against the simulated front shape.
    Crosscheck,
    /// Merge previously written JSON artifacts into one summary.
    Report,
}

/// Parses `std::env::args`, runs, and maps the outcome to an exit code
/// (0 = all executed checks passed, 1 = some check failed, 2 = error).
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let payload = json!({ "kind": e.kind(), "message": e.to_string() });
            eprintln!("{payload}");
            ExitCode::from(2)
        }
    }
}

/// Runs one parsed invocation. `Ok(flag)` reports whether every executed
/// check passed; hard failures become `Err`.
pub fn execute(cli: Cli) -> Result<bool, WaveError> {
    let overrides = cli
        .overrides
        .iter()
        .map(|raw| split_override(raw))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cfg = load_config(cli.config.as_deref(), &overrides)?;
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    match cli.command {
        Command::Spectral => cmd_spectral(&cfg),
        Command::VerifyBounds => cmd_verify_bounds(&cfg),
        Command::Solve => cmd_solve(&cfg),
        Command::Diagnose { profile } => cmd_diagnose(&cfg, profile.as_deref()),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Crosscheck => cmd_crosscheck(&cfg),
        Command::Report => cmd_report(&cfg),
    }
}

fn cmd_spectral(cfg: &RunConfig) -> Result<bool, WaveError> {
    let sp = derive_spectral(&cfg.model)?;
    let text = serde_json::to_string_pretty(&sp)
        .map_err(|e| WaveError::Config(format!("cannot serialize spectral data: {e}")))?;
    println!("{text}");
    Ok(true)
}

fn cmd_verify_bounds(cfg: &RunConfig) -> Result<bool, WaveError> {
    let sp = derive_spectral(&cfg.model)?;
    let bs = select_constants(&cfg.model, &sp)?;
    let cert = certify_inequalities(&cfg.model, &sp, &bs, CERT_SWEEP_POINTS);
    let passed = cert.passed();
    println!(
        "constants: eps = {:.6e}, l2 = {:.6e}; junctions xi3 = {:.4}, xi2 = {:.4}, xi1 = {:.4}",
        bs.eps, bs.l2, bs.xi3, bs.xi2, bs.xi1
    );
    println!(
        "certification: {} ({} sample points per inequality, {} violations; worst margins: \
         super-I {:.3e}, sub-S {:.3e}, sub-I {:.3e})",
        verdict(passed),
        cert.points_per_inequality,
        cert.violations,
        cert.worst_super_i,
        cert.worst_sub_s,
        cert.worst_sub_i
    );
    if cfg.emit.report {
        write_json(
            &cfg.output_dir.join("bounds.json"),
            &json!({ "passed": passed, "bound_set": bs, "certification": cert }),
        )?;
    }
    Ok(passed)
}

/// Shared solve path: derives everything from the configuration and writes
/// the forensic trace even when the iteration fails to converge.
fn solve_pipeline(
    cfg: &RunConfig,
) -> Result<(SpectralData, BoundSet, WaveGrid, SolveOutcome), WaveError> {
    let sp = derive_spectral(&cfg.model)?;
    let bs = select_constants(&cfg.model, &sp)?;
    let grid = cfg.grid.build()?;
    match solve_critical_wave(&cfg.model, &sp, &bs, &grid, &cfg.solve, None) {
        Ok(out) => Ok((sp, bs, grid, out)),
        Err(WaveError::NoConvergence {
            iterations,
            last_residual,
            trace,
        }) => {
            if cfg.emit.trace {
                // Best effort: the forensic artifact must not mask the error.
                let _ = write_trace_csv(&cfg.output_dir.join("trace.csv"), &trace);
            }
            Err(WaveError::NoConvergence {
                iterations,
                last_residual,
                trace,
            })
        }
        Err(e) => Err(e),
    }
}

fn cmd_solve(cfg: &RunConfig) -> Result<bool, WaveError> {
    let (_, _, grid, out) = solve_pipeline(cfg)?;
    println!(
        "solve: converged in {} iterations (weighted residual {:.3e}, sup {:.3e}, \
         tail {:.3e}, theta {}, mixing depth {})",
        out.iterations,
        out.final_residual,
        out.final_residual_sup,
        out.final_residual_tail,
        out.final_theta,
        out.anderson_depth
    );
    for ev in &out.events {
        println!("  event (iteration {}): {}", ev.iter, ev.what);
    }
    if cfg.emit.profile {
        write_profile_csv(&cfg.output_dir.join("wave_profile.csv"), &out.profile)?;
    }
    if cfg.emit.trace {
        write_trace_csv(&cfg.output_dir.join("trace.csv"), &out.trace)?;
    }
    if cfg.emit.report {
        write_json(
            &cfg.output_dir.join("solve.json"),
            &json!({
                "passed": true,
                "grid": grid,
                "iterations": out.iterations,
                "final_residual": out.final_residual,
                "final_residual_sup": out.final_residual_sup,
                "final_residual_tail": out.final_residual_tail,
                "final_theta": out.final_theta,
                "anderson_depth": out.anderson_depth,
                "events": out.events,
            }),
        )?;
    }
    Ok(true)
}

fn cmd_diagnose(cfg: &RunConfig, profile_path: Option<&std::path::Path>) -> Result<bool, WaveError> {
    let sp = derive_spectral(&cfg.model)?;
    let bs = select_constants(&cfg.model, &sp)?;
    let profile = match profile_path {
        Some(p) => read_profile_csv(p)?,
        None => solve_pipeline(cfg)?.3.profile,
    };
    let report = diagnose(&cfg.model, &sp, &bs, &profile)?;
    for c in &report.checks {
        println!(
            "{:32} {}  metric {: >12.5e} vs threshold {: >12.5e}  ({})",
            c.name,
            verdict(c.passed),
            c.metric,
            c.threshold,
            c.detail
        );
    }
    let passed = report.all_passed();
    println!(
        "diagnostics: {} ({}/{} checks passed)",
        verdict(passed),
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len()
    );
    if cfg.emit.report {
        write_json(
            &cfg.output_dir.join("wave_report.json"),
            &json!({ "passed": passed, "report": report }),
        )?;
    }
    Ok(passed)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<bool, WaveError> {
    let snapshot_times = [0.5 * cfg.sim.t_end, cfg.sim.t_end];
    let out = run_sim(&cfg.model, &cfg.sim, &snapshot_times)?;
    println!(
        "simulate: {} steps at dt = {:.6e} (t = {}); max I = {:.6e}{}",
        out.steps,
        out.dt,
        out.final_state.t,
        out.max_i_history.last().map_or(f64::NAN, |s| s.max_i),
        if out.front_reached_boundary {
            "; front reached the boundary"
        } else {
            ""
        }
    );
    let fit = if out.front.len() >= 8 {
        let fit = measure_front_speed(&out.front)?;
        println!(
            "speed: plain {:.5} +- {:.1e}, log-corrected {:.5} (drift coefficient {:.3}, \
             {} samples)",
            fit.c_plain, fit.c_plain_stderr, fit.c_log, fit.k_log, fit.samples_used
        );
        Some(fit)
    } else {
        println!(
            "speed: no fit ({} front samples); the infected field {} the tracking level",
            out.front.len(),
            if out.max_i_history.last().is_some_and(|s| s.max_i
                < out.max_i_history.first().map_or(f64::INFINITY, |f| f.max_i))
            {
                "decayed below"
            } else {
                "never organized around"
            }
        );
        None
    };
    if cfg.emit.front {
        write_front_csv(&cfg.output_dir.join("front.csv"), &out.front)?;
    }
    if cfg.emit.snapshots {
        for st in &out.snapshots {
            let name = format!("snapshot_t{:.1}.csv", st.t);
            write_snapshot_csv(&cfg.output_dir.join(name), &out.x, st)?;
        }
    }
    if cfg.emit.report {
        write_json(
            &cfg.output_dir.join("sim.json"),
            &json!({
                "passed": true,
                "dt": out.dt,
                "steps": out.steps,
                "front_reached_boundary": out.front_reached_boundary,
                "front_samples": out.front.len(),
                "final_max_i": out.max_i_history.last().map(|s| s.max_i),
                "speed_fit": fit,
            }),
        )?;
    }
    Ok(true)
}

fn cmd_crosscheck(cfg: &RunConfig) -> Result<bool, WaveError> {
    let (_, _, grid, sol) = solve_pipeline(cfg)?;
    let shape_lag = 10.0_f64.min(0.5 * cfg.sim.t_end);
    let out = run_sim(&cfg.model, &cfg.sim, &[cfg.sim.t_end - shape_lag])?;

    let prof = &sol.profile;
    let xi_peak = infected_peak_abscissa(prof)?;

    // The extraction grid re-centers the solver grid on the solver's own
    // infected peak, so sample j of both profiles refers to the same
    // distance from the front.
    let shifted = WaveGrid::new(
        grid.node(0) - xi_peak,
        grid.node(grid.n - 1) - xi_peak,
        grid.h,
    )?;
    let ext = extract_comoving_profile(&out.x, &out.final_state, &shifted)?;

    let max_i = prof.i.iter().cloned().fold(0.0_f64, f64::max);
    let sup_rel = (0..grid.n)
        .map(|j| (ext.i[j] - prof.i[j]).abs())
        .fold(0.0_f64, f64::max)
        / max_i;

    let plateau: Vec<usize> = (0..grid.n)
        .filter(|&j| grid.node(j) > xi_peak + 30.0)
        .collect();
    if plateau.is_empty() {
        return Err(WaveError::CheckFailed(
            "the grid keeps no plateau window right of the infected peak; widen xi_max".into(),
        ));
    }
    let mean = |v: &[f64]| plateau.iter().map(|&j| v[j]).sum::<f64>() / plateau.len() as f64;
    let plateau_sim = mean(&ext.s);
    let plateau_sol = mean(&prof.s);
    let plateau_rel = (plateau_sim - plateau_sol).abs() / cfg.model.s_minus_inf;

    let earlier = out.snapshots.first().ok_or_else(|| {
        WaveError::CheckFailed("the simulation recorded no earlier snapshot to compare".into())
    })?;
    let ext_earlier = extract_comoving_profile(&out.x, earlier, &shifted)?;
    let shape_rel = (0..grid.n)
        .map(|j| (ext_earlier.i[j] - ext.i[j]).abs())
        .fold(0.0_f64, f64::max)
        / max_i;

    let sup_ok = sup_rel <= TOL_CROSSCHECK_SUP_REL;
    let plateau_ok = plateau_rel <= TOL_CROSSCHECK_PLATEAU_REL;
    let shape_ok = shape_rel <= TOL_CROSSCHECK_SHAPE_REL;
    println!(
        "crosscheck profile: {}  sup |I_sim - I_wave| = {:.3e} of max I (tolerance {:.0e})",
        verdict(sup_ok),
        sup_rel,
        TOL_CROSSCHECK_SUP_REL
    );
    println!(
        "crosscheck plateau: {}  S plateau sim {:.6e} vs wave {:.6e} (|diff| = {:.3e} of S_-inf, \
         tolerance {:.0e})",
        verdict(plateau_ok),
        plateau_sim,
        plateau_sol,
        plateau_rel,
        TOL_CROSSCHECK_PLATEAU_REL
    );
    println!(
        "crosscheck shape: {}  re-extraction {:.1} time units apart moved I by {:.3e} of max I \
         (tolerance {:.0e})",
        verdict(shape_ok),
        shape_lag,
        shape_rel,
        TOL_CROSSCHECK_SHAPE_REL
    );
    let passed = sup_ok && plateau_ok && shape_ok;
    if cfg.emit.report {
        write_json(
            &cfg.output_dir.join("crosscheck.json"),
            &json!({
                "passed": passed,
                "sup_i_rel": sup_rel,
                "plateau_sim": plateau_sim,
                "plateau_wave": plateau_sol,
                "plateau_rel": plateau_rel,
                "shape_lag": shape_lag,
                "shape_rel": shape_rel,
                "solver_iterations": sol.iterations,
                "sim_steps": out.steps,
            }),
        )?;
    }
    Ok(passed)
}

fn cmd_report(cfg: &RunConfig) -> Result<bool, WaveError> {
    const ARTIFACTS: [&str; 5] = [
        "bounds.json",
        "solve.json",
        "wave_report.json",
        "sim.json",
        "crosscheck.json",
    ];
    let mut merged = serde_json::Map::new();
    let mut passed = true;
    let mut found = 0usize;
    for name in ARTIFACTS {
        let path = cfg.output_dir.join(name);
        let key = name.trim_end_matches(".json").to_string();
        if path.is_file() {
            let value = read_json_value(&path)?;
            if let Some(flag) = value.get("passed").and_then(|v| v.as_bool()) {
                passed &= flag;
            }
            merged.insert(key, value);
            found += 1;
        } else {
            merged.insert(key, serde_json::Value::Null);
        }
    }
    let summary = json!({
        "passed": passed,
        "artifacts_found": found,
        "artifacts": merged,
    });
    write_json(&cfg.output_dir.join("report.json"), &summary)?;
    println!(
        "report: {} ({} of {} artifacts merged into report.json)",
        verdict(passed),
        found,
        ARTIFACTS.len()
    );
    Ok(passed)
}

/// Sub-grid abscissa of the infected maximum via a parabolic fit through the
/// three nodes around the discrete peak.
fn infected_peak_abscissa(profile: &WaveProfile) -> Result<f64, WaveError> {
    let n = profile.grid.n;
    let jpk = (0..n)
        .max_by(|&a, &b| profile.i[a].total_cmp(&profile.i[b]))
        .unwrap();
    if jpk == 0 || jpk == n - 1 {
        return Err(WaveError::CheckFailed(
            "the wave profile's infected maximum sits on the grid edge".into(),
        ));
    }
    let (y0, y1, y2) = (profile.i[jpk - 1], profile.i[jpk], profile.i[jpk + 1]);
    let den = y0 - 2.0 * y1 + y2;
    Ok(if den != 0.0 {
        profile.grid.node(jpk) + 0.5 * profile.grid.h * (y0 - y2) / den
    } else {
        profile.grid.node(jpk)
    })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
