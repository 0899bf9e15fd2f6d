//! Direct time-domain simulation of the spatial epidemic system.
//!
//! The solver crate's other half works in the traveling frame; this module
//! integrates the original initial-value problem
//!
//! ```text
//!   S_t = d1 S_xx - f(S, I)
//!   I_t = d2 I_xx + f(S, I) - gamma I
//!   R_t = d3 R_xx + gamma I          (optional)
//! ```
//!
//! on `[0, L]` with reflecting (zero-flux) ends, a susceptible background
//! `S = S_-inf`, and a small infected seed at the left edge. A pulled
//! invasion front forms and moves right; tracking a fixed level set of `I`
//! yields a dynamic speed measurement that should approach the spectral
//! speed `c*` (from below, with the classical logarithmic drift of pulled
//! fronts), and re-sampling the fields around the front's peak yields a
//! comoving profile directly comparable with the wave solver's output.
//!
//! Discretization: explicit Euler in time and the standard second-order
//! three-point Laplacian, written in flux form so the reflecting ends
//! telescope exactly — the discrete node sum of each field changes only
//! through its reaction term, which makes total `S + I + R` mass exactly
//! conserved when `R` is evolved. The time step obeys the diffusive bound
//! `dt <= 0.4 dx^2 / max(d)` and the reaction bound `dt (beta + gamma) < 1`;
//! both are validated, and a runtime detector aborts on NaNs, blow-up past
//! ten times the initial amplitude, or negative densities.
//!
//! Stepping is sequential and single-threaded: the acceptance-scale grids
//! (a few thousand nodes) update in well under a microsecond per sweep, so
//! spatial threading would cost more in synchronization than it buys; the
//! loop is written as three flat array passes that autovectorize.

use serde::{Deserialize, Serialize};

use crate::error::WaveError;
use crate::model::ModelParams;
use crate::solver::lstsq_truncated;
use crate::waveop::{WaveGrid, WaveProfile};

/// Configuration of one initial-value run.
///
/// Optional fields default from the model: the front-tracking `level` and
/// the seed amplitude `ic_amplitude` scale with the infected plateau bound
/// `m = (beta - gamma) s_minus_inf / gamma`, and the time step defaults to
/// the diffusive stability bound. All lengths are in the spatial units of
/// the diffusivities.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Spatial extent `L`; the grid covers `[0, L]`.
    pub domain_length: f64,
    /// Spatial step.
    pub dx: f64,
    /// Time horizon.
    pub t_end: f64,
    /// Time step; `None` selects `0.4 dx^2 / max(d)`. The step is always
    /// snapped down so that a whole number of steps spans `out_every`.
    pub dt: Option<f64>,
    /// Front-tracking threshold on `I`; `None` selects `0.1 m`.
    pub level: Option<f64>,
    /// Seed amplitude of the infected bump; `None` selects `0.01 m`.
    pub ic_amplitude: Option<f64>,
    /// Width of the seeded interval `[0, ic_width]`.
    pub ic_width: f64,
    /// Whether to evolve the recovered field (enables the mass invariant).
    pub include_r: bool,
    /// Interval between observation samples (front tracking, histories,
    /// instability checks, snapshots).
    pub out_every: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            domain_length: 400.0,
            dx: 0.1,
            t_end: 150.0,
            dt: None,
            level: None,
            ic_amplitude: None,
            ic_width: 5.0,
            include_r: false,
            out_every: 0.5,
        }
    }
}

/// Fields on the spatial grid at one instant. `r` is carried only when the
/// recovered equation is evolved.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Option<Vec<f64>>,
}

/// One front-position observation: the rightmost point where `I` crosses
/// the tracking level, located by linear interpolation.
#[derive(Debug, Clone, Copy)]
pub struct FrontSample {
    pub t: f64,
    pub x: f64,
}

/// One amplitude observation (used in the sub-threshold regime, where the
/// infected field must decay instead of forming a front).
#[derive(Debug, Clone, Copy)]
pub struct MaxISample {
    pub t: f64,
    pub max_i: f64,
}

/// Everything a finished run hands back.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    /// Node abscissas.
    pub x: Vec<f64>,
    /// Fields at the end of the run.
    pub final_state: SimState,
    /// Front trajectory (empty if the level was never crossed away from the
    /// right boundary).
    pub front: Vec<FrontSample>,
    /// Running maximum of the infected field at each sample time.
    pub max_i_history: Vec<MaxISample>,
    /// States captured at the first sample time at or after each requested
    /// snapshot time (requests beyond the horizon are silently unmet).
    pub snapshots: Vec<SimState>,
    /// Whether the level set ever reached the last node — speed fits should
    /// treat the record as truncated when set.
    pub front_reached_boundary: bool,
    /// The time step actually used (after snapping to the output cadence).
    pub dt: f64,
    /// Total number of steps taken.
    pub steps: usize,
}

/// Front-speed estimates from the late-time half of a front trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpeedFit {
    /// Plain least-squares slope of `x(t)`.
    pub c_plain: f64,
    /// Standard error of that slope.
    pub c_plain_stderr: f64,
    /// Speed from the pulled-front model `x(t) = c t - k ln t + const`,
    /// which absorbs the logarithmic approach to the asymptotic speed.
    pub c_log: f64,
    /// Fitted logarithmic-drift coefficient `k`.
    pub k_log: f64,
    /// Number of samples in the fit window.
    pub samples_used: usize,
}

/// Validated, fully-resolved run parameters.
struct Resolved {
    n: usize,
    dt: f64,
    steps_per_out: usize,
    nsteps: usize,
    level: f64,
    amp: f64,
}

fn resolve(params: &ModelParams, cfg: &SimConfig) -> Result<Resolved, WaveError> {
    params.validate()?;
    let positives = [
        ("domain_length", cfg.domain_length),
        ("dx", cfg.dx),
        ("t_end", cfg.t_end),
        ("out_every", cfg.out_every),
    ];
    for (name, v) in positives {
        if !v.is_finite() || v <= 0.0 {
            return Err(WaveError::InvalidParams(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if !cfg.ic_width.is_finite() || cfg.ic_width < 0.0 {
        return Err(WaveError::InvalidParams(format!(
            "ic_width must be nonnegative and finite, got {}",
            cfg.ic_width
        )));
    }
    let cells = cfg.domain_length / cfg.dx;
    if cells < 3.5 {
        return Err(WaveError::InvalidParams(
            "domain_length must span at least four spatial cells".into(),
        ));
    }
    let n = cells.round() as usize + 1;

    let max_d = if cfg.include_r {
        params.d1.max(params.d2).max(params.d3)
    } else {
        params.d1.max(params.d2)
    };
    let dt_bound = 0.4 * cfg.dx * cfg.dx / max_d;
    let dt_req = match cfg.dt {
        Some(v) => {
            if !v.is_finite() || v <= 0.0 {
                return Err(WaveError::InvalidParams(format!(
                    "dt must be positive and finite, got {v}"
                )));
            }
            if v > dt_bound * (1.0 + 1e-12) {
                return Err(WaveError::InvalidParams(format!(
                    "dt = {v} exceeds the diffusive stability bound 0.4 dx^2 / max(d) = {dt_bound:.6e}"
                )));
            }
            v
        }
        None => dt_bound,
    };
    // Snap the step down so a whole number of them spans one output
    // interval; the ceil keeps the snapped step at or below the requested
    // one, so the stability bound survives the adjustment.
    let steps_per_out = (cfg.out_every / dt_req.min(cfg.out_every) - 1e-9)
        .ceil()
        .max(1.0) as usize;
    let dt = cfg.out_every / steps_per_out as f64;
    if dt * (params.beta + params.gamma) >= 1.0 {
        return Err(WaveError::InvalidParams(format!(
            "dt = {dt} violates the reaction bound dt (beta + gamma) < 1; \
             shrink dt or out_every"
        )));
    }
    let nsteps = (cfg.t_end / dt).round().max(1.0) as usize;

    let plateau = (params.beta - params.gamma) * params.s_minus_inf / params.gamma;
    let level = match cfg.level {
        Some(v) => v,
        None if plateau > 0.0 => 0.1 * plateau,
        None => {
            return Err(WaveError::InvalidRegime(
                "the front-tracking level has no default when beta <= gamma; set level explicitly"
                    .into(),
            ))
        }
    };
    if !level.is_finite() || level <= 0.0 {
        return Err(WaveError::InvalidParams(format!(
            "level must be positive and finite, got {level}"
        )));
    }
    if plateau > 0.0 && level >= plateau {
        return Err(WaveError::InvalidParams(format!(
            "level = {level} must sit below the infected plateau bound {plateau}"
        )));
    }
    let amp = match cfg.ic_amplitude {
        Some(v) => v,
        None if plateau > 0.0 => 0.01 * plateau,
        None => {
            return Err(WaveError::InvalidRegime(
                "the seed amplitude has no default when beta <= gamma; set ic_amplitude explicitly"
                    .into(),
            ))
        }
    };
    if !amp.is_finite() || amp <= 0.0 {
        return Err(WaveError::InvalidParams(format!(
            "ic_amplitude must be positive and finite, got {amp}"
        )));
    }

    Ok(Resolved {
        n,
        dt,
        steps_per_out,
        nsteps,
        level,
        amp,
    })
}

fn build_initial(params: &ModelParams, cfg: &SimConfig, rv: &Resolved) -> (Vec<f64>, SimState) {
    let x: Vec<f64> = (0..rv.n).map(|j| cfg.dx * j as f64).collect();
    let s = vec![params.s_minus_inf; rv.n];
    let i: Vec<f64> = x
        .iter()
        .map(|&xx| if xx <= cfg.ic_width { rv.amp } else { 0.0 })
        .collect();
    let r = cfg.include_r.then(|| vec![0.0; rv.n]);
    (x, SimState { t: 0.0, s, i, r })
}

/// Builds the seeded initial condition on the run's grid: `S = s_minus_inf`
/// everywhere, `I = ic_amplitude` on `[0, ic_width]` and zero beyond, `R = 0`
/// when evolved. Returns the node abscissas alongside the state.
pub fn initial_state(
    params: &ModelParams,
    cfg: &SimConfig,
) -> Result<(Vec<f64>, SimState), WaveError> {
    let rv = resolve(params, cfg)?;
    Ok(build_initial(params, cfg, &rv))
}

/// Scratch buffers for the update sweep, reused across steps.
struct Stepper {
    dt: f64,
    inv_dx2: f64,
    f: Vec<f64>,
    new_s: Vec<f64>,
    new_i: Vec<f64>,
    new_r: Vec<f64>,
}

impl Stepper {
    fn new(n: usize, dx: f64, dt: f64) -> Self {
        Stepper {
            dt,
            inv_dx2: 1.0 / (dx * dx),
            f: vec![0.0; n],
            new_s: vec![0.0; n],
            new_i: vec![0.0; n],
            new_r: vec![0.0; n],
        }
    }

    /// One explicit Euler step. The three fields advance from the same old
    /// state (the recovered update reads the pre-step infected field), and
    /// the Laplacian's flux form makes the reflecting ends telescope.
    fn advance(&mut self, params: &ModelParams, state: &mut SimState) {
        let n = state.s.len();
        params.incidence_slice(&state.s, &state.i, &mut self.f);
        let dt = self.dt;
        let a1 = params.d1 * dt * self.inv_dx2;
        let a2 = params.d2 * dt * self.inv_dx2;
        let gdt = params.gamma * dt;
        {
            let s = &state.s;
            let i = &state.i;
            let f = &self.f;
            let ns = &mut self.new_s;
            let ni = &mut self.new_i;
            ns[0] = s[0] + a1 * (s[1] - s[0]) - dt * f[0];
            ni[0] = i[0] + a2 * (i[1] - i[0]) + dt * f[0] - gdt * i[0];
            for j in 1..n - 1 {
                ns[j] = s[j] + a1 * (s[j + 1] - 2.0 * s[j] + s[j - 1]) - dt * f[j];
                ni[j] = i[j] + a2 * (i[j + 1] - 2.0 * i[j] + i[j - 1]) + dt * f[j] - gdt * i[j];
            }
            ns[n - 1] = s[n - 1] + a1 * (s[n - 2] - s[n - 1]) - dt * f[n - 1];
            ni[n - 1] = i[n - 1] + a2 * (i[n - 2] - i[n - 1]) + dt * f[n - 1] - gdt * i[n - 1];
            if let Some(r) = state.r.as_deref() {
                let a3 = params.d3 * dt * self.inv_dx2;
                let nr = &mut self.new_r;
                nr[0] = r[0] + a3 * (r[1] - r[0]) + gdt * i[0];
                for j in 1..n - 1 {
                    nr[j] = r[j] + a3 * (r[j + 1] - 2.0 * r[j] + r[j - 1]) + gdt * i[j];
                }
                nr[n - 1] = r[n - 1] + a3 * (r[n - 2] - r[n - 1]) + gdt * i[n - 1];
            }
        }
        std::mem::swap(&mut state.s, &mut self.new_s);
        std::mem::swap(&mut state.i, &mut self.new_i);
        if let Some(r) = state.r.as_mut() {
            std::mem::swap(r, &mut self.new_r);
        }
    }
}

/// Scans the fields for NaNs, blow-up past `blowup`, or meaningfully
/// negative densities, reporting the step and time on failure.
fn check_fields(state: &SimState, blowup: f64, step: usize, t: f64) -> Result<(), WaveError> {
    let neg_floor = -1e-10 * blowup;
    let fields: [(&str, Option<&[f64]>); 3] = [
        ("S", Some(&state.s)),
        ("I", Some(&state.i)),
        ("R", state.r.as_deref()),
    ];
    for (name, field) in fields {
        let Some(field) = field else { continue };
        for &v in field {
            if !v.is_finite() {
                return Err(WaveError::Instability {
                    step,
                    t,
                    message: format!("non-finite value in the {name} field"),
                });
            }
            if v > blowup {
                return Err(WaveError::Instability {
                    step,
                    t,
                    message: format!(
                        "the {name} field exceeded ten times the initial maximum ({v:.3e})"
                    ),
                });
            }
            if v < neg_floor {
                return Err(WaveError::Instability {
                    step,
                    t,
                    message: format!("the {name} field went negative ({v:.3e})"),
                });
            }
        }
    }
    Ok(())
}

/// Advances a state by one (validated, snapped) time step and runs the
/// instability detector on the result. The state's field lengths must match
/// the grid implied by the configuration, and the recovered field must be
/// present exactly when `include_r` is set (the stability bound accounts for
/// `d3` only in that case).
pub fn step(
    state: &SimState,
    params: &ModelParams,
    cfg: &SimConfig,
) -> Result<SimState, WaveError> {
    let rv = resolve(params, cfg)?;
    let len_ok = state.s.len() == rv.n
        && state.i.len() == rv.n
        && state.r.as_ref().map_or(true, |r| r.len() == rv.n);
    if !len_ok {
        return Err(WaveError::InvalidGrid(format!(
            "state field lengths do not match the simulation grid ({} nodes)",
            rv.n
        )));
    }
    if state.r.is_some() != cfg.include_r {
        return Err(WaveError::InvalidParams(
            "state carries a recovered field iff include_r is set".into(),
        ));
    }
    let init_max = field_max(state);
    let blowup = 10.0 * init_max.max(1e-300);
    check_fields(state, blowup, 0, state.t)?;
    let mut next = state.clone();
    let mut stepper = Stepper::new(rv.n, cfg.dx, rv.dt);
    stepper.advance(params, &mut next);
    next.t = state.t + rv.dt;
    check_fields(&next, blowup, 1, next.t)?;
    Ok(next)
}

fn field_max(state: &SimState) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for field in [Some(&state.s), Some(&state.i), state.r.as_ref()]
        .into_iter()
        .flatten()
    {
        for &v in field {
            m = m.max(v);
        }
    }
    m
}

/// Rightmost index where `i` sits at or above `level`.
fn rightmost_crossing(i: &[f64], level: f64) -> Option<usize> {
    (0..i.len()).rev().find(|&j| i[j] >= level)
}

/// Runs the initial-value problem to the horizon.
///
/// Observations happen every `out_every` time units: the instability
/// detector, the max-`I` history, the front tracker (rightmost level
/// crossing of `I`, linearly interpolated; crossings sitting on the last
/// node only set `front_reached_boundary`), and snapshot capture — each
/// requested time in `snapshot_times` yields a clone of the state at the
/// first sample at or after it.
pub fn run(
    params: &ModelParams,
    cfg: &SimConfig,
    snapshot_times: &[f64],
) -> Result<SimOutcome, WaveError> {
    let rv = resolve(params, cfg)?;
    let (x, mut state) = build_initial(params, cfg, &rv);
    let mut wanted: Vec<f64> = snapshot_times.to_vec();
    wanted.sort_by(|a, b| a.total_cmp(b));
    let mut wptr = 0;

    let blowup = 10.0 * field_max(&state).max(1e-300);
    let mut stepper = Stepper::new(rv.n, cfg.dx, rv.dt);
    let mut front = Vec::new();
    let mut max_i_history = Vec::new();
    let mut snapshots = Vec::new();
    let mut front_reached_boundary = false;

    for k in 0..rv.nsteps {
        stepper.advance(params, &mut state);
        let steps_done = k + 1;
        if steps_done % rv.steps_per_out != 0 {
            continue;
        }
        let t = rv.dt * steps_done as f64;
        state.t = t;
        check_fields(&state, blowup, steps_done, t)?;

        let max_i = state.i.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max_i_history.push(MaxISample { t, max_i });

        if let Some(j) = rightmost_crossing(&state.i, rv.level) {
            if j + 1 < rv.n {
                let (yl, yr) = (state.i[j], state.i[j + 1]);
                let frac = if yl > yr { (yl - rv.level) / (yl - yr) } else { 0.0 };
                front.push(FrontSample {
                    t,
                    x: x[j] + cfg.dx * frac,
                });
            } else {
                front_reached_boundary = true;
            }
        }

        while wptr < wanted.len() && wanted[wptr] <= t + 1e-9 {
            snapshots.push(state.clone());
            wptr += 1;
        }
    }
    state.t = rv.dt * rv.nsteps as f64;

    Ok(SimOutcome {
        x,
        final_state: state,
        front,
        max_i_history,
        snapshots,
        front_reached_boundary,
        dt: rv.dt,
        steps: rv.nsteps,
    })
}

/// Fits front speeds on the late-time half of a front trajectory.
///
/// The plain linear fit systematically undershoots the asymptotic speed of
/// a pulled front (the front velocity carries a `O(1/t)` correction), so a
/// three-parameter fit `x(t) = c t - k ln t + const` is reported alongside
/// it; its `c` is the better estimate of the asymptotic speed.
pub fn measure_front_speed(front: &[FrontSample]) -> Result<SpeedFit, WaveError> {
    if front.len() < 8 {
        return Err(WaveError::CheckFailed(format!(
            "front record has only {} samples; the front never formed, or reached the \
             boundary too early for a speed fit",
            front.len()
        )));
    }
    let mid = 0.5 * (front[0].t + front[front.len() - 1].t);
    let late: Vec<FrontSample> = front.iter().copied().filter(|s| s.t >= mid).collect();
    if late.len() < 4 {
        return Err(WaveError::CheckFailed(
            "fewer than four front samples in the late-time fit window".into(),
        ));
    }
    let t: Vec<f64> = late.iter().map(|s| s.t).collect();
    let x: Vec<f64> = late.iter().map(|s| s.x).collect();

    let (c_plain, c_plain_stderr) = ols_slope(&t, &x);

    let cols = vec![
        t.clone(),
        t.iter().map(|&v| -v.ln()).collect(),
        vec![1.0; t.len()],
    ];
    let coef = lstsq_truncated(&cols, &x, 1e-12);

    Ok(SpeedFit {
        c_plain,
        c_plain_stderr,
        c_log: coef[0],
        k_log: coef[1],
        samples_used: t.len(),
    })
}

/// Least-squares slope of `x` against `t` with its standard error.
fn ols_slope(t: &[f64], x: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let xm = x.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|&v| (v - tm) * (v - tm)).sum();
    let sxy: f64 = t.iter().zip(x).map(|(&a, &b)| (a - tm) * (b - xm)).sum();
    let slope = sxy / sxx;
    let intercept = xm - slope * tm;
    let ssr: f64 = t
        .iter()
        .zip(x)
        .map(|(&a, &b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let dof = (t.len().max(3) - 2) as f64;
    (slope, (ssr / dof / sxx).sqrt())
}

/// Linear interpolation on a uniform grid starting at `x0`, clamped to the
/// end values outside the range.
fn interp_uniform(x0: f64, dx: f64, y: &[f64], xq: f64) -> f64 {
    let n = y.len();
    let u = (xq - x0) / dx;
    if u <= 0.0 {
        return y[0];
    }
    if u >= (n - 1) as f64 {
        return y[n - 1];
    }
    let j = (u.floor() as usize).min(n - 2);
    let w = u - j as f64;
    y[j] * (1.0 - w) + y[j + 1] * w
}

/// Re-samples a simulated state into the traveling frame.
///
/// The frame is centered on the infected field's maximum (refined to
/// sub-grid accuracy by a parabolic fit through the three nodes around it),
/// and the horizontal axis flips: the wave coordinate grows toward the
/// depleted region behind the front, i.e. a grid node `xi` samples the
/// fields at `x_peak - xi`. Queries beyond the spatial domain clamp to the
/// boundary values. Fails when the infected maximum sits on a boundary node
/// (no developed interior front to center on).
pub fn extract_comoving_profile(
    x: &[f64],
    state: &SimState,
    grid: &WaveGrid,
) -> Result<WaveProfile, WaveError> {
    let n = x.len();
    if n < 3 || state.s.len() != n || state.i.len() != n {
        return Err(WaveError::InvalidGrid(
            "state and abscissas must share a length of at least three nodes".into(),
        ));
    }
    let jpk = state
        .i
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
        .unwrap();
    if jpk == 0 || jpk == n - 1 {
        return Err(WaveError::CheckFailed(
            "the infected maximum sits on a spatial boundary; the front is undeveloped \
             or has left the window"
                .into(),
        ));
    }
    let dx = x[1] - x[0];
    let (y0, y1, y2) = (state.i[jpk - 1], state.i[jpk], state.i[jpk + 1]);
    let den = y0 - 2.0 * y1 + y2;
    let x_peak = if den != 0.0 {
        x[jpk] + 0.5 * dx * (y0 - y2) / den
    } else {
        x[jpk]
    };

    let mut s = Vec::with_capacity(grid.n);
    let mut i = Vec::with_capacity(grid.n);
    for j in 0..grid.n {
        let xq = x_peak - grid.node(j);
        s.push(interp_uniform(x[0], dx, &state.s, xq));
        i.push(interp_uniform(x[0], dx, &state.i, xq));
    }
    WaveProfile::from_arrays(*grid, s, i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_params() -> ModelParams {
        ModelParams {
            d1: 1.0,
            d2: 1.0,
            d3: 1.0,
            beta: 2.0,
            gamma: 1.0,
            s_minus_inf: 1.0,
        }
    }

    #[test]
    fn equilibrium_state_is_bitwise_invariant() {
        let p = default_params();
        let cfg = SimConfig {
            domain_length: 10.0,
            include_r: true,
            ..SimConfig::default()
        };
        let n = 101;
        let state = SimState {
            t: 0.0,
            s: vec![p.s_minus_inf; n],
            i: vec![0.0; n],
            r: Some(vec![0.0; n]),
        };
        let next = step(&state, &p, &cfg).unwrap();
        assert_eq!(next.s, state.s);
        assert_eq!(next.i, state.i);
        assert_eq!(next.r, state.r);
    }

    #[test]
    fn uniform_infected_field_decays_at_the_recovery_rate() {
        let p = default_params();
        let cfg = SimConfig {
            domain_length: 1.0,
            dt: Some(1e-4),
            ..SimConfig::default()
        };
        let mut state = SimState {
            t: 0.0,
            s: vec![0.0; 11],
            i: vec![1.0; 11],
            r: None,
        };
        for _ in 0..10_000 {
            state = step(&state, &p, &cfg).unwrap();
        }
        let expected = (-p.gamma * 1.0_f64).exp();
        for &v in &state.i {
            assert!(
                (v / expected - 1.0).abs() < 1e-4,
                "after t = 1 the field should sit at e^-gamma; got {v} vs {expected}"
            );
        }
    }

    #[test]
    fn total_mass_is_conserved_when_r_is_evolved() {
        let p = default_params();
        let cfg = SimConfig {
            domain_length: 50.0,
            t_end: 4.0,
            include_r: true,
            ..SimConfig::default()
        };
        let (_, init) = initial_state(&p, &cfg).unwrap();
        let mass = |st: &SimState| -> f64 {
            st.s
                .iter()
                .zip(&st.i)
                .zip(st.r.as_ref().unwrap())
                .map(|((&a, &b), &c)| a + b + c)
                .sum::<f64>()
        };
        let out = run(&p, &cfg, &[]).unwrap();
        assert_eq!(out.steps, 1000, "4.0 time units at dt = 0.004");
        let (m0, m1) = (mass(&init), mass(&out.final_state));
        assert!(
            ((m1 - m0) / m0).abs() < 1e-10,
            "mass drifted: {m0} -> {m1}"
        );
    }

    #[test]
    fn susceptible_field_never_increases_in_time() {
        let p = default_params();
        let cfg = SimConfig {
            domain_length: 30.0,
            t_end: 3.0,
            ..SimConfig::default()
        };
        let out = run(&p, &cfg, &[1.5]).unwrap();
        let mid = &out.snapshots[0];
        assert!((mid.t - 1.5).abs() < 1e-9);
        for j in 0..mid.s.len() {
            assert!(mid.s[j] <= p.s_minus_inf + 1e-15);
            assert!(out.final_state.s[j] <= mid.s[j] + 1e-12);
        }
    }

    #[test]
    fn oversized_steps_are_rejected_up_front() {
        let p = default_params();
        let diffusive = SimConfig {
            dt: Some(0.01),
            ..SimConfig::default()
        };
        let err = run(&p, &diffusive, &[]).unwrap_err();
        assert_eq!(err.kind(), "invalid_params");
        assert!(err.to_string().contains("stability"), "{err}");

        let reaction = SimConfig {
            domain_length: 10.0,
            dx: 1.0,
            dt: Some(0.35),
            out_every: 0.35,
            ..SimConfig::default()
        };
        let err = run(&p, &reaction, &[]).unwrap_err();
        assert_eq!(err.kind(), "invalid_params");
        assert!(err.to_string().contains("beta + gamma"), "{err}");
    }

    #[test]
    fn non_finite_fields_trip_the_instability_detector() {
        let p = default_params();
        let cfg = SimConfig {
            domain_length: 1.0,
            ..SimConfig::default()
        };
        let mut state = SimState {
            t: 0.0,
            s: vec![1.0; 11],
            i: vec![0.01; 11],
            r: None,
        };
        state.i[3] = f64::NAN;
        let err = step(&state, &p, &cfg).unwrap_err();
        assert_eq!(err.kind(), "instability");
    }

    #[test]
    fn speed_fit_recovers_a_synthetic_logarithmic_trajectory() {
        let front: Vec<FrontSample> = (0..=100)
            .map(|k| {
                let t = 10.0 + 0.5 * k as f64;
                FrontSample {
                    t,
                    x: 2.0 * t - 0.75 * t.ln() + 3.0,
                }
            })
            .collect();
        let fit = measure_front_speed(&front).unwrap();
        assert!((fit.c_log - 2.0).abs() < 1e-6, "c_log = {}", fit.c_log);
        assert!((fit.k_log - 0.75).abs() < 1e-5, "k_log = {}", fit.k_log);
        assert!(fit.c_plain < 2.0 && (fit.c_plain - 2.0).abs() < 0.02);
        assert!(fit.samples_used >= 50);
    }

    #[test]
    fn short_front_records_are_rejected() {
        let front: Vec<FrontSample> = (0..5)
            .map(|k| FrontSample {
                t: 1.0 + k as f64,
                x: 2.0 * k as f64,
            })
            .collect();
        let err = measure_front_speed(&front).unwrap_err();
        assert_eq!(err.kind(), "check_failed");
    }

    #[test]
    fn comoving_extraction_centers_the_infected_peak() {
        let dx = 0.1;
        let n = 401;
        let x: Vec<f64> = (0..n).map(|j| dx * j as f64).collect();
        let x_peak = 20.03;
        let i: Vec<f64> = x
            .iter()
            .map(|&v| 0.3 * (-((v - x_peak) / 3.0).powi(2)).exp())
            .collect();
        let s: Vec<f64> = x.iter().map(|&v| 0.7 + 0.3 * ((v - x_peak) / 4.0).tanh()).collect();
        let state = SimState {
            t: 0.0,
            s,
            i,
            r: None,
        };
        let grid = WaveGrid::new(-8.0, 8.0, 0.4).unwrap();
        let prof = extract_comoving_profile(&x, &state, &grid).unwrap();

        let j0 = 20; // node at xi = 0
        assert!((grid.node(j0)).abs() < 1e-12);
        assert!(
            (prof.i[j0] - 0.3).abs() < 1e-4,
            "peak sample {} should sit at the gaussian amplitude",
            prof.i[j0]
        );
        for j in 0..grid.n - 1 {
            assert!(
                prof.s[j + 1] <= prof.s[j] + 1e-12,
                "the flip must make S decreasing in the wave coordinate"
            );
        }
        assert!(prof.s[0] > 0.95 && prof.s[grid.n - 1] < 0.45);
    }

    #[test]
    fn boundary_peak_is_rejected_for_extraction() {
        let x: Vec<f64> = (0..50).map(|j| 0.1 * j as f64).collect();
        let i: Vec<f64> = x.iter().map(|&v| v).collect();
        let s = vec![1.0; 50];
        let state = SimState {
            t: 0.0,
            s,
            i,
            r: None,
        };
        let grid = WaveGrid::new(-1.0, 1.0, 0.5).unwrap();
        let err = extract_comoving_profile(&x, &state, &grid).unwrap_err();
        assert_eq!(err.kind(), "check_failed");
    }

    #[test]
    fn front_crossing_the_domain_sets_the_boundary_flag() {
        let p = default_params();
        let cfg = SimConfig {
            domain_length: 20.0,
            t_end: 25.0,
            ..SimConfig::default()
        };
        let out = run(&p, &cfg, &[]).unwrap();
        assert!(out.front_reached_boundary);
        assert!(!out.front.is_empty());
    }
}
