//! The integral fixed-point operator whose fixed points are critical wave
//! profiles, together with the uniform grid, the profile container, the
//! projection onto the barrier set, and the weighted convergence norm.
//!
//! In the wave frame the profile system
//!
//! ```text
//! d1 S'' - c* S' = f(S, I)
//! d2 I'' - c* I' = gamma I - f(S, I)
//! ```
//!
//! is rewritten by adding the stabilizing shifts `beta1 S` and `beta2 I` to
//! both sides and inverting the constant-coefficient operators
//! `d_k u'' - c* u' - beta_k u`. Each inversion is a two-sided exponential
//! convolution with rates `lambda_k^- < 0 < lambda_k^+` and normalizer
//! `Lambda_k`:
//!
//! ```text
//! F_k(u)(xi) = (1/Lambda_k) [ int_{-inf}^{xi} e^{lambda_k^-(xi-y)} h_k(y) dy
//!                           + int_{xi}^{inf}  e^{lambda_k^+(xi-y)} h_k(y) dy ]
//! ```
//!
//! with `h_1 = beta1 S - f` and `h_2 = (beta2 - gamma) I + f`. The kernel
//! weights are positive and integrate to `1/beta_k`, which makes the
//! operator order-preserving and pins the left equilibrium exactly.
//!
//! Discretization: each cell integral of (exact exponential kernel) times
//! (piecewise-linear interpolant of `h_k`) is computed in closed form
//! ("product integration"), and the two half-line integrals become forward
//! and backward recurrences. Constants are reproduced exactly; smooth data
//! see second-order accuracy.

use serde::{Deserialize, Serialize};

use crate::bounds::{eval_profiles, BarrierProfiles, BoundSet};
use crate::error::WaveError;
use crate::model::{ModelParams, SpectralData};
use crate::tolerances::TOL_GAMMA_MEMBERSHIP;

/// Uniform grid on `[xi_min, xi_max]` with `n` nodes spaced `h` apart.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WaveGrid {
    pub xi_min: f64,
    pub xi_max: f64,
    pub n: usize,
    pub h: f64,
}

impl WaveGrid {
    /// Builds a grid from endpoints and step. The step must divide the span
    /// (to 1e-9 relative); the node count is inferred.
    pub fn new(xi_min: f64, xi_max: f64, h: f64) -> Result<Self, WaveError> {
        if !(xi_min.is_finite() && xi_max.is_finite() && h.is_finite()) {
            return Err(WaveError::InvalidGrid("non-finite grid parameters".into()));
        }
        if !(xi_max > xi_min) || !(h > 0.0) {
            return Err(WaveError::InvalidGrid(format!(
                "need xi_min < xi_max and h > 0, got [{xi_min}, {xi_max}] with h = {h}"
            )));
        }
        let span = xi_max - xi_min;
        let cells = span / h;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
            return Err(WaveError::InvalidGrid(format!(
                "step {h} does not divide the span {span} evenly"
            )));
        }
        Ok(WaveGrid {
            xi_min,
            xi_max,
            n: rounded as usize + 1,
            h,
        })
    }

    /// Abscissa of node `j`.
    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        self.xi_min + self.h * j as f64
    }

    /// All node abscissas.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Checks that the grid can actually carry the wave machinery for the
    /// given spectral data and barrier constants:
    ///
    /// * the left end must sit well left of every barrier junction (at
    ///   least `10 / lambda_star` beyond the leftmost one), so the tail
    ///   closures of the convolutions are accurate;
    /// * the right end must leave the infected peak room to decay (at least
    ///   `20 d2 / c*` past the super-solution junction);
    /// * the step must resolve the fastest kernel rate
    ///   (`h * max(lambda1_plus, lambda2_plus) < 0.5`).
    pub fn check_adequate(
        &self,
        spectral: &SpectralData,
        bs: &BoundSet,
    ) -> Result<(), WaveError> {
        let left_need = bs.xi3.min(bs.xi2) - 10.0 / spectral.lambda_star;
        if !(self.xi_min < left_need) {
            return Err(WaveError::InvalidGrid(format!(
                "xi_min = {} does not clear the barrier junctions (need < {left_need:.3})",
                self.xi_min
            )));
        }
        let right_need = bs.xi1 + 20.0 / spectral.lambda_star;
        if !(self.xi_max > right_need) {
            return Err(WaveError::InvalidGrid(format!(
                "xi_max = {} leaves no room for the wave to decay (need > {right_need:.3})",
                self.xi_max
            )));
        }
        let fastest = spectral.lambda1_plus.max(spectral.lambda2_plus);
        if !(self.h * fastest < 0.5) {
            return Err(WaveError::InvalidGrid(format!(
                "step h = {} does not resolve the fastest kernel rate {fastest:.3} (need h * rate < 0.5)",
                self.h
            )));
        }
        Ok(())
    }
}

/// A wave profile sampled on a grid. `s_right_limit` caches the averaged
/// right plateau of `s`, which closes the right tail of the susceptible
/// convolution.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub grid: WaveGrid,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub s_right_limit: f64,
}

/// Number of right-edge nodes averaged into `s_right_limit`.
pub const RIGHT_LIMIT_WINDOW: usize = 5;

/// Mean of the last [`RIGHT_LIMIT_WINDOW`] entries (or all of them, for very
/// short slices).
pub fn right_limit(values: &[f64]) -> f64 {
    let k = values.len().min(RIGHT_LIMIT_WINDOW);
    values[values.len() - k..].iter().sum::<f64>() / k as f64
}

impl WaveProfile {
    /// Wraps raw samples, recomputing the cached right limit.
    pub fn from_arrays(grid: WaveGrid, s: Vec<f64>, i: Vec<f64>) -> Result<Self, WaveError> {
        if s.len() != grid.n || i.len() != grid.n {
            return Err(WaveError::InvalidGrid(format!(
                "profile length {} / {} does not match grid node count {}",
                s.len(),
                i.len(),
                grid.n
            )));
        }
        let s_right_limit = right_limit(&s);
        Ok(WaveProfile {
            grid,
            s,
            i,
            s_right_limit,
        })
    }
}

/// Closed-form weights for one cell of the product-integration rule:
/// the exact integral over `[0, h]` of `e^{a u}` times the linear
/// interpolant of data `(v_near at u = 0, v_far at u = h)` equals
/// `w_near * v_near + w_far * v_far`. A short series takes over when
/// `|a h|` is tiny and the closed form would cancel catastrophically;
/// at `a = 0` the weights reduce to the trapezoid rule `(h/2, h/2)`.
#[inline]
pub fn cell_weights(a: f64, h: f64) -> (f64, f64) {
    let z = a * h;
    let (e0, phi2) = if z.abs() < 1e-5 {
        (
            h * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0),
            h * (0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0),
        )
    } else {
        let e0 = z.exp_m1() / a;
        (e0, (h * z.exp() - e0) / z)
    };
    (e0 - phi2, phi2)
}

/// Scratch buffers reused across operator applications.
#[derive(Debug, Default)]
pub(crate) struct OperatorWorkspace {
    h1: Vec<f64>,
    h2: Vec<f64>,
    acc_left: Vec<f64>,
    acc_right: Vec<f64>,
}

impl OperatorWorkspace {
    fn resize(&mut self, n: usize) {
        self.h1.resize(n, 0.0);
        self.h2.resize(n, 0.0);
        self.acc_left.resize(n, 0.0);
        self.acc_right.resize(n, 0.0);
    }
}

/// One two-sided exponential convolution:
/// `out[j] = (L[j] + R[j]) / big_lambda`, where `L` accumulates the
/// left-kernel integral by a forward recurrence seeded with the analytic
/// tail `tail_left / (-lam_minus)` and `R` the right-kernel integral by a
/// backward recurrence seeded with `tail_right / lam_plus`.
#[allow(clippy::too_many_arguments)]
fn convolve_two_sided(
    values: &[f64],
    h: f64,
    lam_minus: f64,
    lam_plus: f64,
    big_lambda: f64,
    tail_left: f64,
    tail_right: f64,
    acc_left: &mut [f64],
    acc_right: &mut [f64],
    out: &mut [f64],
) {
    let n = values.len();
    let (w_near_l, w_far_l) = cell_weights(lam_minus, h);
    let (w_near_r, w_far_r) = cell_weights(-lam_plus, h);
    let decay_l = (lam_minus * h).exp();
    let decay_r = (-lam_plus * h).exp();

    acc_left[0] = tail_left / (-lam_minus);
    for j in 0..n - 1 {
        acc_left[j + 1] = decay_l * acc_left[j] + w_near_l * values[j + 1] + w_far_l * values[j];
    }
    acc_right[n - 1] = tail_right / lam_plus;
    for j in (0..n - 1).rev() {
        acc_right[j] = decay_r * acc_right[j + 1] + w_near_r * values[j] + w_far_r * values[j + 1];
    }
    for j in 0..n {
        out[j] = (acc_left[j] + acc_right[j]) / big_lambda;
    }
}

/// Unchecked operator application on raw slices (hot path). Inputs must be
/// nonnegative with `s` bounded by the left susceptible level; the public
/// wrapper [`apply_F`] establishes this.
pub(crate) fn apply_f_raw(
    params: &ModelParams,
    spectral: &SpectralData,
    grid: &WaveGrid,
    s: &[f64],
    i: &[f64],
    out_s: &mut [f64],
    out_i: &mut [f64],
    ws: &mut OperatorWorkspace,
) {
    let n = grid.n;
    ws.resize(n);
    let coef_i = spectral.beta2 - params.gamma;
    for j in 0..n {
        let f = params.incidence(s[j], i[j]);
        ws.h1[j] = spectral.beta1 * s[j] - f;
        ws.h2[j] = coef_i * i[j] + f;
    }
    let s_right = right_limit(s);
    // Left of the domain the profile sits at the equilibrium (S_-inf, 0),
    // so h1 -> beta1 S_-inf and h2 -> 0; right of it the susceptible field
    // has flattened to its (computed) plateau and the infected field has
    // decayed, so h1 -> beta1 * plateau and h2 -> 0.
    convolve_two_sided(
        &ws.h1,
        grid.h,
        spectral.lambda1_minus,
        spectral.lambda1_plus,
        spectral.big_lambda1,
        spectral.beta1 * params.s_minus_inf,
        spectral.beta1 * s_right,
        &mut ws.acc_left,
        &mut ws.acc_right,
        out_s,
    );
    convolve_two_sided(
        &ws.h2,
        grid.h,
        spectral.lambda2_minus,
        spectral.lambda2_plus,
        spectral.big_lambda2,
        0.0,
        0.0,
        &mut ws.acc_left,
        &mut ws.acc_right,
        out_i,
    );
}

/// Checks that a profile lies (up to `TOL_GAMMA_MEMBERSHIP * S_-inf`) in the
/// operator's domain: the box `0 <= s <= s_upper`, `0 <= i <= i_upper`.
///
/// The box — not the full barrier interval — is the natural domain: the
/// integral representation and its order-preservation only need the upper
/// barriers and nonnegativity, and the left equilibrium `(S_-inf, 0)` (a
/// genuine fixed point that sits below the lower infected barrier) must be
/// admissible. The lower barriers are enforced where they matter, by
/// [`project_gamma`] inside the solver loop.
pub fn check_in_domain(
    profile: &WaveProfile,
    params: &ModelParams,
    spectral: &SpectralData,
    bs: &BoundSet,
) -> Result<(), WaveError> {
    let tol = TOL_GAMMA_MEMBERSHIP * params.s_minus_inf;
    for j in 0..profile.grid.n {
        let xi = profile.grid.node(j);
        let iu = crate::bounds::upper_i(spectral, bs, xi);
        let (s, i) = (profile.s[j], profile.i[j]);
        if !(s >= -tol && s <= params.s_minus_inf + tol && i >= -tol && i <= iu + tol) {
            return Err(WaveError::OutsideGamma(format!(
                "node {j} (xi = {xi:.4}): (s, i) = ({s:.6e}, {i:.6e}) outside [0, {:.6e}] x [0, {iu:.6e}]",
                params.s_minus_inf
            )));
        }
    }
    Ok(())
}

/// The wave operator on profiles. Validates the domain box, then applies
/// the two shifted resolvents. Fixed points of this map (inside the barrier
/// set) are exactly the critical wave profiles.
#[allow(non_snake_case)]
pub fn apply_F(
    profile: &WaveProfile,
    params: &ModelParams,
    spectral: &SpectralData,
    bs: &BoundSet,
) -> Result<WaveProfile, WaveError> {
    check_in_domain(profile, params, spectral, bs)?;
    let n = profile.grid.n;
    let mut out_s = vec![0.0; n];
    let mut out_i = vec![0.0; n];
    let mut ws = OperatorWorkspace::default();
    apply_f_raw(
        params,
        spectral,
        &profile.grid,
        &profile.s,
        &profile.i,
        &mut out_s,
        &mut out_i,
        &mut ws,
    );
    WaveProfile::from_arrays(profile.grid, out_s, out_i)
}

/// Barrier curves evaluated on a grid, in the node order used by the
/// projection and the solver.
pub fn barriers_on_grid(
    params: &ModelParams,
    spectral: &SpectralData,
    bs: &BoundSet,
    grid: &WaveGrid,
) -> BarrierProfiles {
    eval_profiles(params, spectral, bs, &grid.nodes())
}

/// Nodewise clamp of raw samples into the barrier interval. Returns the
/// largest clamp applied (0 when the input was already inside).
pub(crate) fn project_gamma_raw(
    s: &mut [f64],
    i: &mut [f64],
    barriers: &BarrierProfiles,
) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..s.len() {
        let s0 = s[j];
        let i0 = i[j];
        s[j] = s0.max(barriers.s_lower[j]).min(barriers.s_upper[j]);
        i[j] = i0.max(barriers.i_lower[j]).min(barriers.i_upper[j]);
        worst = worst.max((s[j] - s0).abs()).max((i[j] - i0).abs());
    }
    worst
}

/// Projects a profile onto the barrier set by nodewise clamping.
pub fn project_gamma(
    profile: &WaveProfile,
    params: &ModelParams,
    spectral: &SpectralData,
    bs: &BoundSet,
) -> Result<WaveProfile, WaveError> {
    let barriers = barriers_on_grid(params, spectral, bs, &profile.grid);
    let mut s = profile.s.clone();
    let mut i = profile.i.clone();
    project_gamma_raw(&mut s, &mut i, &barriers);
    WaveProfile::from_arrays(profile.grid, s, i)
}

/// Weighted max-norm difference on raw slices: the largest of
/// `|a - b| * e^{-mu |xi|}` over all nodes of both fields.
pub(crate) fn weighted_norm_diff_raw(
    weights: &[f64],
    a_s: &[f64],
    a_i: &[f64],
    b_s: &[f64],
    b_i: &[f64],
) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..weights.len() {
        worst = worst.max((a_s[j] - b_s[j]).abs() * weights[j]);
        worst = worst.max((a_i[j] - b_i[j]).abs() * weights[j]);
    }
    worst
}

/// Exponential weights `e^{-mu |xi|}` of the convergence norm on a grid.
pub(crate) fn norm_weights(grid: &WaveGrid, mu: f64) -> Vec<f64> {
    (0..grid.n)
        .map(|j| (-mu * grid.node(j).abs()).exp())
        .collect()
}

/// Weighted max-norm distance between two profiles on the same grid:
/// `max over nodes and fields of |a - b| e^{-mu |xi|}`. The weight keeps
/// differences of admissible profiles finite (they all grow equally fast
/// toward the tails) while still separating genuinely distinct profiles.
pub fn weighted_norm_diff(a: &WaveProfile, b: &WaveProfile, mu: f64) -> Result<f64, WaveError> {
    if a.grid.n != b.grid.n || (a.grid.xi_min - b.grid.xi_min).abs() > 1e-12 {
        return Err(WaveError::InvalidGrid(
            "profiles live on different grids".into(),
        ));
    }
    let w = norm_weights(&a.grid, mu);
    Ok(weighted_norm_diff_raw(&w, &a.s, &a.i, &b.s, &b.i))
}
