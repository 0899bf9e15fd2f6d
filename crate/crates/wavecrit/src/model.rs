//! Model parameters, the standard-incidence nonlinearity, and the spectral
//! quantities attached to the critical wave speed.

use serde::{Deserialize, Serialize};

use crate::error::WaveError;
use crate::tolerances::F_GUARD_FRACTION;

/// Parameters of the diffusive SIR system with standard incidence.
///
/// ```text
/// S_t = d1 S_xx - beta S I / (S + I)
/// I_t = d2 I_xx + beta S I / (S + I) - gamma I
/// R_t = d3 R_xx + gamma I                 (decoupled bookkeeping field)
/// ```
///
/// `s_minus_inf` is the susceptible level ahead of the front (the value of S
/// at the far left of the wave frame).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub beta: f64,
    pub gamma: f64,
    pub s_minus_inf: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            d1: 1.0,
            d2: 1.0,
            d3: 1.0,
            beta: 2.0,
            gamma: 1.0,
            s_minus_inf: 1.0,
        }
    }
}

impl ModelParams {
    /// Checks physical admissibility: positive diffusivities for the active
    /// fields, positive rates, positive left susceptible level. `d3` only
    /// needs to be non-negative (the recovered field may be non-diffusing).
    pub fn validate(&self) -> Result<(), WaveError> {
        let complain = |name: &str, v: f64, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(WaveError::InvalidParams(format!(
                    "{name} = {v} is outside its admissible range"
                )))
            }
        };
        complain("d1", self.d1, self.d1.is_finite() && self.d1 > 0.0)?;
        complain("d2", self.d2, self.d2.is_finite() && self.d2 > 0.0)?;
        complain("d3", self.d3, self.d3.is_finite() && self.d3 >= 0.0)?;
        complain("beta", self.beta, self.beta.is_finite() && self.beta > 0.0)?;
        complain(
            "gamma",
            self.gamma,
            self.gamma.is_finite() && self.gamma > 0.0,
        )?;
        complain(
            "s_minus_inf",
            self.s_minus_inf,
            self.s_minus_inf.is_finite() && self.s_minus_inf > 0.0,
        )?;
        Ok(())
    }

    /// Basic reproduction number `beta / gamma`.
    pub fn r0(&self) -> f64 {
        self.beta / self.gamma
    }

    /// Threshold below which the incidence denominator is treated as zero.
    pub fn incidence_guard(&self) -> f64 {
        F_GUARD_FRACTION * self.s_minus_inf
    }

    /// Standard incidence `beta s i / (s + i)`, extended by continuity to 0
    /// where the total density vanishes. Rejects negative densities.
    pub fn infection_force(&self, s: f64, i: f64) -> Result<f64, WaveError> {
        if !(s >= 0.0) || !(i >= 0.0) {
            return Err(WaveError::InvalidParams(format!(
                "infection force needs nonnegative densities, got s = {s}, i = {i}"
            )));
        }
        Ok(self.incidence(s, i))
    }

    /// Incidence for callers that have already established nonnegativity
    /// (the hot loops operate on profiles clamped into a nonnegative box).
    #[inline]
    pub(crate) fn incidence(&self, s: f64, i: f64) -> f64 {
        debug_assert!(s >= 0.0 && i >= 0.0);
        let den = s + i;
        if den > self.incidence_guard() {
            self.beta * s * i / den
        } else {
            0.0
        }
    }

    /// Incidence evaluated nodewise over a pair of density slices.
    pub(crate) fn incidence_slice(&self, s: &[f64], i: &[f64], out: &mut [f64]) {
        debug_assert_eq!(s.len(), i.len());
        debug_assert_eq!(s.len(), out.len());
        for j in 0..s.len() {
            out[j] = self.incidence(s[j], i[j]);
        }
    }

    /// Dispersion polynomial of the linearized infected equation in the wave
    /// frame: `Delta(lambda, c) = d2 lambda^2 - c lambda + beta - gamma`.
    /// Nonnegative for every `lambda` exactly when `c <= c*`, with a double
    /// root at the critical decay rate when `c = c*`.
    pub fn dispersion(&self, lambda: f64, c: f64) -> f64 {
        self.d2 * lambda * lambda - c * lambda + self.beta - self.gamma
    }
}

/// Spectral data of the critical wave: speed, decay rate, the resolvent
/// shifts used to make the fixed-point operator monotone, the roots and
/// normalizers of the two shifted resolvents, and the weight rate `mu` of
/// the convergence norm.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpectralData {
    /// Basic reproduction number `beta / gamma`.
    pub r0: f64,
    /// Critical (minimal) wave speed `2 sqrt(d2 (beta - gamma))`.
    pub c_star: f64,
    /// Critical decay rate `c* / (2 d2)` (double root of the dispersion
    /// polynomial at `c*`).
    pub lambda_star: f64,
    /// Resolvent shift for the susceptible equation (default `2 beta`).
    pub beta1: f64,
    /// Resolvent shift for the infected equation (default `beta + gamma`).
    pub beta2: f64,
    /// Negative root of `d1 z^2 - c* z - beta1`.
    pub lambda1_minus: f64,
    /// Positive root of `d1 z^2 - c* z - beta1`.
    pub lambda1_plus: f64,
    /// Negative root of `d2 z^2 - c* z - beta2`.
    pub lambda2_minus: f64,
    /// Positive root of `d2 z^2 - c* z - beta2`.
    pub lambda2_plus: f64,
    /// Normalizer `d1 (lambda1_plus - lambda1_minus)` of the first resolvent.
    pub big_lambda1: f64,
    /// Normalizer `d2 (lambda2_plus - lambda2_minus)` of the second resolvent.
    pub big_lambda2: f64,
    /// Rate of the exponential weight `e^{-mu |xi|}` of the convergence
    /// norm: half the slowest kernel decay, so weighted differences of
    /// admissible profiles stay finite while translations are still
    /// distinguished.
    pub mu: f64,
}

/// Derives all spectral quantities from the model parameters, with the
/// default resolvent shifts. Requires the supercritical regime
/// `beta > gamma`; everything else about the wave machinery is meaningless
/// otherwise.
pub fn derive_spectral(params: &ModelParams) -> Result<SpectralData, WaveError> {
    params.validate()?;
    if params.beta <= params.gamma {
        return Err(WaveError::InvalidRegime(format!(
            "wave construction requires beta > gamma (R0 > 1), got beta = {}, gamma = {}",
            params.beta, params.gamma
        )));
    }
    let c = 2.0 * (params.d2 * (params.beta - params.gamma)).sqrt();
    let beta1 = 2.0 * params.beta;
    let beta2 = params.beta + params.gamma;
    let root = |d: f64, shift: f64| -> (f64, f64) {
        let disc = (c * c + 4.0 * d * shift).sqrt();
        ((c - disc) / (2.0 * d), (c + disc) / (2.0 * d))
    };
    let (lambda1_minus, lambda1_plus) = root(params.d1, beta1);
    let (lambda2_minus, lambda2_plus) = root(params.d2, beta2);
    Ok(SpectralData {
        r0: params.r0(),
        c_star: c,
        lambda_star: c / (2.0 * params.d2),
        beta1,
        beta2,
        lambda1_minus,
        lambda1_plus,
        lambda2_minus,
        lambda2_plus,
        big_lambda1: params.d1 * (lambda1_plus - lambda1_minus),
        big_lambda2: params.d2 * (lambda2_plus - lambda2_minus),
        mu: 0.5 * (-lambda1_minus).min(-lambda2_minus),
    })
}

/// The two shifted right-hand sides fed to the resolvent kernels:
/// `h1 = beta1 s - f(s, i)` and `h2 = (beta2 - gamma) i + f(s, i)`.
/// Both are nonnegative and monotone in the partial order that makes the
/// wave operator order-preserving (increasing in `s`; `h1` decreasing and
/// `h2` increasing in `i`).
pub fn h_funcs(params: &ModelParams, spectral: &SpectralData, s: f64, i: f64) -> (f64, f64) {
    let f = params.incidence(s, i);
    (
        spectral.beta1 * s - f,
        (spectral.beta2 - params.gamma) * i + f,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances::TOL_SPECTRAL_CLOSED_FORM;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn defaults() -> (ModelParams, SpectralData) {
        let p = ModelParams::default();
        let sp = derive_spectral(&p).unwrap();
        (p, sp)
    }

    #[test]
    fn spectral_closed_forms_at_defaults() {
        let (_, sp) = defaults();
        assert!((sp.r0 - 2.0).abs() < TOL_SPECTRAL_CLOSED_FORM);
        assert!((sp.c_star - 2.0).abs() < TOL_SPECTRAL_CLOSED_FORM);
        assert!((sp.lambda_star - 1.0).abs() < TOL_SPECTRAL_CLOSED_FORM);
        assert!((sp.beta1 - 4.0).abs() < TOL_SPECTRAL_CLOSED_FORM);
        assert!((sp.beta2 - 3.0).abs() < TOL_SPECTRAL_CLOSED_FORM);
        // Second resolvent: d2 z^2 - 2 z - 3 has roots -1 and 3.
        assert!((sp.lambda2_minus - (-1.0)).abs() < TOL_SPECTRAL_CLOSED_FORM);
        assert!((sp.lambda2_plus - 3.0).abs() < TOL_SPECTRAL_CLOSED_FORM);
        assert!((sp.big_lambda2 - 4.0).abs() < TOL_SPECTRAL_CLOSED_FORM);
        // First resolvent: z^2 - 2 z - 4 has roots 1 -+ sqrt(5).
        assert!((sp.lambda1_minus - (-1.236_067_977_499_79)).abs() < TOL_SPECTRAL_CLOSED_FORM);
        assert!((sp.lambda1_plus - 3.236_067_977_499_79).abs() < TOL_SPECTRAL_CLOSED_FORM);
        assert!((sp.big_lambda1 - 4.472_135_954_999_58).abs() < TOL_SPECTRAL_CLOSED_FORM);
        assert!((sp.mu - 0.5).abs() < TOL_SPECTRAL_CLOSED_FORM);
    }

    #[test]
    fn resolvent_roots_satisfy_their_quadratics() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let p = ModelParams {
                d1: rng.gen_range(0.05..5.0),
                d2: rng.gen_range(0.05..5.0),
                d3: 1.0,
                beta: rng.gen_range(0.2..10.0),
                gamma: rng.gen_range(0.01..1.0),
                s_minus_inf: rng.gen_range(0.1..10.0),
            };
            if p.beta <= p.gamma * 1.0001 {
                continue;
            }
            let sp = derive_spectral(&p).unwrap();
            let c = sp.c_star;
            for (d, shift, lm, lp, big) in [
                (p.d1, sp.beta1, sp.lambda1_minus, sp.lambda1_plus, sp.big_lambda1),
                (p.d2, sp.beta2, sp.lambda2_minus, sp.lambda2_plus, sp.big_lambda2),
            ] {
                for z in [lm, lp] {
                    let res = d * z * z - c * z - shift;
                    assert!(
                        res.abs() < 1e-12 * shift.max(1.0),
                        "root residual {res} too large"
                    );
                }
                assert!(lm < 0.0 && lp > 0.0);
                assert!((big - d * (lp - lm)).abs() < 1e-12 * big);
                // Kernel mass identity: the normalized two-sided kernel
                // integrates to 1/shift.
                let mass = (1.0 / -lm + 1.0 / lp) / big;
                assert!((mass - 1.0 / shift).abs() < 1e-13 / shift);
            }
            assert!(sp.mu > 0.0);
            assert!((sp.mu - 0.5 * (-sp.lambda1_minus).min(-sp.lambda2_minus)).abs() < 1e-15);
        }
    }

    #[test]
    fn dispersion_nonnegative_at_critical_speed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = ModelParams {
                d2: rng.gen_range(0.05..5.0),
                beta: rng.gen_range(1.1..10.0),
                gamma: 1.0,
                ..ModelParams::default()
            };
            let sp = derive_spectral(&p).unwrap();
            // Double root at lambda_star ...
            let at_star = p.dispersion(sp.lambda_star, sp.c_star);
            assert!(at_star.abs() < 1e-12 * p.beta);
            // ... and nonnegative everywhere else.
            for _ in 0..50 {
                let lam = rng.gen_range(-10.0..10.0);
                assert!(p.dispersion(lam, sp.c_star) >= -1e-12 * p.beta);
            }
            // Slightly below the critical speed the polynomial dips negative.
            assert!(p.dispersion(sp.lambda_star, sp.c_star * 1.001) < 0.0);
        }
    }

    #[test]
    fn shifted_right_hand_sides_match_hand_value() {
        let (p, sp) = defaults();
        // s = i = 1: incidence is 2*1*1/2 = 1, so h1 = 4 - 1 = 3 and
        // h2 = (3 - 1)*1 + 1 = 3.
        let (h1, h2) = h_funcs(&p, &sp, 1.0, 1.0);
        assert!((h1 - 3.0).abs() < 1e-15);
        assert!((h2 - 3.0).abs() < 1e-15);
        // At the left equilibrium (S_-inf, 0) the pair is (beta1 S_-inf, 0).
        let (h1, h2) = h_funcs(&p, &sp, p.s_minus_inf, 0.0);
        assert!((h1 - sp.beta1 * p.s_minus_inf).abs() < 1e-15);
        assert_eq!(h2, 0.0);
    }

    #[test]
    fn incidence_guard_and_extreme_inputs() {
        let (p, _) = defaults();
        // Zero on both axes.
        assert_eq!(p.infection_force(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(p.infection_force(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(p.infection_force(0.0, 0.0).unwrap(), 0.0);
        // Extreme imbalance evaluates without overflow or NaN and is
        // numerically zero.
        let f = p.infection_force(1.0, 1e-300).unwrap();
        assert!(f.is_finite());
        assert!(f.abs() < 1e-299);
        // Tiny totals below the guard are flushed to exactly zero.
        let f = p.infection_force(1e-20, 1e-20).unwrap();
        assert_eq!(f, 0.0);
        // Negative densities are rejected.
        assert!(p.infection_force(-1e-12, 1.0).is_err());
        assert!(p.infection_force(1.0, f64::NAN).is_err());
    }

    #[test]
    fn incidence_monotone_and_dominated() {
        let (p, _) = defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let s = rng.gen_range(0.0..3.0_f64);
            let i = rng.gen_range(0.0..3.0_f64);
            let ds = rng.gen_range(0.0..1.0_f64);
            let di = rng.gen_range(0.0..1.0_f64);
            let f = p.incidence(s, i);
            // Dominated by beta * min(s, i).
            assert!(f <= p.beta * s.min(i) + 1e-15);
            // Monotone in each density separately.
            assert!(p.incidence(s + ds, i) >= f - 1e-15);
            assert!(p.incidence(s, i + di) >= f - 1e-15);
        }
    }

    #[test]
    fn regime_and_parameter_validation() {
        let mut p = ModelParams::default();
        p.beta = 0.8;
        match derive_spectral(&p) {
            Err(WaveError::InvalidRegime(_)) => {}
            other => panic!("expected invalid-regime error, got {other:?}"),
        }
        let mut p = ModelParams::default();
        p.d2 = 0.0;
        assert!(matches!(p.validate(), Err(WaveError::InvalidParams(_))));
        let mut p = ModelParams::default();
        p.gamma = -1.0;
        assert!(matches!(p.validate(), Err(WaveError::InvalidParams(_))));
    }
}
