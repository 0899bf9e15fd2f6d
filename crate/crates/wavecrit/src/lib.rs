//! Critical traveling waves of a diffusive SIR model with standard incidence.
//!
//! The epidemic model couples susceptible and infected densities through the
//! frequency-dependent incidence `beta * S * I / (S + I)`:
//!
//! ```text
//! S_t = d1 S_xx - beta S I / (S + I)
//! I_t = d2 I_xx + beta S I / (S + I) - gamma I
//! ```
//!
//! For basic reproduction number `R0 = beta / gamma > 1` the system admits
//! traveling fronts `(S, I)(x + c t)`, and the slowest admissible speed is the
//! linear spreading speed `c* = 2 sqrt(d2 (beta - gamma))`. This crate builds
//! the *critical* wave (the wave at exactly `c*`) constructively:
//!
//! * [`model`] — parameters and the spectral quantities attached to `c*`;
//! * [`bounds`] — explicit super-/sub-solution barriers and certified
//!   selection of their constants;
//! * [`waveop`] — the integral fixed-point operator whose fixed points are
//!   wave profiles, discretized by product integration;
//! * [`solver`] — a damped, Anderson-accelerated fixed-point iteration
//!   confined to the barrier set;
//! * [`diagnostics`] — independent verification of every qualitative and
//!   quantitative property the critical wave must satisfy;
//! * [`pdesim`] — a direct finite-difference simulation of the PDE used to
//!   cross-validate speed and shape;
//! * [`config`], [`io`], [`cli`] — run configuration, artifact emission, and
//!   the command-line interface.
//!
//! All numerical tolerances used by the verification layers are centralized
//! in [`tolerances`].

pub mod bounds;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod model;
pub mod pdesim;
pub mod solver;
pub mod tolerances;
pub mod waveop;

pub use error::WaveError;
