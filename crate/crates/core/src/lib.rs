//! Spontaneous emission of a two-level atom inside a rectangular cavity that
//! contains lossy magnetodielectric regions.
//!
//! The crate provides the full numerical pipeline:
//!
//! * [`cavity`]: box eigenmodes, polarization bases, the u/v/s vector mode
//!   functions, the scalar Green function, and transverse projection.
//! * [`material`]: causal Lorentz-oscillator susceptibilities, their time and
//!   frequency transforms, the coupling-strength inversions, and the
//!   half-line Cauchy transform Z with its boundary values.
//! * [`coupling`]: medium layouts, mode-overlap integrals over medium
//!   regions (the W matrix) and the Q/L overlap coefficients.
//! * [`dyadic`]: vacuum and medium Green dyadics at the atom position, in a
//!   factorized single-sum form plus a brute-force double-sum reference.
//! * [`emission`]: decay rate and level shift at the transition frequency,
//!   memory kernel, Markov diagnostics.
//! * [`dynamics`]: an independent time-domain simulator of the one-excitation
//!   amplitude equations with a discretized medium continuum.
//!
//! Everything works in natural units (`hbar = c = eps0 = mu0 = 1`) by
//! default; a [`cavity::Units`] value overrides them coherently.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `std` feature (on by
//! default) only switches float math from libm to the intrinsics.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod cavity;
pub mod coupling;
pub mod dyadic;
pub mod dynamics;
pub mod emission;
pub mod material;
pub mod math;
pub mod quad;

use alloc::string::String;

pub use math::{Vec3, C64};

/// Error type shared by every module.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Malformed input value (geometry, configuration, parameters).
    InvalidInput(String),
    /// Mode indices must all be at least 1.
    ModeIndexOutOfRange,
    /// A position argument lies outside the closed cavity box.
    OutsideCavity,
    /// The scalar Green function diverges at coincident points.
    CoincidentPoints,
    /// Sampled field does not match the quadrature grid it claims to live on.
    GridMismatch { expected: usize, got: usize },
    /// Z and everything built on it is singular on the positive real
    /// frequency axis; request the boundary value explicitly instead.
    PositiveRealAxis,
    /// Evaluation point too close to a cavity pole.
    PoleProximity { omega: f64 },
    /// The atom position lies inside a medium region.
    AtomInMedium,
    /// Medium layout violates its invariants (overlap, out of cavity, ...).
    InvalidLayout(String),
    /// Coupling strengths are defined for nonnegative frequencies only.
    NegativeFrequency,
    /// A continuum discretization band must stay at positive frequencies.
    BandNotPositive,
    /// Fixed-step integration would not resolve the fastest oscillation.
    TimeStepTooLarge { dt: f64, max: f64 },
    /// State norm left the unitarity budget; integrator misconfiguration.
    NormDrift { t: f64, drift: f64 },
    /// Population is not monotonically decaying; an exponential fit would lie.
    NonMarkovianRegime { t: f64 },
}

impl core::fmt::Display for CoreError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CoreError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            CoreError::ModeIndexOutOfRange => {
                write!(f, "mode indices must be positive integers")
            }
            CoreError::OutsideCavity => write!(f, "position outside the cavity box"),
            CoreError::CoincidentPoints => {
                write!(f, "scalar Green function requires distinct points")
            }
            CoreError::GridMismatch { expected, got } => {
                write!(f, "grid mismatch: expected {expected} points per axis, got {got}")
            }
            CoreError::PositiveRealAxis => write!(
                f,
                "evaluation on the positive real frequency axis requires the boundary-value form"
            ),
            CoreError::PoleProximity { omega } => {
                write!(f, "evaluation point within pole tolerance of cavity mode at omega={omega}")
            }
            CoreError::AtomInMedium => write!(f, "atom position lies inside a medium region"),
            CoreError::InvalidLayout(msg) => write!(f, "invalid medium layout: {msg}"),
            CoreError::NegativeFrequency => {
                write!(f, "coupling strengths are defined for omega >= 0 only")
            }
            CoreError::BandNotPositive => {
                write!(f, "discretization band must lie at strictly positive frequencies")
            }
            CoreError::TimeStepTooLarge { dt, max } => {
                write!(f, "time step {dt} exceeds resolution limit {max}")
            }
            CoreError::NormDrift { t, drift } => {
                write!(f, "state norm drifted by {drift} at t={t}; integrator misconfigured")
            }
            CoreError::NonMarkovianRegime { t } => {
                write!(f, "non-Markovian regime: population revival near t={t}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
