use num_complex::Complex64;
use thiserror::Error;

/// Errors shared across the numerical modules.
///
/// Domain violations are reported with the offending value so that a sweep
/// driver can log and skip rather than guess what went wrong.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Γ has a pole at the non-positive integers.
    #[error("gamma pole at z = {z}")]
    GammaPole { z: Complex64 },

    /// G vanishes at the non-positive integers; a ratio with such an
    /// argument is either zero or infinite and must be cancelled first.
    #[error("Barnes G zero at z = {z}")]
    BarnesGZero { z: Complex64 },

    /// A Γ or G ratio kept a pole/zero argument after symbolic cancellation.
    #[error("uncancelled pole/zero arguments in ratio: {entries:?}")]
    UncancelledPole { entries: Vec<Complex64> },

    /// Lattice sums over ℤ need a non-integer offset.
    #[error("integer offset a = {a} in lattice sum")]
    IntegerOffset { a: Complex64 },

    /// A denominator in a pair-coupling product vanished.
    #[error("colliding pair in coupling factor: {left} vs {right} (shift {nu})")]
    CollidingPair {
        left: f64,
        right: f64,
        nu: Complex64,
    },

    /// Re(ν) on the half-integer lattice makes sin(πν)-normalised factors
    /// and the jump symbols degenerate.
    #[error("Re(nu) = {re} lies on 1/2 + Z")]
    HalfIntegerShift { re: f64 },

    /// Parameter outside its documented domain.
    #[error("parameter out of domain: {what}")]
    OutOfDomain { what: String },

    /// Imaginary parts of the deformation have the wrong sign for the
    /// requested boundary, so the configuration sum cannot converge.
    #[error("deformation sign: {what}")]
    DeformationSign { what: String },

    /// Linear system solved to working precision only.
    #[error("operator ill-conditioned: min pivot ratio {pivot_ratio:e}")]
    IllConditioned { pivot_ratio: f64 },

    /// Two integer vectors tie for the extremum within resolution.
    #[error("degenerate extremum: {first:?} and {second:?} within {gap:e}")]
    DegenerateExtremum {
        first: Vec<i64>,
        second: Vec<i64>,
        gap: f64,
    },

    /// An amplitude table did not cover a requested class vector.
    #[error("amplitude map missing entry for kappa = {kappa:?}")]
    MissingAmplitude { kappa: Vec<i64> },

    /// Structured input failed validation.
    #[error("invalid input: {what}")]
    Invalid { what: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(what: impl Into<String>) -> Self {
        Error::Invalid { what: what.into() }
    }

    pub(crate) fn domain(what: impl Into<String>) -> Self {
        Error::OutOfDomain { what: what.into() }
    }
}
