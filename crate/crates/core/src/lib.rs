//! Numerical engine for the large-distance expansion of multi-point
//! correlation functions in massless one-dimensional quantum models.
//!
//! The pipeline has three layers:
//!
//! * resummation identities for restricted sums over Fermi-boundary
//!   particle-hole excitations ([`restricted_sum`], [`excitations`],
//!   [`specfun`]),
//! * Toeplitz determinants with Fisher-Hartwig jump symbols and their
//!   large-N asymptotics ([`fisher_hartwig`]),
//! * dressed Bethe-ansatz quantities feeding critical exponents and the
//!   assembled asymptotic series ([`bethe`], [`asympt`]).
//!
//! All heavy products are carried in log form ([`specfun::LogComplex`]);
//! all summation orders are deterministic so results are reproducible
//! bit-for-bit across runs and thread counts.

pub(crate) mod accum;
pub mod asympt;
pub mod bethe;
pub mod error;
pub mod excitations;
pub mod fisher_hartwig;
pub mod linalg;
pub mod quad;
pub mod restricted_sum;
pub mod specfun;

pub use error::{Error, Result};
pub use specfun::LogComplex;

pub use num_complex::Complex64;
