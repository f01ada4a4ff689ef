//! Modulus-of-continuity jets and the matrix inequalities built on them.

pub mod claims;
pub mod matrices;
pub mod modulus;
pub mod pairs;
pub mod regimes;
pub mod suites;
pub mod zt;

pub use claims::{claims_check, claims_sweep, ClaimsConfig, ClaimsReport, Witness};
pub use matrices::{Branch, JetMatrices};
pub use modulus::Modulus;
pub use pairs::{feasible_pair_sample, prop5_conclusions_check, MatrixPair};
pub use regimes::{regime_params, RegimeKind, RegimeParams};
pub use zt::zt_check;
