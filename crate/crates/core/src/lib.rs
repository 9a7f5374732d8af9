//! Quantum local-consistency problems: given reduced density operators on
//! subsystems, find a global state with those marginals and push its rank
//! down to `⌊√(Σᵢ rank(ρᵢ)²)⌋`.
//!
//! The same machinery handles fermionic and bosonic k-particle marginals and
//! quantum channels described by their local sub-channels.

pub mod channels;
pub mod error;
pub mod gallery;
pub mod hilbert;
pub mod marginal;
pub mod numerics;
pub mod reduce;
pub mod sector;

pub use error::{Error, Result};
