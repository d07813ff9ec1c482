//! Mass-constrained bound states of the supercritical NLS equation on compact
//! metric graphs.
//!
//! The crate discretizes `H¹(G)` with P1 elements, computes the Kirchhoff
//! spectrum, the constant state and its mass threshold, mountain-pass
//! solutions of the weighted energy `E_ρ(u) = ½∫|u'|² − (ρ/p)∫|u|^p` on the
//! mass sphere, Morse indices, and blow-up diagnostics along continuation
//! traces.

pub mod blowup;
pub mod discretize;
pub mod energy;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
