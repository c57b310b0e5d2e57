//! Analysis toolkit for mass-action chemical reaction networks.
//!
//! A network is a finite directed graph whose vertices are complexes
//! (nonnegative species vectors) and whose edges are reactions. The crate
//! covers structural analysis (linkage classes, stoichiometric subspace,
//! deficiency), mass-action kinetics and their Jacobians, complex-balancing
//! tests built on spanning-tree constants, an embedded Runge-Kutta
//! integrator with positivity control, deterministic rate-perturbation
//! probes, and dynamical equivalence of networks via their polynomial
//! right-hand sides.

pub mod balance;
pub mod dynamics;
pub mod equivalence;
mod error;
pub mod kinetics;
pub(crate) mod linalg;
pub mod network;
pub mod robustness;

pub use error::CrnError;

pub type Result<T> = std::result::Result<T, CrnError>;
