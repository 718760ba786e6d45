//! Numerics for the periodic Benjamin-Ono equation
//! `∂_t u = ∂_x(|∂_x| u - u²)` at finite Fourier truncation.
//!
//! The crate covers the Lax-operator spectral theory, Birkhoff coordinates,
//! finite-gap potentials, the linearized map `Ψ_L`, the symplectic corrector
//! `Ψ_C`, a para/pseudo-differential toolkit and an exponential integrator
//! used as a dynamical cross-check.

pub mod birkhoff;
pub mod corrector;
pub mod error;
pub mod finite_gap;
pub mod flow;
pub mod lax;
pub mod linearized;
pub mod parallel;
pub mod pdo;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::C64;
