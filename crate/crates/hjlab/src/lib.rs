//! Desk-scale laboratory for first-order evolutionary Hamilton-Jacobi
//! equations
//!
//! ∂ₜu + H(∂_q u) = 0,   u(0, ·) = u₀,
//!
//! with integrable Hamiltonians H = H(p) (no q-dependence) in dimensions one
//! and two.  The flow of the characteristic system is exact,
//! φᵗ(q, p) = (q + t∇H(p), p), which makes geometric wavefronts cheap to
//! build and easy to cross-check.
//!
//! The crate constructs generalized wavefronts from Lipschitz, piecewise C²
//! initial data, extracts continuous sections (the variational solutions),
//! solves the same problems with monotone grid schemes and Lax-Oleinik
//! formulas (the viscosity solutions), and measures where and by how much
//! the two notions of generalized solution disagree.  For convex or concave
//! H they coincide; for Hamiltonians that are neither, the `experiments`
//! module reproduces concrete scenarios in d = 1 and d = 2 where the
//! variational solution carries a shock violating the Oleinik entropy
//! condition and sits strictly above the viscosity solution.
//!
//! Everything is deterministic: identical inputs produce identical outputs,
//! bit for bit, regardless of thread count.

pub mod characteristics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod hamiltonian;
mod hermite;
pub mod initial_data;
pub mod io;
pub mod variational;
pub mod viscosity;
pub mod wavefront;

pub use error::HjError;
