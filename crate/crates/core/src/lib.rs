//! Semiclassical mode analysis for the rotating shallow-water wave operator.
//!
//! The crate decomposes the 3x3 first-order system into its Rossby and
//! Poincare scalar modes, traces the associated Hamiltonian rays with full
//! invariant monitoring, and validates the mode decomposition at the level of
//! discretized operators on a periodic grid.
//!
//! Modules:
//! - [`symbols`]: phase-space expression trees, exact derivatives, Poisson
//!   brackets.
//! - [`profile`]: the Coriolis amplitude `b(x2)` and stationary flow catalogue.
//! - [`spectral`]: the 3x3 wave matrices, their closed-form eigenstructure and
//!   a generic iterative eigensolver used as an independent oracle.
//! - [`normal_form`]: scalar Hamiltonians, the first-order diagonal correction
//!   and the homological/unitarity steps of the block diagonalization.
//! - [`raytrace`]: adaptive bicharacteristic integration, escape and trapping
//!   diagnostics, commutator positivity bounds.
//! - [`quantize`]: grid Weyl quantization and operator-level residual checks.
//! - [`sampler`]: deterministic low-discrepancy phase-space sampling.

pub mod linalg;
pub mod normal_form;
pub mod profile;
pub mod quantize;
pub mod raytrace;
pub mod sampler;
pub mod spectral;
pub mod symbols;

pub use profile::{FlowSpec, Periodicity, Profile, SupportBox};
pub use symbols::{PhasePoint, ScalarSymbol};
