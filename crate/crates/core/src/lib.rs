//! Numerical study of positive solutions of the singularly perturbed
//! Schrödinger–Maxwell system
//!
//! ```text
//! −ε²Δu + u + ω u v = |u|^{p−2} u,   −Δv = q u²   in Ω,   u = v = 0 on ∂Ω,
//! ```
//!
//! with `4 < p < 6`, on finite-difference lattices. Solutions are sought as
//! critical points of the reduced energy
//! `I_ε(u) = ½‖u‖²_ε + (ω/4)G_ε(u) − (1/p)|u⁺|^p_{ε,p}` constrained to the
//! Nehari manifold, starting from rescaled copies of the whole-space ground
//! state planted at topologically chosen points.
//!
//! Module map:
//! - [`grid`]: domains, lattices, fields and discrete norms
//! - [`groundstate`]: the radial ground state `U` and the level `m_∞`
//! - [`poisson`]: matrix-free CG, `ψ(u)`, `ψ'(u)` and `i*_ε`
//! - [`functional`]: energy, Sobolev gradient, Nehari residual, Hessian products
//! - [`nehari`]: projection onto the Nehari manifold and retraction descent
//! - [`topo`]: photography map, barycenter, partitions and the topology catalog
//! - [`morse`]: Hessian spectra and Morse-index bookkeeping
//! - [`experiments`]: configuration, run records and the command drivers

pub mod error;
pub mod experiments;
pub mod functional;
pub mod grid;
pub mod groundstate;
pub mod morse;
pub mod nehari;
pub mod params;
pub mod poisson;
pub mod topo;

pub use error::{Result, SmsError};
pub use functional::{EnergyBreakdown, Problem};
pub use grid::{build_domain, DomainGrid, DomainShape, Field, Point};
pub use groundstate::{shoot_ground_state, RadialProfile};
pub use nehari::{DescentOptions, SolveReport};
pub use params::Params;
pub use poisson::{CgOptions, Preconditioner};
