//! Simulation and analysis of the one-dimensional Wasserstein gradient flow
//! driven by power-law attraction `|x|^{q_a}` toward a fixed profile `ω`
//! and power-law self-repulsion `|x|^{q_r}`.
//!
//! The state is the pseudo-inverse `X(t, ·)` of the evolving probability
//! measure, sampled on a uniform midpoint grid in the mass variable. In that
//! representation the flow reads
//!
//! ```text
//! ∂t X(t,z) = ∫₀¹ ψ_r'(X(t,z) − X(t,ζ)) dζ − U(X(t,z)),   U = ψ_a' ∗ ω,
//! ```
//!
//! with the repulsion integral replaced by `2z − 1` when `q_r = 1` and
//! `U = 2G − m` when `q_a = 1`.

pub mod dynamics;
pub mod energetics;
pub mod error;
pub mod fit;
pub mod io;
pub mod kernels;
pub mod measures;
pub mod particle;
pub mod steady;

pub use dynamics::{
    closed_form_q2, rhs, simulate, step, FlowState, IntegratorConfig, Probe, Scheme, Trajectory,
};
pub use energetics::{EnergyReport, FourierGrid, ReportOptions};
pub use error::{Error, Result};
pub use kernels::{AttractionMode, AttractionPotential, Exponents, Regime};
pub use measures::{wasserstein, InverseCdf, MassQuadrature, ReferenceProfile};
pub use particle::ParticleSystem;
pub use steady::{SteadyKind, SteadyState};
