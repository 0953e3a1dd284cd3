//! Solvers for elliptic quasi-variational-hemivariational inequalities.
//!
//! The problem class: find `u ∈ K(u)` with
//!
//! ```text
//! ⟨Au − f, z − u⟩ + φ(z) − φ(u) + j⁰(Mu; Mz − Mu) ≥ 0   for all z ∈ K(u),
//! ```
//!
//! where `A` is strongly monotone, `φ` convex, `j` locally Lipschitz (Clarke
//! subdifferentiable), `M` a linear map into a second Hilbert space, and the
//! constraint set `K(u)` depends on the unknown. Everything is posed on
//! finite-dimensional Hilbert spaces carried by explicit Gram matrices, so
//! adjoints, dual norms and projections are metric-aware.
//!
//! Module map:
//! - [`hilbert`]: Gram spaces, vectors, duals, linear maps with true adjoints,
//!   nonlinear operator oracles, constant estimation, coordinate matrix IO.
//! - [`convex`]: convex potentials with prox oracles, constraint sets with
//!   metric projections, solution-dependent radial constraint families,
//!   composite prox (Dykstra-style).
//! - [`clarke`]: piecewise-C¹ scalar potentials, interval subdifferentials,
//!   generalized directional derivatives, superposition functionals, radial
//!   retraction and the truncated subgradient map.
//! - [`vi`]: the inner variational inequality (forward-backward splitting),
//!   Minty verification, residuals, perturbation/Mosco convergence harness.
//! - [`qvhi`]: a-priori bounds, the damped fixed-point outer loop, residual
//!   certificates, brute-force oracle, solution-set sampling.
//! - [`problems`]: synthetic instances with known constants and P1 FEM
//!   discretizations of the interior and boundary semipermeability models.

pub mod clarke;
pub mod convex;
mod error;
pub mod hilbert;
pub mod problems;
pub mod qvhi;
pub mod vi;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
