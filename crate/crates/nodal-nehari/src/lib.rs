//! Radial sign-changing least-energy solutions of the Schrodinger-Poisson system
//!
//! ```text
//!   -Δu + u + λ φ_u u = f(u),   -Δφ = u²   on ℝ³,
//! ```
//!
//! restricted to radial functions on a truncated domain `[0, R_max]`. The
//! nonlinearity is asymptotically cubic by default, `f(t) = t⁵/(1+t²)`, which
//! puts the problem exactly at the critical growth of the nonlocal term: the
//! quadratic form `λ∫φ_u u²` and the nonlinear term `∫F(u)` scale with the
//! same fourth power along fiber rays, so existence of sign-changing bound
//! states depends quantitatively on `λ`.
//!
//! The crate computes the least-energy nodal solution by minimizing the action
//!
//! ```text
//!   I(u) = ½‖u‖² + (λ/4)∫φ_u u² − ∫F(u)
//! ```
//!
//! over the nodal Nehari set
//!
//! ```text
//!   𝓜 = { u : u± ≠ 0,  I′(u)[u⁺] = 0,  I′(u)[u⁻] = 0 },
//! ```
//!
//! with a two-parameter Miranda-type projection onto 𝓜, an explicit two-scale
//! seed construction (a rescaled positive ground state glued against its own
//! shrunk copy), and a certification pass that re-verifies every membership
//! and optimality condition on the returned minimizer.
//!
//! Module map:
//!
//! * [`grid`] — radial mesh, quadrature, norms, CSV output.
//! * [`poisson`] — Newton-kernel solver for `−Δφ = u²` and the coupling `D(u,v)`.
//! * [`model`] — nonlinearities, growth-hypothesis checks, small-ball constants.
//! * [`energy`] — action, fiber maps `γ, γ±`, gradients, residuals.
//! * [`constraint`] — Nehari and nodal-Nehari projections, Miranda box solver.
//! * [`seed`] — positive ground state and the two-scale sign-changing seed.
//! * [`solver`] — constrained minimization on 𝓜, certification, a decoupled
//!   λ = 0 oracle.
//! * [`suites`] — the invariant suites shared by `verify` and the test suite.
//! * [`cli`] — configuration, subcommands, report files.

pub mod constraint;
pub mod energy;
pub mod grid;
pub mod model;
pub mod poisson;
pub mod seed;
pub mod solver;

mod plquad;
mod tridiag;

pub use grid::{make_grid, GridError, RadialField, RadialGrid};
pub use model::{builtin_asymcubic, builtin_power, Nonlinearity};
