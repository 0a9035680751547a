//! Numerical solver for second-order evolution inclusions
//!
//! ```text
//! u''(t) + dPsi(u'(t)) + B(t, u(t)) ∋ f(t),   u(0) = u0,  u'(0) = v0,
//! ```
//!
//! where `Psi` is a proper convex dissipation potential and `B` is a (locally)
//! Lipschitz coupling. The inclusion is split into the first-order system
//! `v' + dPsi(v) + B(t, u) ∋ f`, `u' = v`. For a frozen trajectory `u` the
//! velocity equation is advanced by proximal implicit Euler ([`resolvent`]),
//! and `u` is recovered as the fixed point of `F(u) = u0 + ∫ J(u)` by Picard
//! iteration ([`picard`]). [`analysis`] holds the quantitative checks
//! (Gronwall bounds, stability constants, convergence orders) and [`pde1d`]
//! builds the one-dimensional damped-wave instance with a gradient-dependent
//! dissipation potential.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coupling;
pub mod error;
pub mod pde1d;
pub mod picard;
pub mod potentials;
pub mod problem;
pub mod resolvent;
pub mod trajectory;

pub use coupling::{Coupling, Lipschitz};
pub use error::{Error, Result};
pub use potentials::{ConvexPotential, Potential, PotentialKind, ProxResult};
pub use problem::{Forcing, Mode, ProblemSpec, SolverConfig};
pub use trajectory::{SelectionTrajectory, TimeGrid, Trajectory};

pub use nalgebra::{DMatrix, DVector};
