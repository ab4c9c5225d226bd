//! Finite element library for the Poisson problem −ΔΦ = f on a square,
//! closed by a circuit-type integral boundary condition on the contact side
//! Γ1: Φ = V − R·∫_{Γ1} σ ∂Φ/∂n ds, with an insulated side pair Γ2 and a
//! fixed-potential side Γ3.
//!
//! Two discretizations of the nonlocal condition are provided: a saddle-point
//! Lagrange-multiplier formulation and a penalized (Nitsche-style) formulation
//! whose auxiliary current unknown is eliminated analytically, leaving a
//! symmetric operator plus a rank-one coupling. Linear algebra is in-house:
//! a banded direct solver, restarted GMRES, and a smoothed-aggregation
//! algebraic multigrid preconditioner with a rank-one Woodbury correction.

// The numeric kernels walk several arrays under one index with offsets;
// indexed loops keep them aligned with the matrix algebra they implement.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod assembly;
pub mod bc_methods;
pub mod mesh;
pub mod quadrature;
pub mod solvers;
pub mod sparse;

pub use bc_methods::{AssembledSystem, ProblemSpec, SystemLayout};
pub use mesh::{BoundaryTag, Diagonal, Mesh};
pub use quadrature::QuadratureRules;
pub use sparse::CsrMatrix;
