//! Semi-Lagrangian value iteration for infinite-horizon discounted optimal
//! control.
//!
//! The library discretizes the dynamic programming principle in time (step
//! `h`, discount factor `1 - lambda*h`) and in space (piecewise affine
//! reconstruction on a simplicial mesh of size `k`), iterates the resulting
//! Bellman operator to its unique fixed point, and ships a study harness
//! that measures convergence rates of the scheme against exact or reference
//! value functions.
//!
//! Modules:
//! - [`mesh`]: Kuhn-triangulated box domains with O(1) point location.
//! - [`interp`]: piecewise affine nodal interpolation.
//! - [`expr`]: a small expression language for dynamics and costs, with
//!   symbolic differentiation.
//! - [`problem`]: control problems, control-set sampling, manufactured
//!   benchmarks with exactly known value functions, validation.
//! - [`solver`]: the discrete Bellman operator and its fixed-point solve.
//! - [`cost`]: discounted cost functionals (continuous reference, discrete
//!   rollout, brute-force sequence search).
//! - [`policy`]: greedy feedback synthesis from a solved value function.
//! - [`study`]: refinement schedules, error tables and rate fits.

pub mod cost;
pub mod error;
pub mod expr;
pub mod interp;
pub mod mesh;
pub mod policy;
pub mod problem;
pub mod solver;
pub mod study;

pub use error::{Error, Result};
pub use expr::Expression;
pub use interp::NodalField;
pub use mesh::{BarycentricLocation, BoxDomain, SimplicialMesh};
pub use problem::{ControlSet, ManufacturedProblem, Problem, ProblemBounds};
pub use solver::{SolveConfig, ValueFunction};
