//! Finite element Darcy flow in piecewise-homogeneous porous media.
//!
//! The potential is computed by the Galerkin method; velocities come either
//! from stabilized mixed formulations (GLS, HVM) on equal-order C0 spaces or
//! from post-processing the Galerkin potential, globally (GPP, and GPPID
//! which imposes the interface jump conditions through a nodal transform)
//! or locally on macroelements (LPP).

pub mod basis;
pub mod bench;
pub mod convergence;
pub mod error;
pub mod export;
pub mod field;
pub mod gpp;
pub mod lpp;
pub mod mesh;
pub mod mixed;
pub mod potential;
pub mod problem;
pub mod sparse;

pub use basis::Degree;
pub use convergence::{run_convergence, run_method, ConvergenceReport, Method, MethodOptions, RunResult};
pub use error::{Error, Result};
pub use field::{Conductivity, ConductivityField, ScalarField, StorageMode, VectorField, VelocityField};
pub use mesh::{Mesh, Rect, SubdomainId};
pub use problem::{builtin_problem, ExactSolution, ProblemDefinition};
