//! Quadratic finite element methods for the von Karman plate equations.
//!
//! Three discretisations share one code path: the nonconforming Morley
//! element, the C0 interior penalty method on continuous Lagrange P2
//! functions, and a symmetric interior penalty discontinuous Galerkin method.
//! The crate provides meshes with red and newest-vertex-bisection
//! refinement, sparse assembly, a Newton solver, discrete error norms
//! including a norm shared by all three methods, residual error estimators
//! with Doerfler marking, and drivers for convergence studies.

pub mod error;
pub mod geom;
pub mod mesh;
pub mod quadrature;
pub mod femspace;
pub mod sparse;
pub mod assembly;
pub mod solver;
pub mod analysis;
pub mod problems;
pub mod estimate;
pub mod adapt;

pub use error::{Error, Result};
pub use femspace::{FeSpace, Method};
pub use geom::{Jet, Point, Sym2};
pub use mesh::Triangulation;
pub use assembly::{DiscreteSolution, Loads, PenaltyConfig};
pub use analysis::{ConvergenceRecord, ExactSolutionPair, NormKind};
pub use solver::{newton_solve, NewtonConfig, NewtonReport};
