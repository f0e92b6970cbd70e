//! Numerical toolkit for the critical biharmonic problem under Navier
//! boundary conditions: bubble profiles and their domain projections,
//! bilaplacian solves as cascaded Poisson solves, Green-function regular
//! parts, the quotient energy functional with its concentration
//! expansion, a normalized gradient flow, and scalar inequality oracles.

pub mod bubble;
pub mod energy;
pub mod error;
pub mod flow;
pub mod green;
pub mod grid;
pub mod inequalities;
pub mod snapshot;
pub mod solver;
pub(crate) mod special;

pub use error::{Error, Result};
pub use grid::{make_domain, sample, Domain, Point, ScalarField, ShapeSpec};
