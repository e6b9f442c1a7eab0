//! Nyström solver for the interior Dirichlet Laplace problem on perturbed tori,
//! using higher-order singularity subtraction for the double-layer operator.

mod dd;
pub mod error;
pub mod fpintegrals;
pub mod geometry;
pub mod harness;
pub mod linsolve;
pub mod operator;
pub mod oracle;
pub mod quadrature;
pub mod validation;

pub use error::{Error, Result};
