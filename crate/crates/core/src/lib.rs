//! Numerical tools for p-Dirichlet energies of maps into the circle and the
//! flat chains carried by their singular sets.
//!
//! * [`coeffgroup`]: coefficient groups, cost tables and decomposition norms.
//! * [`loopmin`]: minimal p-energies of loops in a homotopy class.
//! * [`chains`]: cubical chains with group coefficients, flat norms, fillings.
//! * [`fields`]: lattice fields, their p-energy and its minimisation.
//! * [`singset`]: extraction of the singular chain of a lattice field.
//! * [`ballconstruct`]: the ball construction and the lower bounds it gives.

pub mod ballconstruct;
pub mod chains;
pub mod coeffgroup;
pub mod error;
pub mod fields;
pub mod flow;
mod intlin;
pub mod loopmin;
pub mod lp;
pub mod optim;
pub mod report;
pub mod singset;

pub use error::{Error, Result};
