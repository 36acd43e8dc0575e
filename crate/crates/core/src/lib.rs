//! Trotter product formulas for quantum stochastic flows on matrix algebras.

pub mod config;
pub mod error;
pub mod flow;
pub mod group;
pub mod linalg;
pub mod rng;
pub mod runner;
pub mod semigroup;
pub mod structure;
pub mod table;
pub mod uhf;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Superoperator};
