//! Stochastic covering couplings, reversible walks on Boolean lattices and
//! their functional-inequality constants.

pub mod chain;
pub mod concentration;
pub mod decompose;
pub mod dynamics;
pub mod error;
pub mod flow;
pub mod formats;
pub mod functional;
pub mod lattice_measure;
pub mod negdep;
pub mod scalar;
pub mod suite;

pub use error::{Error, Result};
pub use scalar::{Rational, Scalar};
