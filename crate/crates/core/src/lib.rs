//! Singular stationary solitons of the 2-D heat equation with exponential
//! nonlinearity, and the bounded solution that leaves the same initial data.

pub mod error;
pub mod heat;
pub mod inner;
pub mod nonlinearity;
pub mod numerics;
pub mod shooting;

pub use error::{Error, Result};
