//! Two-block SBP discretization of the 2D wave equation with a 1:2 non-conforming
//! interface, coupled by projection or by a hybrid projection/SAT method.

pub mod block;
pub mod config;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod interp;
pub mod sbp;
pub mod sparse;
pub mod time;
pub mod verify;

pub use error::{Error, Result};
