#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

#[cfg(feature = "cli")]
pub mod cli;
pub mod eit;
pub mod envelope;
pub mod fem;
pub mod fields;
pub mod error;
pub mod grid;
pub mod io;
pub mod shape_gradient;
pub mod transport;

pub use error::{Error, Result};
pub use grid::{GridSpec, LevelFunctionSet};
