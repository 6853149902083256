pub mod cli;
pub mod cycles;
pub mod density;
pub mod dot;
pub mod error;
pub mod forms;
pub mod harness;
pub mod intersection;
pub mod lattice;
pub mod matrix;
pub mod padic;
pub mod rational;

pub use error::{Error, Result};
