pub mod error;
pub mod model;
pub mod par;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub mod diagnostics;
pub mod experiments;
pub mod io;
pub mod stats;
