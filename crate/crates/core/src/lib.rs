pub mod abc;
pub mod error;
pub mod fem;
pub mod integrator;
pub mod mesh;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
