pub mod cli;
pub mod convergence;
pub mod coupled;
pub mod eikonal;
pub mod error;
pub mod evaluation;
pub mod field;
mod linalg;
mod marching;
pub mod pdmp;
pub mod pessimistic;
pub mod policy;
pub mod radial;
pub mod repair;
pub mod scenario;
pub mod solver;
pub mod terrain;
pub mod trace;

pub use error::{Error, Result};
