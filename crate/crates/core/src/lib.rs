//! Mixed-precision GMRES-based iterative refinement under emulated
//! floating-point formats, with a tabular contextual bandit that picks the
//! precision of each step per linear system.

pub mod actionspace;
pub mod agent;
pub mod cli;
pub mod context;
pub mod error;
pub mod fpemu;
pub mod gmres_ir;
pub mod harness;
pub mod kernels;
pub mod problems;
pub mod reward;

pub use error::{Error, Result};
