//! Waveform relaxation for linear surface-coupled systems `B u' + A u = f`.
//!
//! Jacobi and Gauss-Seidel WR, asynchronous WR over emulated one-sided
//! communication (constant or variable relaxation), optimal relaxation for
//! the 1D heat model problem, and discrete convergence checks.

pub mod analysis;
pub mod error;
pub mod interp;
pub mod linalg;
pub mod model;
pub mod par;
pub mod relaxopt;
pub mod rma;
pub mod timeint;
pub mod wr;

pub use error::{Error, Result};
