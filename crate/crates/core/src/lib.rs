//! AdaGrad-family optimizers, instrumented test problems, and the diagnostics
//! needed to check their convergence behaviour numerically.

pub mod assumption_checkers;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod optimizers;
pub mod problems;

pub use error::{Error, Result};
