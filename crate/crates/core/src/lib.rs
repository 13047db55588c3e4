//! Active-learning sampling against an LS-SVM, scored by exact, simulated-quantum and
//! sample-and-query backends, plus quantile strategies and a covering-based robustness certifier.

pub mod cli;
pub mod data;
pub mod dequant;
pub mod error;
pub mod informativeness;
pub mod robustness;
pub mod rng;
pub mod strategies;
pub mod qsim;
pub mod svm;

pub use error::{Error, Result};
