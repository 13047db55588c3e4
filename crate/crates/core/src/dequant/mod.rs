//! Sample-and-query access and the classical estimators built on it.

pub mod estimators;
pub mod fkv;
pub mod solve;
pub mod sq;

pub use estimators::{inner_product_estimate, thin_matvec, Estimate, ThinMatvec, ThinMatvecConfig};
pub use fkv::{fkv_low_rank, FkvConfig, LowRankFactors};
pub use solve::{dequant_norm_aw, dequant_norm_aw_relative, dequant_solve, tilde_inner_estimate, DequantConfig, DequantSolution};
pub use sq::{build_sq, SampleQuery, SqAccess, SqInput, SqMatrix, SqVector};
