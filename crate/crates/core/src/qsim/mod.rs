//! Desk-scale simulation of the quantum subroutines: amplitude encoding and the swap test,
//! density-matrix exponentiation, HHL with spectral filtering, the Chebyshev walk, LCU,
//! and amplitude estimation with median amplification.

pub mod amplitude;
pub mod density;
pub mod hhl;
pub mod lcu;
pub mod state;
pub mod walk;

pub use amplitude::{amplitude_estimate, median_amplify, AeConfig, AeMode};
pub use density::{density_exponentiation_step, DensityState};
pub use hhl::{hhl_solve, HhlResult};
pub use lcu::{lcu_apply, recover_norm_lcu, LcuResult};
pub use state::{prepare_amplitude_state, swap_test_probability, QState, C64};
pub use walk::{chebyshev_apply, recover_norm_chebyshev, ChebyshevResult, WalkContext};
