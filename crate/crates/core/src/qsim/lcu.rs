use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::state::{prepare_amplitude_state, QState, C64};
use crate::error::{check_dim, Error, Result};

const UNITARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct LcuResult {
    /// Normalized flag-zero block, proportional to `(sum_i alpha_i U_i) v`; `None` when it vanishes.
    pub state: Option<QState>,
    /// `|(sum_i alpha_i U_i) v| / sqrt(sum_i alpha_i^2)`, the amplitude with an unnormalized Hadamard.
    /// Can exceed 1.
    pub a0: f64,
    /// Physical flag-zero amplitude with normalized Hadamards: `a0 / sqrt(R)`, `R` the padded
    /// coefficient-register size. This is what amplitude estimation measures.
    pub flag_amplitude: f64,
    pub register_size: usize,
}

/// In-place normalized Walsh-Hadamard transform over the leading index.
fn hadamard_rows(rows: &mut [DVector<C64>]) {
    let n = rows.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let a = rows[j].clone();
                let b = rows[j + h].clone();
                rows[j] = &a + &b;
                rows[j + h] = a - b;
            }
        }
        h *= 2;
    }
    let s = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    for r in rows.iter_mut() {
        *r *= s;
    }
}

/// Prepare `sum_i alpha_i |i> / |alpha|`, apply `sum_i |i><i| (x) U_i`, Hadamard the coefficient
/// register, and read the block where that register is zero.
pub fn lcu_apply(coeffs: &[f64], unitaries: &[DMatrix<C64>], v: &QState) -> Result<LcuResult> {
    check_dim(coeffs.len(), unitaries.len())?;
    if coeffs.is_empty() {
        return Err(Error::invalid("need at least one term"));
    }
    let alpha_norm = coeffs.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(alpha_norm > 0.0) {
        return Err(Error::invalid("coefficients must not all be zero"));
    }
    let dim = v.dim();
    for u in unitaries {
        if u.shape() != (dim, dim) {
            return Err(Error::Dimension { expected: dim, got: u.nrows() });
        }
        let dev = (u.adjoint() * u - DMatrix::identity(dim, dim)).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if dev > UNITARY_TOL {
            return Err(Error::invalid(format!("operator is not unitary (deviation {dev})")));
        }
    }
    let r = coeffs.len().next_power_of_two();
    let vv = v.to_dvector();
    let mut rows: Vec<DVector<C64>> = (0..r)
        .map(|i| match coeffs.get(i) {
            Some(&a) => &unitaries[i] * &vv * C64::new(a / alpha_norm, 0.0),
            None => DVector::zeros(dim),
        })
        .collect();
    hadamard_rows(&mut rows);
    let block = &rows[0];
    let flag_amplitude = block.norm();
    let state = if flag_amplitude > 0.0 { Some(prepare_amplitude_state(block.as_slice())?.0) } else { None };
    Ok(LcuResult { state, a0: flag_amplitude * (r as f64).sqrt(), flag_amplitude, register_size: r })
}

/// `|M v| = A0 |v| sqrt(sum_i alpha_i^2)`.
pub fn recover_norm_lcu(a0: f64, v_norm: f64, coeffs: &[f64]) -> f64 {
    a0 * v_norm * coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
}
