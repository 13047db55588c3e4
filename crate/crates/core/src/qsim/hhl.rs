use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::state::{prepare_real_state, QState};
use crate::error::{check_dim, Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct HhlResult {
    /// Postselected solution state.
    pub solution: QState,
    /// Probability of the rotation ancilla reading 1.
    pub p1: f64,
    /// `kappa_eff |y| sqrt(p1)`: the norm of the filtered solution.
    pub recovered_norm: f64,
    /// Eigencomponents that passed the filter.
    pub kept: usize,
    pub filtered: usize,
}

fn check_symmetric(f: &DMatrix<f64>) -> Result<()> {
    if !f.is_square() {
        return Err(Error::invalid("matrix must be square"));
    }
    let asym = (f - f.transpose()).amax();
    if asym > SYMMETRY_TOL * f.amax().max(1.0) {
        return Err(Error::invalid("matrix must be symmetric"));
    }
    Ok(())
}

/// Largest eigenvalue magnitude of a symmetric matrix.
pub fn spectral_norm(f: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(f)?;
    Ok(SymmetricEigen::new(f.clone()).eigenvalues.amax())
}

/// Phase estimation rounds an eigenvalue in `[-1, 1]` to `eig_bits` fractional bits.
pub fn round_eigenvalue(lambda: f64, eig_bits: u32) -> f64 {
    let scale = (eig_bits as f64).exp2();
    (lambda * scale).round() / scale
}

/// HHL on a real symmetric `f` with spectral norm at most 1.
///
/// `y` is decomposed in the eigenbasis, eigenvalues are rounded to `eig_bits` bits, and the
/// rotation `1/(kappa_eff lambda)` is applied only where `|lambda| >= 1/kappa_eff`. Components
/// below the threshold are discarded.
pub fn hhl_solve(f: &DMatrix<f64>, y: &[f64], kappa_eff: f64, eig_bits: u32) -> Result<HhlResult> {
    check_symmetric(f)?;
    check_dim(f.nrows(), y.len())?;
    if !(kappa_eff >= 1.0) {
        return Err(Error::invalid(format!("kappa_eff must be >= 1, got {kappa_eff}")));
    }
    if eig_bits == 0 || eig_bits > 52 {
        return Err(Error::invalid("eig_bits must be in 1..=52"));
    }
    let (y_state, y_norm) = prepare_real_state(y)?;
    let eig = SymmetricEigen::new(f.clone());
    if eig.eigenvalues.amax() > 1.0 + 1e-9 {
        return Err(Error::invalid("matrix must be scaled so that every |eigenvalue| <= 1"));
    }
    let y_hat = DVector::from_iterator(y.len(), y_state.amplitudes()[..y.len()].iter().map(|a| a.re));
    let threshold = 1.0 / kappa_eff;
    let mut x = DVector::zeros(y.len());
    let mut p1 = 0.0;
    let mut kept = 0;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let u = eig.eigenvectors.column(j);
        let beta = u.dot(&y_hat);
        let lt = round_eigenvalue(lambda, eig_bits);
        if lt.abs() < threshold {
            continue;
        }
        kept += 1;
        let amp = beta / (kappa_eff * lt);
        p1 += amp * amp;
        x += u * amp;
    }
    if kept == 0 || p1 == 0.0 {
        return Err(Error::AllFiltered);
    }
    let (solution, _) = prepare_real_state(x.as_slice())?;
    Ok(HhlResult {
        solution,
        p1,
        recovered_norm: kappa_eff * y_norm * p1.sqrt(),
        kept,
        filtered: y.len() - kept,
    })
}
