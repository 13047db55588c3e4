use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::state::{QState, C64};
use crate::error::{check_dim, Error, Result};

const STATE_TOL: f64 = 1e-10;

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityState {
    matrix: DMatrix<C64>,
}

impl DensityState {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::invalid("density matrix must be square and non-empty"));
        }
        let herm_err = (&matrix - matrix.adjoint()).norm();
        if herm_err > STATE_TOL {
            return Err(Error::invalid(format!("density matrix is not Hermitian (deviation {herm_err})")));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > STATE_TOL || trace.im.abs() > STATE_TOL {
            return Err(Error::invalid(format!("density matrix trace is {trace}")));
        }
        let min_eig = SymmetricEigen::new(matrix.clone()).eigenvalues.min();
        if min_eig < -STATE_TOL {
            return Err(Error::invalid(format!("density matrix has eigenvalue {min_eig}")));
        }
        Ok(DensityState { matrix })
    }

    pub fn pure(state: &QState) -> Self {
        let v = state.to_dvector();
        DensityState { matrix: &v * v.adjoint() }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `tr_1(e^{-i dt S} (rho (x) sigma) e^{i dt S})` for the swap `S`.
///
/// Since `S^2 = I`, `e^{-i dt S} = cos(dt) I - i sin(dt) S`, and the partial trace evaluates to
/// `cos^2 sigma + sin^2 rho - i cos sin [rho, sigma]` exactly.
pub fn density_exponentiation_step(rho: &DensityState, sigma: &DensityState, dt: f64) -> Result<DensityState> {
    check_dim(rho.dim(), sigma.dim())?;
    let (s, c) = dt.sin_cos();
    let r = &rho.matrix;
    let g = &sigma.matrix;
    let comm = r * g - g * r;
    let out = g * C64::new(c * c, 0.0) + r * C64::new(s * s, 0.0) - comm * C64::new(0.0, c * s);
    Ok(DensityState { matrix: out })
}

/// Applies `steps` exponentiation steps of size `t / steps`, each consuming a fresh copy of `rho`.
pub fn simulate_exponentiation(rho: &DensityState, sigma: &DensityState, t: f64, steps: usize) -> Result<DensityState> {
    if steps == 0 {
        return Err(Error::invalid("need at least one step"));
    }
    let dt = t / steps as f64;
    let mut cur = sigma.clone();
    for _ in 0..steps {
        cur = density_exponentiation_step(rho, &cur, dt)?;
    }
    Ok(cur)
}

/// `e^{-i t rho} sigma e^{i t rho}` through the eigendecomposition of `rho`.
pub fn exact_evolution(rho: &DensityState, sigma: &DensityState, t: f64) -> Result<DensityState> {
    check_dim(rho.dim(), sigma.dim())?;
    let eig = SymmetricEigen::new(rho.matrix.clone());
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, -t * l)));
    let u = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
    Ok(DensityState { matrix: &u * &sigma.matrix * u.adjoint() })
}

/// Frobenius distance between two density matrices.
pub fn distance(a: &DensityState, b: &DensityState) -> f64 {
    (&a.matrix - &b.matrix).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::state::prepare_amplitude_state;

    fn mixed() -> DensityState {
        let m = DMatrix::from_row_slice(2, 2, &[C64::new(0.7, 0.0), C64::new(0.1, 0.2), C64::new(0.1, -0.2), C64::new(0.3, 0.0)]);
        DensityState::new(m).unwrap()
    }

    #[test]
    fn commuting_and_zero_step_leave_sigma() {
        let s = mixed();
        let out = density_exponentiation_step(&s, &s, 0.3).unwrap();
        assert!(distance(&out, &s) < 1e-14);
        let (p, _) = prepare_amplitude_state(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).unwrap();
        let rho = DensityState::pure(&p);
        assert!(distance(&density_exponentiation_step(&rho, &s, 0.0).unwrap(), &s) < 1e-15);
    }

    #[test]
    fn rejects_invalid_states() {
        let m = DMatrix::from_row_slice(2, 2, &[C64::new(1.2, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-0.2, 0.0)]);
        assert!(DensityState::new(m).is_err());
    }
}
