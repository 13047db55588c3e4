use nalgebra::{Complex, DVector};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::svm::{norm2, SvmSolution};

pub type C64 = Complex<f64>;

const NORM_TOL: f64 = 1e-10;

/// Normalized amplitude vector over `qubits` qubits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QState {
    amplitudes: Vec<C64>,
    qubits: usize,
}

pub(crate) fn qubits_for(len: usize) -> usize {
    len.max(1).next_power_of_two().trailing_zeros() as usize
}

impl QState {
    /// Wraps amplitudes whose length is a power of two and whose norm is 1.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::invalid(format!("state length {len} is not a power of two")));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!("state norm {norm} is not 1")));
        }
        Ok(QState { qubits: qubits_for(len), amplitudes })
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &QState) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn to_dvector(&self) -> DVector<C64> {
        DVector::from_column_slice(&self.amplitudes)
    }

    /// The first `len` amplitudes; errors if any amplitude beyond them is nonzero.
    pub fn leading(&self, len: usize) -> Result<DVector<C64>> {
        if len > self.dim() {
            return Err(Error::Dimension { expected: len, got: self.dim() });
        }
        if self.amplitudes[len..].iter().any(|a| a.norm() > NORM_TOL) {
            return Err(Error::invalid("state has weight outside the encoded subspace"));
        }
        Ok(DVector::from_column_slice(&self.amplitudes[..len]))
    }
}

/// Normalizes `v` into a padded state and returns `|v|` alongside it.
pub fn prepare_amplitude_state(v: &[C64]) -> Result<(QState, f64)> {
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::invalid("cannot encode a zero or non-finite vector"));
    }
    let len = v.len().next_power_of_two();
    let mut amps = vec![C64::new(0.0, 0.0); len];
    for (a, x) in amps.iter_mut().zip(v) {
        *a = x / norm;
    }
    Ok((QState { qubits: qubits_for(len), amplitudes: amps }, norm))
}

pub fn prepare_real_state(v: &[f64]) -> Result<(QState, f64)> {
    let c: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
    prepare_amplitude_state(&c)
}

/// Simulates the ancilla-controlled swap test on `(|0>|u> + |1>|x>)/sqrt 2` followed by a Hadamard
/// on the ancilla, returning the probability of reading the ancilla as 1, `1/2 (1 - Re<u|x>)`.
pub fn swap_test_probability(u: &QState, x: &QState) -> Result<f64> {
    check_dim(u.dim(), x.dim())?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut p1 = 0.0;
    for (a, b) in u.amplitudes.iter().zip(&x.amplitudes) {
        // Branch amplitudes before the Hadamard are a/sqrt2 and b/sqrt2.
        let one = (a * h - b * h) * h;
        p1 += one.norm_sqr();
    }
    Ok(p1)
}

/// The states `|u~>` and `|x~>` whose overlap is [`crate::svm::tilde_inner`].
///
/// Both live on an index register of `n + 1` entries tensored with a feature register of `m` entries:
/// `|u~> ~ b|0,0> + sum_k alpha_k |x_k| |k> |x_k>` and `|x~> ~ |0,0> + sum_k |x| |k> |x>`.
pub fn tilde_states(sol: &SvmSolution, points: &[Vec<f64>], x: &[f64]) -> Result<(QState, QState)> {
    check_dim(sol.alpha.len(), points.len())?;
    let m = x.len();
    let n = points.len();
    let mut u = vec![0.0; (n + 1) * m];
    let mut v = vec![0.0; (n + 1) * m];
    u[0] = sol.b;
    v[0] = 1.0;
    for (k, (p, a)) in points.iter().zip(&sol.alpha).enumerate() {
        check_dim(m, p.len())?;
        if norm2(p) == 0.0 {
            return Err(Error::invalid("training points must have nonzero norm"));
        }
        for j in 0..m {
            u[(k + 1) * m + j] = a * p[j];
            v[(k + 1) * m + j] = x[j];
        }
    }
    Ok((prepare_real_state(&u)?.0, prepare_real_state(&v)?.0))
}
