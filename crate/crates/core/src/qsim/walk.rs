use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::state::{prepare_amplitude_state, qubits_for, QState, C64};
use crate::error::{check_dim, Error, Result};

const ENTRY_TOL: f64 = 1e-12;

/// A real symmetric matrix prepared for one step of the Chebyshev walk.
///
/// The walk states use the rescaled entries `A = s M`, which must satisfy `|A_jk| <= 1`.
/// One step applies `M_bar = s M / d` on the flag-zero block.
#[derive(Debug, Clone, Serialize)]
pub struct WalkContext {
    m: DMatrix<f64>,
    d: usize,
    s: f64,
    /// Row `j` holds the walk amplitudes of `|psi_j>` on the second `2 n_bar` register.
    #[serde(skip)]
    phi: DMatrix<C64>,
}

/// `sqrt(conj(a))` for the entry at `(row, col)`.
///
/// The principal branch maps both `A_jk` and `A_kj` of a negative entry to `+i sqrt|a|`, which would
/// turn the product into `|a|`. Negative reals therefore take argument `+pi` above the diagonal and
/// `-pi` below it, so that the pair multiplies back to `a`.
fn branch_sqrt(a: f64, row: usize, col: usize) -> C64 {
    if a >= 0.0 {
        C64::new(a.sqrt(), 0.0)
    } else {
        let arg = if row < col { std::f64::consts::PI } else { -std::f64::consts::PI };
        C64::from_polar(a.abs().sqrt(), arg / 2.0)
    }
}

impl WalkContext {
    /// `scale = None` picks the largest valid rescaling, `1 / max|M_jk|`.
    pub fn new(m: DMatrix<f64>, scale: Option<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::invalid("walk matrix must be square and non-empty"));
        }
        if (&m - m.transpose()).amax() > ENTRY_TOL * m.amax().max(1.0) {
            return Err(Error::invalid("walk matrix must be symmetric"));
        }
        let n = m.nrows();
        if (0..n).any(|j| m[(j, j)] < 0.0) {
            // T^dagger S T has diagonal |A_jj| >= 0, so negative diagonal entries cannot be represented.
            return Err(Error::invalid("walk matrix must have a non-negative diagonal"));
        }
        let max = m.amax();
        let s = match scale {
            Some(s) => s,
            None if max > 0.0 => 1.0 / max,
            None => 1.0,
        };
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::invalid("walk scale must be positive"));
        }
        if s * max > 1.0 + ENTRY_TOL {
            return Err(Error::invalid(format!("rescaled entries reach {} > 1", s * max)));
        }
        let d = n;
        let norm = 1.0 / (d as f64).sqrt();
        let mut phi = DMatrix::from_element(n, 2 * n, C64::new(0.0, 0.0));
        for j in 0..n {
            for k in 0..n {
                let a = (s * m[(j, k)]).clamp(-1.0, 1.0);
                phi[(j, k)] = branch_sqrt(a, j, k) * norm;
                phi[(j, k + n)] = C64::new((1.0 - a.abs()).sqrt() * norm, 0.0);
            }
        }
        Ok(WalkContext { m, d, s, phi })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn sparsity(&self) -> usize {
        self.d
    }

    pub fn scale(&self) -> f64 {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// `M_bar = s M / d`.
    pub fn m_bar(&self) -> DMatrix<f64> {
        &self.m * (self.s / self.d as f64)
    }

    /// `T |psi>` as a `2 n_bar x 2 n_bar` array indexed by the two walk registers.
    pub fn isometry_apply(&self, psi: &DVector<C64>) -> DMatrix<C64> {
        let n = self.dim();
        let mut out = DMatrix::from_element(2 * n, 2 * n, C64::new(0.0, 0.0));
        for j in 0..n {
            for l in 0..2 * n {
                out[(j, l)] = psi[j] * self.phi[(j, l)];
            }
        }
        out
    }

    /// `T^dagger` applied to a walk-space array.
    pub fn isometry_adjoint(&self, v: &DMatrix<C64>) -> DVector<C64> {
        let n = self.dim();
        DVector::from_iterator(n, (0..n).map(|j| (0..2 * n).map(|l| self.phi[(j, l)].conj() * v[(j, l)]).sum()))
    }
}

/// Hermitian embedding `[[0, A^T], [A, 0]]` of a rectangular `A`.
pub fn hermitian_embedding(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut m = DMatrix::zeros(r + c, r + c);
    m.view_mut((c, 0), (r, c)).copy_from(a);
    m.view_mut((0, c), (c, r)).copy_from(&a.transpose());
    m
}

/// `A = [0 | X^T]`, the `m x (n + 1)` matrix with `A (b, alpha) = sum_i alpha_i x_i`.
pub fn weight_matrix(points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = points.first().map(|p| p.len()).ok_or_else(|| Error::invalid("no points"))?;
    let mut a = DMatrix::zeros(m, points.len() + 1);
    for (i, p) in points.iter().enumerate() {
        check_dim(m, p.len())?;
        for (r, v) in p.iter().enumerate() {
            a[(r, i + 1)] = *v;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChebyshevResult {
    /// Normalized flag-zero block, i.e. `M_bar psi / |M_bar psi|`; `None` when the block vanishes.
    pub state: Option<QState>,
    /// Unnormalized flag-zero block `T^dagger W T psi`.
    pub block: Vec<C64>,
    /// `|M_bar psi|`, the flag-zero amplitude.
    pub a0: f64,
    /// Norm of the component orthogonal to the flag-zero block.
    pub orthogonal_norm: f64,
}

/// One walk step `W = S (2 T T^dagger - 1)` sandwiched between `T` and `T^dagger`.
pub fn chebyshev_apply(ctx: &WalkContext, psi: &QState) -> Result<ChebyshevResult> {
    let n = ctx.dim();
    if psi.qubits() != qubits_for(n) {
        return Err(Error::Dimension { expected: n.next_power_of_two(), got: psi.dim() });
    }
    let v = psi.leading(n)?;
    let t_psi = ctx.isometry_apply(&v);
    // Reflection about the image of T fixes T|psi>, so W T|psi> = S T|psi>.
    let reflected = {
        let back = ctx.isometry_adjoint(&t_psi);
        ctx.isometry_apply(&back) * C64::new(2.0, 0.0) - &t_psi
    };
    let walked = reflected.transpose();
    let block = ctx.isometry_adjoint(&walked);
    let a0 = block.norm();
    let total = walked.norm();
    let orthogonal_norm = (total * total - a0 * a0).max(0.0).sqrt();
    let state = if a0 > 0.0 { Some(prepare_amplitude_state(block.as_slice())?.0) } else { None };
    Ok(ChebyshevResult { state, block: block.as_slice().to_vec(), a0, orthogonal_norm })
}

/// `|M v| = A0 |v| d / s`.
pub fn recover_norm_chebyshev(a0: f64, v_norm: f64, ctx: &WalkContext) -> f64 {
    a0 * v_norm * ctx.d as f64 / ctx.s
}
