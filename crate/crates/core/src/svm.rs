//! Least-squares SVM: kernel, the bordered system `F (b, alpha) = (0, y)`, weights and margin.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Residual tolerance a solve must meet before it is returned.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

pub const DEFAULT_GAMMA: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    Linear,
    /// `(x . y + 1)^order`
    Polynomial { order: u32 },
    /// `exp(-|x - y|^2 / (2 width^2))`
    Rbf { width: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Polynomial { order } if order < 1 => Err(Error::invalid("polynomial order must be >= 1")),
            KernelSpec::Rbf { width } if !(width > 0.0) => Err(Error::invalid("rbf width must be positive")),
            _ => Ok(()),
        }
    }

    /// Kernel order used in complexity accounting.
    pub fn order(&self) -> u32 {
        match *self {
            KernelSpec::Polynomial { order } => order,
            _ => 1,
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Polynomial { order } => (dot(a, b) + 1.0).powi(order as i32),
            KernelSpec::Rbf { width } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * width * width)).exp()
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let m = points.first().map(|p| p.len()).ok_or_else(|| Error::invalid("no points"))?;
    for p in points {
        check_dim(m, p.len())?;
    }
    Ok(m)
}

pub fn kernel_matrix(points: &[Vec<f64>], kernel: KernelSpec) -> Result<DMatrix<f64>> {
    kernel.validate()?;
    if points.len() < 2 {
        return Err(Error::invalid("kernel matrix needs at least two points"));
    }
    check_points(points)?;
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `F = [[0, 1^T], [1, K + I/gamma]]`.
pub fn assemble_f(k: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    if !k.is_square() {
        return Err(Error::invalid("kernel matrix must be square"));
    }
    let n = k.nrows();
    let mut f = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        f[(0, i + 1)] = 1.0;
        f[(i + 1, 0)] = 1.0;
        for j in 0..n {
            f[(i + 1, j + 1)] = k[(i, j)];
        }
        f[(i + 1, i + 1)] += 1.0 / gamma;
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SolutionRepr", into = "SolutionRepr")]
pub struct SvmSolution {
    pub b: f64,
    pub alpha: Vec<f64>,
    pub gamma: f64,
    /// Euclidean norm of `(b, alpha)`.
    pub solution_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct SolutionRepr {
    b: f64,
    alpha: Vec<f64>,
    gamma: f64,
}

impl From<SolutionRepr> for SvmSolution {
    fn from(r: SolutionRepr) -> Self {
        SvmSolution::new(r.b, r.alpha, r.gamma)
    }
}

impl From<SvmSolution> for SolutionRepr {
    fn from(s: SvmSolution) -> Self {
        SolutionRepr { b: s.b, alpha: s.alpha, gamma: s.gamma }
    }
}

impl SvmSolution {
    pub fn new(b: f64, alpha: Vec<f64>, gamma: f64) -> Self {
        let solution_norm = (b * b + alpha.iter().map(|a| a * a).sum::<f64>()).sqrt();
        SvmSolution { b, alpha, gamma, solution_norm }
    }

    /// `(b, alpha_1, ..., alpha_n)` as one vector.
    pub fn stacked(&self) -> Vec<f64> {
        std::iter::once(self.b).chain(self.alpha.iter().copied()).collect()
    }
}

/// Dense LU solve of `F (b, alpha) = (0, y)`, rejected unless the residual is below [`SOLVE_TOLERANCE`]
/// relative to `max(1, |y|)`.
pub fn solve_lssvm(f: &DMatrix<f64>, y: &[f64], gamma: f64) -> Result<SvmSolution> {
    if !f.is_square() {
        return Err(Error::invalid("F must be square"));
    }
    check_dim(f.nrows(), y.len() + 1)?;
    let rhs = DVector::from_iterator(y.len() + 1, std::iter::once(0.0).chain(y.iter().copied()));
    let sol = f.clone().lu().solve(&rhs).ok_or(Error::Singular)?;
    let residual = (f * &sol - &rhs).norm();
    if !residual.is_finite() || residual > SOLVE_TOLERANCE * rhs.norm().max(1.0) {
        return Err(Error::Singular);
    }
    Ok(SvmSolution::new(sol[0], sol.iter().skip(1).copied().collect(), gamma))
}

/// Kernel, assembly and solve in one call.
pub fn fit(points: &[Vec<f64>], y: &[f64], kernel: KernelSpec, gamma: f64) -> Result<SvmSolution> {
    check_dim(points.len(), y.len())?;
    let k = kernel_matrix(points, kernel)?;
    let f = assemble_f(&k, gamma)?;
    solve_lssvm(&f, y, gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub norm: f64,
    pub margin: f64,
}

/// `w = sum_i alpha_i x_i` for the linear kernel.
pub fn weight_vector(sol: &SvmSolution, points: &[Vec<f64>]) -> Result<WeightVector> {
    check_dim(sol.alpha.len(), points.len())?;
    let m = check_points(points)?;
    let mut w = vec![0.0; m];
    for (a, x) in sol.alpha.iter().zip(points) {
        for (wi, xi) in w.iter_mut().zip(x) {
            *wi += a * xi;
        }
    }
    let norm = norm2(&w);
    if !(norm > 0.0) {
        return Err(Error::Degenerate);
    }
    Ok(WeightVector { w, norm, margin: 1.0 / norm })
}

/// `|w|` in feature space, `sqrt(alpha^T K alpha)`; equals [`weight_vector`]'s norm for the linear kernel.
pub fn feature_space_norm(sol: &SvmSolution, points: &[Vec<f64>], kernel: KernelSpec) -> Result<f64> {
    let k = kernel_matrix(points, kernel)?;
    check_dim(k.nrows(), sol.alpha.len())?;
    let a = DVector::from_column_slice(&sol.alpha);
    let q = a.dot(&(&k * &a)).max(0.0);
    let norm = q.sqrt();
    if !(norm > 0.0) {
        return Err(Error::Degenerate);
    }
    Ok(norm)
}

/// `<u~|x~> = (b + sum_k alpha_k x_k . x) / sqrt(N_u N_x)` with
/// `N_u = b^2 + sum_k alpha_k^2 |x_k|^2` and `N_x = 1 + n |x|^2`.
pub fn tilde_inner(sol: &SvmSolution, points: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    check_dim(sol.alpha.len(), points.len())?;
    let m = check_points(points)?;
    check_dim(m, x.len())?;
    if points.iter().any(|p| norm2(p) == 0.0) {
        return Err(Error::invalid("training points must have nonzero norm"));
    }
    let xx = dot(x, x);
    if xx == 0.0 {
        return Err(Error::invalid("candidate point must have nonzero norm"));
    }
    let num = sol.b + sol.alpha.iter().zip(points).map(|(a, p)| a * dot(p, x)).sum::<f64>();
    let nu = sol.b * sol.b + sol.alpha.iter().zip(points).map(|(a, p)| a * a * dot(p, p)).sum::<f64>();
    let nx = 1.0 + points.len() as f64 * xx;
    if nu == 0.0 {
        return Err(Error::Degenerate);
    }
    Ok((num / (nu * nx).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Activation {
    LinearClip,
    Sigmoid { scale: f64 },
}

impl Activation {
    pub fn apply(&self, p: f64) -> f64 {
        match *self {
            Activation::LinearClip => p.clamp(0.0, 1.0),
            Activation::Sigmoid { scale } => 1.0 / (1.0 + (-scale * (2.0 * p - 1.0)).exp()),
        }
    }

    /// Upper bound on `|d apply / dp|`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Activation::LinearClip => 1.0,
            Activation::Sigmoid { scale } => scale.abs() / 2.0,
        }
    }
}

/// `P_c = activation(1/2 (1 - inner))`: the probability of class 1 (`y = -1`).
pub fn membership_probability(inner: f64, activation: Activation) -> f64 {
    activation.apply(0.5 * (1.0 - inner))
}

/// `[P(class 0), P(class 1)]` from the swap-test probability `p = 1/2 (1 - inner)`.
pub fn class_probabilities(p: f64, activation: Activation) -> [f64; 2] {
    [activation.apply(1.0 - p), activation.apply(p)]
}
