use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::estimators::{inner_product_estimate, Estimate};
use super::fkv::{fkv_low_rank, FkvConfig, LowRankFactors, DEFAULT_MAX_SAMPLES};
use super::sq::{SampleQuery, SqMatrix, SqVector};
use crate::error::{check_dim, Error, Result};
use crate::svm::{dot, norm2, SvmSolution};

/// Smallest precision the adaptive loops will request from the solve and norm estimates.
const MIN_SOLVE_EPSILON: f64 = 1e-9;
const MIN_NORM_EPSILON: f64 = 3e-6;
const MAX_ROUNDS: usize = 64;

/// Parameters of the dequantized pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DequantConfig {
    /// Singular value threshold as a fraction of `|F|_F`; the analogue of `1/kappa_eff`.
    pub sigma_ratio: f64,
    /// FKV error parameter; defaults to the largest value the theorem allows.
    #[serde(default)]
    pub fkv_epsilon: Option<f64>,
    pub delta: f64,
    /// Target relative error of each recovered quantity.
    pub tolerance: f64,
    #[serde(default = "default_max_samples")]
    pub max_samples: u64,
}

fn default_max_samples() -> u64 {
    DEFAULT_MAX_SAMPLES
}

impl Default for DequantConfig {
    fn default() -> Self {
        DequantConfig { sigma_ratio: 1e-3, fkv_epsilon: None, delta: 0.01, tolerance: 0.01, max_samples: DEFAULT_MAX_SAMPLES }
    }
}

impl DequantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio <= 1.0) {
            return Err(Error::invalid(format!("sigma_ratio must be in (0, 1], got {}", self.sigma_ratio)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must be in (0, 1), got {}", self.delta)));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::invalid(format!("tolerance must be in (0, 1), got {}", self.tolerance)));
        }
        if self.max_samples == 0 {
            return Err(Error::invalid("max_samples must be positive"));
        }
        Ok(())
    }
}

/// Query access to the approximate solution of `F x = rhs`.
#[derive(Debug, Clone, Serialize)]
pub struct DequantSolution {
    pub solution: Vec<f64>,
    pub norm: f64,
    /// Estimated `v_i^T F^T rhs` per kept direction.
    pub projections: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Precision of the final round of inner-product estimates.
    pub inner_epsilon: f64,
    pub samples: u128,
    #[serde(skip)]
    pub factors: LowRankFactors,
}

impl DequantSolution {
    pub fn query(&self, i: usize) -> f64 {
        self.solution[i]
    }
}

/// `x = sum_i v_i (v_i^T F^T rhs) / sigma_i^2` over the FKV directions of `F`.
///
/// Each projection `v_i^T F^T rhs = sum_{kj} F_kj rhs_k (v_i)_j` is an inner product between the
/// flattened `F`, sampled through its SQ access, and the queried outer product `rhs v_i^T`. The
/// precision of those estimates is tightened until the worst-case error bound is below half the
/// configured tolerance relative to the estimated solution norm.
pub fn dequant_solve<R: Rng + ?Sized>(sqf: &SqMatrix, rhs: &[f64], cfg: &DequantConfig, rng: &mut R) -> Result<DequantSolution> {
    cfg.validate()?;
    check_dim(sqf.nrows(), rhs.len())?;
    let fro = sqf.frobenius();
    let rhs_norm = norm2(rhs);
    if !(fro > 0.0) || !(rhs_norm > 0.0) {
        return Err(Error::invalid("dequantized solve needs nonzero F and right-hand side"));
    }
    let sigma_threshold = cfg.sigma_ratio * fro;
    let fkv = FkvConfig {
        sigma_threshold,
        epsilon: cfg.fkv_epsilon.unwrap_or_else(|| cfg.sigma_ratio.sqrt() / 4.0),
        delta: cfg.delta / 2.0,
        samples: None,
        max_samples: cfg.max_samples,
    };
    let factors = fkv_low_rank(sqf, &fkv, rng)?;
    if factors.is_empty() {
        return Err(Error::AllFiltered);
    }
    let v = factors.v();
    let l = factors.l;
    let d = sqf.ncols();
    let cols = sqf.ncols();
    let per_delta = cfg.delta / (2.0 * l as f64);
    let vnorms: Vec<f64> = v.column_iter().map(|c| c.norm()).collect();
    let sensitivity: f64 = (0..l).map(|i| vnorms[i] * vnorms[i] / (factors.sigma[i] * factors.sigma[i])).sum();

    let mut eps = cfg.tolerance;
    let mut samples = 0u128;
    for _ in 0..MAX_ROUNDS {
        let mut projections = Vec::with_capacity(l);
        for i in 0..l {
            let est = inner_product_estimate(sqf, |idx| rhs[idx / cols] * v[(idx % cols, i)], eps, per_delta, rng)?;
            samples += est.samples;
            projections.push(est.value);
        }
        let mut x = vec![0.0; d];
        for i in 0..l {
            let c = projections[i] / (factors.sigma[i] * factors.sigma[i]);
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += v[(j, i)] * c;
            }
        }
        let norm = norm2(&x);
        let bound = eps * fro * rhs_norm * sensitivity;
        let floor = norm - bound;
        if bound <= 0.5 * cfg.tolerance * floor {
            return Ok(DequantSolution {
                solution: x,
                norm,
                projections,
                sigma: factors.sigma.clone(),
                inner_epsilon: eps,
                samples,
                factors,
            });
        }
        let next = if floor > 0.0 { 0.9 * eps * 0.5 * cfg.tolerance * floor / bound } else { eps / 4.0 };
        eps = next.min(eps / 2.0);
        if eps < MIN_SOLVE_EPSILON {
            break;
        }
    }
    Err(Error::failed("dequantized solution is too small to resolve at the configured tolerance"))
}

/// The vector `a_{ijk} = B_ji |B_k|` over `(k, j, i)`, sampled as a product of the row-norm
/// distribution of `B` and the entry distribution of `B`.
struct ProductSq<'a> {
    b: &'a SqMatrix,
}

impl ProductSq<'_> {
    fn split(&self, idx: usize) -> (usize, usize, usize) {
        let (nb, m) = (self.b.nrows(), self.b.ncols());
        (idx / (nb * m), (idx / m) % nb, idx % m)
    }
}

impl SampleQuery for ProductSq<'_> {
    fn len(&self) -> usize {
        self.b.nrows() * self.b.len()
    }

    fn query(&self, idx: usize) -> f64 {
        let (k, j, i) = self.split(idx);
        self.b.entry(j, i) * self.b.row_norms().query(k)
    }

    fn norm(&self) -> f64 {
        self.b.frobenius().powi(2)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let k = self.b.row_norms().sample(rng)?;
        Ok(k * self.b.len() + self.b.sample(rng)?)
    }

    fn sample_counts<R: Rng + ?Sized>(&self, total: u64, rng: &mut R) -> Result<Vec<(usize, u64)>> {
        let mut out = Vec::new();
        for (k, c) in self.b.row_norms().sample_counts(total, rng)? {
            out.extend(self.b.sample_counts(c, rng)?.into_iter().map(|(e, n)| (k * self.b.len() + e, n)));
        }
        Ok(out)
    }
}

/// Estimates `|A w|` through the inner product `<a|b> = |A w|^2` with `B = A^T`,
/// `a_{ijk} = B_ji |B_k|` and `b_{ijk} = w_j w_k B_ki / |B_k|`.
///
/// The estimate is within `epsilon |A|_F |w|` with probability at least `1 - delta`. Rows of `B`
/// with zero norm carry no weight in `a` and are never sampled; their `b` entries are taken as zero,
/// which leaves `<a|b>` unchanged.
pub fn dequant_norm_aw<R: Rng + ?Sized>(a: &DMatrix<f64>, w: &[f64], epsilon: f64, delta: f64, rng: &mut R) -> Result<Estimate> {
    check_dim(a.ncols(), w.len())?;
    let b = SqMatrix::new(&a.transpose())?;
    if !(b.frobenius() > 0.0) {
        return Err(Error::invalid("cannot estimate |Aw| for a zero matrix"));
    }
    if !(norm2(w) > 0.0) {
        return Ok(Estimate { value: 0.0, samples: 0 });
    }
    let prod = ProductSq { b: &b };
    let query = |idx: usize| {
        let (k, j, i) = prod.split(idx);
        let rk = b.row_norms().query(k);
        if rk == 0.0 {
            0.0
        } else {
            w[j] * w[k] * b.entry(k, i) / rk
        }
    };
    // |a| = |A|_F^2 and |b| <= |w|^2, so precision eps^2 on <a|b> is eps on the square root.
    let est = inner_product_estimate(&prod, query, epsilon * epsilon, delta, rng)?;
    Ok(Estimate { value: est.value.max(0.0).sqrt(), samples: est.samples })
}

/// [`dequant_norm_aw`] with the precision tightened until the bound is within `tolerance` of the
/// estimate.
pub fn dequant_norm_aw_relative<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    w: &[f64],
    tolerance: f64,
    delta: f64,
    rng: &mut R,
) -> Result<Estimate> {
    let scale = a.norm() * norm2(w);
    let mut eps = tolerance;
    let mut samples = 0;
    for _ in 0..MAX_ROUNDS {
        let est = dequant_norm_aw(a, w, eps, delta, rng)?;
        samples += est.samples;
        let bound = eps * scale;
        let floor = est.value - bound;
        if bound <= tolerance * floor {
            return Ok(Estimate { value: est.value, samples });
        }
        let next = if floor > 0.0 { 0.9 * eps * tolerance * floor / bound } else { eps / 4.0 };
        eps = next.min(eps / 2.0);
        if eps < MIN_NORM_EPSILON {
            break;
        }
    }
    Err(Error::failed("|Aw| is too small to resolve at the configured tolerance"))
}

/// Sampled replacement for the swap test: estimates `<u~|x~>` from SQ access to `u~` and query
/// access to `x~`, within `epsilon` with probability at least `1 - delta`.
pub fn tilde_inner_estimate<R: Rng + ?Sized>(
    sol: &SvmSolution,
    points: &[Vec<f64>],
    x: &[f64],
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<Estimate> {
    check_dim(sol.alpha.len(), points.len())?;
    let m = x.len();
    let n = points.len();
    let mut u = vec![0.0; (n + 1) * m];
    u[0] = sol.b;
    for (k, (p, a)) in points.iter().zip(&sol.alpha).enumerate() {
        check_dim(m, p.len())?;
        for j in 0..m {
            u[(k + 1) * m + j] = a * p[j];
        }
    }
    let sq = SqVector::new(u)?;
    let xx = dot(x, x);
    let nx = (1.0 + n as f64 * xx).sqrt();
    if !(sq.norm() > 0.0) || xx == 0.0 {
        return Err(Error::Degenerate);
    }
    let query = |idx: usize| match idx {
        0 => 1.0,
        _ if idx < m => 0.0,
        _ => x[idx % m],
    };
    let est = inner_product_estimate(&sq, query, epsilon, delta, rng)?;
    Ok(Estimate { value: (est.value / (sq.norm() * nx)).clamp(-1.0, 1.0), samples: est.samples })
}
