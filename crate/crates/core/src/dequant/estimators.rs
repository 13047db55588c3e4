use rand::Rng;
use serde::Serialize;

use super::sq::{SampleQuery, SqVector};
use crate::error::{check_dim, Error, Result};

/// A sampled estimate and the number of samples it consumed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub samples: u128,
}

/// Largest median-of-means group the estimators will draw.
pub const MAX_GROUP_SIZE: u128 = 100_000_000_000_000_000_000_000;

/// Multinomial draws are taken in batches of this size.
const BATCH: u128 = 1 << 62;

/// Group size `ceil(4 / eps^2)` and group count `ceil(8 ln(1/delta))` for median of means.
///
/// Each group mean misses by more than `eps` standard deviations with probability at most 1/4
/// (Chebyshev), and the median of the groups fails only if half of them miss.
pub fn median_of_means_params(epsilon: f64, delta: f64) -> Result<(u128, usize)> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must be in (0, 1), got {delta}")));
    }
    let group = (4.0 / (epsilon * epsilon)).ceil();
    if group > MAX_GROUP_SIZE as f64 {
        return Err(Error::invalid(format!("epsilon {epsilon} is too small")));
    }
    let groups = (8.0 * (1.0 / delta).ln()).ceil().max(1.0) as usize;
    Ok((group as u128, groups))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Estimates `x . y` from SQ access to `x` and query access to `y`.
///
/// Each sample `i ~ x_i^2 / |x|^2` contributes `y_i |x|^2 / x_i`, an unbiased estimate with variance at
/// most `|x|^2 |y|^2`. The result is within `epsilon |x| |y|` with probability at least `1 - delta`.
pub fn inner_product_estimate<S, Q, R>(sqx: &S, qy: Q, epsilon: f64, delta: f64, rng: &mut R) -> Result<Estimate>
where
    S: SampleQuery,
    Q: Fn(usize) -> f64,
    R: Rng + ?Sized,
{
    let (group, groups) = median_of_means_params(epsilon, delta)?;
    let nx = sqx.norm();
    if !(nx > 0.0) {
        return Err(Error::invalid("inner product estimate needs a nonzero sampled vector"));
    }
    let scale = nx * nx;
    let mut means = Vec::with_capacity(groups);
    for _ in 0..groups {
        let mut sum = 0.0;
        let mut left = group;
        while left > 0 {
            let take = left.min(BATCH);
            left -= take;
            for (i, c) in sqx.sample_counts(take as u64, rng)? {
                sum += c as f64 * qy(i) * scale / sqx.query(i);
            }
        }
        means.push(sum / group as f64);
    }
    Ok(Estimate { value: median(means), samples: group * groups as u128 })
}

/// Settings for [`thin_matvec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThinMatvecConfig {
    /// Relative accuracy of the norm estimate.
    pub nu: f64,
    pub delta: f64,
    /// Largest tolerated cancellation factor `C(V, w)`.
    pub max_cancellation: f64,
}

impl Default for ThinMatvecConfig {
    fn default() -> Self {
        ThinMatvecConfig { nu: 0.1, delta: 0.1, max_cancellation: 1e4 }
    }
}

/// SQ access to `V w` built from SQ access to the columns of `V` and the entries of `w`.
#[derive(Debug, Clone)]
pub struct ThinMatvec<'a> {
    columns: &'a [SqVector],
    w: Vec<f64>,
    /// Entry `j` is `|w_j| |V_{*,j}|`.
    weights: SqVector,
    norm: f64,
    nu: f64,
    max_attempts: u64,
    /// Rejection-loop attempts spent estimating the norm.
    pub norm_attempts: u64,
}

impl ThinMatvec<'_> {
    fn weight_sqr(&self, i: usize) -> f64 {
        self.columns.iter().zip(&self.w).map(|(c, w)| (w * c.query(i)).powi(2)).sum()
    }

    /// One rejection round: propose `i` from the mixture of columns, accept with probability
    /// `(Vw)_i^2 / (k sum_j w_j^2 V_ij^2)`.
    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<usize>> {
        let j = self.weights.sample(rng)?;
        let i = self.columns[j].sample(rng)?;
        let q = self.query(i);
        let denom = self.columns.len() as f64 * self.weight_sqr(i);
        Ok((rng.random::<f64>() * denom < q * q).then_some(i))
    }
}

impl SampleQuery for ThinMatvec<'_> {
    fn len(&self) -> usize {
        self.columns[0].len()
    }

    fn query(&self, i: usize) -> f64 {
        self.columns.iter().zip(&self.w).map(|(c, w)| w * c.query(i)).sum()
    }

    fn norm(&self) -> f64 {
        self.norm
    }

    fn nu(&self) -> f64 {
        self.nu
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        for _ in 0..self.max_attempts {
            if let Some(i) = self.propose(rng)? {
                return Ok(i);
            }
        }
        Err(Error::failed("rejection sampling exceeded its attempt budget"))
    }
}

/// SQ access to `V w` for a thin `V` given column-wise SQ access.
///
/// The norm is estimated from the acceptance rate of the rejection loop, which equals
/// `|Vw|^2 / (k sum_j w_j^2 |V_{*,j}|^2)`. Enough attempts are made to observe
/// `ceil(3 ln(2/delta) / nu^2)` acceptances; if the observed rate implies a cancellation factor
/// above the configured cap, the construction fails.
pub fn thin_matvec<'a, R: Rng + ?Sized>(
    columns: &'a [SqVector],
    w: &[f64],
    cfg: ThinMatvecConfig,
    rng: &mut R,
) -> Result<ThinMatvec<'a>> {
    if columns.is_empty() {
        return Err(Error::invalid("thin matvec needs at least one column"));
    }
    check_dim(columns.len(), w.len())?;
    let n = columns[0].len();
    for c in columns {
        check_dim(n, c.len())?;
    }
    if !(cfg.nu > 0.0 && cfg.nu < 1.0) || !(cfg.delta > 0.0 && cfg.delta < 1.0) || !(cfg.max_cancellation >= 1.0) {
        return Err(Error::invalid("thin matvec needs nu, delta in (0, 1) and max_cancellation >= 1"));
    }
    let weights = SqVector::new(columns.iter().zip(w).map(|(c, wj)| wj.abs() * c.norm()).collect())?;
    if weights.norm_sqr() == 0.0 {
        return Err(Error::invalid("V w has no support"));
    }
    let k = columns.len() as f64;
    let target = (3.0 * (2.0 / cfg.delta).ln() / (cfg.nu * cfg.nu)).ceil() as u64;
    let budget = (cfg.max_cancellation * k * target as f64 * 4.0).ceil() as u64;
    let mut tm = ThinMatvec {
        columns,
        w: w.to_vec(),
        weights,
        norm: 0.0,
        nu: cfg.nu,
        max_attempts: (cfg.max_cancellation * k * 50.0).ceil() as u64,
        norm_attempts: 0,
    };
    let mut accepted = 0u64;
    let mut attempts = 0u64;
    while accepted < target {
        if attempts >= budget {
            return Err(Error::failed(format!(
                "cancellation factor C(V, w) exceeds {} (accepted {accepted} of {attempts})",
                cfg.max_cancellation
            )));
        }
        attempts += 1;
        if tm.propose(rng)?.is_some() {
            accepted += 1;
        }
    }
    let rate = accepted as f64 / attempts as f64;
    tm.norm = (rate * k * tm.weights.norm_sqr()).sqrt();
    tm.norm_attempts = attempts;
    Ok(tm)
}
