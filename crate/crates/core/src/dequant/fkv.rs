use nalgebra::{DMatrix, SVD};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sq::{SampleQuery, SqMatrix, SqVector};
use crate::error::{Error, Result};

/// Default ceiling on the sketch size `q`. Sampling is aggregated, so cost does not grow with `q`.
pub const DEFAULT_MAX_SAMPLES: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkvConfig {
    /// Absolute singular value threshold.
    pub sigma_threshold: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Overrides the sketch size; otherwise `K^4 eps^-2 ln^2(1/delta)`.
    #[serde(default)]
    pub samples: Option<u64>,
    #[serde(default = "default_max_samples")]
    pub max_samples: u64,
}

fn default_max_samples() -> u64 {
    DEFAULT_MAX_SAMPLES
}

impl FkvConfig {
    pub fn new(sigma_threshold: f64, epsilon: f64, delta: f64) -> Self {
        FkvConfig { sigma_threshold, epsilon, delta, samples: None, max_samples: DEFAULT_MAX_SAMPLES }
    }
}

/// Implicit low-rank approximation `D = A V V^T` with `V = S^T U Sigma^-1`.
#[derive(Debug, Clone, Serialize)]
pub struct LowRankFactors {
    /// Rescaled sampled rows of `A`, one per distinct sampled row.
    pub s: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub l: usize,
    /// Number of row (and column) draws the sketch stands for.
    pub q: u64,
    /// True when the theorem's `q` exceeded `max_samples` and was clipped.
    pub q_capped: bool,
    pub sigma_threshold: f64,
    /// `|A|_F^2 / sigma^2`.
    pub k_param: f64,
    /// Row of `A` behind each row of `s`.
    pub rows: Vec<usize>,
}

impl LowRankFactors {
    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    /// `V = S^T U Sigma^-1`, one column per kept singular value.
    pub fn v(&self) -> DMatrix<f64> {
        let mut v = self.s.transpose() * &self.u;
        for (j, s) in self.sigma.iter().enumerate() {
            v.column_mut(j).scale_mut(1.0 / s);
        }
        v
    }

    /// `A V V^T`.
    pub fn approximation(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let v = self.v();
        a * &v * v.transpose()
    }

    /// Largest entry of `|V^T V - I|`.
    pub fn gram_deviation(&self) -> f64 {
        let v = self.v();
        let g = v.transpose() * v - DMatrix::identity(self.l, self.l);
        g.amax()
    }
}

/// Sketch size `K^4 eps^-2 ln^2(1/delta)`, rounded up and clipped at `max_samples`.
pub fn sketch_size(k_param: f64, epsilon: f64, delta: f64, max_samples: u64) -> (u64, bool) {
    let q = k_param.powi(4) / (epsilon * epsilon) * (1.0 / delta).ln().powi(2);
    if !(q < max_samples as f64) {
        (max_samples, true)
    } else {
        ((q.ceil() as u64).max(1), false)
    }
}

/// Draws `q` items from `weights` (by squared magnitude) and returns the distinct items with their
/// aggregated rescaling `sqrt(count / q) * |total| / |item|`.
fn aggregated_draw<R: Rng + ?Sized>(weights: &SqVector, q: u64, rng: &mut R) -> Result<Vec<(usize, f64)>> {
    let total = weights.norm();
    Ok(weights
        .sample_counts(q, rng)?
        .into_iter()
        .map(|(i, c)| (i, (c as f64 / q as f64).sqrt() * total / weights.query(i).abs()))
        .collect())
}

/// Row and column importance sampling followed by an SVD of the small sketch.
///
/// A row drawn `c` times out of `q` contributes `c` identical rescaled copies to the classical
/// sketch; they are merged into one row scaled by `sqrt(c)`, which leaves `S^T S` and hence `V`
/// unchanged. Columns of `S` are sampled the same way to form `W`, whose left singular pairs with
/// `sigma_k >= sigma_threshold` are kept.
pub fn fkv_low_rank<R: Rng + ?Sized>(sqa: &SqMatrix, cfg: &FkvConfig, rng: &mut R) -> Result<LowRankFactors> {
    if !(cfg.sigma_threshold > 0.0) {
        return Err(Error::invalid("sigma_threshold must be positive"));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::invalid("delta must be in (0, 1)"));
    }
    let fro = sqa.frobenius();
    if !(fro > 0.0) {
        return Err(Error::invalid("cannot factor a zero matrix"));
    }
    let eps_max = (cfg.sigma_threshold / fro).sqrt() / 4.0;
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= eps_max * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!(
            "epsilon must be in (0, sqrt(sigma / |A|_F) / 4] = (0, {eps_max}], got {}",
            cfg.epsilon
        )));
    }
    let k_param = fro * fro / (cfg.sigma_threshold * cfg.sigma_threshold);
    let (q, q_capped) = match cfg.samples {
        Some(q) if q > 0 => (q, false),
        Some(_) => return Err(Error::invalid("samples must be positive")),
        None => sketch_size(k_param, cfg.epsilon, cfg.delta, cfg.max_samples),
    };

    let picked = aggregated_draw(sqa.row_norms(), q, rng)?;
    let d = sqa.ncols();
    let s = DMatrix::from_fn(picked.len(), d, |r, j| {
        let (i, scale) = picked[r];
        sqa.entry(i, j) * scale
    });
    let col_norms = SqVector::new(s.column_iter().map(|c| c.norm()).collect())?;
    let cols = aggregated_draw(&col_norms, q, rng)?;
    let w = DMatrix::from_fn(s.nrows(), cols.len(), |r, t| {
        let (j, scale) = cols[t];
        s[(r, j)] * scale
    });

    let svd = SVD::new(w, true, false);
    let u_all = svd.u.ok_or_else(|| Error::failed("SVD did not return left singular vectors"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let kept: Vec<usize> = order.into_iter().filter(|&k| svd.singular_values[k] >= cfg.sigma_threshold).collect();
    let u = DMatrix::from_fn(s.nrows(), kept.len(), |r, c| u_all[(r, kept[c])]);
    let sigma = kept.iter().map(|&k| svd.singular_values[k]).collect();
    Ok(LowRankFactors {
        s,
        u,
        sigma,
        l: kept.len(),
        q,
        q_capped,
        sigma_threshold: cfg.sigma_threshold,
        k_param,
        rows: picked.iter().map(|p| p.0).collect(),
    })
}

/// `|A - A_l|_F^2` from the exact singular values.
pub fn best_rank_residual(a: &DMatrix<f64>, l: usize) -> f64 {
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv.iter().skip(l).map(|s| s * s).sum()
}
