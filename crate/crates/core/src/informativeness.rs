//! Scoring a candidate by `P_c(x) |w|` and picking the best of `c` sampled candidates.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{label_of_class, LabeledDataset};
use crate::dequant::{self, DequantConfig, SqMatrix};
use crate::error::{check_dim, Error, Result};
use crate::qsim::amplitude::{amplitude_estimate, AeConfig, AeMode, AmplitudeCircuit};
use crate::qsim::hhl::{hhl_solve, spectral_norm};
use crate::qsim::state::{prepare_real_state, swap_test_probability, tilde_states};
use crate::qsim::walk::{chebyshev_apply, hermitian_embedding, recover_norm_chebyshev, weight_matrix, WalkContext};
use crate::rng;
use crate::svm::{self, Activation, KernelSpec, SvmSolution, DEFAULT_GAMMA};

/// Simulated-quantum pipeline parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsimConfig {
    /// Effective condition number of the scaled `F`. `None` uses `1.01 cond(F)`, which keeps every
    /// eigencomponent.
    #[serde(default)]
    pub kappa_eff: Option<f64>,
    pub eig_bits: u32,
    pub ae: AeConfig,
}

impl Default for QsimConfig {
    fn default() -> Self {
        QsimConfig { kappa_eff: None, eig_bits: 24, ae: AeConfig::new(1 << 12, 1, AeMode::Grid) }
    }
}

impl QsimConfig {
    pub fn validate(&self) -> Result<()> {
        self.ae.validate()?;
        if let Some(k) = self.kappa_eff {
            if !(k >= 1.0) {
                return Err(Error::invalid(format!("kappa_eff must be >= 1, got {k}")));
            }
        }
        if self.eig_bits == 0 || self.eig_bits > 52 {
            return Err(Error::invalid("eig_bits must be in 1..=52"));
        }
        Ok(())
    }

    /// Angle error of one AE estimate: half a grid step when rounding deterministically, a full
    /// step at the sampled modes' `8/pi^2` confidence.
    pub fn amplitude_error(&self) -> f64 {
        match self.ae.mode {
            AeMode::Grid => PI / (2.0 * self.ae.j as f64),
            AeMode::Sampled | AeMode::FullSimulation => PI * self.ae.k as f64 / self.ae.j as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Backend {
    Exact,
    Qsim(QsimConfig),
    Dequant(DequantConfig),
}

impl Backend {
    pub fn validate(&self) -> Result<()> {
        match self {
            Backend::Exact => Ok(()),
            Backend::Qsim(c) => c.validate(),
            Backend::Dequant(c) => c.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Qsim(_) => "qsim",
            Backend::Dequant(_) => "dequant",
        }
    }
}

/// Settings shared by every backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSettings {
    pub gamma: f64,
    pub kernel: KernelSpec,
    pub activation: Activation,
    /// Score this class instead of the predicted one.
    pub fixed_class: Option<usize>,
}

impl Default for ScoreSettings {
    fn default() -> Self {
        ScoreSettings { gamma: DEFAULT_GAMMA, kernel: KernelSpec::Linear, activation: Activation::LinearClip, fixed_class: None }
    }
}

impl ScoreSettings {
    pub fn validate(&self, backend: &Backend) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        self.kernel.validate()?;
        if self.kernel != KernelSpec::Linear && !matches!(backend, Backend::Exact) {
            return Err(Error::invalid(format!("the {} backend supports the linear kernel only", backend.name())));
        }
        if let Activation::Sigmoid { scale } = self.activation {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::invalid("sigmoid scale must be positive"));
            }
        }
        if matches!(self.fixed_class, Some(c) if c > 1) {
            return Err(Error::invalid("fixed_class must be 0 or 1"));
        }
        Ok(())
    }
}

/// Absolute error bounds attached to a qsim score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub p_c: f64,
    pub w_norm: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformativenessScore {
    pub p_c: f64,
    pub w_norm: f64,
    pub value: f64,
    pub hypothesized_class: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_budget: Option<ErrorBudget>,
}

impl InformativenessScore {
    fn new(p_c: f64, w_norm: f64, hypothesized_class: usize, error_budget: Option<ErrorBudget>) -> Self {
        InformativenessScore { p_c, w_norm, value: p_c * w_norm, hypothesized_class, error_budget }
    }
}

fn kernel_tilde_inner(sol: &SvmSolution, points: &[Vec<f64>], x: &[f64], kernel: KernelSpec) -> Result<f64> {
    if kernel == KernelSpec::Linear {
        return svm::tilde_inner(sol, points, x);
    }
    let num = sol.b + sol.alpha.iter().zip(points).map(|(a, p)| a * kernel.eval(p, x)).sum::<f64>();
    let nu = sol.b * sol.b + sol.alpha.iter().zip(points).map(|(a, p)| a * a * kernel.eval(p, p)).sum::<f64>();
    let nx = 1.0 + points.len() as f64 * kernel.eval(x, x);
    if !(nu > 0.0) || !(nx > 0.0) {
        return Err(Error::Degenerate);
    }
    Ok((num / (nu * nx).sqrt()).clamp(-1.0, 1.0))
}

fn pick_class(p: f64, settings: &ScoreSettings) -> (usize, f64) {
    let probs = svm::class_probabilities(p, settings.activation);
    let class = settings.fixed_class.unwrap_or(if probs[1] > probs[0] { 1 } else { 0 });
    (class, probs[class])
}

fn rhs(y: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(y.iter().copied()).collect()
}

fn augmented(points: &[Vec<f64>], y: &[f64], x: &[f64], class: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut p = points.to_vec();
    p.push(x.to_vec());
    let mut l = y.to_vec();
    l.push(label_of_class(class));
    (p, l)
}

fn ae_probability<R: Rng + ?Sized>(p: f64, cfg: &AeConfig, rng: &mut R) -> Result<f64> {
    amplitude_estimate(&AmplitudeCircuit::from_probability(p.clamp(0.0, 1.0))?, cfg, rng)
}

struct QsimSolve {
    solution: SvmSolution,
    /// AE estimate of the HHL success probability.
    p1: f64,
}

/// HHL on `F / |F|`, with the solution norm recovered from an amplitude estimate of `p1`.
fn qsim_solve<R: Rng + ?Sized>(points: &[Vec<f64>], y: &[f64], gamma: f64, cfg: &QsimConfig, rng: &mut R) -> Result<QsimSolve> {
    let f = svm::assemble_f(&svm::kernel_matrix(points, KernelSpec::Linear)?, gamma)?;
    let lmax = spectral_norm(&f)?;
    let scaled = &f / lmax;
    let kappa = match cfg.kappa_eff {
        Some(k) => k,
        None => {
            let eig = nalgebra::SymmetricEigen::new(scaled.clone());
            let lmin = eig.eigenvalues.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
            if !(lmin > 0.0) {
                return Err(Error::Singular);
            }
            1.01 / lmin
        }
    };
    let b = rhs(y);
    let hhl = hhl_solve(&scaled, &b, kappa, cfg.eig_bits)?;
    let p1 = ae_probability(hhl.p1, &cfg.ae, rng)?;
    let norm = kappa * svm::norm2(&b) * p1.sqrt() / lmax;
    let x: Vec<f64> = hhl.solution.amplitudes()[..b.len()].iter().map(|a| a.re * norm).collect();
    Ok(QsimSolve { solution: SvmSolution::new(x[0], x[1..].to_vec(), gamma), p1 })
}

fn score_exact(points: &[Vec<f64>], y: &[f64], x: &[f64], settings: &ScoreSettings) -> Result<InformativenessScore> {
    let sol = svm::fit(points, y, settings.kernel, settings.gamma)?;
    let inner = kernel_tilde_inner(&sol, points, x, settings.kernel)?;
    let (class, p_c) = pick_class(0.5 * (1.0 - inner), settings);
    let (ap, ay) = augmented(points, y, x, class);
    let aug = svm::fit(&ap, &ay, settings.kernel, settings.gamma)?;
    let w_norm = match settings.kernel {
        KernelSpec::Linear => svm::weight_vector(&aug, &ap)?.norm,
        k => svm::feature_space_norm(&aug, &ap, k)?,
    };
    Ok(InformativenessScore::new(p_c, w_norm, class, None))
}

fn score_qsim<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    y: &[f64],
    x: &[f64],
    settings: &ScoreSettings,
    cfg: &QsimConfig,
    rng: &mut R,
) -> Result<InformativenessScore> {
    let base = qsim_solve(points, y, settings.gamma, cfg, rng)?;
    let (u, v) = tilde_states(&base.solution, points, x)?;
    let p = ae_probability(swap_test_probability(&u, &v)?, &cfg.ae, rng)?;
    let (class, p_c) = pick_class(p, settings);

    let (ap, ay) = augmented(points, y, x, class);
    let aug = qsim_solve(&ap, &ay, settings.gamma, cfg, rng)?;
    let stacked = aug.solution.stacked();
    let (psi_v, v_norm) = prepare_real_state(&stacked)?;
    let a = weight_matrix(&ap)?;
    let ctx = WalkContext::new(hermitian_embedding(&a), None)?;
    let mut padded = psi_v.amplitudes()[..stacked.len()].iter().map(|c| c.re).collect::<Vec<_>>();
    padded.resize(ctx.dim(), 0.0);
    let (psi, _) = prepare_real_state(&padded)?;
    let walked = chebyshev_apply(&ctx, &psi)?;
    let a0 = ae_probability(walked.a0 * walked.a0, &cfg.ae, rng)?.sqrt();
    let w_norm = recover_norm_chebyshev(a0, v_norm, &ctx);
    if !(w_norm > 0.0) {
        return Err(Error::Degenerate);
    }

    let e = cfg.amplitude_error();
    let dp = settings.activation.lipschitz() * e;
    let r1 = e / (aug.p1.sqrt() - e).max(f64::MIN_POSITIVE);
    let r2 = e / (a0 - e).max(f64::MIN_POSITIVE);
    let dw = (r1 + r2 + r1 * r2) * w_norm;
    let budget = ErrorBudget { p_c: dp, w_norm: dw, value: dp * w_norm + p_c * dw + dp * dw };
    Ok(InformativenessScore::new(p_c, w_norm, class, Some(budget)))
}

fn score_dequant<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    y: &[f64],
    x: &[f64],
    settings: &ScoreSettings,
    cfg: &DequantConfig,
    rng: &mut R,
) -> Result<InformativenessScore> {
    let solve = |pts: &[Vec<f64>], labels: &[f64], rng: &mut R| -> Result<SvmSolution> {
        let f = svm::assemble_f(&svm::kernel_matrix(pts, KernelSpec::Linear)?, settings.gamma)?;
        let sol = dequant::dequant_solve(&SqMatrix::new(&f)?, &rhs(labels), cfg, rng)?;
        Ok(SvmSolution::new(sol.solution[0], sol.solution[1..].to_vec(), settings.gamma))
    };
    let base = solve(points, y, rng)?;
    let inner = dequant::tilde_inner_estimate(&base, points, x, cfg.tolerance, cfg.delta, rng)?;
    let (class, p_c) = pick_class(0.5 * (1.0 - inner.value), settings);
    let (ap, ay) = augmented(points, y, x, class);
    let aug = solve(&ap, &ay, rng)?;
    let a = weight_matrix(&ap)?;
    let w_norm = dequant::dequant_norm_aw_relative(&a, &aug.stacked(), cfg.tolerance, cfg.delta, rng)?.value;
    if !(w_norm > 0.0) {
        return Err(Error::Degenerate);
    }
    Ok(InformativenessScore::new(p_c, w_norm, class, None))
}

/// `P_c(x) |w|` where `c` is the predicted class (or `settings.fixed_class`) and `w` comes from
/// re-solving the SVM with `x` added under that class.
pub fn score<R: Rng + ?Sized>(
    backend: &Backend,
    settings: &ScoreSettings,
    s: &LabeledDataset,
    x: &[f64],
    rng: &mut R,
) -> Result<InformativenessScore> {
    backend.validate()?;
    settings.validate(backend)?;
    s.require_both_classes()?;
    check_dim(s.m, x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("candidate point must be finite"));
    }
    let (points, y) = s.labeled();
    match backend {
        Backend::Exact => score_exact(&points, &y, x, settings),
        Backend::Qsim(cfg) => score_qsim(&points, &y, x, settings, cfg, rng),
        Backend::Dequant(cfg) => score_dequant(&points, &y, x, settings, cfg, rng),
    }
}

/// Smallest `c` with `(1 - 1/C)^c < e^{-beta}`: `ceil(beta / -ln(1 - 1/C))`, bumped by one when the
/// ceiling lands exactly on equality. `C = 1` gives 1.
pub fn candidate_count(c_ratio: f64, beta: f64) -> Result<u64> {
    if !(c_ratio >= 1.0 && c_ratio.is_finite()) {
        return Err(Error::invalid(format!("C must be >= 1, got {c_ratio}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    if c_ratio == 1.0 {
        return Ok(1);
    }
    let rate = -(-1.0 / c_ratio).ln_1p();
    let c = (beta / rate).ceil().max(1.0);
    Ok(if c * rate > beta { c as u64 } else { c as u64 + 1 })
}

/// Where candidates come from.
#[derive(Debug, Clone)]
pub enum CandidateSource<'a> {
    /// Uniform over an axis-aligned box.
    Region { lo: Vec<f64>, hi: Vec<f64> },
    /// Distinct points drawn uniformly from a pool.
    Pool(&'a [Vec<f64>]),
}

impl CandidateSource<'_> {
    /// The bounding box of the labeled points, widened by 20% per axis around its center.
    pub fn inflated_box(s: &LabeledDataset) -> Result<CandidateSource<'static>> {
        let (points, _) = s.labeled();
        if points.is_empty() {
            return Err(Error::invalid("dataset has no labeled points"));
        }
        let mut lo = points[0].clone();
        let mut hi = points[0].clone();
        for p in &points {
            for j in 0..s.m {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        for j in 0..s.m {
            let pad = 0.1 * (hi[j] - lo[j]);
            lo[j] -= pad;
            hi[j] += pad;
        }
        Ok(CandidateSource::Region { lo, hi })
    }

    fn draw<R: Rng + ?Sized>(&self, c: u64, rng: &mut R) -> Result<Vec<(Option<usize>, Vec<f64>)>> {
        match self {
            CandidateSource::Region { lo, hi } => {
                check_dim(lo.len(), hi.len())?;
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
                    return Err(Error::invalid("region bounds must be finite with lo <= hi"));
                }
                Ok((0..c)
                    .map(|_| (None, lo.iter().zip(hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()))
                    .collect())
            }
            CandidateSource::Pool(pool) => {
                if (pool.len() as u64) < c {
                    return Err(Error::invalid(format!("pool of {} points cannot supply {c} candidates", pool.len())));
                }
                Ok(index::sample(rng, pool.len(), c as usize).into_iter().map(|i| (Some(i), pool[i].clone())).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoredCandidate {
    pub point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_index: Option<usize>,
    pub score: InformativenessScore,
}

/// Everything a best-of-`c` round looked at.
#[derive(Debug, Clone, Serialize)]
pub struct BestOfC {
    pub c: u64,
    pub scores: Vec<ScoredCandidate>,
    pub best: ScoredCandidate,
}

/// Scores `candidate_count(C, beta)` candidates and keeps the first one with the highest value.
///
/// Candidate `i` is scored with its own random stream derived from `seed`, so the result does not
/// depend on evaluation order.
pub fn best_of_c(
    backend: &Backend,
    settings: &ScoreSettings,
    s: &LabeledDataset,
    source: &CandidateSource<'_>,
    c_ratio: f64,
    beta: f64,
    seed: u64,
) -> Result<BestOfC> {
    let c = candidate_count(c_ratio, beta)?;
    let mut draw_rng = rng::stream(seed, "candidates");
    let candidates = source.draw(c, &mut draw_rng)?;
    let scores = candidates
        .into_par_iter()
        .enumerate()
        .map(|(i, (pool_index, point))| {
            let mut r = rng::substream(seed, "score", i as u64);
            let score = score(backend, settings, s, &point, &mut r)?;
            Ok(ScoredCandidate { point, pool_index, score })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, sc) in scores.iter().enumerate() {
        if sc.score.value > scores[best].score.value {
            best = i;
        }
    }
    let best = scores[best].clone();
    Ok(BestOfC { c, scores, best })
}

/// Dense `M = [[0, A^T], [A, 0]]` for the weight matrix of `points`; exposed for diagnostics.
pub fn walk_matrix(points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    Ok(hermitian_embedding(&weight_matrix(points)?))
}
