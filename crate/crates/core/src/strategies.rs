//! Quantile sampling: return a point whose mean score lies in the top `1/C` with probability at
//! least `1 - e^{-beta}`, counting every oracle evaluation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erf_inv};

use crate::error::{Error, Result};
use crate::informativeness::candidate_count;
use crate::qsim::amplitude::{amplitude_estimate, error_bound, median_repetitions, AeConfig, AeMode, AmplitudeCircuit, SUCCESS_PROBABILITY_K1};
use crate::rng;

/// Default cap on evaluations per arm in one stochastic comparison.
pub const DEFAULT_M_MAX: u64 = 1_000_000;
/// Cap on amplitude-amplification attempts before the quantum threshold strategy gives up.
const MAX_AMPLIFICATION_ATTEMPTS: u32 = 64;

/// A finite pool of points with mean scores `mu_x`; each evaluation returns `mu_x + sigma Z`.
#[derive(Debug, Clone)]
pub struct ScoreOracle {
    means: Vec<f64>,
    sigma: f64,
    calls: u64,
}

impl ScoreOracle {
    pub fn new(means: Vec<f64>, sigma: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::invalid("the score pool is empty"));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("pool scores must be finite"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(ScoreOracle { means, sigma, calls: 0 })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_deterministic(&self) -> bool {
        self.sigma == 0.0
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// A uniformly random pool index; drawing a point is free, evaluating it is not.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.means.len())
    }

    pub fn eval<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) -> f64 {
        self.eval_sum(i, 1, rng)
    }

    /// Sum of `m` independent evaluations, drawn as one normal variate.
    pub fn eval_sum<R: Rng + ?Sized>(&mut self, i: usize, m: u64, rng: &mut R) -> f64 {
        self.calls += m;
        let mf = m as f64;
        if self.sigma == 0.0 {
            return mf * self.means[i];
        }
        let z: f64 = StandardNormal.sample(rng);
        mf * self.means[i] + self.sigma * mf.sqrt() * z
    }
}

/// Membership in the `floor(N / C)` largest means: fewer than that many means are strictly larger.
#[derive(Debug, Clone)]
pub struct TopSet {
    sorted: Vec<f64>,
    k: usize,
}

impl TopSet {
    pub fn new(means: &[f64], c_ratio: f64) -> Result<Self> {
        if !(c_ratio >= 1.0) {
            return Err(Error::invalid("C must be >= 1"));
        }
        let k = (means.len() as f64 / c_ratio).floor() as usize;
        if k == 0 {
            return Err(Error::invalid(format!("a pool of {} points has no top 1/{c_ratio}", means.len())));
        }
        let mut sorted = means.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(TopSet { sorted, k })
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn contains_value(&self, mu: f64) -> bool {
        let larger = self.sorted.len() - self.sorted.partition_point(|v| *v <= mu);
        larger < self.k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: String,
    /// Pool index of the returned point; `None` when the strategy reported a failure.
    pub chosen: Option<usize>,
    pub calls: u64,
    #[serde(rename = "C")]
    pub c_ratio: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub sigma: f64,
    /// Candidates drawn from the pool.
    pub candidates: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Estimated `1 - 1/C` percentile of the observed scores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub percentile: Option<f64>,
    /// Estimated fraction of the pool above the threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction_above: Option<f64>,
    /// Comparisons settled by the evaluation cap rather than by confidence.
    pub low_confidence: u64,
    /// The multi-candidate success bound evaluated at the observed comparison confidences.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub general_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl StrategyReport {
    fn new(strategy: &str, oracle: &ScoreOracle, c_ratio: f64, beta: f64, epsilon: Option<f64>) -> Self {
        StrategyReport {
            strategy: strategy.to_string(),
            chosen: None,
            calls: 0,
            c_ratio,
            beta,
            epsilon,
            sigma: oracle.sigma,
            candidates: 0,
            threshold: None,
            percentile: None,
            fraction_above: None,
            low_confidence: 0,
            general_bound: None,
            failure: None,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must be in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// Best of `c = candidate_count(C, beta)` uniformly sampled points, one evaluation each.
pub fn greedy_deterministic<R: Rng + ?Sized>(oracle: &mut ScoreOracle, c_ratio: f64, beta: f64, rng: &mut R) -> Result<StrategyReport> {
    if !oracle.is_deterministic() {
        return Err(Error::invalid("greedy_deterministic needs a noiseless oracle"));
    }
    let c = candidate_count(c_ratio, beta)?;
    let start = oracle.calls();
    let mut best: Option<(usize, f64)> = None;
    for _ in 0..c {
        let i = oracle.sample_point(rng);
        let s = oracle.eval(i, rng);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    let mut report = StrategyReport::new("greedy-deterministic", oracle, c_ratio, beta, None);
    report.chosen = best.map(|b| b.0);
    report.candidates = c;
    report.calls = oracle.calls() - start;
    Ok(report)
}

/// `1/2 + 1/2 erf((mu0 - mu1) / sqrt(sigma^2/m0 + sigma^2/m1))`, the confidence that `mu0 > mu1`.
pub fn pairwise_confidence(mu_hat0: f64, mu_hat1: f64, m0: u64, m1: u64, sigma: f64) -> Result<f64> {
    if m0 == 0 || m1 == 0 {
        return Err(Error::invalid("pairwise confidence needs at least one evaluation per arm"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid("sigma must be >= 0"));
    }
    if sigma == 0.0 {
        return Ok(match mu_hat0.partial_cmp(&mu_hat1) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Equal) => 0.5,
            _ => 0.0,
        });
    }
    let spread = (sigma * sigma / m0 as f64 + sigma * sigma / m1 as f64).sqrt();
    Ok(0.5 + 0.5 * erf((mu_hat0 - mu_hat1) / spread))
}

/// Per-comparison error `p' = 1 - (1 - e^{-beta})^{1/c}`.
pub fn comparison_error(beta: f64, c: u64) -> f64 {
    -((-(-beta).exp()).ln_1p() / c as f64).exp_m1()
}

/// `sum_{n=1}^{c} Binom(c, n) (1/C)^n (1 - 1/C)^{c-n} Pr[exactly n - 1 comparisons lost]`, where
/// comparison `i` is won with probability `confidences[i]` and `c = confidences.len()`.
pub fn general_success_bound(c_ratio: f64, confidences: &[f64]) -> f64 {
    let c = confidences.len();
    // Poisson-binomial distribution of the number of lost comparisons.
    let mut lost = vec![0.0; c + 1];
    lost[0] = 1.0;
    for (done, &p) in confidences.iter().enumerate() {
        for k in (0..=done + 1).rev() {
            let stay = lost[k] * p;
            let moved = if k > 0 { lost[k - 1] * (1.0 - p) } else { 0.0 };
            lost[k] = stay + moved;
        }
    }
    let q = 1.0 / c_ratio;
    let mut total = 0.0;
    let mut binom = 1.0;
    for n in 1..=c {
        binom *= (c - n + 1) as f64 / n as f64;
        total += binom * q.powi(n as i32) * (1.0 - q).powi((c - n) as i32) * lost[n - 1];
    }
    total
}

/// Greedy selection with noisy scores: each challenger is compared against the running best on
/// fresh, equal-sized samples, doubling the sample size until `max(P1, 1 - P1) >= 1 - p'` or the
/// per-arm size would pass `m_max`.
pub fn greedy_stochastic<R: Rng + ?Sized>(
    oracle: &mut ScoreOracle,
    c_ratio: f64,
    beta: f64,
    m_max: u64,
    rng: &mut R,
) -> Result<StrategyReport> {
    if oracle.is_deterministic() {
        return Err(Error::invalid("greedy_stochastic needs sigma > 0"));
    }
    if m_max == 0 {
        return Err(Error::invalid("m_max must be positive"));
    }
    let c = candidate_count(c_ratio, beta)?;
    let target = 1.0 - comparison_error(beta, c);
    let start = oracle.calls();
    let mut report = StrategyReport::new("greedy-stochastic", oracle, c_ratio, beta, None);
    let mut confidences = Vec::new();
    let mut best = oracle.sample_point(rng);
    for _ in 1..c {
        let challenger = oracle.sample_point(rng);
        if challenger == best {
            continue;
        }
        let (mut sum_b, mut sum_c, mut m) = (0.0, 0.0, 0u64);
        let mut step = 1u64;
        let challenger_wins = loop {
            sum_b += oracle.eval_sum(best, step, rng);
            sum_c += oracle.eval_sum(challenger, step, rng);
            m += step;
            let p1 = pairwise_confidence(sum_c / m as f64, sum_b / m as f64, m, m, oracle.sigma)?;
            let settled = p1.max(1.0 - p1) >= target;
            if settled || 2 * m > m_max {
                report.low_confidence += u64::from(!settled);
                confidences.push(p1.max(1.0 - p1));
                break p1 > 0.5;
            }
            step = m;
        };
        if challenger_wins {
            best = challenger;
        }
    }
    report.chosen = Some(best);
    report.candidates = c;
    report.general_bound = Some(general_success_bound(c_ratio, &confidences));
    report.calls = oracle.calls() - start;
    Ok(report)
}

/// Phase-one sample size `2 C^2 / ((C - 1) eps^2) erfinv(1 - e^{-beta})^2`.
pub fn percentile_sample_size(c_ratio: f64, beta: f64, epsilon: f64) -> Result<u64> {
    if !(c_ratio > 1.0) {
        return Err(Error::invalid("threshold strategies need C > 1"));
    }
    check_beta(beta)?;
    check_epsilon(epsilon)?;
    let e = erf_inv(1.0 - (-beta).exp());
    Ok((2.0 * c_ratio * c_ratio / ((c_ratio - 1.0) * epsilon * epsilon) * e * e).ceil() as u64)
}

/// Linearly interpolated order statistic at 1-based fractional rank `(n + 1) q`, clamped to the sample.
pub fn interpolated_percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = ((n + 1) as f64 * q).clamp(1.0, n as f64);
    let lo = h.floor();
    let frac = h - lo;
    let i = lo as usize - 1;
    if i + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// Phase-two candidate budget `ceil((beta + ln 4) / -ln(1 - (1 - eps) / (2C)))`.
pub fn threshold_candidates(c_ratio: f64, beta: f64, epsilon: f64) -> u64 {
    ((beta + 4f64.ln()) / -(-(1.0 - epsilon) / (2.0 * c_ratio)).ln_1p()).ceil() as u64
}

/// Estimate the `1 - 1/C` percentile from `n` single evaluations, take the order statistic at the
/// upper edge of its confidence interval as threshold `T`, then test fresh candidates until one
/// clears `T` with confidence.
///
/// With noise, a candidate is accepted when its `m`-sample mean reaches `T + g/2`, `g = T - p_hat`,
/// where `m = ceil(8 sigma^2 erfinv(1 - 2 p_test)^2 / g^2)` caps the chance that a point below the
/// percentile passes at `p_test = e^{-beta} / (4 c2)` for each of the `c2` candidates. Without noise
/// one evaluation per candidate decides.
pub fn threshold_classical<R: Rng + ?Sized>(
    oracle: &mut ScoreOracle,
    c_ratio: f64,
    beta: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<StrategyReport> {
    let n = percentile_sample_size(c_ratio, beta, epsilon)?;
    let start = oracle.calls();
    let mut report = StrategyReport::new("threshold-classical", oracle, c_ratio, beta, Some(epsilon));
    let mut scores: Vec<f64> = (0..n)
        .map(|_| {
            let i = oracle.sample_point(rng);
            oracle.eval(i, rng)
        })
        .collect();
    scores.sort_by(f64::total_cmp);
    let p_c = 1.0 - 1.0 / c_ratio;
    let eps_prime = epsilon / c_ratio;
    let p_hat = interpolated_percentile(&scores, p_c);
    let rank = ((1.0 + eps_prime) * p_c * (n + 1) as f64).ceil().clamp(1.0, n as f64) as usize;
    let t = scores[rank - 1];
    let gap = t - p_hat;
    report.percentile = Some(p_hat);
    report.threshold = Some(t);

    let c2 = threshold_candidates(c_ratio, beta, epsilon);
    let (m, accept_at) = if oracle.is_deterministic() {
        (1, t)
    } else if gap > 0.0 {
        let p_test = (-beta).exp() / (4.0 * c2 as f64);
        let e = erf_inv(1.0 - 2.0 * p_test);
        (((8.0 * oracle.sigma * oracle.sigma * e * e) / (gap * gap)).ceil().max(1.0) as u64, t + gap / 2.0)
    } else {
        report.failure = Some("threshold coincides with the percentile estimate; no separation to test against".into());
        report.calls = oracle.calls() - start;
        return Ok(report);
    };
    for k in 0..c2 {
        let i = oracle.sample_point(rng);
        let mean = oracle.eval_sum(i, m, rng) / m as f64;
        report.candidates = k + 1;
        if mean >= accept_at {
            report.chosen = Some(i);
            break;
        }
    }
    if report.chosen.is_none() {
        report.failure = Some(format!("no candidate cleared the threshold within {c2} candidates"));
    }
    report.calls = oracle.calls() - start;
    Ok(report)
}

/// Smallest `J` whose error bound at amplitude `a` is at most `target`.
pub fn ae_resolution(a: f64, target: f64) -> u64 {
    let mut j = 2u64;
    while error_bound(a, j, 1) > target {
        j = (j as f64 * 1.05).ceil() as u64;
    }
    // Refine downward to the smallest passing value.
    let mut lo = (j as f64 / 1.05).floor() as u64;
    while lo < j && error_bound(a, lo, 1) > target {
        lo += 1;
    }
    lo.max(2)
}

/// Bisection over the distinct pool scores, with the fraction above each trial threshold measured
/// by simulated amplitude estimation, followed by amplitude amplification onto the marked points.
///
/// Each fraction estimate targets additive error `eps / (4C)` at `a* = min(1/2, 2/C)` and is the
/// median of enough sampled estimates that all bisection steps together fail with probability at
/// most `e^{-beta} / 2`. Bisection stops once the estimate lies in `[(1 - 3 eps/4)/C, (1 - eps/4)/C]`,
/// so the true fraction lies in `[(1 - eps)/C, 1/C]`. Calls count Grover-operator applications.
pub fn threshold_quantum<R: Rng + ?Sized>(
    oracle: &mut ScoreOracle,
    c_ratio: f64,
    beta: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<StrategyReport> {
    if !oracle.is_deterministic() {
        return Err(Error::invalid("threshold_quantum supports noiseless pools only"));
    }
    if !(c_ratio > 1.0) {
        return Err(Error::invalid("threshold strategies need C > 1"));
    }
    check_beta(beta)?;
    check_epsilon(epsilon)?;
    let start = oracle.calls();
    let mut report = StrategyReport::new("threshold-quantum", oracle, c_ratio, beta, Some(epsilon));
    let n = oracle.len() as f64;
    let mut distinct = oracle.means.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        report.failure = Some("all scores are equal; bisection cannot bracket a threshold".into());
        return Ok(report);
    }
    let max_steps = (distinct.len() as f64).log2().ceil() as u32 + 1;
    let target = epsilon / (4.0 * c_ratio);
    let j = ae_resolution((2.0 / c_ratio).min(0.5), target);
    let reps = median_repetitions(1.0 - SUCCESS_PROBABILITY_K1, (-beta).exp() / (2.0 * max_steps as f64))?;
    let cfg = AeConfig::new(j, reps, AeMode::Sampled);
    let lower = (1.0 - 0.75 * epsilon) / c_ratio;
    let upper = (1.0 - 0.25 * epsilon) / c_ratio;

    // Invariant: the fraction above distinct[lo] is too large and above distinct[hi] too small.
    let (mut lo, mut hi) = (0usize, distinct.len() - 1);
    let mut found = None;
    for _ in 0..max_steps {
        if hi - lo < 1 {
            break;
        }
        let mid = lo + (hi - lo) / 2;
        let t = distinct[mid];
        let a = oracle.means.iter().filter(|&&m| m > t).count() as f64 / n;
        let est = amplitude_estimate(&AmplitudeCircuit::from_probability(a)?, &cfg, rng)?;
        oracle.calls += cfg.calls();
        if est > upper {
            lo = mid;
        } else if est < lower {
            hi = mid;
        } else {
            found = Some((t, a, est));
            break;
        }
        if hi - lo <= 1 {
            break;
        }
    }
    let Some((t, a, est)) = found else {
        report.failure = Some("bisection did not reach the target window".into());
        report.calls = oracle.calls() - start;
        return Ok(report);
    };
    report.threshold = Some(t);
    report.fraction_above = Some(est);

    let theta = a.sqrt().asin();
    let theta_est = est.sqrt().asin();
    let k = (PI / (4.0 * theta_est)).floor() as u64;
    let success = ((2 * k + 1) as f64 * theta).sin().powi(2);
    let marked: Vec<usize> = (0..oracle.len()).filter(|&i| oracle.means[i] > t).collect();
    for attempt in 1..=MAX_AMPLIFICATION_ATTEMPTS {
        // k Grover iterations plus one evaluation to confirm the measured point.
        oracle.calls += k + 1;
        report.candidates = attempt as u64;
        if rng.random::<f64>() < success {
            report.chosen = Some(marked[rng.random_range(0..marked.len())]);
            break;
        }
    }
    if report.chosen.is_none() {
        report.failure = Some("amplitude amplification did not return a marked point".into());
    }
    report.calls = oracle.calls() - start;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    GreedyDeterministic,
    GreedyStochastic,
    ThresholdClassical,
    ThresholdQuantum,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::GreedyDeterministic => "greedy-deterministic",
            StrategyKind::GreedyStochastic => "greedy-stochastic",
            StrategyKind::ThresholdClassical => "threshold-classical",
            StrategyKind::ThresholdQuantum => "threshold-quantum",
        }
    }

    pub fn run<R: Rng + ?Sized>(self, oracle: &mut ScoreOracle, p: &StrategyParams, rng: &mut R) -> Result<StrategyReport> {
        match self {
            StrategyKind::GreedyDeterministic => greedy_deterministic(oracle, p.c_ratio, p.beta, rng),
            StrategyKind::GreedyStochastic => greedy_stochastic(oracle, p.c_ratio, p.beta, p.m_max, rng),
            StrategyKind::ThresholdClassical => threshold_classical(oracle, p.c_ratio, p.beta, p.epsilon, rng),
            StrategyKind::ThresholdQuantum => threshold_quantum(oracle, p.c_ratio, p.beta, p.epsilon, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    #[serde(rename = "C")]
    pub c_ratio: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub m_max: u64,
}

/// Outcome of many independent trials of one strategy on one pool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub strategy: StrategyKind,
    #[serde(flatten)]
    pub params: StrategyParams,
    pub trials: u64,
    pub successes: u64,
    pub failures: u64,
    pub mean_calls: f64,
    pub success_rate: f64,
    /// Binomial standard error of `success_rate`.
    pub stderr: f64,
}

/// Runs `trials` independent trials, each with a fresh oracle over `means` and its own random
/// stream, and scores success against the true top `1/C` of the means.
pub fn run_trials(kind: StrategyKind, means: &[f64], params: &StrategyParams, trials: u64, seed: u64) -> Result<TrialSummary> {
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let top = TopSet::new(means, params.c_ratio)?;
    let template = ScoreOracle::new(means.to_vec(), params.sigma)?;
    let stream = format!("trial/{}", kind.name());
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut oracle = template.clone();
            let mut r = rng::substream(seed, &stream, t);
            let report = kind.run(&mut oracle, params, &mut r)?;
            debug_assert_eq!(report.calls, oracle.calls());
            let ok = report.chosen.is_some_and(|i| top.contains_value(means[i]));
            Ok((ok, report.failure.is_some(), report.calls))
        })
        .collect::<Result<Vec<_>>>()?;
    let successes = outcomes.iter().filter(|o| o.0).count() as u64;
    let failures = outcomes.iter().filter(|o| o.1).count() as u64;
    let mean_calls = outcomes.iter().map(|o| o.2 as f64).sum::<f64>() / trials as f64;
    let rate = successes as f64 / trials as f64;
    Ok(TrialSummary {
        strategy: kind,
        params: *params,
        trials,
        successes,
        failures,
        mean_calls,
        success_rate: rate,
        stderr: (rate * (1.0 - rate) / trials as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    #[serde(rename = "C")]
    C,
    Beta,
    Epsilon,
    Sigma,
}

/// One strategy run across several values of one parameter with the others fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub strategy: StrategyKind,
    pub vary: SweepParam,
    pub values: Vec<f64>,
    pub base: StrategyParams,
    pub means: Vec<f64>,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub strategy: StrategyKind,
    pub vary: SweepParam,
    /// Least-squares slope of `ln(mean calls)` against `ln(value)`.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityTable {
    pub rows: Vec<TrialSummary>,
    pub slopes: Vec<SlopeFit>,
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("a slope needs at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("a slope needs distinct x values"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

pub fn complexity_table(sweeps: &[Sweep], seed: u64) -> Result<ComplexityTable> {
    if sweeps.is_empty() {
        return Err(Error::invalid("the sweep grid is empty"));
    }
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for (s_idx, sweep) in sweeps.iter().enumerate() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &v in &sweep.values {
            let mut p = sweep.base;
            match sweep.vary {
                SweepParam::C => p.c_ratio = v,
                SweepParam::Beta => p.beta = v,
                SweepParam::Epsilon => p.epsilon = v,
                SweepParam::Sigma => p.sigma = v,
            }
            let row = run_trials(sweep.strategy, &sweep.means, &p, sweep.trials, seed.wrapping_add(s_idx as u64))?;
            xs.push(v.ln());
            ys.push(row.mean_calls.ln());
            rows.push(row);
        }
        slopes.push(SlopeFit { strategy: sweep.strategy, vary: sweep.vary, slope: fit_slope(&xs, &ys)? });
    }
    Ok(ComplexityTable { rows, slopes })
}

/// `n` means evenly spaced on `[0, 1]`.
pub fn even_pool(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// The four sweeps that reproduce the call-count pattern of the complexity table.
pub fn default_sweeps(trials: u64) -> Vec<Sweep> {
    let base = StrategyParams { c_ratio: 10.0, beta: 3.0, epsilon: 0.2, sigma: 0.0, m_max: DEFAULT_M_MAX };
    vec![
        Sweep {
            strategy: StrategyKind::GreedyDeterministic,
            vary: SweepParam::C,
            values: vec![2.0, 10.0, 100.0],
            base,
            means: even_pool(4096),
            trials,
        },
        Sweep {
            strategy: StrategyKind::GreedyStochastic,
            vary: SweepParam::Beta,
            values: vec![2.0, 4.0, 8.0],
            base: StrategyParams { c_ratio: 2.0, sigma: 1.0, ..base },
            means: (0..16).map(|i| i as f64).collect(),
            trials,
        },
        Sweep {
            strategy: StrategyKind::ThresholdClassical,
            vary: SweepParam::Epsilon,
            values: vec![0.05, 0.1, 0.2, 0.4],
            base,
            means: even_pool(4096),
            trials,
        },
        Sweep {
            strategy: StrategyKind::ThresholdQuantum,
            vary: SweepParam::Epsilon,
            values: vec![0.05, 0.1, 0.2, 0.4],
            base: StrategyParams { c_ratio: 4.0, ..base },
            means: even_pool(4096),
            trials,
        },
    ]
}

/// CSV with columns `strategy, C, beta, epsilon, sigma, calls, success`.
pub fn write_csv<W: Write>(rows: &[TrialSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strategy", "C", "beta", "epsilon", "sigma", "calls", "success"])?;
    for r in rows {
        w.write_record([
            r.strategy.name().to_string(),
            r.params.c_ratio.to_string(),
            r.params.beta.to_string(),
            r.params.epsilon.to_string(),
            r.params.sigma.to_string(),
            r.mean_calls.to_string(),
            r.success_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Slopes keyed by `strategy/parameter`, for reports.
pub fn slope_map(table: &ComplexityTable) -> BTreeMap<String, f64> {
    table
        .slopes
        .iter()
        .map(|s| (format!("{}/{}", s.strategy.name(), serde_json::to_value(s.vary).unwrap().as_str().unwrap_or("?")), s.slope))
        .collect()
}
