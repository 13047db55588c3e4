//! Amplitude estimation and the median trick.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::C64;
use crate::error::{Error, Result};

/// Lower bound on the probability that one `k = 1` estimate lands within [`error_bound`].
pub const SUCCESS_PROBABILITY_K1: f64 = 8.0 / (PI * PI);

/// Largest register (counting plus work qubits) the full Grover simulation accepts.
pub const FULL_SIMULATION_MAX_QUBITS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AeMode {
    /// Deterministic: the phase rounded to the nearest grid point.
    Grid,
    /// Draws the phase-estimation outcome from its exact distribution.
    Sampled,
    /// Statevector simulation of phase estimation on the Grover operator.
    FullSimulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    /// Oracle calls per estimate.
    pub j: u64,
    /// Confidence multiple in the error bound.
    pub k: u32,
    /// Number of estimates whose median is reported.
    pub beta: u32,
    pub mode: AeMode,
}

impl AeConfig {
    pub fn new(j: u64, beta: u32, mode: AeMode) -> Self {
        AeConfig { j, k: 1, beta, mode }
    }

    pub fn validate(&self) -> Result<()> {
        if self.j < 2 {
            return Err(Error::invalid("AE needs J >= 2"));
        }
        if self.k < 1 {
            return Err(Error::invalid("AE needs k >= 1"));
        }
        if self.beta == 0 || self.beta % 2 == 0 {
            return Err(Error::invalid("median repetitions must be odd"));
        }
        if self.mode == AeMode::FullSimulation && !self.j.is_power_of_two() {
            return Err(Error::invalid("full simulation needs J to be a power of two"));
        }
        Ok(())
    }

    /// Oracle calls spent by one median-amplified estimate.
    pub fn calls(&self) -> u64 {
        self.j * self.beta as u64
    }
}

/// `2 pi k sqrt(a(1-a)) / J + k^2 pi^2 / J^2`.
pub fn error_bound(a: f64, j: u64, k: u32) -> f64 {
    let (j, k) = (j as f64, k as f64);
    2.0 * PI * k * (a * (1.0 - a)).max(0.0).sqrt() / j + k * k * PI * PI / (j * j)
}

/// Estimate reported for phase-register outcome `y`.
pub fn estimate_from_outcome(y: u64, j: u64) -> f64 {
    (PI * y as f64 / j as f64).sin().powi(2)
}

fn theta(a: f64) -> f64 {
    a.clamp(0.0, 1.0).sqrt().asin()
}

/// Nearest-grid estimate `sin^2(pi round(J theta / pi) / J)`. Exact at `a = 0`, and at `a = 1` for even `J`.
///
/// Both the amplitude and the probability land within `pi / (2J)` of the truth.
pub fn grid_estimate(a: f64, j: u64) -> f64 {
    let y = (j as f64 * theta(a) / PI).round() as u64;
    estimate_from_outcome(y, j)
}

/// Fejer kernel `sin^2(pi J delta) / (J^2 sin^2(pi delta))`, with `J delta = offset`.
fn fejer(offset: f64, j: u64) -> f64 {
    let jf = j as f64;
    let den = (PI * offset / jf).sin();
    if den.abs() < 1e-12 {
        // offset is a multiple of J.
        return 1.0;
    }
    let num = (PI * offset).sin();
    (num * num) / (jf * jf * den * den)
}

/// Exact probability of outcome `y` in canonical phase estimation on the Grover operator.
///
/// The two eigenphases `+-theta/pi` each carry half the weight.
pub fn outcome_probability(a: f64, j: u64, y: u64) -> f64 {
    let w = theta(a) / PI;
    let jf = j as f64;
    0.5 * fejer(w * jf - y as f64, j) + 0.5 * fejer((1.0 - w) * jf - y as f64, j)
}

pub fn outcome_distribution(a: f64, j: u64) -> Vec<f64> {
    (0..j).map(|y| outcome_probability(a, j, y)).collect()
}

/// Draws an outcome without tabulating all `J` probabilities: pick one eigenphase, then walk
/// outwards from the nearest grid point until the inverse-CDF target is reached.
pub fn sample_outcome<R: Rng + ?Sized>(a: f64, j: u64, rng: &mut R) -> u64 {
    let w = theta(a) / PI;
    let phase = if rng.random::<bool>() { w } else { 1.0 - w };
    let c = phase * j as f64;
    let start = c.floor() as i64;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let wrap = |y: i64| y.rem_euclid(j as i64) as u64;
    // Offsets in order 0, -1, +1, -2, +2, ... around floor(c); every residue is visited once.
    let mut last = wrap(start);
    for step in 0..j as i64 {
        let off = if step % 2 == 0 { step / 2 } else { -(step + 1) / 2 };
        let y = start + off;
        last = wrap(y);
        acc += fejer(c - y as f64, j);
        if acc >= u {
            return last;
        }
    }
    last
}

/// A state `|psi>` with a marked subset of basis states; `a` is the marked probability.
#[derive(Debug, Clone)]
pub struct AmplitudeCircuit {
    psi: Vec<C64>,
    marked: Vec<bool>,
}

impl AmplitudeCircuit {
    pub fn new(psi: Vec<C64>, marked: Vec<bool>) -> Result<Self> {
        if psi.len() != marked.len() || psi.is_empty() {
            return Err(Error::invalid("state and marking must have the same non-zero length"));
        }
        let n = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::invalid("circuit state must be normalized"));
        }
        Ok(AmplitudeCircuit { psi, marked })
    }

    /// The one-qubit circuit `sqrt(1-a)|0> + sqrt(a)|1>` with `|1>` marked.
    pub fn from_probability(a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::invalid(format!("probability {a} outside [0, 1]")));
        }
        Self::new(vec![C64::new((1.0 - a).sqrt(), 0.0), C64::new(a.sqrt(), 0.0)], vec![false, true])
    }

    pub fn probability(&self) -> f64 {
        self.psi.iter().zip(&self.marked).filter(|(_, &m)| m).map(|(a, _)| a.norm_sqr()).sum()
    }
}

/// Outcome distribution of phase estimation with `J` outcomes on `Q = (2|psi><psi| - I)(I - 2 Pi)`,
/// from an explicit statevector: `amp(y, w) = J^{-1} sum_x e^{-2 pi i x y / J} (Q^x psi)_w`.
pub fn full_simulation_distribution(circuit: &AmplitudeCircuit, j: u64) -> Result<Vec<f64>> {
    let work_qubits = circuit.psi.len().next_power_of_two().trailing_zeros();
    if !j.is_power_of_two() || j.trailing_zeros() + work_qubits.max(1) > FULL_SIMULATION_MAX_QUBITS {
        return Err(Error::invalid(format!(
            "full simulation supports power-of-two J with at most {FULL_SIMULATION_MAX_QUBITS} qubits in total"
        )));
    }
    let psi = DVector::from_column_slice(&circuit.psi);
    let dim = psi.len();
    let jn = j as usize;
    let mut powers = Vec::with_capacity(jn);
    let mut cur = psi.clone();
    for _ in 0..jn {
        powers.push(cur.clone());
        // (I - 2 Pi): flip marked amplitudes.
        let mut next = cur.clone();
        for (v, &m) in next.iter_mut().zip(&circuit.marked) {
            if m {
                *v = -*v;
            }
        }
        // (2|psi><psi| - I)
        let overlap = psi.dotc(&next);
        next = &psi * (overlap * 2.0) - next;
        cur = next;
    }
    let mut dist = vec![0.0; jn];
    for (y, slot) in dist.iter_mut().enumerate() {
        let mut p = 0.0;
        for w in 0..dim {
            let mut amp = C64::new(0.0, 0.0);
            for (x, v) in powers.iter().enumerate() {
                let ang = -2.0 * PI * ((x * y) % jn) as f64 / j as f64;
                amp += C64::from_polar(1.0, ang) * v[w];
            }
            p += (amp / j as f64).norm_sqr();
        }
        *slot = p;
    }
    Ok(dist)
}

fn single_estimate<R: Rng + ?Sized>(circuit: &AmplitudeCircuit, cfg: &AeConfig, full: Option<&WeightedIndex<f64>>, rng: &mut R) -> f64 {
    let a = circuit.probability();
    match cfg.mode {
        AeMode::Grid => grid_estimate(a, cfg.j),
        AeMode::Sampled => estimate_from_outcome(sample_outcome(a, cfg.j, rng), cfg.j),
        AeMode::FullSimulation => {
            let y = full.expect("distribution prepared").sample(rng) as u64;
            estimate_from_outcome(y, cfg.j)
        }
    }
}

/// Median of `cfg.beta` independent estimates of the marked probability.
pub fn amplitude_estimate<R: Rng + ?Sized>(circuit: &AmplitudeCircuit, cfg: &AeConfig, rng: &mut R) -> Result<f64> {
    cfg.validate()?;
    let full = if cfg.mode == AeMode::FullSimulation {
        let dist = full_simulation_distribution(circuit, cfg.j)?;
        Some(WeightedIndex::new(&dist).map_err(|e| Error::failed(format!("bad AE distribution: {e}")))?)
    } else {
        None
    };
    let estimates: Vec<f64> = (0..cfg.beta).map(|_| single_estimate(circuit, cfg, full.as_ref(), rng)).collect();
    median_amplify(&estimates)
}

/// Exact median of an odd-length list.
pub fn median_amplify(estimates: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::invalid("median of an empty list"));
    }
    if estimates.len() % 2 == 0 {
        return Err(Error::invalid("median amplification needs an odd number of estimates"));
    }
    let mut v = estimates.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v[v.len() / 2])
}

/// `1/2 (2 sqrt(delta (1 - delta)))^beta`: failure bound for the median of `beta` estimates that each
/// fail with probability `delta < 1/2`.
pub fn median_failure_bound(delta: f64, beta: u32) -> f64 {
    0.5 * (2.0 * (delta * (1.0 - delta)).sqrt()).powi(beta as i32)
}

/// Smallest odd `beta` whose [`median_failure_bound`] is at most `target`.
pub fn median_repetitions(delta: f64, target: f64) -> Result<u32> {
    if !(delta > 0.0 && delta < 0.5) || !(target > 0.0) {
        return Err(Error::invalid("median repetitions need 0 < delta < 1/2 and a positive target"));
    }
    let rate = -(2.0 * (delta * (1.0 - delta)).sqrt()).ln();
    let beta = ((0.5f64 / target).ln() / rate).ceil().max(1.0) as u32;
    Ok(if beta % 2 == 0 { beta + 1 } else { beta })
}
