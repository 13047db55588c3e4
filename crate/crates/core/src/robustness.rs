//! δ-covers of class manifolds and nearest-center certification on ε₀-neighbourhoods.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, ManifoldSpec, PNorm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverMethod {
    /// Repeatedly take the uncovered sample with the fewest uncovered neighbours and center a ball
    /// on whichever of its neighbours covers the most uncovered samples.
    #[default]
    GreedyCoverage,
    /// Repeatedly take the sample farthest from the chosen centers.
    FarthestPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub class: usize,
    pub centers: Vec<Vec<f64>>,
    pub delta: f64,
    pub norm: PNorm,
    /// Largest nearest-neighbour gap among the generating samples.
    pub sample_gap: f64,
}

impl Cover {
    /// A cover from explicit centers, without a generating sample set.
    pub fn from_centers(class: usize, centers: Vec<Vec<f64>>, delta: f64, norm: PNorm) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("a cover needs at least one center"));
        }
        check_delta(delta)?;
        Ok(Cover { class, centers, delta, norm, sample_gap: 0.0 })
    }

    pub fn nearest_distance(&self, x: &[f64]) -> f64 {
        self.centers.iter().map(|c| self.norm.distance(c, x)).fold(f64::INFINITY, f64::min)
    }

    /// Brute-force check that every sample lies within `delta` of a center.
    pub fn verify(&self, samples: &[Vec<f64>]) -> bool {
        samples.iter().all(|x| self.nearest_distance(x) <= self.delta)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

/// Largest distance from a sample to its nearest other sample; zero for a single sample.
pub fn max_nearest_gap(samples: &[Vec<f64>], norm: PNorm) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    (0..samples.len())
        .into_par_iter()
        .map(|i| {
            samples
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, y)| norm.distance(&samples[i], y))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

/// Centers drawn from `samples` whose `delta`-balls contain every sample.
///
/// Requires the largest nearest-neighbour gap `h` to be below `delta / 2`; a class point within
/// `h` of some sample is then within `delta + h` of a center.
pub fn build_delta_cover(samples: &[Vec<f64>], class: usize, delta: f64, norm: PNorm, method: CoverMethod) -> Result<Cover> {
    check_delta(delta)?;
    if samples.is_empty() {
        return Err(Error::invalid("cannot cover an empty sample set"));
    }
    let h = max_nearest_gap(samples, norm);
    if !(h < delta / 2.0) {
        return Err(Error::failed(format!(
            "samples too sparse to certify a {delta}-cover: nearest-neighbour gap {h} is not below {}",
            delta / 2.0
        )));
    }
    let chosen = match method {
        CoverMethod::GreedyCoverage => greedy_coverage(samples, delta, norm),
        CoverMethod::FarthestPoint => farthest_point(samples, delta, norm),
    };
    let cover = Cover { class, centers: chosen.into_iter().map(|i| samples[i].clone()).collect(), delta, norm, sample_gap: h };
    if !cover.verify(samples) {
        return Err(Error::failed("constructed cover leaves a sample uncovered"));
    }
    Ok(cover)
}

fn greedy_coverage(samples: &[Vec<f64>], radius: f64, norm: PNorm) -> Vec<usize> {
    let n = samples.len();
    let balls: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| norm.distance(&samples[i], &samples[j]) <= radius).collect())
        .collect();
    let mut covered = vec![false; n];
    let mut left = n;
    let mut centers = Vec::new();
    let gain = |i: usize, covered: &[bool]| balls[i].iter().filter(|&&j| !covered[j]).count();
    while left > 0 {
        // Ties go to the lowest index.
        let pivot = (0..n).filter(|&i| !covered[i]).min_by_key(|&i| gain(i, &covered)).unwrap();
        let best = balls[pivot].iter().copied().fold(pivot, |acc, j| if gain(j, &covered) > gain(acc, &covered) { j } else { acc });
        for &j in &balls[best] {
            if !covered[j] {
                covered[j] = true;
                left -= 1;
            }
        }
        centers.push(best);
    }
    centers
}

fn farthest_point(samples: &[Vec<f64>], radius: f64, norm: PNorm) -> Vec<usize> {
    let mut centers = vec![0];
    let mut dist: Vec<f64> = samples.iter().map(|x| norm.distance(&samples[0], x)).collect();
    loop {
        let (far, d) = dist.iter().enumerate().fold((0, 0.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if d <= radius {
            return centers;
        }
        centers.push(far);
        for (i, x) in samples.iter().enumerate() {
            dist[i] = dist[i].min(norm.distance(&samples[far], x));
        }
    }
}

/// Class of the nearest center over both covers; an exact tie goes to class 0's cover.
pub fn classify(covers: &[Cover; 2], x: &[f64]) -> usize {
    let d0 = covers[0].nearest_distance(x);
    let d1 = covers[1].nearest_distance(x);
    if d1 < d0 {
        covers[1].class
    } else {
        covers[0].class
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub epsilon0: f64,
    pub r_p: f64,
    pub delta: f64,
    /// Neighbourhood samples per class.
    pub trials: usize,
    pub misclassified: usize,
    pub misclassified_per_class: [usize; 2],
    /// `delta < r_p - epsilon0`.
    pub theorem_condition_met: bool,
    /// `delta < r_p - 2 epsilon0`, where nearest-center classification provably separates the classes.
    pub nearest_center_margin_met: bool,
    pub centers: [usize; 2],
}

fn check_covers(covers: &[Cover; 2]) -> Result<()> {
    if covers.iter().any(|c| c.centers.is_empty()) {
        return Err(Error::invalid("empty cover"));
    }
    if covers[0].class == covers[1].class {
        return Err(Error::invalid("covers must belong to different classes"));
    }
    if covers[0].delta != covers[1].delta || covers[0].norm != covers[1].norm {
        return Err(Error::invalid("covers must share delta and norm"));
    }
    Ok(())
}

/// Classifies `trials` ε₀-neighbourhood samples per class by nearest cover center.
pub fn certify(covers: &[Cover; 2], spec: &ManifoldSpec, epsilon0: f64, trials: usize, seed: u64) -> Result<CertificationReport> {
    check_covers(covers)?;
    let norm = covers[0].norm;
    if !spec.supports_norm(norm) {
        return Err(Error::invalid(format!("{:?} classes are not separated by r_p in {norm:?}", spec.kind)));
    }
    let mut wrong = [0usize; 2];
    for cover in covers {
        let class = cover.class;
        let points = data::sample_epsilon_neighborhood(spec, class, epsilon0, norm, trials, seed)?;
        wrong[class] = points.par_iter().filter(|x| classify(covers, x) != class).count();
    }
    let delta = covers[0].delta;
    Ok(CertificationReport {
        epsilon0,
        r_p: spec.r_p,
        delta,
        trials,
        misclassified: wrong[0] + wrong[1],
        misclassified_per_class: wrong,
        theorem_condition_met: delta < spec.r_p - epsilon0,
        nearest_center_margin_met: delta < spec.r_p - 2.0 * epsilon0,
        centers: [covers[0].centers.len(), covers[1].centers.len()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub point: Vec<f64>,
    pub true_class: usize,
    pub predicted: usize,
    /// Exact distance from `point` to its true class.
    pub distance_to_class: f64,
}

/// Checks one probe: returns a violation if it lies in the ε₀-neighbourhood of `class` but is
/// classified otherwise.
pub fn check_probe(covers: &[Cover; 2], spec: &ManifoldSpec, class: usize, epsilon0: f64, probe: &[f64]) -> Result<Option<Violation>> {
    check_covers(covers)?;
    let d = spec.distance_to_class(class, probe, covers[0].norm)?;
    if d > epsilon0 {
        return Err(Error::invalid(format!("probe is {d} from class {class}, outside epsilon0 = {epsilon0}")));
    }
    let predicted = classify(covers, probe);
    Ok((predicted != class).then(|| Violation { point: probe.to_vec(), true_class: class, predicted, distance_to_class: d }))
}

/// First misclassified ε₀-neighbourhood sample over `trials` draws per class, if any.
pub fn find_violation(covers: &[Cover; 2], spec: &ManifoldSpec, epsilon0: f64, trials: usize, seed: u64) -> Result<Option<Violation>> {
    check_covers(covers)?;
    for cover in covers {
        let points = data::sample_epsilon_neighborhood(spec, cover.class, epsilon0, cover.norm, trials, seed)?;
        if let Some(x) = points.iter().find(|x| classify(covers, x) != cover.class) {
            return check_probe(covers, spec, cover.class, epsilon0, x);
        }
    }
    Ok(None)
}
