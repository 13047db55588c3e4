//! Labeled datasets, synthetic two-class manifolds and p-norm distances.

use std::f64::consts::FRAC_PI_2;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng;

/// Default membership threshold: a point belongs to class j when `c_j > 0.8`.
pub const DEFAULT_TAU: f64 = 0.8;

const MEMBERSHIP_TOL: f64 = 1e-9;

/// p-norm with p in {1, 2, infinity}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PNorm {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    LInf,
}

impl PNorm {
    pub fn from_p(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(PNorm::L1)
        } else if p == 2.0 {
            Ok(PNorm::L2)
        } else if p.is_infinite() && p > 0.0 {
            Ok(PNorm::LInf)
        } else {
            Err(Error::invalid(format!("unsupported p-norm p = {p}")))
        }
    }

    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            PNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            PNorm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            PNorm::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            PNorm::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            PNorm::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            PNorm::LInf => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
        }
    }
}

/// Hard label convention: class 0 is `y = +1`, class 1 is `y = -1`.
pub fn label_of_class(class: usize) -> f64 {
    if class == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn class_of_label(y: f64) -> usize {
    if y > 0.0 {
        0
    } else {
        1
    }
}

/// Returns `Some(j)` iff `c[j] > tau`. With `tau > 0.5` and `sum(c) <= 1` at most one such `j` exists.
pub fn hard_membership(c: &[f64], tau: f64) -> Result<Option<usize>> {
    if !(tau > 0.5) {
        return Err(Error::invalid(format!("membership threshold must exceed 0.5, got {tau}")));
    }
    validate_membership(c)?;
    Ok(c.iter().position(|&cj| cj > tau))
}

fn validate_membership(c: &[f64]) -> Result<()> {
    if c.iter().any(|&v| !(-MEMBERSHIP_TOL..=1.0 + MEMBERSHIP_TOL).contains(&v)) {
        return Err(Error::invalid("membership components must lie in [0, 1]"));
    }
    if c.iter().sum::<f64>() > 1.0 + MEMBERSHIP_TOL {
        return Err(Error::invalid("membership components must sum to at most 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: Vec<f64>,
    pub c: Vec<f64>,
    #[serde(skip)]
    pub y: Option<f64>,
}

impl LabeledPoint {
    pub fn new(x: Vec<f64>, c: Vec<f64>, tau: f64) -> Result<Self> {
        let y = hard_membership(&c, tau)?.map(label_of_class);
        Ok(LabeledPoint { x, c, y })
    }

    /// A point generated by class `class` with full membership.
    pub fn of_class(x: Vec<f64>, class: usize) -> Self {
        let mut c = vec![0.0; 2];
        c[class] = 1.0;
        LabeledPoint { x, c, y: Some(label_of_class(class)) }
    }

    pub fn class(&self) -> Option<usize> {
        self.y.map(class_of_label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub points: Vec<LabeledPoint>,
    pub m: usize,
    pub class_count: usize,
    pub tau: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    m: usize,
    classes: usize,
    points: Vec<LabeledPoint>,
}

impl LabeledDataset {
    pub fn new(points: Vec<LabeledPoint>, m: usize) -> Result<Self> {
        Self::with_tau(points, m, DEFAULT_TAU)
    }

    /// Validates dimensions and memberships and (re)derives the hard labels under `tau`.
    pub fn with_tau(mut points: Vec<LabeledPoint>, m: usize, tau: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("dimension m must be positive"));
        }
        for p in &mut points {
            check_dim(m, p.x.len())?;
            check_dim(2, p.c.len())?;
            if p.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("point coordinates must be finite"));
            }
            p.y = hard_membership(&p.c, tau)?.map(label_of_class);
        }
        Ok(LabeledDataset { points, m, class_count: 2, tau })
    }

    /// Hard-labeled points as `(x, y)` pairs; points below the threshold are skipped.
    pub fn labeled(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.points
            .iter()
            .filter_map(|p| p.y.map(|y| (p.x.clone(), y)))
            .unzip()
    }

    pub fn class_points(&self, class: usize) -> Vec<&[f64]> {
        self.points
            .iter()
            .filter(|p| p.class() == Some(class))
            .map(|p| p.x.as_slice())
            .collect()
    }

    /// Errors unless both hard classes are represented.
    pub fn require_both_classes(&self) -> Result<()> {
        for class in 0..2 {
            if self.class_points(class).is_empty() {
                return Err(Error::invalid(format!("hard class {class} has no points")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile { m: self.m, classes: self.class_count, points: self.points.clone() };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        if file.classes != 2 {
            return Err(Error::invalid(format!("only two classes are supported, got {}", file.classes)));
        }
        Self::new(file.points, file.m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    /// CSV with columns `x_0..x_{m-1}, c_0, c_1`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.m).map(|i| format!("x_{i}")).collect();
        header.push("c_0".into());
        header.push("c_1".into());
        w.write_record(&header)?;
        for p in &self.points {
            let row: Vec<String> = p.x.iter().chain(&p.c).map(|v| v.to_string()).collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let width = r.headers()?.len();
        if width < 3 {
            return Err(Error::invalid("dataset CSV needs at least x_0, c_0, c_1"));
        }
        let m = width - 2;
        let mut points = Vec::new();
        for record in r.records() {
            let record = record?;
            let vals = record
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad CSV number {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            points.push(LabeledPoint { x: vals[..m].to_vec(), c: vals[m..].to_vec(), y: None });
        }
        Self::new(points, m)
    }
}

/// Minimum pairwise p-distance between hard-labeled points of different classes.
///
/// Sampling can only overestimate the true manifold separation.
pub fn min_interclass_distance(ds: &LabeledDataset, norm: PNorm) -> Result<f64> {
    ds.require_both_classes()?;
    let a = ds.class_points(0);
    let b = ds.class_points(1);
    let mut best = f64::INFINITY;
    for p in &a {
        for q in &b {
            best = best.min(norm.distance(p, q));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    /// Unit segments `{(t, 0)}` and `{(t, r_p)}`, `t in [0, 1]`.
    ParallelSegments,
    /// Quarter circles of radius 1 and `1 + r_p`; separation holds in the 2-norm.
    ConcentricArcs,
    /// Unit disks in the planes `x_2 = 0` and `x_2 = r_p`.
    ParallelDisks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub k: usize,
    pub m: usize,
    pub r_p: f64,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl ManifoldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k >= self.m {
            return Err(Error::invalid(format!("intrinsic dimension k = {} must be below m = {}", self.k, self.m)));
        }
        if !(self.r_p > 0.0) || !self.r_p.is_finite() {
            return Err(Error::invalid(format!("separation r_p must be positive, got {}", self.r_p)));
        }
        let want_k = match self.kind {
            ManifoldKind::ParallelSegments | ManifoldKind::ConcentricArcs => 1,
            ManifoldKind::ParallelDisks => 2,
        };
        if self.k != want_k {
            return Err(Error::invalid(format!("{:?} has intrinsic dimension {want_k}, got k = {}", self.kind, self.k)));
        }
        if self.kind == ManifoldKind::ParallelDisks && self.m < 3 {
            return Err(Error::invalid("parallel disks need m >= 3"));
        }
        Ok(())
    }

    /// Norms in which the generated classes are separated by exactly `r_p`.
    pub fn supports_norm(&self, norm: PNorm) -> bool {
        self.kind != ManifoldKind::ConcentricArcs || norm == PNorm::L2
    }

    /// The point of class `class` at intrinsic parameters `u` (each in `[0, 1]`).
    pub fn embed(&self, class: usize, u: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.m];
        let off = if class == 0 { 0.0 } else { self.r_p };
        match self.kind {
            ManifoldKind::ParallelSegments => {
                x[0] = u[0];
                x[1] = off;
            }
            ManifoldKind::ConcentricArcs => {
                let radius = 1.0 + off;
                let angle = u[0] * FRAC_PI_2;
                x[0] = radius * angle.cos();
                x[1] = radius * angle.sin();
            }
            ManifoldKind::ParallelDisks => {
                // Uniform on the unit disk from two uniforms.
                let r = u[0].sqrt();
                let phi = u[1] * std::f64::consts::TAU;
                x[0] = r * phi.cos();
                x[1] = r * phi.sin();
                x[2] = off;
            }
        }
        x
    }

    /// Exact p-distance from `z` to class `class`.
    ///
    /// Segments support every norm; arcs and disks support the 2-norm only.
    pub fn distance_to_class(&self, class: usize, z: &[f64], norm: PNorm) -> Result<f64> {
        check_dim(self.m, z.len())?;
        let off = if class == 0 { 0.0 } else { self.r_p };
        match self.kind {
            ManifoldKind::ParallelSegments => {
                // Every supported norm is monotone in each |coordinate|, so clamping is optimal.
                let mut d = z.to_vec();
                d[0] = z[0] - z[0].clamp(0.0, 1.0);
                d[1] = z[1] - off;
                Ok(norm.norm(&d))
            }
            ManifoldKind::ConcentricArcs => {
                if norm != PNorm::L2 {
                    return Err(Error::invalid("arc distances are only exact in the 2-norm"));
                }
                let radius = 1.0 + off;
                let rest: f64 = z[2..].iter().map(|v| v * v).sum();
                let rho = z[0].hypot(z[1]);
                let angle = z[1].atan2(z[0]);
                let plane = if rho > 0.0 && (0.0..=FRAC_PI_2).contains(&angle) {
                    (rho - radius).abs()
                } else {
                    let e0 = (z[0] - radius).hypot(z[1]);
                    let e1 = z[0].hypot(z[1] - radius);
                    e0.min(e1)
                };
                Ok((plane * plane + rest).sqrt())
            }
            ManifoldKind::ParallelDisks => {
                if norm != PNorm::L2 {
                    return Err(Error::invalid("disk distances are only exact in the 2-norm"));
                }
                let rho = z[0].hypot(z[1]);
                let radial = (rho - 1.0).max(0.0);
                let normal = z[2] - off;
                let rest: f64 = z[3..].iter().map(|v| v * v).sum();
                Ok((radial * radial + normal * normal + rest).sqrt())
            }
        }
    }
}

/// Samples both classes with shared intrinsic parameters, so the closest generated
/// pair sits at exactly `r_p`.
pub fn generate_manifold(spec: &ManifoldSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    if spec.samples_per_class == 0 {
        return Err(Error::invalid("samples_per_class must be positive"));
    }
    let mut rng = rng::stream(spec.seed, "core-data/manifold");
    let params: Vec<Vec<f64>> = (0..spec.samples_per_class)
        .map(|_| (0..spec.k).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut points = Vec::with_capacity(2 * spec.samples_per_class);
    for class in 0..2 {
        for u in &params {
            points.push(LabeledPoint::of_class(spec.embed(class, u), class));
        }
    }
    LabeledDataset::new(points, spec.m)
}

/// Points within `epsilon0` (in `norm`) of class `class`, checked against the analytic distance.
pub fn sample_epsilon_neighborhood(
    spec: &ManifoldSpec,
    class: usize,
    epsilon0: f64,
    norm: PNorm,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if !(epsilon0 >= 0.0) {
        return Err(Error::invalid("epsilon0 must be non-negative"));
    }
    let mut rng = rng::substream(seed, "core-data/neighborhood", class as u64);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u: Vec<f64> = (0..spec.k).map(|_| rng.random::<f64>()).collect();
        let mut x = spec.embed(class, &u);
        if epsilon0 > 0.0 {
            let dir: Vec<f64> = (0..spec.m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let len = norm.norm(&dir);
            if len == 0.0 {
                continue;
            }
            let radius = epsilon0 * rng.random::<f64>();
            for (xi, di) in x.iter_mut().zip(&dir) {
                *xi += radius * di / len;
            }
        }
        out.push(x);
    }
    Ok(out)
}
