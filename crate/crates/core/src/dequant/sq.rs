use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};

/// Sample-and-query access: entries on demand, indices drawn with probability `|x_i|^2 / |x|^2`,
/// and the norm.
pub trait SampleQuery {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn query(&self, i: usize) -> f64;

    /// `|x|`, or an estimate within relative accuracy [`SampleQuery::nu`].
    fn norm(&self) -> f64;

    /// Declared relative accuracy of [`SampleQuery::norm`]; zero for exact access.
    fn nu(&self) -> f64 {
        0.0
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize>;

    /// Outcome counts of `total` independent samples, as `(index, count)` pairs sorted by index.
    fn sample_counts<R: Rng + ?Sized>(&self, total: u64, rng: &mut R) -> Result<Vec<(usize, u64)>> {
        let mut counts = BTreeMap::new();
        for _ in 0..total {
            *counts.entry(self.sample(rng)?).or_insert(0u64) += 1;
        }
        Ok(counts.into_iter().collect())
    }
}

fn zero_norm() -> Error {
    Error::invalid("a zero vector has no sampling distribution")
}

pub(crate) fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
}

/// SQ access to a real vector through a binary tree of partial sums of squares.
#[derive(Debug, Clone, Serialize)]
pub struct SqVector {
    values: Vec<f64>,
    /// Heap layout: node `i` has children `2i` and `2i + 1`; leaves start at `leaves`.
    #[serde(skip)]
    tree: Vec<f64>,
    #[serde(skip)]
    leaves: usize,
}

impl SqVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("SQ access needs a nonempty vector"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("SQ access needs finite entries"));
        }
        let leaves = values.len().next_power_of_two();
        let mut tree = vec![0.0; 2 * leaves];
        for (i, v) in values.iter().enumerate() {
            tree[leaves + i] = v * v;
        }
        for i in (1..leaves).rev() {
            tree[i] = tree[2 * i] + tree[2 * i + 1];
        }
        Ok(SqVector { values, tree, leaves })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm_sqr(&self) -> f64 {
        self.tree[1]
    }

    fn descend<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let (l, r) = (self.tree[2 * node], self.tree[2 * node + 1]);
            let go_left = r == 0.0 || (l > 0.0 && rng.random::<f64>() * (l + r) < l);
            node = 2 * node + usize::from(!go_left);
        }
        node - self.leaves
    }
}

impl SampleQuery for SqVector {
    fn len(&self) -> usize {
        self.values.len()
    }

    fn query(&self, i: usize) -> f64 {
        self.values[i]
    }

    fn norm(&self) -> f64 {
        self.tree[1].sqrt()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        if self.tree[1] == 0.0 {
            return Err(zero_norm());
        }
        Ok(self.descend(rng))
    }

    /// Multinomial counts by binomial splitting down the tree, so the cost does not grow with `total`.
    fn sample_counts<R: Rng + ?Sized>(&self, total: u64, rng: &mut R) -> Result<Vec<(usize, u64)>> {
        if total == 0 {
            return Ok(Vec::new());
        }
        if self.tree[1] == 0.0 {
            return Err(zero_norm());
        }
        let mut out = Vec::new();
        let mut stack = vec![(1usize, total)];
        while let Some((node, count)) = stack.pop() {
            if count == 0 {
                continue;
            }
            if node >= self.leaves {
                out.push((node - self.leaves, count));
                continue;
            }
            let (l, r) = (self.tree[2 * node], self.tree[2 * node + 1]);
            let left = if r == 0.0 { count } else { binomial(count, l / (l + r), rng) };
            // Right is pushed first so that leaves come out in index order.
            stack.push((2 * node + 1, count - left));
            stack.push((2 * node, left));
        }
        Ok(out)
    }
}

/// SQ access to a matrix: one [`SqVector`] per row plus one over the row norms.
///
/// As a [`SampleQuery`] it is the row-major flattening, sampled by row norm and then within the row.
#[derive(Debug, Clone, Serialize)]
pub struct SqMatrix {
    rows: Vec<SqVector>,
    row_norms: SqVector,
    cols: usize,
}

impl SqMatrix {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::invalid("SQ access needs a nonempty matrix"));
        }
        let rows = a
            .row_iter()
            .map(|r| SqVector::new(r.iter().copied().collect()))
            .collect::<Result<Vec<_>>>()?;
        let row_norms = SqVector::new(rows.iter().map(|r| r.norm()).collect())?;
        Ok(SqMatrix { rows, row_norms, cols: a.ncols() })
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &SqVector {
        &self.rows[i]
    }

    pub fn row_norms(&self) -> &SqVector {
        &self.row_norms
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i].query(j)
    }

    pub fn frobenius(&self) -> f64 {
        self.row_norms.norm()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows(), self.cols, |i, j| self.entry(i, j))
    }
}

impl SampleQuery for SqMatrix {
    fn len(&self) -> usize {
        self.rows.len() * self.cols
    }

    fn query(&self, i: usize) -> f64 {
        self.entry(i / self.cols, i % self.cols)
    }

    fn norm(&self) -> f64 {
        self.frobenius()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let r = self.row_norms.sample(rng)?;
        Ok(r * self.cols + self.rows[r].sample(rng)?)
    }

    fn sample_counts<R: Rng + ?Sized>(&self, total: u64, rng: &mut R) -> Result<Vec<(usize, u64)>> {
        let mut out = Vec::new();
        for (r, c) in self.row_norms.sample_counts(total, rng)? {
            out.extend(self.rows[r].sample_counts(c, rng)?.into_iter().map(|(j, k)| (r * self.cols + j, k)));
        }
        Ok(out)
    }
}

/// Which object `build_sq` was handed.
#[derive(Debug, Clone)]
pub enum SqInput<'a> {
    Vector(&'a [f64]),
    Matrix(&'a DMatrix<f64>),
}

#[derive(Debug, Clone, Serialize)]
pub enum SqAccess {
    Vector(SqVector),
    Matrix(SqMatrix),
}

pub fn build_sq(input: SqInput<'_>) -> Result<SqAccess> {
    Ok(match input {
        SqInput::Vector(v) => SqAccess::Vector(SqVector::new(v.to_vec())?),
        SqInput::Matrix(a) => SqAccess::Matrix(SqMatrix::new(a)?),
    })
}
