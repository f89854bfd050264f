//! Item-item SVD baseline.
//!
//! 1. Count ordered positive pairs `(i, j)` over all sets.
//! 2. Scale each entry by `1 / sqrt(row_sum[i] * col_sum[j])`.
//! 3. Take the top `m` singular triplets and represent item `i` by row `i` of
//!    `U · diag(sqrt(S))`.
//!
//! The normalized matrix is symmetric, so the decomposition is computed as an
//! eigen-decomposition with singular values `|λ|`. The truncated solver is a
//! randomized subspace iteration with Rayleigh–Ritz extraction, iterated until
//! the Ritz residuals meet the tolerance.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use num_traits::Float;
use rand::Rng;

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, orthonormalize, symmetric_eigen, CsrMatrix};
use crate::rng::seeded_rng;

/// Symmetric positive-pair count matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    counts: CsrMatrix,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
}

impl CooccurrenceMatrix {
    pub fn n(&self) -> usize {
        self.counts.rows()
    }

    pub fn entry(&self, i: u32, j: u32) -> f64 {
        self.counts.get(i as usize, j as usize)
    }

    pub fn counts(&self) -> &CsrMatrix {
        &self.counts
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }

    /// Wraps an explicit count matrix, computing the marginals.
    pub fn from_counts(counts: CsrMatrix) -> Result<Self> {
        if counts.rows() != counts.cols() {
            return Err(Error::DimensionMismatch {
                left: counts.rows(),
                right: counts.cols(),
            });
        }
        let n = counts.rows();
        let mut row_sums = vec![0.0; n];
        let mut col_sums = vec![0.0; n];
        for (r, row_sum) in row_sums.iter_mut().enumerate() {
            for (c, v) in counts.row(r) {
                *row_sum += v;
                col_sums[c] += v;
            }
        }
        Ok(CooccurrenceMatrix {
            counts,
            row_sums,
            col_sums,
        })
    }
}

/// Counts every ordered pair `(i, j)`, `i != j`, sharing a set.
pub fn build_cooccurrence(corpus: &Corpus, vocab: &Vocabulary) -> Result<CooccurrenceMatrix> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut cells: HashMap<(u32, u32), u64> = HashMap::new();
    for set in corpus.iter() {
        for &a in set {
            for &b in set {
                if a != b {
                    *cells.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
    }
    let n = vocab.len();
    let counts = CsrMatrix::from_triplets(
        n,
        n,
        cells
            .into_iter()
            .map(|((a, b), c)| (a as usize, b as usize, c as f64)),
    );
    CooccurrenceMatrix::from_counts(counts)
}

/// `entry(i, j) / sqrt(row_sum[i] * col_sum[j])`; all-zero rows stay zero.
pub fn normalize(matrix: &CooccurrenceMatrix) -> CsrMatrix {
    matrix.counts.map_values(|r, c, v| {
        let denom = Float::sqrt(matrix.row_sums[r] * matrix.col_sums[c]);
        if denom > 0.0 {
            v / denom
        } else {
            0.0
        }
    })
}

/// Solver settings for [`truncated_svd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    /// Extra basis vectors beyond the requested rank.
    pub oversample: usize,
    /// Subspace iterations before convergence is first checked.
    pub power_iters: usize,
    /// Max Ritz residual `‖A x − λ x‖`, relative to the largest `|λ|`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            oversample: 10,
            power_iters: 7,
            tol: 1e-10,
            max_iters: 5000,
        }
    }
}

/// Leading singular triplets of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// Left singular vectors, one `Vec` of length `n` per column.
    pub vectors: Vec<Vec<f64>>,
    /// Nonincreasing, nonnegative.
    pub singular_values: Vec<f64>,
    /// Signed eigenvalues matching `singular_values`.
    pub eigenvalues: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Top-`m` singular values and left singular vectors of a symmetric sparse
/// matrix. Each vector's first non-negligible coordinate is made positive.
pub fn truncated_svd(
    matrix: &CsrMatrix,
    m: usize,
    seed: u64,
    options: &SvdOptions,
) -> Result<TruncatedSvd> {
    let n = matrix.rows();
    if matrix.cols() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: matrix.cols(),
        });
    }
    if m > n {
        return Err(Error::RankTooLarge {
            requested: m,
            order: n,
        });
    }
    if m == 0 {
        return Err(Error::InvalidConfig("rank must be at least 1".into()));
    }
    let width = (m + options.oversample).min(n);
    let mut rng = seeded_rng(seed, &[0x57d]);
    let mut basis: Vec<Vec<f64>> = (0..width)
        .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    orthonormalize(&mut basis, &mut rng);

    let mut image = vec![vec![0.0; n]; width];
    let mut packed = vec![0.0; n * width];
    let mut packed_image = vec![0.0; n * width];
    let mut residual = f64::INFINITY;
    for iteration in 1..=options.max_iters.max(options.power_iters) {
        for (j, q) in basis.iter().enumerate() {
            for (i, &x) in q.iter().enumerate() {
                packed[i * width + j] = x;
            }
        }
        matrix.mul_block(&packed, width, &mut packed_image);
        for (j, z) in image.iter_mut().enumerate() {
            for (i, zi) in z.iter_mut().enumerate() {
                *zi = packed_image[i * width + j];
            }
        }
        if iteration >= options.power_iters {
            let ritz = rayleigh_ritz(&basis, &image, m);
            residual = ritz.residual;
            if residual <= options.tol {
                return Ok(ritz.into_svd(iteration));
            }
        }
        core::mem::swap(&mut basis, &mut image);
        orthonormalize(&mut basis, &mut rng);
    }
    Err(Error::NotConverged {
        iterations: options.max_iters,
        residual,
    })
}

struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residual: f64,
}

fn rayleigh_ritz(basis: &[Vec<f64>], image: &[Vec<f64>], m: usize) -> Ritz {
    let width = basis.len();
    let n = basis[0].len();
    let mut projected = vec![0.0; width * width];
    for i in 0..width {
        for j in 0..width {
            projected[i * width + j] = dot(&basis[i], &image[j]);
        }
    }
    for i in 0..width {
        for j in i + 1..width {
            let avg = 0.5 * (projected[i * width + j] + projected[j * width + i]);
            projected[i * width + j] = avg;
            projected[j * width + i] = avg;
        }
    }
    let (theta, w) = symmetric_eigen(&projected, width);
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()).then(a.cmp(&b)));
    order.truncate(m);

    let scale = theta.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
    let mut values = Vec::with_capacity(m);
    let mut vectors = Vec::with_capacity(m);
    let mut worst = 0.0f64;
    for &k in &order {
        let mut x = vec![0.0; n];
        let mut ax = vec![0.0; n];
        for (j, &wj) in w[k].iter().enumerate() {
            for i in 0..n {
                x[i] += wj * basis[j][i];
                ax[i] += wj * image[j][i];
            }
        }
        let r: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a - theta[k] * b).collect();
        if scale > 0.0 {
            worst = worst.max(norm(&r) / scale);
        }
        values.push(theta[k]);
        vectors.push(x);
    }
    Ritz {
        values,
        vectors,
        residual: worst,
    }
}

impl Ritz {
    fn into_svd(self, iterations: usize) -> TruncatedSvd {
        let mut vectors = self.vectors;
        for v in vectors.iter_mut() {
            let peak = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * peak) {
                if *first < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
        }
        TruncatedSvd {
            vectors,
            singular_values: self.values.iter().map(|v| v.abs()).collect(),
            eigenvalues: self.values,
            iterations,
            residual: self.residual,
        }
    }
}

/// SVD item representations: rows of `U · diag(sqrt(S))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdModel {
    vocab: Vocabulary,
    dim: usize,
    representation: Vec<f64>,
    singular_values: Vec<f64>,
}

impl SvdModel {
    pub fn from_decomposition(vocab: Vocabulary, svd: &TruncatedSvd) -> Self {
        let n = vocab.len();
        let dim = svd.singular_values.len();
        let mut representation = vec![0.0; n * dim];
        for (k, (col, &s)) in svd.vectors.iter().zip(&svd.singular_values).enumerate() {
            let root = Float::sqrt(s);
            for i in 0..n {
                representation[i * dim + k] = col[i] * root;
            }
        }
        SvdModel {
            vocab,
            dim,
            representation,
            singular_values: svd.singular_values.clone(),
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major `|W| × dim`.
    pub fn representation(&self) -> &[f64] {
        &self.representation
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let start = id as usize * self.dim;
        &self.representation[start..start + self.dim]
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }
}

/// Co-occurrence counts → normalization → truncated SVD → `U·S^½`.
pub fn svd_representation(corpus: &Corpus, vocab: &Vocabulary, m: usize, seed: u64) -> Result<SvdModel> {
    svd_representation_with(corpus, vocab, m, seed, &SvdOptions::default())
}

pub fn svd_representation_with(
    corpus: &Corpus,
    vocab: &Vocabulary,
    m: usize,
    seed: u64,
    options: &SvdOptions,
) -> Result<SvdModel> {
    let counts = build_cooccurrence(corpus, vocab)?;
    let normalized = normalize(&counts);
    let svd = truncated_svd(&normalized, m, seed, options)?;
    Ok(SvdModel::from_decomposition(vocab.clone(), &svd))
}
