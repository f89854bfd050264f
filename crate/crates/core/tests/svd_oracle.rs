//! Truncated SVD against a dense eigen-decomposition.

use itemvec_core::linalg::CsrMatrix;
use itemvec_core::{build_cooccurrence, normalize, seeded_rng, truncated_svd, Corpus, SvdOptions, Vocabulary};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;

struct Dense {
    /// `|λ|`, nonincreasing.
    singular: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

fn dense_oracle(matrix: &CsrMatrix) -> Dense {
    let n = matrix.rows();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &matrix.to_dense()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    Dense {
        singular: order.iter().map(|&i| eig.eigenvalues[i].abs()).collect(),
        vectors: order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect(),
    }
}

fn random_symmetric(n: usize, density: f64, seed: u64) -> CsrMatrix {
    let mut rng = seeded_rng(seed, &[]);
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in i..n {
            if rng.random::<f64>() < density {
                let v = rng.random_range(-1.0..1.0);
                triplets.push((i, j, v));
                if i != j {
                    triplets.push((j, i, v));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, triplets)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Length of the projection of `x` onto the dense eigenvectors whose `|λ|`
/// equals `sigma` within `1e-6` relative.
fn cluster_projection(dense: &Dense, sigma: f64, x: &[f64]) -> f64 {
    let scale = dense.singular[0].max(f64::MIN_POSITIVE);
    dense
        .singular
        .iter()
        .zip(&dense.vectors)
        .filter(|(s, _)| (**s - sigma).abs() <= 1e-6 * scale)
        .map(|(_, v)| dot(v, x).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn check_against_oracle(matrix: &CsrMatrix, m: usize, seed: u64) {
    let n = matrix.rows();
    let dense = dense_oracle(matrix);
    let svd = truncated_svd(matrix, m, seed, &SvdOptions::default()).unwrap();
    let top = dense.singular[0];
    for j in 0..m {
        let (got, want) = (svd.singular_values[j], dense.singular[j]);
        // Exact zeros come back from either solver as rounding noise near 1e-16·top.
        assert!(
            (got - want).abs() <= 1e-6 * want + 1e-12 * top,
            "n={n} m={m} sigma_{j}: {got} vs {want}"
        );
        let x = &svd.vectors[j];
        assert!((dot(x, x) - 1.0).abs() < 1e-8);
        for y in &svd.vectors[..j] {
            assert!(dot(x, y).abs() < 1e-8);
        }
        // Columns with a negligible singular value span an arbitrary part of the null space.
        if want > 1e-6 * top {
            let p = cluster_projection(&dense, want, x);
            assert!((p - 1.0).abs() < 1e-6, "n={n} m={m} column {j}: projection {p}");
        }
    }

    // R·Rᵀ against U·|S|·Uᵀ from the oracle, unless the cut at m splits a cluster.
    if m < n && (dense.singular[m - 1] - dense.singular[m]).abs() <= 1e-6 * top {
        return;
    }
    let mut err = 0.0;
    let mut reference = 0.0;
    for a in 0..n {
        for b in 0..n {
            let r: f64 = (0..m).map(|j| svd.singular_values[j] * svd.vectors[j][a] * svd.vectors[j][b]).sum();
            let d: f64 = (0..m).map(|j| dense.singular[j] * dense.vectors[j][a] * dense.vectors[j][b]).sum();
            err += (r - d).powi(2);
            reference += d.powi(2);
        }
    }
    let rel = (err / reference.max(f64::MIN_POSITIVE)).sqrt();
    assert!(rel < 1e-8, "n={n} m={m}: reconstruction error {rel:e}");
}

#[test]
fn random_sparse_matrices_match_dense_oracle() {
    let mut rng = seeded_rng(2024, &[]);
    for case in 0..50 {
        let n = rng.random_range(2..=200);
        let m = rng.random_range(1..=n.min(20));
        let density = rng.random_range(0.02..0.2);
        check_against_oracle(&random_symmetric(n, density, case), m, case);
    }
}

#[test]
fn normalized_cooccurrence_matches_dense_oracle() {
    let mut rng = seeded_rng(77, &[]);
    let items = 60;
    let sets: Vec<Vec<u32>> = (0..300)
        .map(|_| {
            let mut ids: Vec<u32> = (0..items).collect();
            ids.shuffle(&mut rng);
            ids.truncate(rng.random_range(2..8));
            ids
        })
        .collect();
    let corpus = Corpus::new(sets, items as usize).unwrap();
    let vocab = Vocabulary::from_counts(
        corpus
            .item_counts(items as usize)
            .iter()
            .enumerate()
            .map(|(i, &c)| (format!("i{i}"), c.max(1))),
    )
    .unwrap();
    let matrix = normalize(&build_cooccurrence(&corpus, &vocab).unwrap());
    check_against_oracle(&matrix, 12, 5);
}

#[test]
fn singular_values_invariant_under_permutation() {
    let mut rng = seeded_rng(9, &[]);
    for case in 0..10 {
        let n = rng.random_range(10..=120);
        let m = rng.random_range(1..=n.min(10));
        let a = random_symmetric(n, 0.1, 100 + case);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let permuted = CsrMatrix::from_triplets(
            n,
            n,
            (0..n).flat_map(|r| a.row(r).map(move |(c, v)| (r, c, v)).collect::<Vec<_>>())
                .map(|(r, c, v)| (perm[r], perm[c], v)),
        );
        let s1 = truncated_svd(&a, m, 1, &SvdOptions::default()).unwrap().singular_values;
        let s2 = truncated_svd(&permuted, m, 2, &SvdOptions::default()).unwrap().singular_values;
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() <= 1e-6 * x.max(1e-12), "{x} vs {y}");
        }
    }
}
