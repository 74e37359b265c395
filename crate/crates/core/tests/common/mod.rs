//! Brute-force oracles shared by the integration suites. These are kept
//! deliberately independent of the library's own numerics: the
//! eigensolver here is a classical max-pivot Jacobi over the full Gram
//! matrix, and DCG maxima come from explicit permutation enumeration.

#![allow(dead_code)]

use std::collections::HashMap;

use subpop_core::linalg::CsrMatrix;
use subpop_core::rng::SplitMix64;

/// Classical Jacobi eigenvalue iteration on a dense symmetric matrix,
/// always rotating the largest off-diagonal element away.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    let frobenius: f64 = a
        .iter()
        .flat_map(|row| row.iter().map(|x| x * x))
        .sum::<f64>()
        .sqrt();
    if frobenius > 0.0 {
        for _ in 0..20_000 {
            let (mut p, mut q, mut biggest) = (0, 1, 0.0f64);
            for i in 0..n {
                for j in (i + 1)..n {
                    if a[i][j].abs() > biggest {
                        biggest = a[i][j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if biggest <= frobenius * 1e-15 {
                break;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..n {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..n {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    vals
}

/// Top `rank` singular values of a dense matrix via the eigenvalues of
/// the smaller Gram matrix.
pub fn dense_singular_values(rows: &[Vec<f64>], rank: usize) -> Vec<f64> {
    let m = rows.len();
    let n = rows[0].len();
    let gram: Vec<Vec<f64>> = if m <= n {
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| rows[i].iter().zip(&rows[j]).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect()
    } else {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| rows.iter().map(|r| r[i] * r[j]).sum())
                    .collect()
            })
            .collect()
    };
    jacobi_eigenvalues(gram)
        .into_iter()
        .take(rank)
        .map(|v| v.max(0.0).sqrt())
        .collect()
}

pub fn csr_from_dense(rows: &[Vec<f64>]) -> CsrMatrix {
    let ncols = rows[0].len();
    let sparse_rows: Vec<Vec<(u32, f64)>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j as u32, *v))
                .collect()
        })
        .collect();
    CsrMatrix::from_rows(ncols, &sparse_rows)
}

/// DCG@k of a recommendation list, computed the way the enumeration
/// oracle does everywhere: gains clamp negatives to zero, discounts are
/// `log2(rank + 1)`.
pub fn oracle_dcg(recs: &[u32], rel: &HashMap<u32, i32>, k: usize) -> f64 {
    recs.iter()
        .take(k)
        .enumerate()
        .map(|(i, item)| {
            let g = rel.get(item).copied().unwrap_or(0).max(0) as f64;
            g / ((i + 2) as f64).log2()
        })
        .sum()
}

/// Maximum DCG@k over every permutation of the candidate items
/// (Heap's algorithm).
pub fn max_dcg_by_enumeration(candidates: &[u32], rel: &HashMap<u32, i32>, k: usize) -> f64 {
    fn heap_visit(
        items: &mut Vec<u32>,
        size: usize,
        rel: &HashMap<u32, i32>,
        k: usize,
        best: &mut f64,
    ) {
        if size == 1 {
            let dcg = oracle_dcg(items, rel, k);
            if dcg > *best {
                *best = dcg;
            }
            return;
        }
        for i in 0..size {
            heap_visit(items, size - 1, rel, k, best);
            if size.is_multiple_of(2) {
                items.swap(i, size - 1);
            } else {
                items.swap(0, size - 1);
            }
        }
    }
    let mut items = candidates.to_vec();
    let mut best = 0.0;
    let n = items.len();
    heap_visit(&mut items, n, rel, k, &mut best);
    best
}

/// Deterministic gaussian test matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.next_gaussian()).collect())
        .collect()
}
