//! Seeded randomized truncated SVD by subspace iteration.
//!
//! Only the item-side factors are materialised: the codebook needs
//! `sigma_j * v_j` per item, nothing else. Convergence is declared when
//! the top-`rank` singular-value estimates change by less than `tol`
//! relatively between successive power steps, with at least two power
//! steps always performed.

use rayon::prelude::*;

use crate::error::{Result, SubpopError};
use crate::linalg::{orthonormalize_columns, symmetric_eigen, CsrMatrix, DenseMatrix};
use crate::rng::SplitMix64;

/// Extra random probe columns beyond the requested rank.
const OVERSAMPLE: usize = 8;
/// Power steps always taken before the tolerance check may fire.
const MIN_POWER_STEPS: usize = 2;

#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `ncols x rank`; entry `(i, j)` is `sigma_j * v_j[i]`.
    pub item_factors: DenseMatrix,
    /// Top `rank` singular values, non-increasing.
    pub singular_values: Vec<f64>,
}

pub fn truncated_svd(
    matrix: &CsrMatrix,
    rank: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<SvdResult> {
    let max_rank = matrix.nrows.min(matrix.ncols);
    if rank == 0 || rank > max_rank {
        return Err(SubpopError::RankTooLarge {
            rank,
            max: max_rank,
        });
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(SubpopError::InvalidArgument(format!(
            "svd tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(SubpopError::InvalidArgument(
            "svd max_iter must be at least 1".into(),
        ));
    }

    let probes = (rank + OVERSAMPLE).min(max_rank);
    let mut rng = SplitMix64::new(seed);
    let omega: Vec<Vec<f64>> = (0..probes)
        .map(|_| (0..matrix.ncols).map(|_| rng.next_gaussian()).collect())
        .collect();

    let mut range = matrix.mul_cols(&omega);
    orthonormalize_columns(&mut range);

    let mut prev_sigma: Option<Vec<f64>> = None;
    let mut power_steps = 0usize;
    while power_steps < max_iter {
        // columns of A^T * Y, i.e. rows of B = Y^T * A
        let projected = matrix.transpose_mul_cols(&range);
        let gram = row_gram(&projected);
        let (eigvals, eigvecs) = symmetric_eigen(gram, probes)?;
        let sigma: Vec<f64> = eigvals
            .iter()
            .take(rank)
            .map(|&v| v.max(0.0).sqrt())
            .collect();

        if power_steps >= MIN_POWER_STEPS {
            if let Some(prev) = &prev_sigma {
                if max_relative_change(prev, &sigma) < tol {
                    return Ok(finish(&projected, &eigvecs, sigma, matrix.ncols, rank));
                }
            }
        }
        prev_sigma = Some(sigma);

        let mut z = projected;
        orthonormalize_columns(&mut z);
        range = matrix.mul_cols(&z);
        orthonormalize_columns(&mut range);
        power_steps += 1;
    }
    Err(SubpopError::ConvergenceFailure { max_iter })
}

fn row_gram(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let entries: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|c| rows[a].iter().zip(&rows[c]).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect();
    entries.into_iter().flatten().collect()
}

fn max_relative_change(old: &[f64], new: &[f64]) -> f64 {
    let scale = old
        .first()
        .copied()
        .unwrap_or(0.0)
        .max(new.first().copied().unwrap_or(0.0));
    // values this far below sigma_1 are numerical noise, not signal
    let noise_floor = scale * 1e-12;
    old.iter()
        .zip(new)
        .map(|(&o, &n)| {
            let denom = o.max(n);
            if denom <= noise_floor {
                0.0
            } else {
                (o - n).abs() / denom
            }
        })
        .fold(0.0, f64::max)
}

fn finish(
    projected: &[Vec<f64>],
    eigvecs: &[Vec<f64>],
    sigma: Vec<f64>,
    ncols: usize,
    rank: usize,
) -> SvdResult {
    // item_factors = B^T * U restricted to the leading `rank` columns;
    // column j is exactly sigma_j * v_j
    let probes = projected.len();
    let mut factors = DenseMatrix::zeros(ncols, rank);
    factors
        .data
        .par_chunks_mut(rank)
        .enumerate()
        .for_each(|(i, row)| {
            for (j, out) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for a in 0..probes {
                    acc += projected[a][i] * eigvecs[j][a];
                }
                *out = acc;
            }
        });
    SvdResult {
        item_factors: factors,
        singular_values: sigma,
    }
}
