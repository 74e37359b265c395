//! Minimal dense/sparse linear algebra used by the codebook SVD.
//!
//! Tall-skinny blocks are kept as column lists (`Vec<Vec<f64>>`) so the
//! orthogonalisation sweeps touch contiguous memory. Every reduction is
//! sequential within its task; parallelism only ever splits work across
//! disjoint output columns or rows, which keeps results byte-identical
//! for any thread count.

use rayon::prelude::*;

use crate::error::{Result, SubpopError};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row (column, value) lists. Column indices within a
    /// row need not be sorted, but must be in range.
    pub fn from_rows(ncols: usize, rows: &[Vec<(u32, f64)>]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for &(j, v) in row {
                debug_assert!((j as usize) < ncols);
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: rows.len(),
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    /// `A * X` where `X` is given as columns of length `ncols`.
    /// Returns columns of length `nrows`.
    pub fn mul_cols(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.par_iter()
            .map(|col| {
                debug_assert_eq!(col.len(), self.ncols);
                let mut out = vec![0.0; self.nrows];
                for (u, slot) in out.iter_mut().enumerate() {
                    let (idx, val) = self.row(u);
                    let mut acc = 0.0;
                    for (j, v) in idx.iter().zip(val) {
                        acc += v * col[*j as usize];
                    }
                    *slot = acc;
                }
                out
            })
            .collect()
    }

    /// `A^T * Q` where `Q` is given as columns of length `nrows`.
    /// Returns columns of length `ncols`.
    pub fn transpose_mul_cols(&self, q: &[Vec<f64>]) -> Vec<Vec<f64>> {
        q.par_iter()
            .map(|col| {
                debug_assert_eq!(col.len(), self.nrows);
                let mut out = vec![0.0; self.ncols];
                for (u, &qu) in col.iter().enumerate() {
                    let (idx, val) = self.row(u);
                    if qu != 0.0 {
                        for (j, v) in idx.iter().zip(val) {
                            out[*j as usize] += v * qu;
                        }
                    }
                }
                out
            })
            .collect()
    }
}

/// Row-major dense matrix. Only what the codebook pipeline needs.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// In-place thin QR by modified Gram-Schmidt with one re-orthogonalisation
/// pass. Columns that collapse below `1e-13` of the largest input column
/// norm are zeroed rather than normalised, so rank-deficient inputs yield
/// zero directions instead of noise.
pub fn orthonormalize_columns(cols: &mut [Vec<f64>]) {
    let scale = cols.iter().map(|c| norm(c)).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return;
    }
    let floor = scale * 1e-13;
    for j in 0..cols.len() {
        let (done, rest) = cols.split_at_mut(j);
        let v = &mut rest[0];
        for _ in 0..2 {
            for q in done.iter() {
                let r = dot(q, v);
                if r != 0.0 {
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= r * qi;
                    }
                }
            }
        }
        let n = norm(v);
        if n <= floor {
            v.iter_mut().for_each(|x| *x = 0.0);
        } else {
            let inv = 1.0 / n;
            v.iter_mut().for_each(|x| *x *= inv);
        }
    }
}

/// Eigendecomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues (descending) and matching eigenvectors
/// as columns. `matrix` is row-major `n * n` and is consumed.
pub fn symmetric_eigen(mut a: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if a.len() != n * n {
        return Err(SubpopError::DimensionMismatch(format!(
            "symmetric_eigen expects {n}x{n} data, got {} entries",
            a.len()
        )));
    }
    let mut vecs = vec![0.0; n * n];
    for i in 0..n {
        vecs[i * n + i] = 1.0;
    }
    let fro: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if fro > 0.0 {
        let tol = fro * 1e-14;
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p * n + q] * a[p * n + q];
                }
            }
            if off.sqrt() <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() <= tol / (n as f64) {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = vecs[k * n + p];
                        let vkq = vecs[k * n + q];
                        vecs[k * n + p] = c * vkp - s * vkq;
                        vecs[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let vals: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let cols: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| (0..n).map(|i| vecs[i * n + j]).collect())
        .collect();
    Ok((vals, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_row_access() {
        let m = CsrMatrix::from_rows(3, &[vec![(0, 1.0), (2, 2.0)], vec![(1, 3.0)]]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(0), (&[0u32, 2][..], &[1.0, 2.0][..]));
        assert_eq!(m.row(1), (&[1u32][..], &[3.0][..]));
    }

    #[test]
    fn csr_products_match_hand_computation() {
        // [[1, 0, 2], [0, 3, 0]]
        let m = CsrMatrix::from_rows(3, &[vec![(0, 1.0), (2, 2.0)], vec![(1, 3.0)]]);
        let x = vec![vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]];
        let y = m.mul_cols(&x);
        assert_eq!(y[0], vec![3.0, 3.0]);
        assert_eq!(y[1], vec![4.0, 3.0]);

        let q = vec![vec![1.0, 2.0]];
        let z = m.transpose_mul_cols(&q);
        assert_eq!(z[0], vec![1.0, 6.0, 2.0]);
    }

    #[test]
    fn mgs_produces_orthonormal_columns() {
        let mut cols = vec![
            vec![1.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
        ];
        orthonormalize_columns(&mut cols);
        for i in 0..3 {
            assert!((norm(&cols[i]) - 1.0).abs() < 1e-12);
            for j in (i + 1)..3 {
                assert!(dot(&cols[i], &cols[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mgs_zeroes_dependent_columns() {
        let mut cols = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        orthonormalize_columns(&mut cols);
        assert!((norm(&cols[0]) - 1.0).abs() < 1e-12);
        assert_eq!(cols[1], vec![0.0, 0.0]);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let (vals, vecs) = symmetric_eigen(vec![2.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        // eigenvector for 3 is (1,1)/sqrt(2) up to sign
        assert!((vecs[0][0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn jacobi_handles_diagonal_input() {
        let (vals, _) = symmetric_eigen(vec![1.0, 0.0, 0.0, 5.0], 2).unwrap();
        assert_eq!(vals, vec![5.0, 1.0]);
    }
}
