//! Compressed-row sparse matrices and the operator abstraction used by the
//! conjugate gradient solver.

use rayon::prelude::*;

use crate::error::Result;

/// A square linear operator `y = A x`, possibly matrix-free.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

/// Rows at or above this count are multiplied in parallel.
const PAR_ROWS: usize = 16_384;
const CHUNK_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries; columns within a row end up sorted.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: Vec<(u32, u32, f64)>) -> Self {
        let triplets = sort_triplets(nrows, triplets);
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in triplets {
            assert!((r as usize) < nrows && (c as usize) < ncols, "entry ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().map(|&c| c as usize).zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        out
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let rows = |first: usize, out: &mut [f64]| {
            let ptr = &self.row_ptr[first..first + out.len() + 1];
            for (yi, w) in out.iter_mut().zip(ptr.windows(2)) {
                let (cols, vals) = (&self.col_idx[w[0]..w[1]], &self.values[w[0]..w[1]]);
                *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j as usize]).sum();
            }
        };
        if self.nrows >= PAR_ROWS {
            y.par_chunks_mut(CHUNK_ROWS).enumerate().for_each(|(c, out)| rows(c * CHUNK_ROWS, out));
        } else {
            rows(0, y);
        }
    }

    /// `y += A^T x`.
    pub fn mul_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k] as usize] += self.values[k] * xi;
            }
        }
    }

    /// Largest `|A_ij - A_ji|`; zero for an exactly symmetric matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        assert_eq!(self.nrows, self.ncols, "operator must be square");
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.mul_vec(x, y);
        Ok(())
    }
}

/// Sequential dot product; a fixed summation order keeps results
/// reproducible bit for bit.
/// Orders triplets by (row, column): a counting sort on the rows, then a
/// sort of each (short) row.
pub(crate) fn sort_triplets(nrows: usize, triplets: Vec<(u32, u32, f64)>) -> Vec<(u32, u32, f64)> {
    let mut start = vec![0usize; nrows + 1];
    for &(r, c, _) in &triplets {
        assert!((r as usize) < nrows, "entry ({r}, {c}) out of bounds");
        start[r as usize + 1] += 1;
    }
    for i in 0..nrows {
        start[i + 1] += start[i];
    }
    let mut next = start.clone();
    let mut sorted = vec![(0, 0, 0.0); triplets.len()];
    for t in triplets {
        let slot = &mut next[t.0 as usize];
        sorted[*slot] = t;
        *slot += 1;
    }
    for w in start.windows(2) {
        sorted[w[0]..w[1]].sort_unstable_by_key(|&(_, c, _)| c);
    }
    sorted
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
