//! Minimal compressed-sparse-row complex matrix.
//!
//! Only the handful of operations needed to assemble Liouvillians from
//! Kronecker products of small factors are provided.

use faer::Mat;

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))))
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros are dropped.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of bounds");
        }
        // Stable, so duplicates are summed in input order.
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut k = 0;
        while k < entries.len() {
            let (r, c, mut v) = entries[k];
            k += 1;
            while k < entries.len() && (entries[k].0, entries[k].1) == (r, c) {
                v += entries[k].2;
                k += 1;
            }
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { rows, cols, row_ptr, col_idx, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over stored `(row, col, value)` entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(cc, _)| cc == c).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_triplets(self.rows, self.cols, self.iter().map(|(r, c, v)| (r, c, v * s)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_triplets(self.rows, self.cols, self.iter().chain(other.iter()))
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.iter().map(|(r, c, v)| (c, r, v)))
    }

    pub fn conj(&self) -> Self {
        Self::from_triplets(self.rows, self.cols, self.iter().map(|(r, c, v)| (r, c, v.conj())))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut triplets = Vec::new();
        for (r, k, a) in self.iter() {
            for (c, b) in other.row(k) {
                triplets.push((r, c, a * b));
            }
        }
        Self::from_triplets(self.rows, other.cols, triplets)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, a) in self.iter() {
            for (r2, c2, b) in other.iter() {
                triplets.push((r1 * other.rows + r2, c1 * other.cols + c2, a * b));
            }
        }
        Self::from_triplets(self.rows * other.rows, self.cols * other.cols, triplets)
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.add(&other.scale(C64::new(-1.0, 0.0))).iter().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = SparseMatrix::identity(2);
        let i3 = SparseMatrix::identity(3);
        assert_eq!(i2.kron(&i3), SparseMatrix::identity(6));
    }

    #[test]
    fn kron_index_layout() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, c(2.0))]);
        let b = SparseMatrix::from_triplets(2, 2, [(1, 0, c(3.0))]);
        let k = a.kron(&b);
        assert_eq!(k.nnz(), 1);
        assert_eq!(k.get(1, 2), c(6.0));
    }

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let m = SparseMatrix::from_triplets(2, 2, [(0, 0, c(1.0)), (0, 0, c(-1.0)), (1, 1, c(2.0)), (1, 1, c(2.0))]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 1), c(4.0));
    }

    #[test]
    fn matmul_matches_dense() {
        let a = SparseMatrix::from_triplets(2, 3, [(0, 0, c(1.0)), (0, 2, C64::new(0.0, 1.0)), (1, 1, c(2.0))]);
        let b = SparseMatrix::from_triplets(3, 2, [(0, 1, c(1.0)), (2, 0, c(3.0)), (1, 1, c(-1.0))]);
        let p = a.matmul(&b).to_dense();
        let q = a.to_dense() * b.to_dense();
        for r in 0..2 {
            for cc in 0..2 {
                assert_eq!(p[(r, cc)], q[(r, cc)]);
            }
        }
    }
}
