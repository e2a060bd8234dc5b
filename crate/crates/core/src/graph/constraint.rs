use std::ops::Range;

use super::AlignmentMultigraph;

/// Sparse 0/1 matrix `J` with one row per bundle; row `r` has ones exactly at
/// the weight indices of bundle `r`, so `J w = 1` encodes the per-bundle sums.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMatrix {
    rows: Vec<Range<usize>>,
    ncols: usize,
}

impl ConstraintMatrix {
    pub fn from_graph(graph: &AlignmentMultigraph) -> Self {
        Self::from_bundle_sizes(graph.bundles.iter().map(|b| b.len()))
    }

    /// Builds `J` from the number of weights (candidates + dummy) in each bundle.
    pub fn from_bundle_sizes(sizes: impl IntoIterator<Item = usize>) -> Self {
        let mut rows = Vec::new();
        let mut at = 0;
        for n in sizes {
            rows.push(at..at + n);
            at += n;
        }
        Self { rows, ncols: at }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row_range(&self, r: usize) -> Range<usize> {
        self.rows[r].clone()
    }

    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.ncols);
        self.rows
            .iter()
            .map(|r| w[r.clone()].iter().sum())
            .collect()
    }

    /// `max_r |(J w)_r - 1|`, zero for a graph without bundles.
    pub fn max_violation(&self, w: &[f64]) -> f64 {
        self.mul_vec(w)
            .into_iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![0.0; self.ncols];
                row[r.clone()].iter_mut().for_each(|v| *v = 1.0);
                row
            })
            .collect()
    }
}

/// Orthonormal basis `Z` of the null space of `J`.
///
/// Block diagonal: a bundle with `m` weights contributes an `m x (m-1)`
/// Helmert block whose columns are orthonormal and orthogonal to the ones
/// vector. Only those properties are relied on elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpaceBasis {
    /// (first weight row, weight count, first column) per bundle.
    blocks: Vec<(usize, usize, usize)>,
    nrows: usize,
    ncols: usize,
}

impl NullSpaceBasis {
    pub fn new(j: &ConstraintMatrix) -> Self {
        let mut blocks = Vec::with_capacity(j.nrows());
        let mut col = 0;
        for r in 0..j.nrows() {
            let range = j.row_range(r);
            let m = range.len();
            blocks.push((range.start, m, col));
            col += m.saturating_sub(1);
        }
        Self {
            blocks,
            nrows: j.ncols(),
            ncols: col,
        }
    }

    /// Rows of `Z` (weight count).
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    /// Columns of `Z` (free weight directions).
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// (first weight row, weight count, first column) of bundle `b`.
    pub fn block(&self, b: usize) -> (usize, usize, usize) {
        self.blocks[b]
    }

    /// Entry `(row, col)` of the `m x (m-1)` Helmert block.
    #[inline]
    pub fn helmert(row: usize, col: usize) -> f64 {
        let n = (col + 1) as f64;
        let scale = 1.0 / (n * (n + 1.0)).sqrt();
        match row.cmp(&(col + 1)) {
            std::cmp::Ordering::Less => scale,
            std::cmp::Ordering::Equal => -n * scale,
            std::cmp::Ordering::Greater => 0.0,
        }
    }

    /// `Z a`
    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        assert_eq!(a.len(), self.ncols);
        let mut out = vec![0.0; self.nrows];
        for &(row0, m, col0) in &self.blocks {
            for c in 0..m.saturating_sub(1) {
                let coeff = a[col0 + c];
                if coeff == 0.0 {
                    continue;
                }
                for r in 0..=c + 1 {
                    out[row0 + r] += Self::helmert(r, c) * coeff;
                }
            }
        }
        out
    }

    /// `Z^T v`
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for &(row0, m, col0) in &self.blocks {
            for c in 0..m.saturating_sub(1) {
                out[col0 + c] = (0..=c + 1).map(|r| Self::helmert(r, c) * v[row0 + r]).sum();
            }
        }
        out
    }

    /// `Z Z^T v`, the orthogonal projection onto the null space of `J`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.apply(&self.apply_transpose(v))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut z = vec![vec![0.0; self.ncols]; self.nrows];
        for &(row0, m, col0) in &self.blocks {
            for c in 0..m.saturating_sub(1) {
                for r in 0..m {
                    z[row0 + r][col0 + c] = Self::helmert(r, c);
                }
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::four_tile_graph;

    #[test]
    fn four_tile_constraint_matrix() {
        let j = four_tile_graph().constraint_matrix();
        let expected: Vec<Vec<f64>> = [
            [1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0],
            [0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0],
            [0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0],
            [0, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0],
            [0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1],
        ]
        .iter()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect();
        assert_eq!(j.to_dense(), expected);
    }

    #[test]
    fn single_and_double_bundle_matrices() {
        assert_eq!(
            ConstraintMatrix::from_bundle_sizes([2]).to_dense(),
            vec![vec![1.0, 1.0]]
        );
        assert_eq!(
            ConstraintMatrix::from_bundle_sizes([2, 2]).to_dense(),
            vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]]
        );
    }

    #[test]
    fn size_two_block_is_difference_vector() {
        let z = NullSpaceBasis::new(&ConstraintMatrix::from_bundle_sizes([2])).to_dense();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((z[0][0].abs() - s).abs() < 1e-15);
        assert!((z[0][0] + z[1][0]).abs() < 1e-15);
    }

    #[test]
    fn four_tile_basis_shape() {
        let z = four_tile_graph().nullspace_basis();
        assert_eq!((z.nrows(), z.ncols()), (11, 6));
    }

    #[test]
    fn apply_agrees_with_dense() {
        let zb = NullSpaceBasis::new(&ConstraintMatrix::from_bundle_sizes([3, 2, 4]));
        let z = zb.to_dense();
        let a: Vec<f64> = (0..zb.ncols()).map(|k| (k as f64 * 0.7).sin()).collect();
        let v: Vec<f64> = (0..zb.nrows()).map(|k| (k as f64 * 1.3).cos()).collect();
        let za = zb.apply(&a);
        let ztv = zb.apply_transpose(&v);
        for r in 0..zb.nrows() {
            let expect: f64 = (0..zb.ncols()).map(|c| z[r][c] * a[c]).sum();
            assert!((za[r] - expect).abs() < 1e-14);
        }
        for c in 0..zb.ncols() {
            let expect: f64 = (0..zb.nrows()).map(|r| z[r][c] * v[r]).sum();
            assert!((ztv[c] - expect).abs() < 1e-14);
        }
    }
}
