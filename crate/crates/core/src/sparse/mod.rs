//! Compressed sparse row matrices, block composition and linear solvers.

mod direct;
mod krylov;

use std::sync::Arc;

pub use direct::{solve_direct, DirectSolver};
pub use krylov::{solve_bicgstab, solve_cg, IterativeResult};

use crate::error::{Error, Result};

/// Row pointers and sorted, unique column indices shared between matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl CsrPattern {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Position of `(row, col)` in the value array, if structurally present.
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi].binary_search(&col).ok().map(|k| lo + k)
    }

    /// Builds a pattern from unsorted, possibly repeated coordinates.
    pub fn from_coords(n_rows: usize, n_cols: usize, coords: &[(usize, usize)]) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
        for &(r, c) in coords {
            rows[r].push(c);
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(&cols);
            row_ptr.push(col_idx.len());
        }
        CsrPattern {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(pattern: Arc<CsrPattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::Structural(format!(
                "{} values for a pattern with {} entries",
                values.len(),
                pattern.nnz()
            )));
        }
        Ok(SparseMatrix { pattern, values })
    }

    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let nnz = pattern.nnz();
        SparseMatrix {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    /// COO triplets compressed to CSR; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let coords: Vec<_> = triplets.iter().map(|&(r, c, _)| (r, c)).collect();
        let pattern = Arc::new(CsrPattern::from_coords(n_rows, n_cols, &coords));
        let mut m = SparseMatrix::zeros(pattern);
        for &(r, c, v) in triplets {
            let k = m.pattern.find(r, c).expect("coordinate present in pattern");
            m.values[k] += v;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        SparseMatrix::from_triplets(n, n, &triplets)
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.find(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.pattern.row_ptr[row];
        let hi = self.pattern.row_ptr[row + 1];
        self.pattern.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows().min(self.n_cols())).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols(), "matvec: input length");
        assert_eq!(y.len(), self.n_rows(), "matvec: output length");
        let p = &*self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                acc += self.values[k] * x[p.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        dot(x, &ay)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        SparseMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `alpha * self + beta * other`; the result pattern is the union.
    pub fn lincomb(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<Self> {
        if self.n_rows() != other.n_rows() || self.n_cols() != other.n_cols() {
            return Err(Error::Structural(format!(
                "cannot add {}x{} and {}x{} matrices",
                self.n_rows(),
                self.n_cols(),
                other.n_rows(),
                other.n_cols()
            )));
        }
        if Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern {
            let values = self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect();
            return Ok(SparseMatrix {
                pattern: self.pattern.clone(),
                values,
            });
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n_rows() {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, alpha * v)));
            triplets.extend(other.row(i).map(|(j, v)| (i, j, beta * v)));
        }
        Ok(SparseMatrix::from_triplets(self.n_rows(), self.n_cols(), &triplets))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols()]; self.n_rows()];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows() {
            triplets.extend(self.row(i).map(|(j, v)| (j, i, v)));
        }
        SparseMatrix::from_triplets(self.n_cols(), self.n_rows(), &triplets)
    }

    /// `‖Ax - b‖ / ‖b‖`, or `‖Ax‖` when `b = 0`.
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matvec(x);
        let r: f64 = ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nb = norm(b);
        if nb > 0.0 {
            r / nb
        } else {
            r
        }
    }
}

/// A grid of optional `(matrix, multiplier)` blocks.
#[derive(Debug, Clone)]
pub struct BlockSpec<'a> {
    pub block_rows: usize,
    pub block_cols: usize,
    blocks: Vec<Option<(&'a SparseMatrix, f64)>>,
}

impl<'a> BlockSpec<'a> {
    pub fn new(block_rows: usize, block_cols: usize) -> Self {
        BlockSpec {
            block_rows,
            block_cols,
            blocks: vec![None; block_rows * block_cols],
        }
    }

    pub fn set(mut self, bi: usize, bj: usize, m: &'a SparseMatrix, scale: f64) -> Self {
        self.blocks[bi * self.block_cols + bj] = Some((m, scale));
        self
    }

    pub fn get(&self, bi: usize, bj: usize) -> Option<(&'a SparseMatrix, f64)> {
        self.blocks[bi * self.block_cols + bj]
    }

    /// Row count of each block row and column count of each block column.
    fn dimensions(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut rows = vec![None; self.block_rows];
        let mut cols = vec![None; self.block_cols];
        for bi in 0..self.block_rows {
            for bj in 0..self.block_cols {
                if let Some((m, _)) = self.get(bi, bj) {
                    for (slot, n, what) in [
                        (&mut rows[bi], m.n_rows(), "row"),
                        (&mut cols[bj], m.n_cols(), "column"),
                    ] {
                        match *slot {
                            None => *slot = Some(n),
                            Some(prev) if prev != n => {
                                return Err(Error::Structural(format!(
                                    "block ({bi},{bj}) has {n} {what}s, expected {prev}"
                                )))
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| Error::Structural(format!("block row {i} is empty"))))
            .collect::<Result<Vec<_>>>()?;
        let cols = cols
            .into_iter()
            .enumerate()
            .map(|(j, c)| c.ok_or_else(|| Error::Structural(format!("block column {j} is empty"))))
            .collect::<Result<Vec<_>>>()?;
        Ok((rows, cols))
    }
}

/// Assembles a monolithic CSR matrix from a block layout.
///
/// Structural entries of every block are kept even when their scaled value
/// is zero, so repeated compositions of same-pattern blocks share a pattern.
pub fn compose_blocks(spec: &BlockSpec<'_>) -> Result<SparseMatrix> {
    let (rows, cols) = spec.dimensions()?;
    let row_off: Vec<usize> = rows.iter().scan(0, |acc, &n| { let o = *acc; *acc += n; Some(o) }).collect();
    let col_off: Vec<usize> = cols.iter().scan(0, |acc, &n| { let o = *acc; *acc += n; Some(o) }).collect();
    let n_rows: usize = rows.iter().sum();
    let n_cols: usize = cols.iter().sum();

    let mut row_ptr = Vec::with_capacity(n_rows + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for bi in 0..spec.block_rows {
        for local in 0..rows[bi] {
            // blocks in a block row are visited left to right, so columns stay sorted
            for bj in 0..spec.block_cols {
                if let Some((m, s)) = spec.get(bi, bj) {
                    for (j, v) in m.row(local) {
                        col_idx.push(col_off[bj] + j);
                        values.push(s * v);
                    }
                }
            }
            row_ptr.push(col_idx.len());
        }
    }
    let _ = row_off;
    let pattern = Arc::new(CsrPattern {
        n_rows,
        n_cols,
        row_ptr,
        col_idx,
    });
    SparseMatrix::new(pattern, values)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SparseMatrix {
        SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 2.0), (0, 0, 1.0)],
        )
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = small();
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.nnz(), 7);
    }

    #[test]
    fn identity_blocks() {
        let i2 = SparseMatrix::identity(2);
        let spec = BlockSpec::new(2, 2).set(0, 0, &i2, 1.0).set(1, 1, &i2, 1.0);
        let m = compose_blocks(&spec).unwrap();
        assert_eq!(m.to_dense(), SparseMatrix::identity(4).to_dense());
    }

    #[test]
    fn block_diagonal_layout() {
        let a = small();
        let spec = BlockSpec::new(2, 2).set(0, 0, &a, 1.0).set(1, 1, &a, 1.0);
        let m = compose_blocks(&spec).unwrap();
        assert_eq!(m.get(4, 4), a.get(1, 1));
        assert_eq!(m.get(0, 4), 0.0);
    }

    #[test]
    fn mismatched_blocks() {
        let a = small();
        let i2 = SparseMatrix::identity(2);
        let spec = BlockSpec::new(2, 2).set(0, 0, &a, 1.0).set(0, 1, &i2, 1.0);
        assert!(matches!(compose_blocks(&spec), Err(Error::Structural(_))));
        let empty = BlockSpec::new(2, 2).set(0, 0, &a, 1.0);
        assert!(compose_blocks(&empty).is_err());
    }

    #[test]
    fn lincomb_union_pattern() {
        let a = small();
        let d = SparseMatrix::from_triplets(3, 3, &[(0, 2, 5.0)]);
        let c = a.lincomb(2.0, &d, -1.0).unwrap();
        assert_eq!(c.get(0, 2), -5.0);
        assert_eq!(c.get(1, 1), 4.0);
    }

    #[test]
    fn transpose_roundtrip() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.5), (1, 0, -2.0)]);
        let t = m.transpose();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.get(2, 0), 1.5);
        assert_eq!(t.transpose().to_dense(), m.to_dense());
    }
}
