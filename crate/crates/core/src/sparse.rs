//! Compressed sparse row matrices over non-negative integer counts.
//!
//! All arithmetic is checked: an instance count that does not fit in `u64`
//! surfaces as [`Overflow`] instead of wrapping.

use crate::parallel::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("instance count overflowed 64-bit integer arithmetic")]
pub struct Overflow;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<u64>,
}

impl CsrMatrix {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a 0/1 matrix from coordinate pairs; duplicates collapse to 1.
    pub fn binary_from_pairs(rows: usize, cols: usize, pairs: &[(usize, usize)]) -> Self {
        let mut sorted = pairs.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        for &(r, c) in &sorted {
            assert!(r < rows && c < cols, "entry ({r},{c}) outside {rows}x{cols}");
            indptr[r + 1] += 1;
            indices.push(c);
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let values = vec![1; indices.len()];
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(rows: usize, cols: usize, dense: &[u64]) -> Self {
        assert_eq!(dense.len(), rows * cols);
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..rows {
            for c in 0..cols {
                let v = dense[r * cols + c];
                if v != 0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// `(column, value)` pairs of row `r`, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0,
        }
    }

    /// Iterates all stored `(row, col, value)` triplets in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0; self.nnz()];
        for (r, c, v) in self.triplets() {
            let k = next[c];
            indices[k] = r;
            values[k] = v;
            next[c] += 1;
        }
        CsrMatrix {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<u64> {
        let mut out = vec![0; self.rows * self.cols];
        for (r, c, v) in self.triplets() {
            out[r * self.cols + c] = v;
        }
        out
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 1)
    }

    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix, Overflow> {
        self.matmul_with(other, Execution::default())
    }

    /// Row-by-row sparse product (Gustavson) with checked accumulation.
    pub fn matmul_with(&self, other: &CsrMatrix, exec: Execution) -> Result<CsrMatrix, Overflow> {
        assert_eq!(
            self.cols, other.rows,
            "sparse matmul shape mismatch: {}x{} · {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let width = other.cols;
        let rows = parallel::try_map_indices(exec, self.rows, |r| {
            let mut acc: Vec<u64> = vec![0; width];
            let mut touched: Vec<usize> = Vec::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    let prod = a.checked_mul(b).ok_or(Overflow)?;
                    if acc[c] == 0 {
                        touched.push(c);
                    }
                    acc[c] = acc[c].checked_add(prod).ok_or(Overflow)?;
                }
            }
            touched.sort_unstable();
            Ok::<_, Overflow>(touched.into_iter().map(|c| (c, acc[c])).collect::<Vec<_>>())
        })?;
        Ok(Self::from_rows(self.rows, width, rows))
    }

    pub fn hadamard(&self, other: &CsrMatrix) -> Result<CsrMatrix, Overflow> {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "hadamard shape mismatch"
        );
        let mut rows = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut row = Vec::new();
            let mut b = other.row(r).peekable();
            for (c, va) in self.row(r) {
                while b.peek().is_some_and(|&(cb, _)| cb < c) {
                    b.next();
                }
                if let Some(&(cb, vb)) = b.peek() {
                    if cb == c {
                        row.push((c, va.checked_mul(vb).ok_or(Overflow)?));
                    }
                }
            }
            rows.push(row);
        }
        Ok(Self::from_rows(self.rows, self.cols, rows))
    }

    fn from_rows(rows: usize, cols: usize, data: Vec<Vec<(usize, u64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows + 1);
        let nnz = data.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for row in data {
            for (c, v) in row {
                if v != 0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }
}
