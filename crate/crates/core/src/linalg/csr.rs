use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from its sparsity pattern with all values zero.
    /// `rows[i]` lists the columns of row `i` (any order, duplicates allowed).
    pub fn from_pattern(n_cols: usize, rows: Vec<Vec<u32>>) -> Self {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend_from_slice(&r);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self { n_rows, n_cols, row_ptr, cols, vals }
    }

    /// Sums duplicate entries.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_rows];
        for &(i, j, _) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::Dimension { expected: n_rows.max(n_cols), got: i.max(j) });
            }
            rows[i].push(j as u32);
        }
        let mut m = Self::from_pattern(n_cols, rows);
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        Ok(m)
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n_cols = a.first().map_or(0, |r| r.len());
        let mut trip = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.len(), n_cols, &trip).expect("in range")
    }

    pub fn identity(n: usize) -> Self {
        let trip: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &trip).expect("in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn cols(&self) -> &[u32] {
        &self.cols
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    pub fn vals_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    /// Storage index of entry `(i, j)`, if it is in the pattern.
    #[inline]
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[s..e].binary_search(&(j as u32)).ok().map(|k| s + k)
    }

    /// Adds `v` to entry `(i, j)`; panics if outside the pattern.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index_of(i, j).expect("entry outside sparsity pattern");
        self.vals[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.index_of(i, j).map_or(0.0, |k| self.vals[k])
    }

    pub fn fill_zero(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j as usize]).sum();
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, i)).collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows).map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let max = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                let b = self.get(j as usize, i);
                worst = worst.max((a - b).abs());
            }
        }
        worst / max
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        self.n_rows == self.n_cols
            && (0..self.n_rows).all(|i| self.row(i).0.iter().all(|&j| self.index_of(j as usize, i).is_some()))
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn write_matrix_market(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for i in 0..self.n_rows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, a)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (0, 1, 1.0)]).unwrap();
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.matvec(&[1.0, 2.0]), vec![5.0, 1.0]);
        assert!(m.is_structurally_symmetric());
        assert_eq!(m.asymmetry(), 0.0);
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn matrix_market() {
        let m = CsrMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let mut out = Vec::new();
        m.write_matrix_market(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("%%MatrixMarket"));
        assert_eq!(s.lines().count(), 6);
    }
}
