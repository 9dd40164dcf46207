use faer::dyn_stack::{MemBuffer, MemStack};
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat, Par, Side};

use super::csr::CsrMatrix;
use crate::error::{Error, Result};

/// Fill-reducing ordering for the factorization.
#[derive(Clone, Debug, Default)]
pub enum Ordering {
    /// Approximate minimum degree.
    #[default]
    Amd,
    /// Explicit elimination order: `perm[k]` is the k-th eliminated unknown.
    Custom(Vec<usize>),
}

/// Sparse `L L^T` factorization of a symmetric positive definite matrix.
/// The symbolic analysis is kept so that matrices with the same pattern can be
/// refactored cheaply.
pub struct Cholesky {
    n: usize,
    symbolic: SymbolicCholesky<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// For every stored CSR entry, its slot in the lower-triangular values.
    lower_slot: Vec<usize>,
    lower_vals: Vec<f64>,
    factor: Vec<f64>,
    factored: bool,
}

impl Cholesky {
    /// Symbolic analysis of the pattern of a structurally symmetric matrix.
    pub fn analyze(a: &CsrMatrix, ordering: &Ordering) -> Result<Self> {
        let n = a.n_rows();
        if a.n_cols() != n {
            return Err(Error::Dimension { expected: n, got: a.n_cols() });
        }
        // The upper triangle of row i equals column i of the lower triangle.
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        let mut lower_slot = vec![usize::MAX; a.nnz()];
        for i in 0..n {
            for k in a.row_ptr()[i]..a.row_ptr()[i + 1] {
                let j = a.cols()[k] as usize;
                if j >= i {
                    lower_slot[k] = row_idx.len();
                    row_idx.push(j);
                }
            }
            col_ptr.push(row_idx.len());
        }
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let (fwd, inv);
        let ord = match ordering {
            Ordering::Amd => SymmetricOrdering::Amd,
            Ordering::Custom(p) => {
                if p.len() != n {
                    return Err(Error::Dimension { expected: n, got: p.len() });
                }
                let mut iv = vec![usize::MAX; n];
                for (k, &v) in p.iter().enumerate() {
                    if v >= n || iv[v] != usize::MAX {
                        return Err(Error::Solver("ordering is not a permutation".into()));
                    }
                    iv[v] = k;
                }
                fwd = p.clone();
                inv = iv;
                SymmetricOrdering::Custom(PermRef::new_checked(&fwd, &inv, n))
            }
        };
        let symbolic = factorize_symbolic_cholesky(sym, Side::Lower, ord, Default::default())
            .map_err(|e| Error::Solver(format!("symbolic factorization failed: {e:?}")))?;
        let lower_vals = vec![0.0; row_idx.len()];
        Ok(Self { n, symbolic, col_ptr, row_idx, lower_slot, lower_vals, factor: Vec::new(), factored: false })
    }

    /// Number of stored factor entries.
    pub fn factor_nnz(&self) -> usize {
        self.symbolic.len_val()
    }

    /// Numeric factorization of a matrix with the analyzed pattern.
    pub fn factor(&mut self, a: &CsrMatrix) -> Result<()> {
        if a.n_rows() != self.n || a.nnz() != self.lower_slot.len() {
            return Err(Error::Dimension { expected: self.lower_slot.len(), got: a.nnz() });
        }
        for (k, &slot) in self.lower_slot.iter().enumerate() {
            if slot != usize::MAX {
                self.lower_vals[slot] = a.vals()[k];
            }
        }
        if self.factor.len() != self.symbolic.len_val() {
            self.factor = vec![0.0; self.symbolic.len_val()];
        }
        let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx);
        let mat = SparseColMatRef::new(sym, &self.lower_vals);
        let mut mem = MemBuffer::new(self.symbolic.factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default()));
        self.factored = false;
        self.symbolic
            .factorize_numeric_llt(
                &mut self.factor,
                mat,
                Side::Lower,
                Default::default(),
                Par::Seq,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|_| Error::NotSpd)?;
        self.factored = true;
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if !self.factored {
            return Err(Error::Solver("solve called before a successful factorization".into()));
        }
        if b.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: b.len() });
        }
        let llt = LltRef::<'_, usize, f64>::new(&self.symbolic, &self.factor);
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        llt.solve_in_place_with_conj(Conj::No, rhs.as_mut(), Par::Seq, MemStack::new(&mut mem));
        Ok((0..self.n).map(|i| rhs[(i, 0)]).collect())
    }
}

/// One-shot factor-and-solve with the default ordering.
pub fn cholesky_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let mut c = Cholesky::analyze(a, &Ordering::Amd)?;
    c.factor(a)?;
    c.solve(b)
}

/// Nested-dissection order for unknowns located on an integer lattice.
/// Separators are lattice lines whose coordinate is a multiple of `stride`,
/// which must be chosen so that no element couples unknowns on both sides of
/// such a line. Unknowns sharing a position are kept together.
pub fn nested_dissection(coords: &[[u32; 2]], stride: u32) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..coords.len()).collect();
    let mut out = Vec::with_capacity(coords.len());
    dissect(coords, stride.max(1), &mut idx, &mut out);
    out
}

fn dissect(coords: &[[u32; 2]], stride: u32, idx: &mut [usize], out: &mut Vec<usize>) {
    if idx.len() <= 64 {
        idx.sort_unstable_by_key(|&i| (coords[i], i));
        out.extend_from_slice(idx);
        return;
    }
    let (mut lo, mut hi) = ([u32::MAX; 2], [0u32; 2]);
    for &i in idx.iter() {
        for d in 0..2 {
            lo[d] = lo[d].min(coords[i][d]);
            hi[d] = hi[d].max(coords[i][d]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    let mid = lo[axis] + (hi[axis] - lo[axis]) / 2;
    let cut = (mid / stride) * stride;
    let cut = if cut <= lo[axis] { cut + stride } else { cut };
    if cut >= hi[axis] {
        idx.sort_unstable_by_key(|&i| (coords[i], i));
        out.extend_from_slice(idx);
        return;
    }
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut sep = Vec::new();
    for &i in idx.iter() {
        let c = coords[i][axis];
        if c < cut {
            left.push(i);
        } else if c > cut {
            right.push(i);
        } else {
            sep.push(i);
        }
    }
    dissect(coords, stride, &mut left, out);
    dissect(coords, stride, &mut right, out);
    sep.sort_unstable_by_key(|&i| (coords[i], i));
    out.extend_from_slice(&sep);
}
