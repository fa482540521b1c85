//! Symmetric sparse matrices on a shared CSR pattern and a sparse Cholesky
//! solver backed by faer.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::LltRegularization;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, LltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side};

use crate::error::{Error, Result};
use crate::mesh::{DofMap, TriMesh, FIELDS};

/// Structurally symmetric CSR pattern with sorted column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Pattern {
    /// Couples every pair of unknowns whose vertices share a triangle.
    pub fn from_mesh(m: &TriMesh, d: &DofMap) -> Self {
        let nv = m.num_vertices();
        let mut nbrs: Vec<Vec<usize>> = (0..nv).map(|v| vec![v]).collect();
        for t in &m.triangles {
            for &a in t {
                for &b in t {
                    if a != b {
                        nbrs[a].push(b);
                    }
                }
            }
        }
        // rows are laid out in dof order, so visit vertices by base index
        let mut order: Vec<usize> = (0..nv).collect();
        order.sort_by_key(|&v| d.base(v));

        let n = d.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for &v in &order {
            let mut bases: Vec<usize> = nbrs[v].iter().map(|&w| d.base(w)).collect();
            bases.sort_unstable();
            bases.dedup();
            for _ in 0..FIELDS {
                for &b in &bases {
                    col_idx.extend(b..b + FIELDS);
                }
                row_ptr.push(col_idx.len());
            }
        }
        Pattern { n, row_ptr, col_idx }
    }

    /// Pattern from explicit sorted rows; used by tests and small problems.
    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for (r, cols) in rows.iter().enumerate() {
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n) {
                return Err(Error::InvalidParameter(format!("row {r} is not sorted or out of range")));
            }
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let p = Pattern { n, row_ptr, col_idx };
        for r in 0..n {
            for &c in p.row(r) {
                if p.find(c, r).is_none() {
                    return Err(Error::InvalidParameter(format!("pattern is not symmetric at ({r}, {c})")));
                }
            }
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn row_range(&self, r: usize) -> std::ops::Range<usize> {
        self.row_ptr[r]..self.row_ptr[r + 1]
    }

    /// Storage position of entry `(r, c)`.
    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        self.row(r).binary_search(&c).ok().map(|k| self.row_ptr[r] + k)
    }
}

/// Symmetric matrix stored with its full pattern.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    pattern: Arc<Pattern>,
    pub values: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let nnz = pattern.nnz();
        SymMatrix {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pattern.find(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` at `(r, c)`; panics if the entry is outside the pattern.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self
            .pattern
            .find(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) outside the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n());
        assert_eq!(y.len(), self.n());
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.pattern.row_range(r) {
                acc += self.values[k] * x[self.pattern.col_idx[k]];
            }
            *yr = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.matvec(x, &mut y);
        y
    }

    /// `self += c·other`; both must share a pattern.
    pub fn axpy(&mut self, c: f64, other: &SymMatrix) {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |M − Mᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n() {
            for k in self.pattern.row_range(r) {
                let c = self.pattern.col_idx[k];
                if c > r {
                    worst = worst.max((self.values[k] - self.get(c, r)).abs());
                }
            }
        }
        worst
    }

    /// Clears the rows and columns of the given unknowns and puts one on
    /// their diagonal.
    pub fn eliminate(&mut self, constrained: impl Fn(usize) -> bool) {
        for r in 0..self.n() {
            let row_fixed = constrained(r);
            for k in self.pattern.row_range(r) {
                let c = self.pattern.col_idx[k];
                if row_fixed || constrained(c) {
                    self.values[k] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for r in 0..n {
            for k in self.pattern.row_range(r) {
                m[(r, self.pattern.col_idx[k])] = self.values[k];
            }
        }
        m
    }
}

/// Sparse `LLᵀ` solver. The fill-reducing ordering and symbolic analysis are
/// computed once per pattern and reused across numeric factorizations.
pub struct Cholesky {
    pattern: Arc<Pattern>,
    lower_col_ptr: Vec<usize>,
    lower_row_idx: Vec<usize>,
    /// Position in the full CSR storage of each lower-triangle entry.
    lower_src: Vec<usize>,
    lower_values: Vec<f64>,
    symbolic: SymbolicCholesky<usize>,
    factor: Vec<f64>,
    factored: bool,
    buffer: MemBuffer,
}

impl std::fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cholesky")
            .field("n", &self.pattern.n)
            .field("factor_len", &self.factor.len())
            .field("factored", &self.factored)
            .finish()
    }
}

impl Cholesky {
    pub fn new(pattern: Arc<Pattern>) -> Result<Self> {
        let n = pattern.n;
        // Column j of the lower triangle holds rows i ≥ j; by symmetry this is
        // row j of the CSR pattern restricted to columns ≥ j.
        let mut lower_col_ptr = Vec::with_capacity(n + 1);
        let mut lower_row_idx = Vec::new();
        let mut lower_src = Vec::new();
        lower_col_ptr.push(0);
        for j in 0..n {
            for k in pattern.row_range(j) {
                let i = pattern.col_idx[k];
                if i >= j {
                    lower_row_idx.push(i);
                    lower_src.push(k);
                }
            }
            lower_col_ptr.push(lower_row_idx.len());
        }
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &lower_col_ptr, None, &lower_row_idx);
        let symbolic =
            factorize_symbolic_cholesky(sym, Side::Lower, SymmetricOrdering::Amd, Default::default())
                .map_err(|e| Error::LinearBreakdown(format!("symbolic analysis failed: {e:?}")))?;
        let req = symbolic
            .factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default())
            .or(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        let factor = vec![0.0; symbolic.len_val()];
        let lower_values = vec![0.0; lower_row_idx.len()];
        Ok(Cholesky {
            pattern,
            lower_col_ptr,
            lower_row_idx,
            lower_src,
            lower_values,
            symbolic,
            factor,
            factored: false,
            buffer: MemBuffer::new(req),
        })
    }

    pub fn factorize(&mut self, a: &SymMatrix) -> Result<()> {
        if !(Arc::ptr_eq(&self.pattern, a.pattern()) || *self.pattern == **a.pattern()) {
            return Err(Error::InvalidParameter("matrix pattern differs from the analysed one".into()));
        }
        for (dst, &src) in self.lower_values.iter_mut().zip(&self.lower_src) {
            *dst = a.values[src];
        }
        let n = self.pattern.n;
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &self.lower_col_ptr, None, &self.lower_row_idx);
        let mat = SparseColMatRef::new(sym, &self.lower_values);
        let stack = MemStack::new(&mut self.buffer);
        self.factored = false;
        self.symbolic
            .factorize_numeric_llt(
                &mut self.factor,
                mat,
                Side::Lower,
                LltRegularization::default(),
                Par::Seq,
                stack,
                Default::default(),
            )
            .map_err(|e| Error::LinearBreakdown(format!("{e:?}")))?;
        self.factored = true;
        Ok(())
    }

    /// Overwrites `rhs` with the solution of `A x = rhs`.
    pub fn solve_in_place(&mut self, rhs: &mut [f64]) -> Result<()> {
        if !self.factored {
            return Err(Error::LinearBreakdown("solve requested before a successful factorization".into()));
        }
        if rhs.len() != self.pattern.n {
            return Err(Error::DimensionMismatch {
                expected: self.pattern.n,
                actual: rhs.len(),
            });
        }
        let llt = LltRef::<'_, usize, f64>::new(&self.symbolic, &self.factor);
        let n = rhs.len();
        let col = MatMut::from_column_major_slice_mut(rhs, n, 1);
        let stack = MemStack::new(&mut self.buffer);
        llt.solve_in_place_with_conj(Conj::No, col, Par::Seq, stack);
        Ok(())
    }
}
