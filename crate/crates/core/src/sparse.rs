//! Compressed-sparse-row Hermitian operators built from weighted Pauli sums.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::pauli::PauliString;

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseMatrix {
    /// Assemble `sum_k coeff_k * P_k` on `n_qubits` qubits. Entries that
    /// cancel exactly are dropped.
    pub fn from_pauli_sum<'a, I>(n_qubits: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (f64, &'a PauliString)>,
    {
        let actions: Vec<_> = terms.into_iter().filter(|(c, _)| *c != 0.0).map(|(c, p)| (c, p.action())).collect();
        let dim = 1usize << n_qubits;
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut row: Vec<(usize, Complex64)> = Vec::with_capacity(actions.len());
        row_ptr.push(0);
        for r in 0..dim {
            row.clear();
            for (coef, a) in &actions {
                // <r|P|c> is nonzero only for c = r ^ x_mask
                let c = r ^ a.x_mask;
                let (_, ph) = a.apply(c);
                row.push((c, ph * *coef));
            }
            row.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = Complex64::new(0.0, 0.0);
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v != Complex64::new(0.0, 0.0) {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Row `r` as `(column, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// max_{ij} |M_ij - conj(M_ji)|.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                let t = self.row(c).find(|e| e.0 == r).map(|e| e.1).unwrap_or_default();
                worst = worst.max((v - t.conj()).norm());
            }
        }
        worst
    }
}
