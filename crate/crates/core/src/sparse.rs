//! Compressed-row complex sparse matrices and their products with dense matrices.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square complex matrix in CSR form. Column indices within a row are sorted
/// and explicit zeros are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![Complex64::new(1.0, 0.0); dim])
    }

    pub fn diagonal(values: &[Complex64]) -> Self {
        Self::from_triplets(values.len(), values.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Duplicate entries are summed; entries that sum to exactly zero are dropped.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Self {
        let mut rows: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside a {dim}x{dim} matrix");
            *rows[r].entry(c).or_insert(ZERO) += v;
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != ZERO {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        Self::from_triplets(n, (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| (r, c, m[(r, c)])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn diagonal_values(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v)))
    }

    pub fn conj(&self) -> Self {
        Self { vals: self.vals.iter().map(|v| v.conj()).collect(), ..self.clone() }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (r, c, v * s)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.iter().chain(other.iter()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut triplets = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    triplets.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, triplets)
    }

    /// `self · other − other · self`
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// `self · other + other · self`
    pub fn anticommutator(&self, other: &Self) -> Self {
        self.matmul(other).add(&other.matmul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Exact equality with the conjugate transpose.
    pub fn is_hermitian(&self) -> bool {
        self.iter().all(|(r, c, v)| self.get(c, r) == v.conj())
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Real part as a dense matrix, for operators known to be real.
    pub fn to_dense_real(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v.re;
        }
        m
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn apply_vector(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        let mut y = DVector::zeros(self.dim);
        self.mul_vec(x.as_slice(), y.as_mut_slice());
        y
    }

    /// `out += s · self · x` for a dense `x`.
    pub fn left_mul_acc(&self, s: Complex64, x: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let n = self.dim;
        for j in 0..x.ncols() {
            let xc = &x.as_slice()[j * n..(j + 1) * n];
            let oc = &mut out.as_mut_slice()[j * n..(j + 1) * n];
            for (r, o) in oc.iter_mut().enumerate() {
                let span = self.row_ptr[r]..self.row_ptr[r + 1];
                let acc: Complex64 = self.vals[span.clone()].iter().zip(&self.cols[span]).map(|(v, &c)| v * xc[c]).sum();
                *o += s * acc;
            }
        }
    }

    /// `out += s · x · self`
    pub fn right_mul_acc(&self, s: Complex64, x: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let n = self.dim;
        let m = x.nrows();
        for k in 0..n {
            let xc = &x.as_slice()[k * m..(k + 1) * m];
            for p in self.row_ptr[k]..self.row_ptr[k + 1] {
                let c = self.cols[p];
                let w = s * self.vals[p];
                let oc = &mut out.as_mut_slice()[c * m..(c + 1) * m];
                for (o, xv) in oc.iter_mut().zip(xc) {
                    *o += w * xv;
                }
            }
        }
    }

    /// `out += s · x · self†`
    pub fn right_mul_adjoint_acc(&self, s: Complex64, x: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let n = self.dim;
        let m = x.nrows();
        for c in 0..n {
            let oc_range = c * m..(c + 1) * m;
            for p in self.row_ptr[c]..self.row_ptr[c + 1] {
                let k = self.cols[p];
                let w = s * self.vals[p].conj();
                let (xs, os) = (x.as_slice(), &mut out.as_mut_slice()[oc_range.clone()]);
                for (o, xv) in os.iter_mut().zip(&xs[k * m..(k + 1) * m]) {
                    *o += w * xv;
                }
            }
        }
    }

    /// `self · x`
    pub fn left_mul(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, x.ncols());
        self.left_mul_acc(Complex64::new(1.0, 0.0), x, &mut out);
        out
    }

    /// `x · self`
    pub fn right_mul(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(x.nrows(), self.dim);
        self.right_mul_acc(Complex64::new(1.0, 0.0), x, &mut out);
        out
    }

    /// Writes one-based `row,col,re,im` rows.
    pub fn write_coo<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (r, c, v) in self.iter() {
            writeln!(out, "{},{},{:e},{:e}", r + 1, c + 1, v.re, v.im)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> SparseOperator {
        SparseOperator::from_triplets(3, [(0, 1, c(1.0, 2.0)), (2, 0, c(-3.0, 0.5)), (1, 1, c(0.0, 1.0)), (0, 1, c(1.0, 0.0))])
    }

    #[test]
    fn triplets_are_summed_and_zeros_dropped() {
        let a = sample();
        assert_eq!(a.get(0, 1), c(2.0, 2.0));
        assert_eq!(a.nnz(), 3);
        let z = SparseOperator::from_triplets(2, [(0, 0, c(1.0, 0.0)), (0, 0, c(-1.0, 0.0))]);
        assert_eq!(z.nnz(), 0);
    }

    #[test]
    fn dense_products_match_dense_algebra() {
        let a = sample();
        let ad = a.to_dense();
        let x = DMatrix::from_fn(3, 3, |i, j| c(i as f64 + 0.3 * j as f64, j as f64 - 1.0));
        assert!((a.left_mul(&x) - &ad * &x).norm() < 1e-14);
        assert!((a.right_mul(&x) - &x * &ad).norm() < 1e-14);
        let mut out = DMatrix::zeros(3, 3);
        a.right_mul_adjoint_acc(c(1.0, 0.0), &x, &mut out);
        assert!((out - &x * ad.adjoint()).norm() < 1e-14);
        let b = a.adjoint().add(&SparseOperator::identity(3));
        assert!((a.matmul(&b).to_dense() - &ad * b.to_dense()).norm() < 1e-14);
    }

    #[test]
    fn hermiticity_check() {
        let a = sample();
        assert!(!a.is_hermitian());
        assert!(a.add(&a.adjoint()).is_hermitian());
    }

    #[test]
    fn coo_dump() {
        let a = SparseOperator::from_triplets(2, [(1, 0, c(0.5, -1.0))]);
        let mut buf = Vec::new();
        a.write_coo(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2,1,5e-1,-1e0\n");
    }
}
