//! Compressed-row sparse matrices and shifted sparse LU solves.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Residual level above which a shifted solve is treated as singular.
const SOLVE_CHECK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// entries that sum to exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut k = 0;
        while k < sorted.len() {
            let (i, j, mut v) = sorted[k];
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            k += 1;
            while k < sorted.len() && sorted[k].0 == i && sorted[k].1 == j {
                v += sorted[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &t)
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(col, value)` over row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `A X` for a dense block `X`.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            for i in 0..self.nrows {
                y[(i, c)] = self.row(i).map(|(j, v)| v * xc[j]).sum();
            }
        }
        y
    }

    /// `Aᵀ X` for a dense block `X`.
    pub fn tr_mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.nrows);
        let mut y = DMatrix::zeros(self.ncols, x.ncols());
        for c in 0..x.ncols() {
            for i in 0..self.nrows {
                let xi = x[(i, c)];
                if xi != 0.0 {
                    for (j, v) in self.row(i) {
                        y[(j, c)] += v * xi;
                    }
                }
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            a[(i, j)] = v;
        }
        a
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && *self == self.transpose()
    }

    /// Factorizes `A - σI` once; the factors serve solves with `A - σI` and
    /// with its transpose `Aᵀ - σI`.
    pub fn shifted_lu(&self, sigma: Complex64) -> Result<ShiftedLu<'_>> {
        if self.nrows != self.ncols {
            return Err(Error::InvalidInput(format!(
                "shifted solve needs a square matrix, got {}x{}",
                self.nrows, self.ncols
            )));
        }
        if !sigma.re.is_finite() || !sigma.im.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite shift {sigma}")));
        }
        let n = self.nrows;
        let factors = if sigma.im == 0.0 {
            let mut t: Vec<Triplet<usize, usize, f64>> =
                self.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
            t.extend((0..n).map(|i| Triplet::new(i, i, -sigma.re)));
            let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
                .map_err(|e| Error::InvalidInput(format!("sparse assembly: {e:?}")))?;
            Factors::Real(m.sp_lu().map_err(|_| Error::FrequencyHitsSpectrum)?)
        } else {
            let mut t: Vec<Triplet<usize, usize, c64>> = self
                .triplets()
                .map(|(i, j, v)| Triplet::new(i, j, c64::new(v, 0.0)))
                .collect();
            t.extend((0..n).map(|i| Triplet::new(i, i, -sigma)));
            let m = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &t)
                .map_err(|e| Error::InvalidInput(format!("sparse assembly: {e:?}")))?;
            Factors::Complex(m.sp_lu().map_err(|_| Error::FrequencyHitsSpectrum)?)
        };
        Ok(ShiftedLu {
            a: self,
            sigma,
            factors,
        })
    }
}

enum Factors {
    Real(Lu<usize, f64>),
    Complex(Lu<usize, c64>),
}

/// Sparse LU of `A - σI`.
pub struct ShiftedLu<'a> {
    a: &'a CsrMatrix,
    sigma: Complex64,
    factors: Factors,
}

impl ShiftedLu<'_> {
    pub fn shift(&self) -> Complex64 {
        self.sigma
    }

    /// Solves `(A - σI) X = rhs`.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
        self.solve_impl(rhs, false)
    }

    /// Solves `(Aᵀ - σI) X = rhs`.
    pub fn solve_transpose(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
        self.solve_impl(rhs, true)
    }

    /// Real-shift variant of [`ShiftedLu::solve`]; the imaginary part is zero.
    pub fn solve_real(&self, rhs: &DMatrix<f64>, transpose: bool) -> Result<DMatrix<f64>> {
        Ok(self.solve_impl(rhs, transpose)?.map(|z| z.re))
    }

    fn solve_impl(&self, rhs: &DMatrix<f64>, transpose: bool) -> Result<DMatrix<Complex64>> {
        let n = self.a.nrows();
        if rhs.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "rhs has {} rows, operator has {n}",
                rhs.nrows()
            )));
        }
        let k = rhs.ncols();
        let x = match &self.factors {
            Factors::Real(lu) => {
                let mut m = Mat::<f64>::from_fn(n, k, |i, j| rhs[(i, j)]);
                if transpose {
                    lu.solve_transpose_in_place(m.as_mut());
                } else {
                    lu.solve_in_place(m.as_mut());
                }
                DMatrix::from_fn(n, k, |i, j| Complex64::new(m[(i, j)], 0.0))
            }
            Factors::Complex(lu) => {
                let mut m = Mat::<c64>::from_fn(n, k, |i, j| c64::new(rhs[(i, j)], 0.0));
                if transpose {
                    lu.solve_transpose_in_place(m.as_mut());
                } else {
                    lu.solve_in_place(m.as_mut());
                }
                DMatrix::from_fn(n, k, |i, j| m[(i, j)])
            }
        };
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::FrequencyHitsSpectrum);
        }
        let res = self.residual(&x, rhs, transpose);
        if res > SOLVE_CHECK * rhs.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::FrequencyHitsSpectrum);
        }
        Ok(x)
    }

    fn residual(&self, x: &DMatrix<Complex64>, rhs: &DMatrix<f64>, transpose: bool) -> f64 {
        let re = x.map(|z| z.re);
        let im = x.map(|z| z.im);
        let (are, aim) = if transpose {
            (self.a.tr_mul_dense(&re), self.a.tr_mul_dense(&im))
        } else {
            (self.a.mul_dense(&re), self.a.mul_dense(&im))
        };
        let s = self.sigma;
        let mut acc = 0.0;
        for idx in 0..x.len() {
            // (A - σI) x with σ = s.re + i s.im
            let r_re = are[idx] - (s.re * re[idx] - s.im * im[idx]) - rhs[idx];
            let r_im = aim[idx] - (s.re * im[idx] + s.im * re[idx]);
            acc += r_re * r_re + r_im * r_im;
        }
        acc.sqrt()
    }
}
