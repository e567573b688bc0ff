//! Thin QR factors that grow one column at a time (Gram–Schmidt with one
//! reorthogonalization pass).

use nalgebra::{DMatrix, DVector};

use super::LinalgError;

/// Pivot threshold relative to the incoming column norm.
pub const RANK_TOL: f64 = 1e-13;

/// `M = Q R` with orthonormal `Q` (n×k) and upper-triangular `R` (k×k).
#[derive(Debug, Clone)]
pub struct QrFactors {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl QrFactors {
    pub fn empty(nrows: usize) -> Self {
        Self {
            q: DMatrix::zeros(nrows, 0),
            r: DMatrix::zeros(0, 0),
        }
    }

    pub fn from_columns(m: &DMatrix<f64>) -> Result<Self, LinalgError> {
        let mut f = Self::empty(m.nrows());
        f.append(m)?;
        Ok(f)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn ncols(&self) -> usize {
        self.q.ncols()
    }

    /// Appends columns. On a dependent column the factors are left untouched
    /// and [`LinalgError::RankDeficient`] names the offending column index.
    pub fn append(&mut self, cols: &DMatrix<f64>) -> Result<(), LinalgError> {
        if cols.nrows() != self.q.nrows() {
            return Err(LinalgError::DimensionMismatch(format!(
                "appending {} rows to QR factors of {} rows",
                cols.nrows(),
                self.q.nrows()
            )));
        }
        let k0 = self.ncols();
        let add = cols.ncols();
        let n = self.q.nrows();
        let mut q = self.q.clone().resize_horizontally(k0 + add, 0.0);
        let mut r = self.r.clone().resize(k0 + add, k0 + add, 0.0);
        for j in 0..add {
            let k = k0 + j;
            let x: DVector<f64> = cols.column(j).into_owned();
            let xnorm = x.norm();
            let basis = q.columns(0, k);
            let h1 = basis.tr_mul(&x);
            let mut w = &x - &basis * &h1;
            let h2 = basis.tr_mul(&w);
            w -= &basis * &h2;
            let rho = w.norm();
            if xnorm == 0.0 || rho <= RANK_TOL * xnorm {
                return Err(LinalgError::RankDeficient { column: k });
            }
            for i in 0..k {
                r[(i, k)] = h1[i] + h2[i];
            }
            r[(k, k)] = rho;
            q.set_column(k, &(w / rho));
        }
        debug_assert_eq!(q.nrows(), n);
        self.q = q;
        self.r = r;
        Ok(())
    }
}

/// Returns the factors of `[M, new_cols]` given the factors of `M`.
pub fn qr_append(factors: &QrFactors, new_cols: &DMatrix<f64>) -> Result<QrFactors, LinalgError> {
    let mut out = factors.clone();
    out.append(new_cols)?;
    Ok(out)
}
