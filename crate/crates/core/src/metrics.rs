//! ARE residual, gain and H2 error metrics plus per-iteration history.

use std::io::Write;

use nalgebra::DMatrix;

use crate::dense::{gain_weight, real_schur, solve_lyapunov, sylvester_with_schur, SchurForm};
use crate::error::{Error, Result};
use crate::problems::StateSpaceSystem;
use crate::reduction::ReducedModel;
use crate::sparse::CsrMatrix;

/// `‖R(W P_r Wᵀ)‖_F / ‖C‖_F²`, assembled through n×r products only.
pub fn relative_residual(sys: &StateSpaceSystem, w: &DMatrix<f64>, p_r: &DMatrix<f64>) -> Result<f64> {
    let (n, k) = (sys.n(), w.ncols());
    if w.nrows() != n || p_r.shape() != (k, k) {
        return Err(Error::InvalidInput(format!(
            "residual: W is {}x{}, P_r is {}x{}, n = {n}",
            w.nrows(),
            w.ncols(),
            p_r.nrows(),
            p_r.ncols()
        )));
    }
    let scale = sys.c.norm_squared();
    if scale == 0.0 {
        return Err(Error::InvalidInput("C is zero; relative residual undefined".into()));
    }
    let p = sys.p();
    let b_r = w.transpose() * &sys.b;
    let g_r = gain_weight(&b_r, &sys.r_weight)?;

    // R = U M Uᵀ with U = [AᵀW, W, Cᵀ].
    let mut u = DMatrix::zeros(n, 2 * k + p);
    u.columns_mut(0, k).copy_from(&sys.a.tr_mul_dense(w));
    u.columns_mut(k, k).copy_from(w);
    u.columns_mut(2 * k, p).copy_from(&sys.c.transpose());
    let mut m = DMatrix::zeros(2 * k + p, 2 * k + p);
    m.view_mut((0, k), (k, k)).copy_from(p_r);
    m.view_mut((k, 0), (k, k)).copy_from(p_r);
    m.view_mut((k, k), (k, k)).copy_from(&-(p_r * g_r * p_r));
    m.view_mut((2 * k, 2 * k), (p, p)).fill_with_identity();
    Ok(core_norm(u, &m) / scale)
}

/// `‖U M Uᵀ‖_F` via a thin QR of `U`.
pub(crate) fn core_norm(u: DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let (rows, cols) = u.shape();
    if rows >= cols {
        let r = u.qr().r();
        (&r * m * r.transpose()).norm()
    } else {
        (&u * m * u.transpose()).norm()
    }
}

/// Full-state gain `K̃ = R⁻¹ B_rᵀ P_r Wᵀ` induced by the surrogate.
pub fn lift_gain(red: &ReducedModel, p_r: &DMatrix<f64>, r_weight: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = r_weight
        .clone()
        .cholesky()
        .ok_or(crate::dense::LinalgError::NotPositiveDefinite)?;
    Ok(chol.solve(&(red.b_r.transpose() * p_r)) * red.w.transpose())
}

/// Full-order gain `K = R⁻¹BᵀP`.
pub fn full_gain(sys: &StateSpaceSystem, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = sys
        .r_weight
        .clone()
        .cholesky()
        .ok_or(crate::dense::LinalgError::NotPositiveDefinite)?;
    Ok(chol.solve(&(sys.b.transpose() * p)))
}

pub fn gain_error(k: &DMatrix<f64>, k_ref: &DMatrix<f64>) -> Result<f64> {
    if k.shape() != k_ref.shape() {
        return Err(Error::InvalidInput(format!(
            "gain shapes differ: {:?} vs {:?}",
            k.shape(),
            k_ref.shape()
        )));
    }
    let nrm = k_ref.norm();
    if nrm == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((k - k_ref).norm() / nrm)
}

/// `‖G‖_{H2}` from `trace(C X Cᵀ)`, `AX + XAᵀ + BBᵀ = 0`. Dense.
pub fn h2_norm(sys: &StateSpaceSystem) -> Result<f64> {
    Ok(H2Reference::new(sys)?.norm())
}

/// H2 data of the full model, computed once and reused across reduced models.
#[derive(Debug, Clone)]
pub struct H2Reference {
    schur: SchurForm,
    a: CsrMatrix,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    norm_sq: f64,
}

impl H2Reference {
    pub fn new(sys: &StateSpaceSystem) -> Result<Self> {
        let a = sys.dense_a();
        let schur = real_schur(&a)?;
        if schur.spectral_abscissa() >= 0.0 {
            return Err(Error::Unstable);
        }
        let x = crate::dense::lyapunov_with_schur(&schur, &(&sys.b * sys.b.transpose()))?;
        let norm_sq = (&sys.c * &x * sys.c.transpose()).trace().max(0.0);
        Ok(Self {
            schur,
            a: sys.a.clone(),
            b: sys.b.clone(),
            c: sys.c.clone(),
            norm_sq,
        })
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    /// `‖G − G_r‖_{H2} / ‖G‖_{H2}`; fails with [`Error::Unstable`] when `A_r` is not stable.
    pub fn relative_error(&self, red: &ReducedModel) -> Result<f64> {
        if self.norm_sq == 0.0 {
            return Err(Error::ZeroReference);
        }
        if red.r() == 0 {
            return Ok(1.0);
        }
        let sr = real_schur(&red.a_r)?;
        if sr.spectral_abscissa() >= 0.0 {
            return Err(Error::Unstable);
        }
        let x22 = crate::dense::lyapunov_with_schur(&sr, &(&red.b_r * red.b_r.transpose()))?;
        let err_sq = if self.is_state_projection(red) {
            self.error_in_projected_coordinates(red, &sr, &x22)?
        } else {
            let x12 = sylvester_with_schur(&self.schur, &sr, &(&self.b * red.b_r.transpose()))?;
            let cross = (&self.c * x12 * red.c_r.transpose()).trace();
            let reduced = (&red.c_r * &x22 * red.c_r.transpose()).trace();
            (self.norm_sq - 2.0 * cross + reduced).max(0.0)
        };
        Ok((err_sq / self.norm_sq).sqrt())
    }

    fn is_state_projection(&self, red: &ReducedModel) -> bool {
        red.v.shape() == (self.b.nrows(), red.r())
            && (&red.c_r - &self.c * &red.v).norm() <= 1e-12 * self.c.norm() * red.v.norm()
    }

    /// With `C_r = C V` and `e = x − V x_r` the error system is block upper
    /// triangular with output `[C, 0]`, so `‖G − G_r‖²` is the PSD form
    /// `trace(C X_ee Cᵀ)` and small errors are resolved without cancellation.
    fn error_in_projected_coordinates(
        &self,
        red: &ReducedModel,
        sr: &SchurForm,
        x22: &DMatrix<f64>,
    ) -> Result<f64> {
        let f = self.a.mul_dense(&red.v) - &red.v * &red.a_r;
        let b_e = &self.b - &red.v * &red.b_r;
        let x12 = sylvester_with_schur(&self.schur, sr, &(&f * x22 + &b_e * red.b_r.transpose()))?;
        let fx = &f * x12.transpose();
        let q = &fx + fx.transpose() + &b_e * b_e.transpose();
        let x11 = crate::dense::lyapunov_with_schur(&self.schur, &q)?;
        Ok((&self.c * x11 * self.c.transpose()).trace().max(0.0))
    }
}

/// Relative H2 error of a reduced model; builds the reference on every call.
pub fn h2_error(sys: &StateSpaceSystem, red: &ReducedModel) -> Result<f64> {
    H2Reference::new(sys)?.relative_error(red)
}

/// H2 norm of a small dense system; used for reduced models.
pub fn h2_norm_dense(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<f64> {
    if real_schur(a)?.spectral_abscissa() >= 0.0 {
        return Err(Error::Unstable);
    }
    let x = solve_lyapunov(a, &(b * b.transpose()))?;
    Ok((c * x * c.transpose()).trace().max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRecord {
    /// Reduced dimension (number of basis columns).
    pub r: usize,
    pub residual: f64,
    pub gain_error: Option<f64>,
    pub h2_error: Option<f64>,
    /// Seconds since the start of the method, excluding metric evaluation.
    pub elapsed: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceHistory {
    pub records: Vec<HistoryRecord>,
    /// Noteworthy events such as unstable reduced models or breakdowns.
    pub events: Vec<String>,
}

pub const CSV_HEADER: &str = "r,R_P,E_K,E_G,elapsed_s";

impl ConvergenceHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; `r` must exceed the previous record's.
    pub fn push(&mut self, rec: HistoryRecord) {
        if let Some(last) = self.records.last() {
            assert!(rec.r > last.r, "history r must increase: {} after {}", rec.r, last.r);
        }
        self.records.push(rec);
    }

    pub fn note(&mut self, event: impl Into<String>) {
        let event = event.into();
        log::info!("{event}");
        self.events.push(event);
    }

    pub fn last(&self) -> Option<&HistoryRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    /// Indices `i` with `R_P[i] > R_P[i-1]`.
    pub fn residual_increases(&self) -> Vec<usize> {
        (1..self.records.len())
            .filter(|&i| self.records[i].residual > self.records[i - 1].residual)
            .collect()
    }

    /// CSV with header `r,R_P,E_K,E_G,elapsed_s`; absent values are empty
    /// fields, and `elapsed_s` is left empty when `timings` is false.
    pub fn write_csv<W: Write>(&self, mut out: W, timings: bool) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for rec in &self.records {
            let elapsed = if timings { Some(rec.elapsed) } else { None };
            writeln!(
                out,
                "{},{},{},{},{}",
                rec.r,
                sci(Some(rec.residual)),
                sci(rec.gain_error),
                sci(rec.h2_error),
                sci(elapsed)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self, timings: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, timings).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

fn sci(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.9e}"),
        None => String::new(),
    }
}
