//! Rational Krylov projection methods for the ARE.
//!
//! The Galerkin variant grows one orthonormal basis `W` of
//! `K(Aᵀ, Cᵀ, σ)`; the Petrov–Galerkin variant also grows `V` spanning
//! `K(A, B, σ)` with the same poles and keeps `WᵀV = I`. Both keep the
//! relation `AᵀW = W T + ŵ aᵀ`, which gives the full ARE residual norm from
//! `r`-sized quantities only.

pub mod shifts;

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::dense::{are_residual, newton_kleinman, newton_kleinman_stabilized, qr_append, real_schur, LinalgError, QrFactors};
use crate::error::{Error, Result};
use crate::metrics::{core_norm, ConvergenceHistory, HistoryRecord};
use crate::problems::StateSpaceSystem;
use crate::reduction::{AreSolution, ReducedModel};

pub use shifts::{next_shift, SpectralBounds};

/// Columns whose norm falls below this fraction after orthogonalization are dropped.
pub const DEFLATION_TOL: f64 = 1e-12;
/// `|wᵀv|` below this (unit vectors) is a serious breakdown.
pub const BREAKDOWN_TOL: f64 = 1e-12;
/// `|wᵀv|` below this is logged as a near breakdown.
pub const NEAR_BREAKDOWN_TOL: f64 = 1e-8;
/// Largest accepted `‖WᵀV − I‖_F` for the Petrov–Galerkin pair.
pub const BIORTH_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Galerkin,
    PetrovGalerkin,
}

/// Growing bases and relation data.
#[derive(Debug, Clone)]
pub struct KrylovState {
    kind: Projection,
    w: DMatrix<f64>,
    /// Right basis; `None` for Galerkin, where it equals `w`.
    v: Option<DMatrix<f64>>,
    atw: DMatrix<f64>,
    /// `T = VᵀAᵀW`, so the projected system matrix is `Tᵀ`.
    t: DMatrix<f64>,
    b_r: DMatrix<f64>,
    c_r: DMatrix<f64>,
    w_hat: DMatrix<f64>,
    coupling: DMatrix<f64>,
    /// QR factors of `W` (Petrov–Galerkin only).
    qr_w: Option<QrFactors>,
    last_w: DMatrix<f64>,
    last_v: DMatrix<f64>,
    seed_width: usize,
    shifts: Vec<Complex64>,
    /// Poles repeated once per generated column, for the shift objective.
    pole_weights: Vec<Complex64>,
    blocks: usize,
    biorth_sq: f64,
    bounds: SpectralBounds,
    warnings: Vec<String>,
}

impl KrylovState {
    /// Orthonormalized `Cᵀ`.
    pub fn seed_galerkin(sys: &StateSpaceSystem) -> Result<Self> {
        let n = sys.n();
        let mut w = DMatrix::zeros(n, 0);
        let added = append_orthonormal(&mut w, &sys.c.transpose());
        if added == 0 {
            return Err(Error::InvalidInput("C has no nonzero direction".into()));
        }
        let last_w = w.clone();
        Self::finish_seed(sys, Projection::Galerkin, w, None, last_w.clone(), last_w, added)
    }

    /// Biorthogonalized pair `(Cᵀ, B)`; needs `m = p`.
    pub fn seed_petrov(sys: &StateSpaceSystem) -> Result<Self> {
        if sys.m() != sys.p() {
            return Err(Error::InvalidInput(format!(
                "Petrov-Galerkin needs as many inputs as outputs, got m = {}, p = {}",
                sys.m(),
                sys.p()
            )));
        }
        let n = sys.n();
        let mut w = DMatrix::zeros(n, 0);
        let mut v = DMatrix::zeros(n, 0);
        let mut biorth_sq = 0.0;
        let mut warnings = Vec::new();
        let added = append_biorthogonal(&mut w, &mut v, &sys.c.transpose(), &sys.b, 0, &mut biorth_sq, &mut warnings)?;
        if added == 0 {
            return Err(Error::InvalidInput("B or C has no nonzero direction".into()));
        }
        let (lw, lv) = (w.clone(), v.clone());
        let mut state = Self::finish_seed(sys, Projection::PetrovGalerkin, w, Some(v), lw, lv, added)?;
        state.biorth_sq = biorth_sq;
        state.warnings = warnings;
        state.check_biorth(0)?;
        Ok(state)
    }

    fn finish_seed(
        sys: &StateSpaceSystem,
        kind: Projection,
        w: DMatrix<f64>,
        v: Option<DMatrix<f64>>,
        last_w: DMatrix<f64>,
        last_v: DMatrix<f64>,
        width: usize,
    ) -> Result<Self> {
        let qr_w = match kind {
            Projection::Galerkin => None,
            Projection::PetrovGalerkin => Some(
                QrFactors::from_columns(&w).map_err(|_| Error::LossOfBiorthogonality {
                    iteration: 0,
                    deviation: f64::INFINITY,
                })?,
            ),
        };
        let mut state = Self {
            kind,
            atw: DMatrix::zeros(sys.n(), 0),
            t: DMatrix::zeros(0, 0),
            b_r: DMatrix::zeros(0, sys.m()),
            c_r: DMatrix::zeros(sys.p(), 0),
            w_hat: DMatrix::zeros(sys.n(), 0),
            coupling: DMatrix::zeros(0, 0),
            qr_w,
            last_w,
            last_v,
            seed_width: width,
            shifts: Vec::new(),
            pole_weights: Vec::new(),
            blocks: 1,
            biorth_sq: 0.0,
            bounds: SpectralBounds { s_min: 0.0, s_max: 0.0 },
            warnings: Vec::new(),
            w,
            v,
        };
        state.refresh(sys)?;
        let ritz = state.ritz_values()?;
        state.bounds = SpectralBounds::new(&sys.a, &ritz);
        Ok(state)
    }

    pub fn projection(&self) -> Projection {
        self.kind
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn v(&self) -> &DMatrix<f64> {
        self.v.as_ref().unwrap_or(&self.w)
    }

    /// Projected system matrix `A_r = WᵀAV`.
    pub fn a_r(&self) -> DMatrix<f64> {
        self.t.transpose()
    }

    /// Matrix `T` of the relation `AᵀW = W T + ŵ aᵀ`.
    pub fn relation_matrix(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn b_r(&self) -> &DMatrix<f64> {
        &self.b_r
    }

    pub fn c_r(&self) -> &DMatrix<f64> {
        &self.c_r
    }

    pub fn w_hat(&self) -> &DMatrix<f64> {
        &self.w_hat
    }

    /// Coupling block `a` of the relation.
    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    /// Seed block plus one block per pole.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn shifts(&self) -> &[Complex64] {
        &self.shifts
    }

    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }

    pub fn biorthogonality_defect(&self) -> f64 {
        self.biorth_sq.sqrt()
    }

    /// Near-breakdown messages collected since the last call.
    pub fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }

    /// Upper-triangular factor of `[W, ŵ]`.
    pub fn extended_r(&self) -> Result<DMatrix<f64>> {
        match &self.qr_w {
            None => Ok(DMatrix::identity(self.dim() + self.w_hat.ncols(), self.dim() + self.w_hat.ncols())),
            Some(f) => match qr_append(f, &self.w_hat) {
                Ok(ext) => Ok(ext.r().clone()),
                Err(LinalgError::RankDeficient { .. }) => {
                    let k = self.dim() + self.w_hat.ncols();
                    let mut x = DMatrix::zeros(self.w.nrows(), k);
                    x.columns_mut(0, self.dim()).copy_from(&self.w);
                    x.columns_mut(self.dim(), self.w_hat.ncols()).copy_from(&self.w_hat);
                    Ok(x.qr().r())
                }
                Err(e) => Err(e.into()),
            },
        }
    }

    /// Ritz values of the current projection.
    pub fn ritz_values(&self) -> Result<Vec<Complex64>> {
        Ok(real_schur(&self.t)?.eigenvalues())
    }

    pub fn reduced_model(&self) -> ReducedModel {
        ReducedModel {
            v: self.v().clone(),
            w: self.w.clone(),
            a_r: self.a_r(),
            b_r: self.b_r.clone(),
            c_r: self.c_r.clone(),
            hankel: None,
        }
    }

    /// Recomputes `T`, `B_r`, `C_r`, `ŵ` and `a` for the current bases.
    fn refresh(&mut self, sys: &StateSpaceSystem) -> Result<()> {
        let k0 = self.atw.ncols();
        let k = self.dim();
        if k > k0 {
            let fresh = sys.a.tr_mul_dense(&self.w.columns(k0, k - k0).into_owned());
            let mut atw = std::mem::replace(&mut self.atw, DMatrix::zeros(0, 0)).resize_horizontally(k, 0.0);
            atw.columns_mut(k0, k - k0).copy_from(&fresh);
            self.atw = atw;
        }
        let v = self.v.as_ref().unwrap_or(&self.w);
        self.t = v.transpose() * &self.atw;
        self.b_r = self.w.transpose() * &sys.b;
        self.c_r = &sys.c * v;
        let f = &self.atw - &self.w * &self.t;
        let (w_hat, coupling) = split_remainder(&f);
        if w_hat.ncols() > self.seed_width {
            log::debug!("remainder rank {} exceeds block width {}", w_hat.ncols(), self.seed_width);
        }
        self.w_hat = w_hat;
        self.coupling = coupling;
        Ok(())
    }

    fn record_pole(&mut self, sigma: Complex64, columns: usize) {
        if sigma.im == 0.0 {
            self.shifts.push(sigma);
            self.blocks += 1;
        } else {
            self.shifts.push(sigma);
            self.shifts.push(sigma.conj());
            self.blocks += 2;
        }
        // Each real pole generated `columns` columns; a complex pair splits them.
        if sigma.im == 0.0 {
            self.pole_weights.extend(std::iter::repeat_n(sigma, columns));
        } else {
            let half = columns.div_ceil(2);
            self.pole_weights.extend(std::iter::repeat_n(sigma, half));
            self.pole_weights.extend(std::iter::repeat_n(sigma.conj(), half));
        }
    }

    fn check_biorth(&self, iteration: usize) -> Result<()> {
        let deviation = self.biorth_sq.sqrt();
        if deviation > BIORTH_LIMIT || !deviation.is_finite() {
            return Err(Error::LossOfBiorthogonality { iteration, deviation });
        }
        Ok(())
    }

    /// Next pole from the Ritz values of `A_r`, or of `A_r − B_r R⁻¹B_rᵀP_r`
    /// when `closed_loop` carries `(P_r, R)`.
    pub fn next_shift(&self, closed_loop: Option<(&DMatrix<f64>, &DMatrix<f64>)>) -> Result<Complex64> {
        let ritz = match closed_loop {
            None => self.ritz_values()?,
            Some((p_r, r_weight)) => {
                let g_r = crate::dense::gain_weight(&self.b_r, r_weight)?;
                real_schur(&(self.a_r() - g_r * p_r))?.eigenvalues()
            }
        };
        if self.shifts.is_empty() {
            return Ok(shifts::initial_shift(&ritz));
        }
        Ok(next_shift(&ritz, &self.pole_weights, self.bounds, self.shifts.last().copied()))
    }
}

/// Splits `F = ŵ aᵀ` with orthonormal `ŵ` spanning the numerical range of `F`.
fn split_remainder(f: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, k) = f.shape();
    let gram = f.transpose() * f;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lmax = order.first().map_or(0.0, |&i| eig.eigenvalues[i]);
    let mut w_hat = DMatrix::zeros(n, 0);
    if lmax > 0.0 {
        let mut dirs = DMatrix::zeros(n, 0);
        for &i in &order {
            if eig.eigenvalues[i] > 1e-28 * lmax {
                let col = f * eig.eigenvectors.column(i);
                let j = dirs.ncols();
                dirs = dirs.insert_column(j, 0.0);
                dirs.set_column(j, &col);
            }
        }
        append_orthonormal(&mut w_hat, &dirs);
    }
    let coupling = f.transpose() * &w_hat;
    (w_hat, coupling)
}

/// Appends the columns of `z` to `w` after two Gram–Schmidt passes, dropping
/// dependent ones. Returns the number of appended columns.
fn append_orthonormal(w: &mut DMatrix<f64>, z: &DMatrix<f64>) -> usize {
    let mut added = 0;
    for j in 0..z.ncols() {
        let mut x: DVector<f64> = z.column(j).into_owned();
        let x0 = x.norm();
        if x0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            let h = w.tr_mul(&x);
            x -= &*w * h;
        }
        let nrm = x.norm();
        if nrm <= DEFLATION_TOL * x0 {
            continue;
        }
        let k = w.ncols();
        let grown = std::mem::replace(w, DMatrix::zeros(0, 0)).insert_column(k, 0.0);
        *w = grown;
        w.set_column(k, &(x / nrm));
        added += 1;
    }
    added
}

/// Two-sided Gram–Schmidt: appends column pairs of `(zw, zv)` keeping `WᵀV = I`.
fn append_biorthogonal(
    w: &mut DMatrix<f64>,
    v: &mut DMatrix<f64>,
    zw: &DMatrix<f64>,
    zv: &DMatrix<f64>,
    iteration: usize,
    biorth_sq: &mut f64,
    warnings: &mut Vec<String>,
) -> Result<usize> {
    let k0 = w.ncols();
    let mut added = 0;
    for j in 0..zw.ncols().min(zv.ncols()) {
        let mut x: DVector<f64> = zw.column(j).into_owned();
        let mut y: DVector<f64> = zv.column(j).into_owned();
        let (x0, y0) = (x.norm(), y.norm());
        if x0 == 0.0 || y0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            let hx = v.tr_mul(&x);
            x -= &*w * hx;
            let hy = w.tr_mul(&y);
            y -= &*v * hy;
        }
        let (nx, ny) = (x.norm(), y.norm());
        if nx <= DEFLATION_TOL * x0 || ny <= DEFLATION_TOL * y0 {
            log::debug!("deflating dependent column pair at iteration {iteration}");
            continue;
        }
        x /= nx;
        y /= ny;
        let delta = x.dot(&y);
        if delta.abs() < BREAKDOWN_TOL {
            return Err(Error::Breakdown { iteration, pivot: delta });
        }
        if delta.abs() < NEAR_BREAKDOWN_TOL {
            let msg = format!("near breakdown at iteration {iteration}: |w'v| = {:e}", delta.abs());
            log::debug!("{msg}");
            warnings.push(msg);
        }
        let scale = delta.abs().sqrt();
        x /= scale;
        y *= delta.signum() / scale;
        let k = w.ncols();
        *w = std::mem::replace(w, DMatrix::zeros(0, 0)).insert_column(k, 0.0);
        *v = std::mem::replace(v, DMatrix::zeros(0, 0)).insert_column(k, 0.0);
        w.set_column(k, &x);
        v.set_column(k, &y);
        added += 1;
    }
    if added > 0 {
        let k = w.ncols();
        let old_w = w.columns(0, k0);
        let old_v = v.columns(0, k0);
        let new_w = w.columns(k0, added);
        let new_v = v.columns(k0, added);
        let cross = (old_w.transpose() * new_v).norm_squared() + (new_w.transpose() * old_v).norm_squared();
        let diag = (new_w.transpose() * new_v - DMatrix::<f64>::identity(added, added)).norm_squared();
        *biorth_sq += cross + diag;
        debug_assert_eq!(k, k0 + added);
    }
    Ok(added)
}

/// Solves with the current pole and returns real blocks spanning the new directions.
fn shifted_blocks(
    sys: &StateSpaceSystem,
    sigma: Complex64,
    last_w: &DMatrix<f64>,
    last_v: Option<&DMatrix<f64>>,
) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>)> {
    let lu = sys.a.shifted_lu(sigma)?;
    let split = |z: DMatrix<Complex64>| -> DMatrix<f64> {
        if sigma.im == 0.0 {
            z.map(|c| c.re)
        } else {
            let k = z.ncols();
            let mut out = DMatrix::zeros(z.nrows(), 2 * k);
            out.columns_mut(0, k).copy_from(&z.map(|c| c.re));
            out.columns_mut(k, k).copy_from(&z.map(|c| c.im));
            out
        }
    };
    let zw = split(lu.solve_transpose(last_w)?);
    let zv = match last_v {
        Some(lv) => Some(split(lu.solve(lv)?)),
        None => None,
    };
    Ok((zw, zv))
}

/// Adds the block `(Aᵀ − σI)⁻¹ W_last` to a Galerkin state; complex `σ`
/// adds real and imaginary parts. Returns the number of new columns.
pub fn expand_galerkin(state: &mut KrylovState, sys: &StateSpaceSystem, sigma: Complex64) -> Result<usize> {
    if state.kind != Projection::Galerkin {
        return Err(Error::InvalidInput("expand_galerkin on a Petrov-Galerkin state".into()));
    }
    let (zw, _) = shifted_blocks(sys, sigma, &state.last_w, None)?;
    let k0 = state.dim();
    let added = append_orthonormal(&mut state.w, &zw);
    if added > 0 {
        let keep = added.min(state.seed_width);
        state.last_w = state.w.columns(k0 + added - keep, keep).into_owned();
    }
    state.record_pole(sigma, added);
    state.refresh(sys)?;
    Ok(added)
}

/// Adds matching blocks from `(Aᵀ − σI)⁻¹ W_last` and `(A − σI)⁻¹ V_last`
/// and biorthogonalizes them against the current pair.
pub fn expand_petrov(state: &mut KrylovState, sys: &StateSpaceSystem, sigma: Complex64) -> Result<usize> {
    if state.kind != Projection::PetrovGalerkin {
        return Err(Error::InvalidInput("expand_petrov on a Galerkin state".into()));
    }
    let iteration = state.blocks;
    let (zw, zv) = shifted_blocks(sys, sigma, &state.last_w, Some(&state.last_v))?;
    let zv = zv.expect("petrov solve");
    let k0 = state.dim();
    let mut v = state.v.take().expect("petrov state has V");
    let res = append_biorthogonal(&mut state.w, &mut v, &zw, &zv, iteration, &mut state.biorth_sq, &mut state.warnings);
    state.v = Some(v);
    let added = res?;
    state.check_biorth(iteration)?;
    if added > 0 {
        let keep = added.min(state.seed_width);
        state.last_w = state.w.columns(k0 + added - keep, keep).into_owned();
        state.last_v = state.v().columns(k0 + added - keep, keep).into_owned();
        let qr = state.qr_w.as_mut().expect("petrov state has QR");
        qr.append(&state.w.columns(k0, added).into_owned()).map_err(|_| Error::LossOfBiorthogonality {
            iteration,
            deviation: state.biorth_sq.sqrt(),
        })?;
    }
    state.record_pole(sigma, added);
    state.refresh(sys)?;
    Ok(added)
}

/// `√2 ‖P_r a‖_F`.
pub fn galerkin_residual_norm(p_r: &DMatrix<f64>, coupling: &DMatrix<f64>) -> f64 {
    std::f64::consts::SQRT_2 * (p_r * coupling).norm()
}

/// `‖R_W [0, P_r a; aᵀP_r, 0] R_Wᵀ‖_F` with `R_W` the triangular factor of `[W, ŵ]`.
pub fn pg_residual_norm(p_r: &DMatrix<f64>, coupling: &DMatrix<f64>, r_w: &DMatrix<f64>) -> Result<f64> {
    let (k, q) = coupling.shape();
    if p_r.shape() != (k, k) || r_w.ncols() != k + q || r_w.nrows() > k + q {
        return Err(Error::InvalidInput(format!(
            "stale factor: R_W is {}x{}, expected {} columns",
            r_w.nrows(),
            r_w.ncols(),
            k + q
        )));
    }
    let pa = p_r * coupling;
    let mut m = DMatrix::zeros(k + q, k + q);
    m.view_mut((0, k), (k, q)).copy_from(&pa);
    m.view_mut((k, 0), (q, k)).copy_from(&pa.transpose());
    Ok(core_norm(r_w.clone(), &m))
}

/// `‖R(W P_r Wᵀ)‖_F` from `r`-sized data, keeping the lifted residual
/// `W R_r Wᵀ` of the projected equation; `r_w = None` means `[W, ŵ]` is orthonormal.
pub fn lifted_residual_norm(
    p_r: &DMatrix<f64>,
    coupling: &DMatrix<f64>,
    reduced: &DMatrix<f64>,
    r_w: Option<DMatrix<f64>>,
) -> Result<f64> {
    let (k, q) = coupling.shape();
    let pa = p_r * coupling;
    let mut m = DMatrix::zeros(k + q, k + q);
    m.view_mut((0, 0), (k, k)).copy_from(reduced);
    m.view_mut((0, k), (k, q)).copy_from(&pa);
    m.view_mut((k, 0), (q, k)).copy_from(&pa.transpose());
    match r_w {
        None => Ok(m.norm()),
        Some(r) if r.ncols() == k + q && r.nrows() <= k + q => Ok(core_norm(r, &m)),
        Some(r) => Err(Error::InvalidInput(format!(
            "stale factor: R_W is {}x{}, expected {} columns",
            r.nrows(),
            r.ncols(),
            k + q
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOptions {
    /// Stop once `R_P ≤ tol`.
    pub tol: f64,
    /// Cap on blocks (seed plus poles).
    pub r_max: usize,
    /// Take Ritz values from the closed-loop projected matrix.
    pub use_b_variant: bool,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            r_max: 60,
            use_b_variant: false,
        }
    }
}

/// Metrics an observer attaches to an iterate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observation {
    pub gain_error: Option<f64>,
    pub h2_error: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct KrylovRun {
    pub solution: AreSolution,
    pub model: ReducedModel,
    pub history: ConvergenceHistory,
    pub shifts: Vec<Complex64>,
}

/// A failed run with everything recorded up to the failure.
#[derive(Debug)]
pub struct KrylovFailure {
    pub error: Error,
    pub history: ConvergenceHistory,
    pub shifts: Vec<Complex64>,
}

impl std::fmt::Display for KrylovFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} iterates)", self.error, self.history.len())
    }
}

impl std::error::Error for KrylovFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub type Observer<'a> = dyn FnMut(&ReducedModel, &DMatrix<f64>) -> Observation + 'a;

pub fn gark(sys: &StateSpaceSystem, opts: &KrylovOptions) -> std::result::Result<KrylovRun, KrylovFailure> {
    run(sys, opts, Projection::Galerkin, &mut |_, _| Observation::default())
}

pub fn pgark(sys: &StateSpaceSystem, opts: &KrylovOptions) -> std::result::Result<KrylovRun, KrylovFailure> {
    run(sys, opts, Projection::PetrovGalerkin, &mut |_, _| Observation::default())
}

/// Galerkin or Petrov–Galerkin run; `observer` sees each iterate's reduced
/// model and `P_r`, and its time is excluded from `elapsed`.
pub fn run(
    sys: &StateSpaceSystem,
    opts: &KrylovOptions,
    kind: Projection,
    observer: &mut Observer<'_>,
) -> std::result::Result<KrylovRun, KrylovFailure> {
    let mut history = ConvergenceHistory::new();
    let mut shifts_used = Vec::new();
    match drive(sys, opts, kind, observer, &mut history, &mut shifts_used) {
        Ok((solution, model, shifts)) => Ok(KrylovRun {
            solution,
            model,
            history,
            shifts,
        }),
        Err(error) => {
            history.note(format!("terminated: {error}"));
            Err(KrylovFailure {
                error,
                history,
                shifts: shifts_used,
            })
        }
    }
}

fn drive(
    sys: &StateSpaceSystem,
    opts: &KrylovOptions,
    kind: Projection,
    observer: &mut Observer<'_>,
    history: &mut ConvergenceHistory,
    shifts_out: &mut Vec<Complex64>,
) -> Result<(AreSolution, ReducedModel, Vec<Complex64>)> {
    if !(opts.tol > 0.0) || opts.r_max == 0 {
        return Err(Error::InvalidInput(format!(
            "need tol > 0 and r_max >= 1, got {} and {}",
            opts.tol, opts.r_max
        )));
    }
    let scale = sys.c.norm_squared();
    if scale == 0.0 {
        return Err(Error::InvalidInput("C is zero; relative residual undefined".into()));
    }
    let start = Instant::now();
    let mut excluded = Duration::ZERO;
    let mut state = match kind {
        Projection::Galerkin => KrylovState::seed_galerkin(sys)?,
        Projection::PetrovGalerkin => KrylovState::seed_petrov(sys)?,
    };
    let mut iteration = 0usize;
    let mut prev_residual = f64::INFINITY;
    loop {
        let a_r = state.a_r();
        // An oblique projection need not keep A_r stable.
        let report = match kind {
            Projection::Galerkin => newton_kleinman(&a_r, &state.b_r, &state.c_r, &sys.r_weight)
                .map_err(|source| Error::ReducedAreFailed { iteration, source }),
            Projection::PetrovGalerkin => newton_kleinman_stabilized(&a_r, &state.b_r, &state.c_r, &sys.r_weight)
                .map_err(|source| Error::IllPosedReducedAre { r: state.dim(), source }),
        }?;
        let p_r = report.p;
        let reduced = are_residual(&a_r, &state.b_r, &state.c_r, &sys.r_weight, &p_r)?;
        let cheap = lifted_residual_norm(&p_r, &state.coupling, &reduced, state.qr_w.as_ref().map(|_| state.extended_r()).transpose()?)?;
        let residual = cheap / scale;
        let elapsed = (start.elapsed() - excluded).as_secs_f64();

        let obs_start = Instant::now();
        let model = state.reduced_model();
        let obs = observer(&model, &p_r);
        excluded += obs_start.elapsed();

        history.push(HistoryRecord {
            r: state.dim(),
            residual,
            gain_error: obs.gain_error,
            h2_error: obs.h2_error,
            elapsed,
        });
        for msg in state.take_warnings() {
            history.note(msg);
        }
        if let Some(note) = obs.note {
            history.note(format!("r = {}: {note}", state.dim()));
        }
        if residual > prev_residual {
            history.note(format!(
                "r = {}: residual increased from {prev_residual:e} to {residual:e}",
                state.dim()
            ));
        }
        prev_residual = residual;
        *shifts_out = state.shifts.clone();

        if residual <= opts.tol {
            let shifts = state.shifts.clone();
            return Ok((AreSolution { p_r, residual }, model, shifts));
        }
        if state.blocks() >= opts.r_max {
            return Err(Error::NotConverged { residual });
        }
        let closed_loop = opts.use_b_variant.then_some((&p_r, &sys.r_weight));
        let sigma = state.next_shift(closed_loop)?;
        log::debug!("iteration {iteration}: r = {}, R_P = {residual:e}, next pole {sigma}", state.dim());
        let added = match kind {
            Projection::Galerkin => expand_galerkin(&mut state, sys, sigma)?,
            Projection::PetrovGalerkin => expand_petrov(&mut state, sys, sigma)?,
        };
        iteration += 1;
        if added == 0 {
            history.note(format!("pole {sigma} added no new direction"));
            return Err(Error::NotConverged { residual });
        }
    }
}
