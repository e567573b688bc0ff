//! Projection pairs `(V, W)` from POD snapshots and balanced truncation, and
//! the projected model `A_r = WᵀAV`, `B_r = WᵀB`, `C_r = CV`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dense::{newton_kleinman, psd_factor, real_schur, solve_lyapunov, thin_svd, AreReport};
use crate::error::{Error, Result};
use crate::integrate::SnapshotSet;
use crate::problems::StateSpaceSystem;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-12;
/// Accepted `‖WᵀV − I‖_F` for [`reduce`].
pub const BIORTH_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub a_r: DMatrix<f64>,
    pub b_r: DMatrix<f64>,
    pub c_r: DMatrix<f64>,
    /// Hankel singular values of the full system (balanced truncation only).
    pub hankel: Option<DVector<f64>>,
}

impl ReducedModel {
    pub fn r(&self) -> usize {
        self.a_r.nrows()
    }

    pub fn biorthogonality_defect(&self) -> f64 {
        biorth_defect(&self.v, &self.w)
    }

    /// `G_r(s) = C_r (sI − A_r)⁻¹ B_r`.
    pub fn transfer(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        let r = self.r();
        let shifted = DMatrix::<Complex64>::identity(r, r) * s - self.a_r.map(|v| Complex64::new(v, 0.0));
        let rhs = self.b_r.map(|v| Complex64::new(v, 0.0));
        let x = shifted.lu().solve(&rhs).ok_or(Error::FrequencyHitsSpectrum)?;
        Ok(self.c_r.map(|v| Complex64::new(v, 0.0)) * x)
    }

    /// Solves the projected ARE with the full-order control weight.
    pub fn solve_are(&self, r_weight: &DMatrix<f64>) -> Result<AreReport> {
        Ok(newton_kleinman(&self.a_r, &self.b_r, &self.c_r, r_weight)?)
    }
}

/// Reduced Riccati solution with its relative full-order residual.
#[derive(Debug, Clone)]
pub struct AreSolution {
    pub p_r: DMatrix<f64>,
    /// `‖R(W P_r Wᵀ)‖_F / ‖C‖_F²`.
    pub residual: f64,
}

pub(crate) fn biorth_defect(v: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let k = v.ncols();
    (w.transpose() * v - DMatrix::<f64>::identity(k, k)).norm()
}

/// Projects `sys` onto `(V, W)`; rejects pairs with `‖WᵀV − I‖_F > 1e-10`.
pub fn reduce(sys: &StateSpaceSystem, v: DMatrix<f64>, w: DMatrix<f64>) -> Result<ReducedModel> {
    reduce_with_tol(sys, v, w, BIORTH_TOL)
}

pub(crate) fn reduce_with_tol(
    sys: &StateSpaceSystem,
    v: DMatrix<f64>,
    w: DMatrix<f64>,
    tol: f64,
) -> Result<ReducedModel> {
    let n = sys.n();
    if v.nrows() != n || w.nrows() != n || v.ncols() != w.ncols() {
        return Err(Error::InvalidInput(format!(
            "bases are {}x{} and {}x{}, system has n = {n}",
            v.nrows(),
            v.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    let defect = biorth_defect(&v, &w);
    if !(defect <= tol) {
        return Err(Error::NotBiorthogonal(defect));
    }
    let av = sys.a.mul_dense(&v);
    Ok(ReducedModel {
        a_r: w.transpose() * av,
        b_r: w.transpose() * &sys.b,
        c_r: &sys.c * &v,
        v,
        w,
        hankel: None,
    })
}

/// Left singular vectors of a snapshot matrix, truncated to numerical rank.
#[derive(Debug, Clone)]
pub struct PodBasis {
    pub modes: DMatrix<f64>,
    pub singular_values: DVector<f64>,
}

impl PodBasis {
    pub fn new(snapshots: &SnapshotSet) -> Result<Self> {
        let svd = thin_svd(&snapshots.x)?;
        Ok(Self {
            modes: svd.u,
            singular_values: svd.s,
        })
    }

    /// Number of singular values above `1e-12·σ₁`.
    pub fn rank(&self) -> usize {
        let s1 = self.singular_values.get(0).copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|&&s| s > RANK_TOL * s1).count()
    }

    /// Leading `r` modes.
    pub fn basis(&self, r: usize) -> Result<DMatrix<f64>> {
        let attainable = self.rank();
        if r == 0 || r > attainable {
            return Err(Error::InsufficientRank {
                requested: r,
                attainable,
            });
        }
        Ok(self.modes.columns(0, r).into_owned())
    }

    pub fn reduce(&self, sys: &StateSpaceSystem, r: usize) -> Result<ReducedModel> {
        let v = self.basis(r)?;
        reduce(sys, v.clone(), v)
    }
}

/// `V = W` = leading `r` left singular vectors of the snapshot matrix.
pub fn pod_basis(snapshots: &SnapshotSet, r: usize) -> Result<DMatrix<f64>> {
    PodBasis::new(snapshots)?.basis(r)
}

/// Square-root balanced truncation data computed once per system.
#[derive(Debug, Clone)]
pub struct BalancedTruncation {
    pub hankel: DVector<f64>,
    /// `Υ U`, columns ordered by Hankel value.
    left: DMatrix<f64>,
    /// `Φ Z`, columns ordered by Hankel value.
    right: DMatrix<f64>,
}

impl BalancedTruncation {
    /// Dense Gramians; intended for n in the low thousands at most.
    pub fn new(sys: &StateSpaceSystem) -> Result<Self> {
        let a = sys.dense_a();
        if real_schur(&a)?.spectral_abscissa() >= 0.0 {
            return Err(Error::Unstable);
        }
        let reach = solve_lyapunov(&a, &(&sys.b * sys.b.transpose()))?;
        let obs = solve_lyapunov(&a.transpose(), &(sys.c.transpose() * &sys.c))?;
        let phi = psd_factor(&reach, f64::EPSILON);
        let ups = psd_factor(&obs, f64::EPSILON);
        if phi.ncols() == 0 || ups.ncols() == 0 {
            return Ok(Self {
                hankel: DVector::zeros(0),
                left: DMatrix::zeros(sys.n(), 0),
                right: DMatrix::zeros(sys.n(), 0),
            });
        }
        let svd = thin_svd(&(ups.transpose() * &phi))?;
        Ok(Self {
            left: ups * svd.u,
            right: phi * svd.vt.transpose(),
            hankel: svd.s,
        })
    }

    pub fn rank(&self) -> usize {
        let s1 = self.hankel.get(0).copied().unwrap_or(0.0);
        self.hankel.iter().filter(|&&s| s > RANK_TOL * s1).count()
    }

    /// `(V, W)` for the leading `r` Hankel values, rebiorthogonalized.
    pub fn basis(&self, r: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let attainable = self.rank();
        if r == 0 || r > attainable {
            return Err(Error::InsufficientRank {
                requested: r,
                attainable,
            });
        }
        let scale = DMatrix::from_diagonal(&self.hankel.rows(0, r).map(|s| 1.0 / s.sqrt()));
        let v = self.right.columns(0, r) * &scale;
        let w = self.left.columns(0, r) * &scale;
        let gram = w.transpose() * &v;
        let fix = gram.try_inverse().ok_or(Error::NotBiorthogonal(f64::INFINITY))?;
        let w = w * fix.transpose();
        Ok((v, w))
    }

    pub fn reduce(&self, sys: &StateSpaceSystem, r: usize) -> Result<ReducedModel> {
        let (v, w) = self.basis(r)?;
        let mut red = reduce(sys, v, w)?;
        red.hankel = Some(self.hankel.clone());
        Ok(red)
    }
}

pub fn bt_basis(sys: &StateSpaceSystem, r: usize) -> Result<ReducedModel> {
    BalancedTruncation::new(sys)?.reduce(sys, r)
}
