//! Dense linear algebra on small and reduced matrices: real Schur form,
//! Bartels–Stewart, Newton–Kleinman, Jacobi SVD and an appendable QR.

mod lyapunov;
mod qr;
mod riccati;
mod schur;
mod svd;

use nalgebra::DMatrix;
use thiserror::Error;

pub use lyapunov::{lyapunov_with_schur, solve_lyapunov, sylvester_with_schur};
pub use qr::{qr_append, QrFactors, RANK_TOL};
pub use riccati::{are_residual, newton_kleinman, newton_kleinman_stabilized, solve_dense_are, AreReport};
pub use schur::{real_schur, SchurForm};
pub use svd::{thin_svd, Svd};

pub(crate) use riccati::gain_weight;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("schur did not converge for a {n}x{n} matrix")]
    SchurNoConvergence { n: usize },

    #[error("jacobi SVD did not converge")]
    SvdNoConvergence,

    #[error("singular Lyapunov operator: eigenvalue pair with λ_i + λ_j ≈ 0")]
    SingularLyapunov,

    #[error("ARE solve failed: {reason} (last residual {residual:e})")]
    AreFailed { reason: String, residual: f64 },

    #[error("non-finite input")]
    NonFinite,

    #[error("rank-deficient column {column}")]
    RankDeficient { column: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("weight matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("singular matrix")]
    Singular,
}

/// Square-root factor `Φ` with `X ≈ Φ Φᵀ` for a symmetric positive semidefinite `X`.
///
/// Eigenvalues below `rel_tol · λ_max` are dropped, so `Φ` has as many columns
/// as the numerical rank.
pub fn psd_factor(x: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let eig = nalgebra::SymmetricEigen::new(x.clone());
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > rel_tol * lmax && eig.eigenvalues[i] > 0.0)
        .collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut phi = DMatrix::<f64>::zeros(n, idx.len());
    for (k, &i) in idx.iter().enumerate() {
        phi.set_column(k, &(eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt()));
    }
    phi
}

/// Largest absolute deviation from symmetry relative to the largest entry.
pub fn symmetry_defect(x: &DMatrix<f64>) -> f64 {
    let scale = x.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (x - x.transpose()).amax() / scale
}
