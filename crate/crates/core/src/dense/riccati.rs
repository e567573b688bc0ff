//! Dense continuous-time ARE `AᵀP + PA − PBR⁻¹BᵀP + CᵀC = 0` by Newton–Kleinman.

use nalgebra::DMatrix;

use super::lyapunov::{lyapunov_with_schur, symmetrize};
use super::schur::real_schur;
use super::LinalgError;

const MAX_NEWTON_STEPS: usize = 50;
const TARGET_RESIDUAL: f64 = 1e-12;
/// Below this level a stalled Newton step is treated as having hit round-off.
const STAGNATION_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct AreReport {
    pub p: DMatrix<f64>,
    /// `‖R(P)‖_F / (‖CᵀC‖_F + 2‖AᵀP‖_F + ‖PGP‖_F)` of the returned iterate,
    /// with `G = BR⁻¹Bᵀ`.
    pub residual: f64,
    pub iterations: usize,
    /// Relative residual after each Newton step.
    pub history: Vec<f64>,
}

/// Solves the dense ARE and returns the stabilizing solution `P`.
pub fn solve_dense_are(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    newton_kleinman(a, b, c, r).map(|rep| rep.p)
}

/// `R(P) = AᵀP + PA − PBR⁻¹BᵀP + CᵀC`.
pub fn are_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    let g = gain_weight(b, r)?;
    Ok(residual_with(a, &g, &(c.transpose() * c), p))
}

/// Residual scaled by the size of its terms, so badly scaled but solvable
/// equations still reach the target.
fn relative_residual(a: &DMatrix<f64>, g: &DMatrix<f64>, ctc: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let ap = a.transpose() * p;
    let pgp = p * g * p;
    let res = (&ap + ap.transpose() - &pgp + ctc).norm();
    let size = ctc.norm() + 2.0 * ap.norm() + pgp.norm();
    if size == 0.0 {
        0.0
    } else {
        res / size
    }
}

fn residual_with(
    a: &DMatrix<f64>,
    g: &DMatrix<f64>,
    ctc: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let ap = a.transpose() * p;
    &ap + ap.transpose() - p * g * p + ctc
}

/// `B R⁻¹ Bᵀ`, failing if `R` is not symmetric positive definite.
pub(crate) fn gain_weight(b: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    if r.nrows() != b.ncols() || !r.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "R is {}x{} but B has {} columns",
            r.nrows(),
            r.ncols(),
            b.ncols()
        )));
    }
    let chol = r
        .clone()
        .cholesky()
        .ok_or(LinalgError::NotPositiveDefinite)?;
    Ok(b * chol.solve(&b.transpose()))
}

/// Newton–Kleinman iteration from `P₀ = 0`; requires `A` stable.
pub fn newton_kleinman(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<AreReport, LinalgError> {
    newton_impl(a, b, c, r, false)
}

/// As [`newton_kleinman`], but an unstable `A` is handled by starting from a
/// Hamiltonian sign-function guess.
pub fn newton_kleinman_stabilized(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<AreReport, LinalgError> {
    newton_impl(a, b, c, r, true)
}

fn newton_impl(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
    allow_bass: bool,
) -> Result<AreReport, LinalgError> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || c.ncols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "ARE data: A {}x{}, B {}x{}, C {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let g = gain_weight(b, r)?;
    let ctc = c.transpose() * c;
    if c.norm_squared() == 0.0 {
        return Ok(AreReport {
            p: DMatrix::zeros(n, n),
            residual: 0.0,
            iterations: 0,
            history: Vec::new(),
        });
    }

    let mut p = DMatrix::<f64>::zeros(n, n);
    let mut open_loop = Some(real_schur(&a.transpose())?);
    let start_unstable = open_loop.as_ref().is_some_and(|f| f.spectral_abscissa() >= 0.0);
    if start_unstable && allow_bass {
        p = sign_start(a, &g, &ctc)?;
    }
    let mut best: Option<(DMatrix<f64>, f64)> = None;
    let mut history = Vec::new();

    for step in 0..MAX_NEWTON_STEPS {
        let (closed, rhs) = if step == 0 && !(start_unstable && allow_bass) {
            (a.clone(), ctc.clone())
        } else {
            let gp = &g * &p;
            (a - &gp, &ctc + &p * &gp)
        };
        let schur = match open_loop.take() {
            Some(f) if step == 0 && !(start_unstable && allow_bass) => f,
            _ => real_schur(&closed.transpose())?,
        };
        let abscissa = schur.spectral_abscissa();
        if abscissa >= 0.0 {
            return Err(LinalgError::AreFailed {
                reason: format!("closed-loop iterate {step} is not stable (abscissa {abscissa:e})"),
                residual: history.last().copied().unwrap_or(f64::INFINITY),
            });
        }
        let mut next = lyapunov_with_schur(&schur, &rhs)?;
        symmetrize(&mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let res = relative_residual(a, &g, &ctc, &next);
        history.push(res);

        let prev = if history.len() >= 2 {
            history[history.len() - 2]
        } else {
            f64::INFINITY
        };
        let improved = best.as_ref().is_none_or(|(_, r)| res < *r);
        if improved {
            best = Some((next.clone(), res));
        }
        // Past the target, keep stepping while Newton still gains an order.
        let converged = res <= TARGET_RESIDUAL && (res > 0.1 * prev || res == 0.0);
        let stalled = step >= 2 && res > 0.5 * prev && res < STAGNATION_FLOOR;
        p = next;
        if converged || stalled {
            let (p, residual) = best.unwrap();
            check_closed_loop(a, &g, &p, residual)?;
            return Ok(AreReport {
                p,
                residual,
                iterations: step + 1,
                history,
            });
        }
    }
    if let Some((p, residual)) = best.filter(|(_, r)| *r <= TARGET_RESIDUAL) {
        check_closed_loop(a, &g, &p, residual)?;
        return Ok(AreReport {
            p,
            residual,
            iterations: MAX_NEWTON_STEPS,
            history,
        });
    }
    Err(LinalgError::AreFailed {
        reason: format!("no convergence in {MAX_NEWTON_STEPS} Newton steps"),
        residual: history.last().copied().unwrap_or(f64::INFINITY),
    })
}

const SIGN_MAX_STEPS: usize = 100;

/// Stabilizing guess from the matrix sign of `H = [A, −G; −CᵀC, −Aᵀ]`.
fn sign_start(a: &DMatrix<f64>, g: &DMatrix<f64>, ctc: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = a.nrows();
    let mut z = DMatrix::zeros(2 * n, 2 * n);
    z.view_mut((0, 0), (n, n)).copy_from(a);
    z.view_mut((0, n), (n, n)).copy_from(&-g);
    z.view_mut((n, 0), (n, n)).copy_from(&-ctc);
    z.view_mut((n, n), (n, n)).copy_from(&-a.transpose());
    let fail = |reason: &str| LinalgError::AreFailed {
        reason: format!("stabilizing start: {reason}"),
        residual: f64::INFINITY,
    };
    for _ in 0..SIGN_MAX_STEPS {
        let lu = z.clone().lu();
        let log_det: f64 = lu.u().diagonal().iter().map(|d| d.abs().ln()).sum();
        let inv = lu.try_inverse().ok_or_else(|| fail("Hamiltonian has imaginary-axis eigenvalues"))?;
        let c = (-log_det / (2 * n) as f64).exp();
        let c = if c.is_finite() && c > 0.0 { c } else { 1.0 };
        let next = (&z * c + inv / c) * 0.5;
        let change = (&next - &z).norm() / next.norm();
        z = next;
        if change < 1e-13 {
            break;
        }
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    // [Z12; Z22 + I] P = −[Z11 + I; Z21]
    let id = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(z.view((n, n), (n, n)) + &id));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&-(z.view((0, 0), (n, n)) + &id));
    rhs.view_mut((n, 0), (n, n)).copy_from(&-z.view((n, 0), (n, n)));
    let mut p = lhs
        .svd(true, true)
        .solve(&rhs, f64::EPSILON * 2.0 * n as f64)
        .map_err(|_| fail("least-squares solve failed"))?;
    symmetrize(&mut p);
    Ok(p)
}

fn check_closed_loop(
    a: &DMatrix<f64>,
    g: &DMatrix<f64>,
    p: &DMatrix<f64>,
    residual: f64,
) -> Result<(), LinalgError> {
    let closed = a - g * p;
    let abscissa = real_schur(&closed)?.spectral_abscissa();
    if abscissa < 0.0 {
        Ok(())
    } else {
        Err(LinalgError::AreFailed {
            reason: format!("closed loop not stable on exit (abscissa {abscissa:e})"),
            residual,
        })
    }
}
