//! Thin SVD by one-sided (Hestenes) Jacobi rotations.

use nalgebra::{DMatrix, DVector};

use super::LinalgError;

const MAX_SWEEPS: usize = 80;

/// `X = U diag(S) Vt` with `U` m×k, `Vt` k×n, `k = min(m, n)`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub vt: DMatrix<f64>,
}

pub fn thin_svd(x: &DMatrix<f64>) -> Result<Svd, LinalgError> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    if x.nrows() < x.ncols() {
        let t = jacobi_tall(&x.transpose())?;
        return Ok(Svd {
            u: t.vt.transpose(),
            s: t.s,
            vt: t.u.transpose(),
        });
    }
    jacobi_tall(x)
}

fn jacobi_tall(x: &DMatrix<f64>) -> Result<Svd, LinalgError> {
    let (m, n) = x.shape();
    let mut u = x.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let eps = f64::EPSILON;
    // Columns this small only carry round-off from the rest of the matrix.
    let negligible = (1e-3 * eps * x.norm()).powi(2);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (alpha, beta, gamma) = {
                    let ci = u.column(i);
                    let cj = u.column(j);
                    (ci.norm_squared(), cj.norm_squared(), ci.dot(&cj))
                };
                if gamma == 0.0
                    || alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= eps * alpha.sqrt() * beta.sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(LinalgError::SvdNoConvergence);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|k| u.column(k).norm()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut uo = DMatrix::<f64>::zeros(m, n);
    let mut vt = DMatrix::<f64>::zeros(n, n);
    let mut s = DVector::<f64>::zeros(n);
    let mut missing = Vec::new();
    for (k, &src) in order.iter().enumerate() {
        s[k] = norms[src];
        if norms[src] > f64::MIN_POSITIVE * 1e4 {
            uo.set_column(k, &(u.column(src) / norms[src]));
        } else {
            s[k] = 0.0;
            missing.push(k);
        }
        vt.set_row(k, &v.column(src).transpose());
    }
    complete_orthonormal(&mut uo, &missing);
    Ok(Svd { u: uo, s, vt })
}

fn rotate(a: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    let m = a.nrows();
    for r in 0..m {
        let ai = a[(r, i)];
        let aj = a[(r, j)];
        a[(r, i)] = c * ai - s * aj;
        a[(r, j)] = s * ai + c * aj;
    }
}

/// Fills the listed columns with unit vectors orthogonal to every other column.
fn complete_orthonormal(u: &mut DMatrix<f64>, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let m = u.nrows();
    let mut filled: Vec<usize> = (0..u.ncols()).filter(|k| !missing.contains(k)).collect();
    let mut candidate = 0;
    for &k in missing {
        while candidate < m {
            let mut e = DVector::<f64>::zeros(m);
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &f in &filled {
                    let d = u.column(f).dot(&e);
                    e.axpy(-d, &u.column(f), 1.0);
                }
            }
            let nrm = e.norm();
            if nrm > 0.5 {
                u.set_column(k, &(e / nrm));
                filled.push(k);
                break;
            }
        }
    }
}
