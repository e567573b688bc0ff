//! Bartels–Stewart solvers for `A X + X Bᵀ + Q = 0` and the Lyapunov special case.

use nalgebra::DMatrix;

use super::schur::{diagonal_blocks, real_schur, SchurForm};
use super::LinalgError;

/// Solves `A X + X Aᵀ + Q = 0` for stable `A`.
///
/// The observability orientation `Aᵀ X + X A + Q = 0` is reached by passing `Aᵀ`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    check_square(a, "A")?;
    if q.shape() != a.shape() {
        return Err(LinalgError::DimensionMismatch(format!(
            "lyapunov rhs is {}x{}, A is {}x{}",
            q.nrows(),
            q.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    let schur = real_schur(a)?;
    lyapunov_with_schur(&schur, q)
}

/// Lyapunov solve reusing a precomputed Schur form of `A`.
pub fn lyapunov_with_schur(
    schur: &SchurForm,
    q: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    let mut x = sylvester_with_schur(schur, schur, q)?;
    symmetrize(&mut x);
    Ok(x)
}

/// Solves `A X + X Bᵀ + Q = 0` given the Schur forms of `A` and `B`.
pub fn sylvester_with_schur(
    sa: &SchurForm,
    sb: &SchurForm,
    q: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    let (n, m) = (sa.dim(), sb.dim());
    if q.shape() != (n, m) {
        return Err(LinalgError::DimensionMismatch(format!(
            "sylvester rhs is {}x{}, expected {}x{}",
            q.nrows(),
            q.ncols(),
            n,
            m
        )));
    }
    // S Y + Y Tᵀ = C with C = -Uᵀ Q Z, then X = U Y Zᵀ.
    let c = -(sa.q.transpose() * q * &sb.q);
    let y = quasi_triangular_sylvester(&sa.t, &sb.t, c)?;
    Ok(&sa.q * y * sb.q.transpose())
}

/// Solves `S Y + Y Tᵀ = C` for upper quasi-triangular `S` and `T`.
fn quasi_triangular_sylvester(
    s: &DMatrix<f64>,
    t: &DMatrix<f64>,
    c: DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    let (n, m) = c.shape();
    let scale = s.amax().max(t.amax()).max(f64::MIN_POSITIVE);
    let tiny = 1e-13 * scale;
    let row_blocks = diagonal_blocks(s);
    let col_blocks = diagonal_blocks(t);
    let mut y = DMatrix::<f64>::zeros(n, m);

    for &(j0, jb) in col_blocks.iter().rev() {
        let j1 = j0 + jb;
        // rhs = C[:, J] - Y[:, L>J] T[J, L>J]ᵀ
        let mut rhs = c.columns(j0, jb).clone_owned();
        if j1 < m {
            let y_rest = y.columns(j1, m - j1);
            let t_rest = t.view((j0, j1), (jb, m - j1));
            rhs -= y_rest * t_rest.transpose();
        }
        for &(i0, ib) in row_blocks.iter().rev() {
            let i1 = i0 + ib;
            let mut local = rhs.rows(i0, ib).clone_owned();
            if i1 < n {
                let s_rest = s.view((i0, i1), (ib, n - i1));
                let y_below = y.view((i1, j0), (n - i1, jb));
                local -= s_rest * y_below;
            }
            let sol = small_sylvester(
                &s.view((i0, i0), (ib, ib)).clone_owned(),
                &t.view((j0, j0), (jb, jb)).clone_owned(),
                &local,
                tiny,
            )?;
            y.view_mut((i0, j0), (ib, jb)).copy_from(&sol);
        }
    }
    Ok(y)
}

/// Solves `S Y + Y Tᵀ = C` for blocks of size at most 2 through the
/// Kronecker form `(I ⊗ S + T ⊗ I) vec(Y) = vec(C)`.
fn small_sylvester(
    s: &DMatrix<f64>,
    t: &DMatrix<f64>,
    c: &DMatrix<f64>,
    tiny: f64,
) -> Result<DMatrix<f64>, LinalgError> {
    let (p, q) = c.shape();
    if p == 1 && q == 1 {
        let d = s[(0, 0)] + t[(0, 0)];
        if d.abs() <= tiny {
            return Err(LinalgError::SingularLyapunov);
        }
        return Ok(DMatrix::from_element(1, 1, c[(0, 0)] / d));
    }
    let k = p * q;
    let mut m = [[0.0f64; 5]; 4];
    for jj in 0..q {
        for ii in 0..p {
            let row = jj * p + ii;
            for kk in 0..p {
                m[row][jj * p + kk] += s[(ii, kk)];
            }
            for ll in 0..q {
                m[row][ll * p + ii] += t[(jj, ll)];
            }
            m[row][4] = c[(ii, jj)];
        }
    }
    // Gaussian elimination with partial pivoting on a k×k system.
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[piv][col].abs() <= tiny {
            return Err(LinalgError::SingularLyapunov);
        }
        m.swap(col, piv);
        for row in col + 1..k {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for cc in col..k {
                    m[row][cc] -= f * m[col][cc];
                }
                m[row][4] -= f * m[col][4];
            }
        }
    }
    let mut sol = [0.0f64; 4];
    for row in (0..k).rev() {
        let mut acc = m[row][4];
        for cc in row + 1..k {
            acc -= m[row][cc] * sol[cc];
        }
        sol[row] = acc / m[row][row];
    }
    Ok(DMatrix::from_fn(p, q, |i, j| sol[j * p + i]))
}

pub(crate) fn symmetrize(x: &mut DMatrix<f64>) {
    let n = x.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
}

fn check_square(a: &DMatrix<f64>, name: &str) -> Result<(), LinalgError> {
    if a.is_square() {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch(format!(
            "{name} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )))
    }
}
