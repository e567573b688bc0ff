//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riccati_mor::problems::StateSpaceSystem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Eigenvalues from faer's dense eigensolver.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    let n = a.nrows();
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    m.eigenvalues().expect("eigenvalues").into_iter().map(|z| Complex64::new(z.re, z.im)).collect()
}

pub fn abscissa(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Random `A` shifted so its spectral abscissa is `-margin`.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    let shift = abscissa(&a) + margin;
    a - DMatrix::identity(n, n) * shift
}

/// `A` with `A + Aᵀ` negative definite.
pub fn random_dissipative(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let l = random_matrix(rng, n, n);
    let k = random_matrix(rng, n, n);
    -(&l * l.transpose() + DMatrix::identity(n, n) * 0.5) + (&k - k.transpose()) * 2.0
}

pub fn random_spd(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let l = random_matrix(rng, m, m);
    &l * l.transpose() + DMatrix::identity(m, m)
}

/// Solves `A X + X Aᵀ + Q = 0` through the Kronecker-sum system.
pub fn kron_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let big = id.kronecker(a) + a.kronecker(&id);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let x = big.lu().solve(&rhs).expect("Kronecker system singular");
    DMatrix::from_column_slice(n, n, x.as_slice())
}

/// Stabilizing ARE solution from the stable invariant subspace of the Hamiltonian.
pub fn hamiltonian_are(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let g = b * r.clone().try_inverse().expect("R invertible") * b.transpose();
    let q = c.transpose() * c;
    let h = faer::Mat::<f64>::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => a[(i, j)],
        (true, false) => -g[(i, j - n)],
        (false, true) => -q[(i - n, j)],
        (false, false) => -a[(j - n, i - n)],
    });
    let evd = h.eigen().expect("Hamiltonian eigendecomposition");
    let s = evd.S().column_vector();
    let u = evd.U();
    let stable: Vec<usize> = (0..2 * n).filter(|&k| s[k].re < 0.0).collect();
    assert_eq!(stable.len(), n, "Hamiltonian has eigenvalues on the imaginary axis");
    let u1 = DMatrix::<Complex64>::from_fn(n, n, |i, k| {
        let z = u[(i, stable[k])];
        Complex64::new(z.re, z.im)
    });
    let u2 = DMatrix::<Complex64>::from_fn(n, n, |i, k| {
        let z = u[(n + i, stable[k])];
        Complex64::new(z.re, z.im)
    });
    // P U1 = U2  ⇔  U1ᵀ Pᵀ = U2ᵀ
    let pt = u1.transpose().lu().solve(&u2.transpose()).expect("U1 singular");
    let p = pt.transpose().map(|z| z.re);
    (&p + p.transpose()) * 0.5
}

pub fn are_residual_dense(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let rinv = r.clone().try_inverse().unwrap();
    a.transpose() * p + p * a - p * b * rinv * b.transpose() * p + c.transpose() * c
}

/// `‖R(W P_r Wᵀ)‖_F / ‖C‖_F²` assembled densely.
pub fn explicit_relative_residual(sys: &StateSpaceSystem, w: &DMatrix<f64>, p_r: &DMatrix<f64>) -> f64 {
    let lifted = w * p_r * w.transpose();
    are_residual_dense(&sys.dense_a(), &sys.b, &sys.c, &sys.r_weight, &lifted).norm() / sys.c.norm_squared()
}

pub fn transfer_dense(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, s: Complex64) -> DMatrix<Complex64> {
    let n = a.nrows();
    let m = DMatrix::<Complex64>::identity(n, n) * s - a.map(|v| Complex64::new(v, 0.0));
    let x = m.lu().solve(&b.map(|v| Complex64::new(v, 0.0))).expect("resolvent");
    c.map(|v| Complex64::new(v, 0.0)) * x
}

/// `‖G‖_{H2}` by trapezoidal quadrature of `(1/π)∫ ‖G(iω)‖_F² dω` on a log grid.
pub fn h2_quadrature(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, lo: f64, hi: f64, points: usize) -> f64 {
    let (l0, l1) = (lo.ln(), hi.ln());
    let mut prev: Option<(f64, f64)> = None;
    let mut total = 0.0;
    for k in 0..points {
        let w = (l0 + (l1 - l0) * k as f64 / (points - 1) as f64).exp();
        let g = transfer_dense(a, b, c, Complex64::new(0.0, w));
        let f = g.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if let Some((w0, f0)) = prev {
            total += 0.5 * (f + f0) * (w - w0);
        }
        prev = Some((w, f));
    }
    // the low-frequency strip [0, lo] with the value at lo
    let f_lo = transfer_dense(a, b, c, Complex64::new(0.0, lo)).iter().map(|z| z.norm_sqr()).sum::<f64>();
    total += f_lo * lo;
    (total / std::f64::consts::PI).sqrt()
}

/// Sampled `sup_ω |G(iω) − G_r(iω)|` for SISO models.
pub fn sampled_hinf(
    full: &[(f64, Complex64)],
    a_r: &DMatrix<f64>,
    b_r: &DMatrix<f64>,
    c_r: &DMatrix<f64>,
) -> f64 {
    full.iter()
        .map(|&(w, g)| (g - transfer_dense(a_r, b_r, c_r, Complex64::new(0.0, w))[(0, 0)]).norm())
        .fold(0.0, f64::max)
}

/// Sampled `sup_ω |G(iω) − G_r(iω)|` for SISO models with `C_r = C V`.
///
/// Evaluated in the coordinates `e = x − V x_r`, where the error is
/// `C (sI − A)⁻¹ [(AV − V A_r)(sI − A_r)⁻¹ B_r + B − V B_r]`, so errors far
/// below `|G|` are not lost to cancellation.
pub fn sampled_hinf_projected(sys: &StateSpaceSystem, red: &riccati_mor::reduction::ReducedModel, freqs: &[f64]) -> f64 {
    let cplx = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let r = red.r();
    let f = cplx(&(sys.a.mul_dense(&red.v) - &red.v * &red.a_r));
    let b_e = cplx(&(&sys.b - &red.v * &red.b_r));
    let mut aux = sys.clone();
    freqs
        .iter()
        .map(|&w| {
            let s = Complex64::new(0.0, w);
            let m = DMatrix::<Complex64>::identity(r, r) * s - cplx(&red.a_r);
            let x_r = m.lu().solve(&cplx(&red.b_r)).expect("reduced resolvent");
            let rhs = &f * x_r + &b_e;
            aux.b = DMatrix::from_fn(sys.n(), 2, |i, j| if j == 0 { rhs[(i, 0)].re } else { rhs[(i, 0)].im });
            let g = riccati_mor::problems::eval_transfer(&aux, s).expect("resolvent");
            (g[(0, 0)] + Complex64::new(0.0, 1.0) * g[(0, 1)]).norm()
        })
        .fold(0.0, f64::max)
}

pub fn rel(x: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (x - reference).norm() / reference.norm()
}

pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> StateSpaceSystem {
    let a = random_dissipative(rng, n);
    let b = random_matrix(rng, n, m);
    let c = random_matrix(rng, p, n);
    StateSpaceSystem::from_dense(&a, b, c).unwrap()
}

/// One Krylov iterate seen through the state API.
#[derive(Debug, Clone, Copy)]
pub struct ResidualSample {
    pub dim: usize,
    /// Cheap formula for an exact projected solve (Galerkin or PG display).
    pub pure: f64,
    /// Cheap formula including the projected-equation residual.
    pub lifted: f64,
    /// `‖R(W P_r Wᵀ)‖_F` assembled densely.
    pub explicit: f64,
}

/// Grows a space step by step, solving the projected ARE at each iterate,
/// until the explicit relative residual drops to `tol` or `max_blocks` is hit.
pub fn residual_trace(
    sys: &StateSpaceSystem,
    kind: riccati_mor::krylov::Projection,
    tol: f64,
    max_blocks: usize,
) -> riccati_mor::Result<Vec<ResidualSample>> {
    let mut out = Vec::new();
    trace_into(sys, kind, tol, max_blocks, &mut out)?;
    Ok(out)
}

/// Like [`residual_trace`], but keeps the iterates computed before a failure.
pub fn residual_trace_partial(
    sys: &StateSpaceSystem,
    kind: riccati_mor::krylov::Projection,
    tol: f64,
    max_blocks: usize,
) -> (Vec<ResidualSample>, Option<riccati_mor::Error>) {
    let mut out = Vec::new();
    let err = trace_into(sys, kind, tol, max_blocks, &mut out).err();
    (out, err)
}

fn trace_into(
    sys: &StateSpaceSystem,
    kind: riccati_mor::krylov::Projection,
    tol: f64,
    max_blocks: usize,
    out: &mut Vec<ResidualSample>,
) -> riccati_mor::Result<()> {
    use riccati_mor::dense::{are_residual, newton_kleinman, newton_kleinman_stabilized};
    use riccati_mor::krylov::*;
    let mut state = match kind {
        Projection::Galerkin => KrylovState::seed_galerkin(sys)?,
        Projection::PetrovGalerkin => KrylovState::seed_petrov(sys)?,
    };
    let a = sys.dense_a();
    let scale = sys.c.norm_squared();
    loop {
        let a_r = state.a_r();
        let p_r = match kind {
            Projection::Galerkin => newton_kleinman(&a_r, state.b_r(), state.c_r(), &sys.r_weight)?.p,
            Projection::PetrovGalerkin => newton_kleinman_stabilized(&a_r, state.b_r(), state.c_r(), &sys.r_weight)?.p,
        };
        let r_w = state.extended_r()?;
        let pure = match kind {
            Projection::Galerkin => galerkin_residual_norm(&p_r, state.coupling()),
            Projection::PetrovGalerkin => pg_residual_norm(&p_r, state.coupling(), &r_w)?,
        };
        let reduced = are_residual(&a_r, state.b_r(), state.c_r(), &sys.r_weight, &p_r)?;
        let lifted = lifted_residual_norm(&p_r, state.coupling(), &reduced, Some(r_w))?;
        let w = state.w();
        let lifted_p = w * &p_r * w.transpose();
        let explicit = are_residual_dense(&a, &sys.b, &sys.c, &sys.r_weight, &lifted_p).norm();
        out.push(ResidualSample {
            dim: state.dim(),
            pure,
            lifted,
            explicit,
        });
        if explicit / scale <= tol || state.blocks() >= max_blocks {
            return Ok(());
        }
        let sigma = state.next_shift(None)?;
        let added = match kind {
            Projection::Galerkin => expand_galerkin(&mut state, sys, sigma)?,
            Projection::PetrovGalerkin => expand_petrov(&mut state, sys, sigma)?,
        };
        if added == 0 {
            return Ok(());
        }
    }
}
