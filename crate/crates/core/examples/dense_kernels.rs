//! Schur form, Lyapunov and Riccati solves, and the SVD on a small random system.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riccati_mor::dense::{are_residual, real_schur, solve_dense_are, solve_lyapunov, thin_svd};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 6;
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    // shift the spectrum into the left half-plane
    let abscissa = real_schur(&a)?.spectral_abscissa();
    a -= DMatrix::identity(n, n) * (abscissa + 1.0);
    let b = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
    let c = DMatrix::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0));
    let r = DMatrix::identity(2, 2);

    let schur = real_schur(&a)?;
    println!("eigenvalues of A:");
    for z in schur.eigenvalues() {
        println!("  {:+.4} {:+.4}i", z.re, z.im);
    }
    let defect = (&schur.q * &schur.t * schur.q.transpose() - &a).norm();
    println!("|Q T Q' - A|_F = {defect:.2e}");

    let x = solve_lyapunov(&a, &(&b * b.transpose()))?;
    let lyap = (&a * &x + &x * a.transpose() + &b * b.transpose()).norm();
    println!("reachability Gramian residual = {lyap:.2e}");

    let p = solve_dense_are(&a, &b, &c, &r)?;
    let res = are_residual(&a, &b, &c, &r, &p)?.norm() / c.norm_squared();
    println!("ARE relative residual = {res:.2e}");

    let svd = thin_svd(&x)?;
    println!("Gramian singular values: {:.3e}", svd.s.transpose());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
