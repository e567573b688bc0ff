//! Square-root balanced truncation: Hankel singular values, balancing of the
//! reduced Gramians, and the sampled H-infinity error against twice the tail.

use nalgebra::DMatrix;
use num_complex::Complex64;
use riccati_mor::dense::solve_lyapunov;
use riccati_mor::metrics::relative_residual;
use riccati_mor::problems::{assemble_system, eval_transfer, PdeConfig};
use riccati_mor::reduction::BalancedTruncation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = assemble_system(&PdeConfig::heat())?;
    let bt = BalancedTruncation::new(&sys)?;
    let h = &bt.hankel;
    println!("rank {}; leading Hankel values {:.3e}", bt.rank(), h.rows(0, 6).transpose());

    let freqs: Vec<f64> = (0..60).map(|k| 10f64.powf(-2.0 + k as f64 * 0.1)).collect();
    let full: Vec<Complex64> = freqs
        .iter()
        .map(|&w| eval_transfer(&sys, Complex64::new(0.0, w)).map(|g| g[(0, 0)]))
        .collect::<Result<_, _>>()?;

    println!("   r    R_P        balance    sup|G - G_r|   2 * tail");
    for r in 1..=bt.rank() {
        let red = bt.reduce(&sys, r)?;
        let p_r = red.solve_are(&sys.r_weight)?.p;
        let reach = solve_lyapunov(&red.a_r, &(&red.b_r * red.b_r.transpose()))?;
        let obs = solve_lyapunov(&red.a_r.transpose(), &(red.c_r.transpose() * &red.c_r))?;
        let sigma = DMatrix::from_diagonal(&h.rows(0, r).into_owned());
        let balance = ((&reach - &sigma).norm() + (&obs - &sigma).norm()) / sigma.norm();
        let mut sup: f64 = 0.0;
        for (w, g) in freqs.iter().zip(&full) {
            let gr = red.transfer(Complex64::new(0.0, *w))?[(0, 0)];
            sup = sup.max((g - gr).norm());
        }
        let tail: f64 = h.iter().skip(r).sum();
        println!(
            "{r:>4}    {:.3e}  {balance:.2e}   {sup:.3e}      {:.3e}",
            relative_residual(&sys, &red.w, &p_r)?,
            2.0 * tail
        );
    }
    Ok(())
}
