//! Galerkin rational Krylov on the heat problem, checked against the dense
//! Riccati solution and gain at every iterate.

use nalgebra::DMatrix;
use riccati_mor::harness::Reference;
use riccati_mor::krylov::{run, KrylovOptions, Projection};
use riccati_mor::problems::{assemble_system, PdeConfig};
use riccati_mor::reduction::ReducedModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = assemble_system(&PdeConfig::heat())?;
    println!("dense reference for n = {} ...", sys.n());
    let reference = Reference::new(&sys)?;

    let mut observer = |red: &ReducedModel, p_r: &DMatrix<f64>| reference.observe(red, p_r, &sys.r_weight);
    let out = run(&sys, &KrylovOptions::default(), Projection::Galerkin, &mut observer)?;

    println!("   r    R_P        E_K        E_G");
    for rec in &out.history.records {
        println!(
            "{:>4}    {:.3e}  {:.3e}  {:.3e}",
            rec.r,
            rec.residual,
            rec.gain_error.unwrap_or(f64::NAN),
            rec.h2_error.unwrap_or(f64::NAN)
        );
    }
    println!("poles:");
    for s in &out.shifts {
        println!("  {:.4e} {:+.4e}i", s.re, s.im);
    }
    let w = &out.model.w;
    let lifted = w * &out.solution.p_r * w.transpose();
    println!(
        "|W P_r W' - P|_F / |P|_F = {:.3e}",
        (&lifted - &reference.p).norm() / reference.p.norm()
    );
    Ok(())
}
