//! Galerkin and Petrov-Galerkin rational Krylov on the convection-dominated
//! problem. The oblique projection may lose stability of A_r; the run then
//! stops with the history collected so far.

use riccati_mor::krylov::{gark, pgark, KrylovOptions};
use riccati_mor::problems::{assemble_system, PdeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = assemble_system(&PdeConfig::convection_diffusion())?;
    let opts = KrylovOptions::default();

    let g = gark(&sys, &opts)?;
    println!("gark converged at r = {} (R_P = {:.2e})", g.model.r(), g.solution.residual);

    match pgark(&sys, &opts) {
        Ok(run) => println!(
            "pgark converged at r = {}, |W'V - I|_F = {:.1e}",
            run.model.r(),
            run.model.biorthogonality_defect()
        ),
        Err(fail) => {
            println!("pgark stopped: {}", fail.error);
            for rec in &fail.history.records {
                println!("  r = {:>3}  R_P = {:.3e}", rec.r, rec.residual);
            }
            for ev in &fail.history.events {
                println!("  event: {ev}");
            }
        }
    }

    let b = pgark(&sys, &KrylovOptions { use_b_variant: true, ..opts });
    match b {
        Ok(run) => println!("pgark (closed-loop poles) converged at r = {}", run.model.r()),
        Err(fail) => println!("pgark (closed-loop poles) stopped: {}", fail.error),
    }
    Ok(())
}
