//! Assembles both finite-difference test problems and evaluates their transfer functions.

use num_complex::Complex64;
use riccati_mor::problems::{assemble_system, eval_transfer, PdeConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    for (name, cfg) in [
        ("heat", PdeConfig::heat()),
        ("convection-diffusion", PdeConfig::convection_diffusion()),
    ] {
        let sys = assemble_system(&cfg)?;
        let b_nodes = sys.b.iter().filter(|&&v| v != 0.0).count();
        let c_nodes = sys.c.iter().filter(|&&v| v != 0.0).count();
        println!(
            "{name}: n = {}, nnz(A) = {}, |Omega_B| = {b_nodes} nodes, |Omega_C| = {c_nodes} nodes",
            sys.n(),
            sys.a.nnz()
        );
        println!("  symmetric A: {}", sys.a.is_symmetric());
        println!("  x'(A + A')x <= {:.3e} |x|^2", sys.passivity_margin());
        for omega in [0.0, 1.0, 10.0, 100.0] {
            let g = eval_transfer(&sys, Complex64::new(0.0, omega))?[(0, 0)];
            println!("  G({omega:>5}i) = {:+.6e} {:+.6e}i", g.re, g.im);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
