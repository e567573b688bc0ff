//! Adjoint snapshots by implicit Euler, POD modes, and the residual of the
//! POD surrogate as the basis grows.

use riccati_mor::integrate::integrate_adjoint;
use riccati_mor::metrics::relative_residual;
use riccati_mor::problems::{assemble_system, PdeConfig};
use riccati_mor::reduction::PodBasis;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = assemble_system(&PdeConfig::heat())?;
    let snaps = integrate_adjoint(&sys, 0.5, 500)?;
    println!("{} snapshots of length {}", snaps.len(), sys.n());

    let pod = PodBasis::new(&snaps)?;
    let s = &pod.singular_values;
    println!("numerical rank {}", pod.rank());
    for i in (0..pod.rank()).step_by(4) {
        println!("  sigma_{:<2} / sigma_1 = {:.3e}", i + 1, s[i] / s[0]);
    }

    println!("   r    R_P");
    for r in (2..=pod.rank()).step_by(2) {
        let red = pod.reduce(&sys, r)?;
        let p_r = red.solve_are(&sys.r_weight)?.p;
        println!("{r:>4}    {:.3e}", relative_residual(&sys, &red.w, &p_r)?);
    }
    Ok(())
}
