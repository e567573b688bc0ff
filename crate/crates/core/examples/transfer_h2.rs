//! H2 norms through Gramians and relative H2 errors of POD and BT surrogates.

use riccati_mor::integrate::integrate_adjoint;
use riccati_mor::metrics::H2Reference;
use riccati_mor::problems::{assemble_system, PdeConfig};
use riccati_mor::reduction::{BalancedTruncation, PodBasis};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = assemble_system(&PdeConfig::convection_diffusion())?;
    let h2 = H2Reference::new(&sys)?;
    println!("|G|_H2 = {:.6e}", h2.norm());

    let bt = BalancedTruncation::new(&sys)?;
    let pod = PodBasis::new(&integrate_adjoint(&sys, 0.5, 500)?)?;
    println!("   r    E_G (BT)    E_G (POD)");
    for r in [2, 4, 6, 8, 10] {
        let e_bt = h2.relative_error(&bt.reduce(&sys, r)?)?;
        let e_pod = h2.relative_error(&pod.reduce(&sys, r)?)?;
        println!("{r:>4}    {e_bt:.3e}   {e_pod:.3e}");
    }
    Ok(())
}
