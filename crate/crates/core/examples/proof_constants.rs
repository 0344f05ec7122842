//! Constants of the higher-chaos summability argument across dimensions,
//! and the flip of the summability flag at the critical coupling.

use critshe::fourier::proof_constants;
use critshe::ModelParams;

fn main() -> critshe::Result<()> {
    println!("{:>3} {:>3} {:>7} {:>7} {:>12} {:>12}", "d", "m0", "gamma0", "gammaJ", "k_J", "k_K");
    for d in 3..=12 {
        let c = proof_constants(d, 0.5 * ModelParams::critical_kappa(d))?;
        println!(
            "{:>3} {:>3} {:>7} {:>7} {:>12.6} {:>12.6}",
            d, c.m0, c.gamma0, c.gamma_j, c.k_j, c.k_k
        );
    }
    let kc = ModelParams::critical_kappa(3);
    for kappa in [0.9 * kc, kc * (1.0 - 1e-12), kc, 1.1 * kc] {
        let c = proof_constants(3, kappa)?;
        println!("d=3 kappa={kappa:.15}: ratio {:.12}, summable {}", c.geometric_ratio, c.summable);
    }
    Ok(())
}
