//! The simplex exponential integral φ: closed form, matrix exponential,
//! upper bounds and the uniform-simplex Monte Carlo oracle.

use critshe::rng::{Parallelism, StreamKey};
use critshe::simplex::{phi, phi_chain_bound, phi_closed_form, phi_matrix_exp, phi_mc_oracle, RateVector};

fn main() -> critshe::Result<()> {
    let cases = [
        vec![0.5, 1.0, 2.0, 4.0],
        vec![3.0, 3.0, 3.0],
        vec![1e-3, 2e-3, 5.0],
        vec![10.0, 20.0, 40.0, 80.0, 160.0],
    ];
    for (i, rates) in cases.into_iter().enumerate() {
        let a = RateVector::new(rates.clone())?;
        let mc = phi_mc_oracle(&a, 1_000_000, StreamKey::new(3, "phi").child("case", i as u64), Parallelism(1))?;
        println!("rates {rates:?}");
        println!("  phi           {:.12e}", phi(&a));
        match phi_closed_form(&a) {
            Some(v) => println!("  closed form   {v:.12e}"),
            None => println!("  closed form   (rejected: clustered or cancelling rates)"),
        }
        println!("  matrix exp    {:.12e}", phi_matrix_exp(&a));
        println!("  chain bound   {:.12e}", phi_chain_bound(&a, 1)?);
        println!("  simplex mc    {mc}");
    }
    Ok(())
}
