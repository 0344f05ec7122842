//! Chaos variances of `u_1(B_R)` normalised by `R^{2d-2}` along a radius
//! sweep: the first chaos approaches σ², the second dies out.

use critshe::regimes::{clt_convergence_table, Budgets};
use critshe::rng::{Parallelism, StreamKey};
use critshe::ModelParams;

fn main() -> critshe::Result<()> {
    let par = Parallelism(std::thread::available_parallelism().map_or(1, |n| n.get()));
    let budgets = Budgets {
        fourier_mc_samples: 100_000,
        ..Budgets::default()
    };
    let params = ModelParams::new(3, 0.4, 1.0, 1.0)?;
    let radii = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let rep = clt_convergence_table(&radii, &params, &budgets, StreamKey::new(2, "clt"), par)?;
    println!("{:>4} {:>12} {:>22} {:>10}", "R", "var1/R^4", "var2/R^4", "dominance");
    let v1 = rep.series("var1_over_r2d2");
    let v2 = rep.series("var2_over_r2d2");
    let dom = rep.series("first_chaos_dominance");
    for i in 0..radii.len() {
        println!(
            "{:>4} {:>12.6} {:>12.6} ± {:.1e} {:>10.6}",
            radii[i], v1[i].estimate.value, v2[i].estimate.value, v2[i].estimate.stderr, dom[i].estimate.value
        );
    }
    println!("sigma^2 = {:.6}", rep.series("sigma2")[0].estimate.value);
    for v in &rep.verdicts {
        println!("[{}] {}", if v.pass { "PASS" } else { "FAIL" }, v.property);
    }
    Ok(())
}
