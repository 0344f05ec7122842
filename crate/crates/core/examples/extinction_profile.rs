//! Growth of `E[exp(κ² β_1(x))]` as `‖x‖ → 0`, i.e. in `τ = t/‖x‖²`, by
//! path Monte Carlo and by the radial backward equation, against the
//! exponent α = (d-2)/2 - sqrt(((d-2)/2)² - κ²).

use critshe::regimes::{extinction_profile, Budgets};
use critshe::rng::{Parallelism, StreamKey};

fn main() -> critshe::Result<()> {
    let par = Parallelism(std::thread::available_parallelism().map_or(1, |n| n.get()));
    let budgets = Budgets {
        exp_paths: 20_000,
        fk_pairs: 20_000,
        ..Budgets::default()
    };
    let taus: Vec<f64> = (0..7).map(|i| 10f64.powf(2.0 + i as f64 / 3.0)).collect();
    let p = extinction_profile(&taus, 0.4, 3, &budgets, StreamKey::new(9, "extinction"), par)?;
    let mc = p.report.series("exp_moment");
    let pde = p.report.series("exp_moment_radial");
    for (a, b) in mc.iter().zip(&pde) {
        println!("tau={:>9.2}  mc {}  radial {:.6}", a.x, a.estimate, b.estimate.value);
    }
    println!("alpha = {}", p.alpha);
    println!("slope (mc)     = {}", p.slope);
    println!("slope (radial) = {:.6}", p.radial_slope);
    for row in p.report.series("normalized_second_moment") {
        println!("t/R^2={:<4} E[u^2]/E[u]^2 = {}", row.x, row.estimate);
    }
    for f in &p.flags {
        println!("flag: {f}");
    }
    Ok(())
}
