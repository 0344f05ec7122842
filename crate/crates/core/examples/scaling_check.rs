//! Brownian scaling checks: the n = 1 variance identity, invariance of the
//! law of β, the n = 2 identity by Feynman-Kac, collapse of the normalised
//! second moment at fixed t/R², and non-degeneracy of the fixed-point limit.

use critshe::regimes::{scaling_check, Budgets};
use critshe::rng::{Parallelism, StreamKey};
use critshe::ModelParams;

fn main() -> critshe::Result<()> {
    let par = Parallelism(std::thread::available_parallelism().map_or(1, |n| n.get()));
    let budgets = Budgets {
        fk_pairs: 20_000,
        ks_paths: 20_000,
        ..Budgets::default()
    };
    let params = ModelParams::new(3, 0.4, 1.0, 1.0)?;
    let rep = scaling_check(&params, &[0.25, 1.0], &budgets, StreamKey::new(5, "scaling"), par)?;
    for r in &rep.rows {
        println!("{}={:<6} {:<28} {}", r.label, r.x, r.statistic, r.estimate);
    }
    for v in &rep.verdicts {
        println!("[{}] {} (margin {:.3e})", if v.pass { "PASS" } else { "FAIL" }, v.property, v.margin);
    }
    Ok(())
}
