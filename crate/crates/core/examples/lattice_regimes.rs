//! Lattice ensemble of the regularised equation on an N³ torus, read at the
//! three regime checkpoints. Usage: `lattice_regimes [N] [replicas]`.

use critshe::lattice::LatticeConfig;
use critshe::regimes::{default_lattice_regimes, lattice_trichotomy};
use critshe::rng::{Parallelism, StreamKey};

fn main() -> critshe::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(64, |s| s.parse().expect("N"));
    let replicas: usize = args.next().map_or(100, |s| s.parse().expect("replicas"));
    let par = Parallelism(std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = LatticeConfig {
        n,
        ..LatticeConfig::default()
    };
    let specs = default_lattice_regimes(cfg.dt);
    let start = std::time::Instant::now();
    let (ens, reports) = lattice_trichotomy(&cfg, &specs, replicas, StreamKey::new(4, "lattice"), par)?;
    println!("N={n}, {replicas} replicas, {} ball averages, {:.1?}", ens.records.len(), start.elapsed());
    for rep in &reports {
        println!("{}", rep.regime);
        for r in &rep.rows {
            println!("  {}={:<8.4} {:<10} {}", r.label, r.x, r.statistic, r.estimate);
        }
        for v in &rep.verdicts {
            println!("  [{}] {}", if v.pass { "PASS" } else { "FAIL" }, v.property);
        }
    }
    Ok(())
}
