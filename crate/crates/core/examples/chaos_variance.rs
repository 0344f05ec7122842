//! Variance of the first two chaoses of `u_1(B_1)` computed three ways:
//! Fourier quadrature (n = 1), Fourier Monte Carlo (n = 2) and
//! Feynman-Kac Monte Carlo over Brownian paths.

use critshe::feynman_kac::{chaos_variance_fk, PairBudget, PathConfig};
use critshe::fourier::{
    first_chaos_variance_exact, first_chaos_variance_pair_quadrature, nth_chaos_fourier_mc_detailed,
    ChaosVarianceSpec,
};
use critshe::rng::{Parallelism, StreamKey};
use critshe::{ModelParams, QuadratureSpec};

fn main() -> critshe::Result<()> {
    let par = Parallelism(std::thread::available_parallelism().map_or(1, |n| n.get()));
    let params = ModelParams::new(3, 0.4, 1.0, 1.0)?;
    let quad = QuadratureSpec::default();
    let budget = PairBudget {
        n_pairs: 50_000,
        paths_per_pair: 1,
    };
    let cfg = PathConfig::default();

    let v1 = first_chaos_variance_exact(&params, &quad)?;
    let v1_pairs = first_chaos_variance_pair_quadrature(&params)?;
    let v1_fk = chaos_variance_fk(1, &params, budget, &cfg, StreamKey::new(1, "fk/1"), par)?;
    println!("n=1  fourier {v1:.10}  pair quadrature {v1_pairs:.10}  fk {v1_fk}");

    let spec = ChaosVarianceSpec {
        n: 2,
        params,
        quad,
        mc_samples: 200_000,
    };
    let v2 = nth_chaos_fourier_mc_detailed(&spec, StreamKey::new(1, "fourier/2"), par)?;
    let v2_fk = chaos_variance_fk(2, &params, budget, &cfg, StreamKey::new(1, "fk/2"), par)?;
    println!(
        "n=2  fourier-mc {} (ESS {:.0})  fk {}  z={:.2}",
        v2.estimate,
        v2.effective_samples,
        v2_fk,
        v2.estimate.z_score(&v2_fk)
    );
    Ok(())
}
