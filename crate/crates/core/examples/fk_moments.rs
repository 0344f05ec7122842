//! Moments of `β_t(x) = ∫_0^t ds / ‖x + √2 W_s‖²` and the exponential
//! moment `E[exp(κ² β_t(x))]`, with its reliability diagnostics and the
//! deterministic radial profile for comparison.

use critshe::feynman_kac::{beta_moments, exp_moment, exp_moment_radial, PathConfig, RadialGrid};
use critshe::kernels::mean_beta;
use critshe::rng::{Parallelism, StreamKey};

fn main() -> critshe::Result<()> {
    let par = Parallelism(std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = PathConfig::default();
    let x = [1.0, 0.0, 0.0];
    let m = beta_moments(&x, 1.0, 4, 100_000, &cfg, StreamKey::new(11, "moments"), par)?;
    for (n, e) in m.iter().enumerate() {
        println!("E[beta^{n}] = {e}");
    }
    println!("exact E[beta] = {:.10}", mean_beta(&x, 1.0)?);

    for (r, kappa) in [(1.0, 0.4), (0.1, 0.4), (0.1, 0.2)] {
        let x = [r, 0.0, 0.0];
        let em = exp_moment(&x, 1.0, kappa, 100_000, &cfg, StreamKey::new(11, "exp"), par)?;
        let tau = 1.0 / (r * r);
        let radial = exp_moment_radial(3, kappa, &[tau], &RadialGrid::default())?[0];
        println!(
            "|x|={r} kappa={kappa}: mc {}  radial {radial:.6}  jensen {:.6}  top-10 share {:.4}",
            em.estimate, em.jensen_bound, em.top10_share
        );
        for s in &em.strata {
            println!("    min distance in [{}, {}): {} paths, mean {:.4}", s.lo, s.hi, s.count, s.mean);
        }
        for f in &em.flags {
            println!("    flag: {f}");
        }
    }
    Ok(())
}
