//! σ² from the Fourier radial integral and from the real-space double
//! integral over the unit ball, in a few dimensions.

use critshe::fourier::sigma_squared;
use critshe::rng::{Parallelism, StreamKey};
use critshe::QuadratureSpec;

fn main() -> critshe::Result<()> {
    let par = Parallelism(std::thread::available_parallelism().map_or(1, |n| n.get()));
    let quad = QuadratureSpec::default();
    for d in [3, 4, 5] {
        let s = sigma_squared(d, 1.0, &quad, 2_000_000, StreamKey::new(7, "sigma"), par)?;
        println!(
            "d={d}  fourier {:.8}  real-space {}  agree={}",
            s.fourier,
            s.real_space,
            s.agree()
        );
    }
    // σ² is quadratic in κ
    let s = critshe::fourier::sigma_squared_fourier(3, 0.4, &quad)?;
    println!("d=3, kappa=0.4: sigma^2 = {s:.12}");
    Ok(())
}
