//! Semi-infinite integrals `∫_0^∞ g(r) J_ν(r)² dr` with `g` smooth and
//! slowly decaying.
//!
//! The head is integrated block by block between consecutive zeros of `J_ν`.
//! Beyond the last zero `A` the square is split as `J² = m + (J² - m)` where
//! `m = ½(J² + Y²)` is the non-oscillating large-argument mean. The mean part
//! is integrated on `[A, ∞)` directly; the residual `½ M² cos 2θ` changes sign
//! every quarter period of `J`, so its half-period block integrals form an
//! alternating series that is summed with the Euler transform.

use std::f64::consts::PI;

use super::bessel::{jn_half, mean_square, phase, zeros};
use crate::error::{Error, Result};
use crate::params::QuadratureSpec;
use crate::quad;

const RESIDUAL_BLOCKS: usize = 24;

/// Breakdown of an oscillatory Bessel-square integral.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselSqIntegral {
    pub value: f64,
    pub abs_err: f64,
    /// Contribution from `[0, A]`.
    pub head: f64,
    /// `∫_A^∞ g m`.
    pub tail_mean: f64,
    /// Euler-summed oscillating residual on `[A, ∞)`.
    pub tail_residual: f64,
    /// Partial sums over the head's zero-to-zero blocks.
    pub block_partial_sums: Vec<f64>,
}

/// `∫_0^∞ g(r) J_{d/2}(r)² dr`.
pub fn integrate_bessel_sq<G: Fn(f64) -> f64>(
    d: usize,
    g: G,
    spec: &QuadratureSpec,
) -> Result<BesselSqIntegral> {
    let nu = d as f64 / 2.0;
    let min_start = 40.0 + nu * nu;
    let mut n_zeros = spec.tail_zero_blocks;
    let mut zs = zeros(d, n_zeros);
    while *zs.last().unwrap_or(&0.0) < min_start {
        n_zeros += 8;
        zs = zeros(d, n_zeros);
    }
    let f = |r: f64| {
        let j = jn_half(d, r);
        g(r) * j * j
    };
    let block_tol = spec.abs_tol / (n_zeros + RESIDUAL_BLOCKS + 2) as f64;
    let mut partial = Vec::with_capacity(zs.len());
    let mut head = 0.0;
    let mut err = 0.0;
    let mut left = 0.0;
    for &z in &zs {
        let r = quad::integrate(&f, left, z, block_tol, spec.rel_tol, spec.max_subdivisions);
        if !r.value.is_finite() {
            return Err(Error::Numerical(format!("non-finite block on [{left}, {z}]")));
        }
        head += r.value;
        err += r.abs_err;
        partial.push(head);
        left = z;
    }
    let a = left;

    let mean_part = quad::integrate_to_infinity(
        |r| g(r) * mean_square(d, r),
        a,
        block_tol,
        spec.rel_tol,
        spec.max_subdivisions,
    );
    if !mean_part.value.is_finite() {
        return Err(Error::Numerical("tail mean diverged".into()));
    }
    err += mean_part.abs_err;

    let residual = |r: f64| {
        let j = jn_half(d, r);
        g(r) * (j * j - mean_square(d, r))
    };
    // J vanishes at a, so θ(a) sits at an odd multiple of π/2; residual
    // sign changes follow at θ(a) + π/4 + kπ/2.
    let theta_a = phase(d, a);
    let solve_phase = |target: f64, guess: f64| {
        let mut x = guess;
        for _ in 0..30 {
            let h = 1e-6 * x;
            let dth = (phase(d, x + h) - phase(d, x - h)) / (2.0 * h);
            let step = (phase(d, x) - target) / dth;
            x -= step;
            if step.abs() < 1e-14 * x {
                break;
            }
        }
        x
    };
    let mut edges = Vec::with_capacity(RESIDUAL_BLOCKS + 2);
    edges.push(a);
    let mut guess = a + PI / 4.0;
    for k in 0..=RESIDUAL_BLOCKS {
        let x = solve_phase(theta_a + PI / 4.0 + k as f64 * PI / 2.0, guess);
        edges.push(x);
        guess = x + PI / 2.0;
    }
    let first = quad::integrate(
        residual,
        edges[0],
        edges[1],
        block_tol,
        spec.rel_tol,
        spec.max_subdivisions,
    );
    err += first.abs_err;
    let terms: Vec<f64> = edges[1..]
        .windows(2)
        .map(|w| {
            let r = quad::integrate(
                residual,
                w[0],
                w[1],
                block_tol,
                spec.rel_tol,
                spec.max_subdivisions,
            );
            err += r.abs_err;
            r.value
        })
        .collect();
    let full = euler_sum(&terms);
    let shorter = euler_sum(&terms[..terms.len() - 1]);
    err += (full - shorter).abs();
    let tail_residual = first.value + full;

    let value = head + mean_part.value + tail_residual;
    Ok(BesselSqIntegral {
        value,
        abs_err: err,
        head,
        tail_mean: mean_part.value,
        tail_residual,
        block_partial_sums: partial,
    })
}

/// Euler transform of an alternating series given its terms: binomial
/// averaging of the partial sums.
pub(crate) fn euler_sum(terms: &[f64]) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let mut row: Vec<f64> = terms
        .iter()
        .scan(0.0, |s, t| {
            *s += t;
            Some(*s)
        })
        .collect();
    while row.len() > 1 {
        row = row.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    row[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gamma;

    /// Weber-Schafheitlin: ∫_0^∞ t^{-λ} J_ν(t)² dt.
    fn weber_schafheitlin(nu: f64, lambda: f64) -> f64 {
        gamma(lambda) * gamma(nu + (1.0 - lambda) / 2.0)
            / (2f64.powf(lambda)
                * gamma((1.0 + lambda) / 2.0).powi(2)
                * gamma(nu + (1.0 + lambda) / 2.0))
    }

    #[test]
    fn euler_sums_alternating_harmonic() {
        let terms: Vec<f64> = (1..30)
            .map(|k| if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64)
            .collect();
        assert!((euler_sum(&terms) - 2f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn matches_closed_form_moments() {
        let spec = QuadratureSpec::default();
        for d in 3..=8 {
            let nu = d as f64 / 2.0;
            for &lambda in &[1.0, (d as f64) / 2.0, d as f64 - 1.0] {
                let got = integrate_bessel_sq(d, |r: f64| r.powf(-lambda), &spec).unwrap();
                let want = weber_schafheitlin(nu, lambda);
                assert!(
                    ((got.value - want) / want).abs() < 1e-9,
                    "d={d} λ={lambda}: {} vs {want} ({got:?})",
                    got.value
                );
            }
        }
    }

    #[test]
    fn block_partial_sums_are_cauchy() {
        let spec = QuadratureSpec::default();
        let d = 3;
        let r = integrate_bessel_sq(d, |x: f64| x.powi(1 - d as i32), &spec).unwrap();
        let diffs: Vec<f64> = r
            .block_partial_sums
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .collect();
        let n = diffs.len();
        assert!(diffs[n - 1] < diffs[n / 2]);
        assert!(diffs[n / 2] < diffs[n / 8]);
        assert!((r.value - r.block_partial_sums[n]).abs() < 1e-4 * r.value);
    }
}
