//! Special functions and exact constants attached to the index-2 Riesz kernel.

mod bessel;
mod oscillatory;

pub use oscillatory::{integrate_bessel_sq, BesselSqIntegral};

pub(crate) use bessel::jn_half;

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::params::check_dimension;
use crate::quad;

/// Small-argument crossover of [`ball_fourier`], in units of `R‖ξ‖`.
pub const BALL_FOURIER_CROSSOVER: f64 = 1e-4;

/// `J_{d/2}(x)` for `x >= 0`.
pub fn bessel_j(d: usize, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("bessel argument must be finite, got {x}"));
    }
    if x < 0.0 {
        return domain(format!("bessel argument must be non-negative, got {x}"));
    }
    Ok(jn_half(d, x))
}

/// Positive zeros of `J_{d/2}`, in increasing order.
pub fn bessel_zeros(d: usize, count: usize) -> Vec<f64> {
    bessel::zeros(d, count)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Volume ω_d of the unit ball.
pub fn ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

/// Surface area S_{d-1} of the unit sphere.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// Density constant of the spectral measure of ‖x‖^{-2}:
/// `c_d = Γ((d-2)/2) / (4 π^{d/2})`.
pub fn riesz_spectral_constant(d: usize) -> Result<f64> {
    check_dimension(d)?;
    let df = d as f64;
    Ok(gamma((df - 2.0) / 2.0) / (4.0 * PI.powf(df / 2.0)))
}

/// Riesz composition constant `k_{α,β,d}` with
/// `∫ ‖x-z‖^{α-d} ‖z-y‖^{β-d} dz = k ‖x-y‖^{α+β-d}`.
pub fn riesz_composition_k(alpha: f64, beta: f64, d: usize) -> Result<f64> {
    let df = d as f64;
    if !(alpha > 0.0 && beta > 0.0 && alpha + beta < df) {
        return domain(format!(
            "composition needs 0 < alpha, beta and alpha+beta < d; got alpha={alpha}, beta={beta}, d={d}"
        ));
    }
    let num = gamma(alpha / 2.0) * gamma(beta / 2.0) * gamma((df - alpha - beta) / 2.0);
    let den = gamma((df - alpha) / 2.0) * gamma((df - beta) / 2.0) * gamma((alpha + beta) / 2.0);
    Ok(PI.powf(df / 2.0) * num / den)
}

/// Fourier transform of the indicator of `B_R` at radial frequency `rho = ‖ξ‖`.
pub fn ball_fourier_radial(d: usize, r: f64, rho: f64) -> f64 {
    let z = r * rho;
    if z < BALL_FOURIER_CROSSOVER {
        ball_volume(d) * r.powi(d as i32) * (1.0 - z * z / (2.0 * (d as f64 + 2.0)))
    } else {
        let nu = d as f64 / 2.0;
        (2.0 * PI * r).powf(nu) * rho.powf(-nu) * jn_half(d, z)
    }
}

/// `∫_{B_R} e^{-i x·ξ} dx` for ξ ∈ R^d (d = `xi.len()`).
pub fn ball_fourier(r: f64, xi: &[f64]) -> Result<f64> {
    check_dimension(xi.len())?;
    if !(r > 0.0) {
        return domain(format!("radius must be positive, got {r}"));
    }
    Ok(ball_fourier_radial(xi.len(), r, norm(xi)))
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `E ‖x + Z‖^{-2}` with `Z ~ N(0, 2s I_d)`.
///
/// Uses `E[1/X] = ∫_0^∞ E e^{-uX} du` for the scaled non-central χ² law and
/// the substitution that turns it into
/// `(1/(2s)) ∫_0^1 y^{d-3} exp(-‖x‖²(1-y²)/(4s)) dy`, a smooth integrand.
pub fn inv_sq_gaussian_moment(x: &[f64], s: f64) -> Result<f64> {
    let d = x.len();
    check_dimension(d)?;
    if !(s > 0.0 && s.is_finite()) {
        return domain(format!("variance parameter s must be positive, got {s}"));
    }
    Ok(inv_sq_moment_radial(d, norm(x), s))
}

pub(crate) fn inv_sq_moment_radial(d: usize, r: f64, s: f64) -> f64 {
    let sigma2 = 2.0 * s;
    let lambda = r * r / (2.0 * sigma2);
    let p = d as i32 - 3;
    let f = |y: f64| y.powi(p) * (-lambda * (1.0 - y * y)).exp();
    // the integrand concentrates near y = 1 when lambda is large
    let split = if lambda > 4.0 { 1.0 - 4.0 / lambda } else { 0.0 };
    let mut total = 0.0;
    if split > 0.0 {
        total += quad::integrate(f, 0.0, split, 1e-300, 1e-12, 200).value;
    }
    total += quad::integrate(f, split, 1.0, 1e-300, 1e-12, 200).value;
    total / sigma2
}

/// `E β_t(x) = ∫_0^t E‖x + √2 W_s‖^{-2} ds`, by nested quadrature.
pub fn mean_beta(x: &[f64], t: f64) -> Result<f64> {
    let d = x.len();
    check_dimension(d)?;
    let r = norm(x);
    if !(r > 0.0) {
        return domain("E β_t(0) is infinite");
    }
    if !(t > 0.0) {
        return domain(format!("time must be positive, got {t}"));
    }
    // integrate in log s; below s0 << r² the moment is 1/r² to first order
    let s0 = (r * r * 1e-10).min(t * 1e-6);
    let lo = s0.ln();
    let g = |u: f64| {
        let s = u.exp();
        s * inv_sq_moment_radial(d, r, s)
    };
    let res = quad::integrate(g, lo, t.ln(), 1e-14, 1e-11, 400);
    if !res.converged {
        return Err(Error::Numerical(format!(
            "E beta quadrature did not converge: {:?}",
            res
        )));
    }
    Ok(res.value + s0 / (r * r))
}
