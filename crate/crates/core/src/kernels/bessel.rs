//! Bessel functions of the first kind at integer and half-integer order.
//!
//! Orders are passed as `twice_nu = 2ν` so that `J_{d/2}` is `jn_half(d, x)`.
//!
//! * half-integer order: power series for `x <= 8` or `x` below the order,
//!   otherwise upward recurrence from `sin x / x`, stable once `x` exceeds
//!   the order.
//! * integer order on `[0, 2]`: power series.
//! * integer order on `(2, 20)`: Miller backward recurrence normalized by
//!   `J0 + 2 Σ J_{2k} = 1`.
//! * integer order on `[20, ∞)`: Hankel expansions of `J0`, `J1` followed by
//!   forward recurrence.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SERIES_LIMIT: f64 = 8.0;
const INTEGER_SERIES_LIMIT: f64 = 2.0;
const HANKEL_LIMIT: f64 = 20.0;

/// Γ(ν+1) for ν = twice_nu / 2, exact product form.
fn gamma_order_plus_one(twice_nu: usize) -> f64 {
    // Γ(1) = 1, Γ(3/2) = √π/2, Γ(z+1) = z Γ(z)
    let mut g = if twice_nu % 2 == 0 { 1.0 } else { 0.5 * PI.sqrt() };
    let mut z = if twice_nu % 2 == 0 { 1.0 } else { 1.5 };
    let target = twice_nu as f64 / 2.0 + 1.0;
    while z + 0.5 < target {
        g *= z;
        z += 1.0;
    }
    g
}

fn series(twice_nu: usize, x: f64) -> f64 {
    let nu = twice_nu as f64 / 2.0;
    let half = 0.5 * x;
    let mut term = if twice_nu == 0 {
        1.0
    } else {
        (nu * half.ln() - gamma_order_plus_one(twice_nu).ln()).exp()
    };
    let q = half * half;
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Spherical recurrence for half-integer order `n + 1/2`.
fn half_integer_recurrence(twice_nu: usize, x: f64) -> f64 {
    let n = (twice_nu - 1) / 2;
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let out = if n == 0 {
        j0
    } else {
        let mut jm = j0;
        let mut j = s / (x * x) - c / x;
        for k in 1..n {
            let next = (2 * k + 1) as f64 / x * j - jm;
            jm = j;
            j = next;
        }
        j
    };
    (2.0 * x / PI).sqrt() * out
}

/// Hankel asymptotic expansion of J_0 or J_1 (x >= 20).
fn hankel_j01(order: usize, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        // k odd -> Q, k even -> P, with alternating signs in pairs
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    let (s, c) = x.sin_cos();
    // chi = x - (2 order + 1) π / 4
    let (cos_chi, sin_chi) = if order == 0 {
        ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2)
    } else {
        ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2)
    };
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

fn miller(n: usize, x: f64) -> f64 {
    let top = 2 * ((n.max(x as usize) + 40) / 2);
    let mut jp = 0.0;
    let mut j = 1e-30;
    let mut even_sum = 0.0;
    let mut result = 0.0;
    for k in (1..=top).rev() {
        let jm = 2.0 * k as f64 / x * j - jp;
        jp = j;
        j = jm;
        let idx = k - 1;
        if idx == n {
            result = j;
        }
        if idx % 2 == 0 && idx > 0 {
            even_sum += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            even_sum *= 1e-250;
            result *= 1e-250;
        }
    }
    result / (j + even_sum)
}

fn integer_order(n: usize, x: f64) -> f64 {
    if x < HANKEL_LIMIT {
        return miller(n, x);
    }
    let j0 = hankel_j01(0, x);
    if n == 0 {
        return j0;
    }
    let mut jm = j0;
    let mut j = hankel_j01(1, x);
    for k in 1..n {
        let next = 2.0 * k as f64 / x * j - jm;
        jm = j;
        j = next;
    }
    j
}

/// J_ν(x) for ν = twice_nu / 2 and x >= 0.
pub(crate) fn jn_half(twice_nu: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if twice_nu == 0 { 1.0 } else { 0.0 };
    }
    let nu = twice_nu as f64 / 2.0;
    if twice_nu % 2 == 1 {
        if x <= SERIES_LIMIT || x < nu + 1.0 {
            series(twice_nu, x)
        } else {
            half_integer_recurrence(twice_nu, x)
        }
    } else if x <= INTEGER_SERIES_LIMIT {
        series(twice_nu, x)
    } else {
        integer_order(twice_nu / 2, x)
    }
}

/// Derivative J'_ν = J_{ν-1} - (ν/x) J_ν.
pub(crate) fn jn_half_derivative(twice_nu: usize, x: f64) -> f64 {
    let nu = twice_nu as f64 / 2.0;
    if twice_nu == 0 {
        -jn_half(2, x)
    } else if twice_nu >= 2 {
        jn_half(twice_nu - 2, x) - nu / x * jn_half(twice_nu, x)
    } else {
        // J_{-1/2}(x) = sqrt(2/(πx)) cos x
        (2.0 / (PI * x)).sqrt() * x.cos() - nu / x * jn_half(twice_nu, x)
    }
}

/// The first `count` positive zeros of J_ν, by sign-change scanning and
/// Newton polishing. Consecutive zeros are at least 2.5 apart for ν >= 0.
pub(crate) fn zeros(twice_nu: usize, count: usize) -> Vec<f64> {
    let nu = twice_nu as f64 / 2.0;
    let mut out = Vec::with_capacity(count);
    let mut lo = nu.max(0.5);
    let step = 0.2;
    let mut f_lo = jn_half(twice_nu, lo);
    while out.len() < count {
        let hi = lo + step;
        let f_hi = jn_half(twice_nu, hi);
        if f_lo == 0.0 || f_lo.signum() != f_hi.signum() {
            let z = polish_zero(twice_nu, lo, hi);
            out.push(z);
            lo = z + 2.5;
            f_lo = jn_half(twice_nu, lo);
        } else {
            lo = hi;
            f_lo = f_hi;
        }
    }
    out
}

fn polish_zero(twice_nu: usize, mut a: f64, mut b: f64) -> f64 {
    let mut fa = jn_half(twice_nu, a);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let fm = jn_half(twice_nu, m);
        if fa.signum() == fm.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if b - a < 1e-6 {
            break;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..8 {
        let step = jn_half(twice_nu, x) / jn_half_derivative(twice_nu, x);
        x -= step;
        if step.abs() < 1e-16 * x {
            break;
        }
    }
    x
}

/// Large-argument mean of J_ν² over its oscillation, ½(J_ν² + Y_ν²).
pub(crate) fn mean_square(twice_nu: usize, x: f64) -> f64 {
    let nu = twice_nu as f64 / 2.0;
    let mu = 4.0 * nu * nu;
    let y = 1.0 / (2.0 * x).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..12 {
        let odd = (2 * k - 1) as f64;
        term *= (odd / (2 * k) as f64) * (mu - odd * odd) * y;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    sum / (PI * x)
}

/// Large-argument phase θ_ν with J_ν = M cos θ_ν.
pub(crate) fn phase(twice_nu: usize, x: f64) -> f64 {
    let nu = twice_nu as f64 / 2.0;
    let mu = 4.0 * nu * nu;
    let z = 4.0 * x;
    x - (nu / 2.0 + 0.25) * PI
        + (mu - 1.0) / (2.0 * z)
        + (mu - 1.0) * (mu - 25.0) / (6.0 * z.powi(3))
        + (mu - 1.0) * (mu * mu - 114.0 * mu + 1073.0) / (5.0 * z.powi(5))
}
