//! The simplex exponential integral
//! `φ(a) = ∫_{S_n} exp(-Σ a_i w_i) dw` over `S_n = {w ≥ 0, Σ w_i ≤ 1}`.
//!
//! `φ(a)·Π a_i` is the CDF at 1 of a sum of independent exponentials with
//! rates `a_i`, which gives a partial-fraction closed form for distinct
//! rates. That form cancels badly when rates cluster or are all small, so
//! those inputs go through the matrix exponential of the lower bidiagonal
//! generator instead: with `x_0 ≡ 1` and `x_k' = -a_k x_k + x_{k-1}`,
//! `x_k(0) = 0`, one has `φ(a) = x_n(1)`.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{domain, Result};
use crate::rng::{blocks, Parallelism, StreamKey};
use crate::stats::{Estimate, Method, RunningStats};

/// Relative rate gap below which the closed form is abandoned.
pub const CLOSED_FORM_MIN_GAP: f64 = 1e-6;
/// Largest tolerated ratio of summed term magnitudes to the result in the
/// closed form, about four lost digits.
const CLOSED_FORM_MAX_CANCELLATION: f64 = 1e4;

const MC_BLOCK: usize = 1 << 16;

/// Ordered nonnegative rates `a_i = ‖η_i‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector {
    rates: Vec<f64>,
}

impl RateVector {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return domain("rate vector must be non-empty");
        }
        if let Some(a) = rates.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return domain(format!("rates must be finite and non-negative, got {a}"));
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn n(&self) -> usize {
        self.rates.len()
    }

    /// All rates multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.rates.iter().map(|a| a * c).collect())
    }
}

fn inv_factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc / k as f64)
}

/// `φ(rates)`, always in `(0, 1/n!]`.
pub fn phi(rates: &RateVector) -> f64 {
    let a = rates.rates();
    let cap = inv_factorial(a.len());
    if a.iter().all(|&x| x == 0.0) {
        return cap;
    }
    let v = phi_closed_form(rates).unwrap_or_else(|| phi_matrix_exp(rates));
    v.min(cap)
}

/// Partial-fraction form, or `None` when the rates are zero, clustered, or
/// the sum cancels too much to trust.
pub fn phi_closed_form(rates: &RateVector) -> Option<f64> {
    let a = rates.rates();
    if a.iter().any(|&x| x == 0.0) {
        return None;
    }
    for i in 0..a.len() {
        for j in 0..i {
            if (a[i] - a[j]).abs() < CLOSED_FORM_MIN_GAP * a[i].max(a[j]) {
                return None;
            }
        }
    }
    let prod: f64 = a.iter().product();
    let mut num = 1.0;
    let mut magnitude = 1.0;
    for (i, &ai) in a.iter().enumerate() {
        let mut c = 1.0;
        for (j, &aj) in a.iter().enumerate() {
            if j != i {
                c *= aj / (aj - ai);
            }
        }
        let term = c * (-ai).exp();
        num -= term;
        magnitude += term.abs();
    }
    if !(num > 0.0) || magnitude > CLOSED_FORM_MAX_CANCELLATION * num {
        return None;
    }
    Some(num / prod)
}

/// `φ` as the `(n, 0)` entry of `exp(L)`, `L` the bidiagonal generator.
/// Scaling and squaring with a Taylor core; the squared matrices are
/// entrywise nonnegative so no cancellation occurs.
pub fn phi_matrix_exp(rates: &RateVector) -> f64 {
    let a = rates.rates();
    let m = a.len() + 1;
    let norm = a.iter().fold(1.0f64, |acc, &x| acc.max(x + 1.0));
    let squarings = (norm / 0.25).log2().ceil().max(0.0) as u32;
    let scale = 0.5f64.powi(squarings as i32);
    // lower-triangular generator, scaled
    let mut gen = vec![0.0; m * m];
    for k in 1..m {
        gen[k * m + k] = -a[k - 1] * scale;
        gen[k * m + k - 1] = scale;
    }
    let mut result = identity(m);
    let mut term = identity(m);
    for j in 1..40 {
        term = matmul(&term, &gen, m);
        for v in term.iter_mut() {
            *v /= j as f64;
        }
        let mut biggest = 0.0f64;
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
            biggest = biggest.max(t.abs());
        }
        if biggest < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result, m);
    }
    result[(m - 1) * m]
}

fn identity(m: usize) -> Vec<f64> {
    let mut id = vec![0.0; m * m];
    for i in 0..m {
        id[i * m + i] = 1.0;
    }
    id
}

/// Product of lower-triangular `m × m` matrices.
fn matmul(x: &[f64], y: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..=i {
            let xik = x[i * m + k];
            if xik == 0.0 {
                continue;
            }
            for j in 0..=k {
                out[i * m + j] += xik * y[k * m + j];
            }
        }
    }
    out
}

/// `(1 ∧ Π_{i≤k} a_i^{-1}) · φ(a_{k+1}, …, a_n)`, an upper bound for `φ(a)`.
pub fn phi_chain_bound(rates: &RateVector, k: usize) -> Result<f64> {
    let a = rates.rates();
    let n = a.len();
    if k < 1 || k >= n {
        return domain(format!("chain bound needs 1 <= k <= n-1, got k={k}, n={n}"));
    }
    if a[..k].iter().any(|&x| x == 0.0) {
        return domain("chain bound needs positive leading rates");
    }
    let head: f64 = a[..k].iter().product();
    let tail = RateVector::new(a[k..].to_vec())?;
    Ok((1.0f64).min(1.0 / head) * phi(&tail))
}

/// Uniform-simplex Monte Carlo estimate of `φ`: `w` is the first `n`
/// coordinates of a flat Dirichlet vector, and `φ = E[exp(-a·w)] / n!`.
pub fn phi_mc_oracle(
    rates: &RateVector,
    samples: usize,
    key: StreamKey,
    par: Parallelism,
) -> Result<Estimate> {
    if samples < 1000 {
        return domain(format!("simplex oracle needs at least 1000 samples, got {samples}"));
    }
    let a = rates.rates();
    let n = a.len();
    let vol = inv_factorial(n);
    let layout = blocks(samples, MC_BLOCK);
    let parts = par.map(layout.len(), |b| {
        let (_, len) = layout[b];
        let mut rng = key.stream(b as u64);
        let mut st = RunningStats::new();
        let mut e = vec![0.0; n + 1];
        for _ in 0..len {
            let mut total = 0.0;
            for v in e.iter_mut() {
                *v = rng.sample::<f64, _>(Exp1);
                total += *v;
            }
            let dot: f64 = a.iter().zip(&e).map(|(ai, ei)| ai * ei).sum::<f64>() / total;
            st.push((-dot).exp() * vol);
        }
        st
    });
    let stats = RunningStats::merge_all(&parts);
    Ok(Estimate::from_stats(&stats, Method::SimplexMc, key))
}
