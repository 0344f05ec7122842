//! Estimates, mergeable accumulators and the small set of statistical
//! tests used to validate the engines (two-sample KS, jackknife, skewness).

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::StreamKey;

/// Which route produced an [`Estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Feynman-Kac Monte Carlo over Brownian paths.
    FkMc,
    /// Deterministic quadrature on the Fourier side.
    FourierQuad,
    /// Importance-sampled Monte Carlo on the Fourier side.
    FourierMc,
    /// Monte Carlo of the real-space double integral over the ball.
    RealSpaceMc,
    /// Uniform simplex Monte Carlo.
    SimplexMc,
    /// Periodic lattice simulation.
    Lattice,
    /// Finite-difference solve of the radial backward equation.
    RadialPde,
    /// Closed-form arithmetic.
    Exact,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::FkMc => "fk-mc",
            Method::FourierQuad => "fourier-quad",
            Method::FourierMc => "fourier-mc",
            Method::RealSpaceMc => "real-space-mc",
            Method::SimplexMc => "simplex-mc",
            Method::Lattice => "lattice",
            Method::RadialPde => "radial-pde",
            Method::Exact => "exact",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A value with its standard error and provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub method: Method,
    pub seed: Option<StreamKey>,
}

impl Estimate {
    pub fn exact(value: f64, method: Method) -> Self {
        Self {
            value,
            stderr: 0.0,
            n_samples: 1,
            method,
            seed: None,
        }
    }

    pub fn from_stats(stats: &RunningStats, method: Method, seed: StreamKey) -> Self {
        Self {
            value: stats.mean(),
            stderr: stats.stderr(),
            n_samples: stats.count(),
            method,
            seed: Some(seed),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            stderr: self.stderr * factor.abs(),
            ..*self
        }
    }

    pub fn rel_stderr(&self) -> f64 {
        if self.value == 0.0 {
            f64::INFINITY
        } else {
            self.stderr / self.value.abs()
        }
    }

    /// |a - b| in units of the combined standard error.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let s = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        let diff = (self.value - other.value).abs();
        if s == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / s
        }
    }

    /// True when the two estimates agree within `k` combined standard errors.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        self.z_score(other) <= k
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.6e} ± {:.2e} (n={}, {})",
            self.value, self.stderr, self.n_samples, self.method
        )
    }
}

/// Welford accumulator with Chan's merge. Merging in a fixed order keeps
/// results independent of how the work was scheduled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let nf = n as f64;
        RunningStats {
            n,
            mean: self.mean + delta * other.n as f64 / nf,
            m2: self.m2 + other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / nf,
        }
    }

    /// Merge a slice of accumulators along a fixed binary tree.
    pub fn merge_all(parts: &[RunningStats]) -> RunningStats {
        match parts.len() {
            0 => RunningStats::default(),
            1 => parts[0],
            n => {
                let (a, b) = parts.split_at(n / 2);
                Self::merge_all(a).merge(&Self::merge_all(b))
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    crate::rng::pairwise_sum(xs) / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Sample skewness `m3 / m2^{3/2}` (biased moment estimator).
pub fn skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let (mut m2, mut m3) = (0.0, 0.0);
    for x in xs {
        let d = x - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 == 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolation quantile, `q` in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] * (1.0 - frac) + v[hi] * frac
}

/// Bootstrap standard error of a statistic, deterministic in `key`.
pub fn bootstrap_stderr<F>(xs: &[f64], resamples: usize, key: StreamKey, stat: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let n = xs.len();
    if n < 2 || resamples < 2 {
        return 0.0;
    }
    let mut rng = key.stream(0);
    let mut buf = vec![0.0; n];
    let vals: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    variance(&vals).sqrt()
}

/// Delete-one-group jackknife of a smooth function of group means.
///
/// `groups[g]` holds the per-group sample mean of each tracked quantity and
/// `counts[g]` the group size. Returns `(estimate, stderr)` where the
/// estimate is `f` at the pooled means.
pub fn jackknife<F>(groups: &[Vec<f64>], counts: &[u64], f: F) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let g = groups.len();
    assert_eq!(g, counts.len());
    if g == 0 {
        return (f64::NAN, f64::NAN);
    }
    let k = groups[0].len();
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    let sums: Vec<f64> = (0..k)
        .map(|j| {
            groups
                .iter()
                .zip(counts)
                .map(|(m, &c)| m[j] * c as f64)
                .sum()
        })
        .collect();
    let full: Vec<f64> = sums.iter().map(|s| s / total).collect();
    let theta = f(&full);
    if g < 2 {
        return (theta, 0.0);
    }
    let loo: Vec<f64> = (0..g)
        .map(|i| {
            let rest = total - counts[i] as f64;
            let means: Vec<f64> = (0..k)
                .map(|j| (sums[j] - groups[i][j] * counts[i] as f64) / rest)
                .collect();
            f(&means)
        })
        .collect();
    let lm = loo.iter().sum::<f64>() / g as f64;
    let var = loo.iter().map(|x| (x - lm).powi(2)).sum::<f64>() * (g as f64 - 1.0) / g as f64;
    (theta, var.sqrt())
}

/// Result of a two-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub level: f64,
}

impl KsResult {
    pub fn rejected(&self) -> bool {
        self.statistic > self.critical_value
    }
}

/// Two-sample KS test with the asymptotic critical value at `level`.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let c = (-(level / 2.0).ln() / 2.0).sqrt();
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult {
        statistic: d,
        critical_value: c / ne.sqrt(),
        p_value: kolmogorov_q(lambda),
        level,
    }
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
