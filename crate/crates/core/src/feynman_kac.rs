//! Monte Carlo for the Brownian functional `β_t(x) = ∫_0^t ds / ‖x + √2 W_s‖²`
//! and the ball-pair averages built from it.
//!
//! Paths are built by dyadic midpoint (Lévy) construction: the value of
//! `√2 W` at the midpoint of a dyadic interval depends only on its endpoints
//! and on normals drawn from a seed derived from `(path, node id)`. Any
//! discretization of a path therefore sees the same underlying Brownian
//! motion: doubling `base_steps` refines the path instead of replacing it,
//! and no result depends on scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{ball_volume, norm};
use crate::params::{check_coupling, check_dimension, ModelParams};
use crate::rng::{blocks, mix64, Parallelism, StreamKey};
use crate::stats::{jackknife, Estimate, Method, RunningStats};

/// Highest moment order the engine will estimate.
pub const MAX_MOMENT: usize = 8;

const PATH_BLOCK: usize = 256;
const JACKKNIFE_GROUPS: usize = 32;

/// How a refined substep integrates `1/r²` between its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NearPoleRule {
    /// Trapezoid plus the leading Brownian-bridge fluctuation term
    /// `(4-d) Δ² / (3 r0² r1²)`. Removes the first-order discretization bias.
    BridgeCorrected,
    /// `2 / (r0² + r1²)`, the harmonic mean of the endpoint integrands.
    HarmonicMean,
    Trapezoid,
}

/// Discretization of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    /// Uniform steps on `[0, t]`; a power of two, at least 64.
    pub base_steps: usize,
    /// A step of length `Δ` is bisected while `√(2Δ) > delta · r_min`.
    pub delta: f64,
    /// Maximum number of adaptive bisections below the base grid.
    pub max_depth: u32,
    pub near_pole: NearPoleRule,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            base_steps: 1024,
            delta: 0.25,
            max_depth: 20,
            near_pole: NearPoleRule::BridgeCorrected,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_steps < 64 || !self.base_steps.is_power_of_two() {
            return domain(format!(
                "base_steps must be a power of two >= 64, got {}",
                self.base_steps
            ));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return domain(format!("delta must be positive, got {}", self.delta));
        }
        if self.max_depth > 40 {
            return domain("max_depth above 40 is not supported");
        }
        Ok(())
    }

    pub fn with_base_steps(self, base_steps: usize) -> Self {
        Self { base_steps, ..self }
    }
}

/// One realization of `β_t(x)` and what it took to get it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSample {
    pub value: f64,
    pub refinements: u64,
    /// Smallest `‖x + √2 W_s‖` seen on the discretized path.
    pub min_distance: f64,
}

/// A batch of independent realizations of `β_t(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSampleBatch {
    pub values: Vec<f64>,
    pub min_distances: Vec<f64>,
    pub t: f64,
    pub x: Vec<f64>,
    pub base_steps: usize,
    pub refinement_events: u64,
    pub seed: StreamKey,
}

/// Seed of path `index` under `key`.
pub fn path_seed(key: &StreamKey, index: u64) -> u64 {
    mix64(mix64(key.seed ^ key.estimator.rotate_left(29)) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// splitmix64 generator used for the handful of normals at one path node.
struct NodeRng(u64);

impl RngCore for NodeRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        mix64(self.0.wrapping_sub(0x9e37_79b9_7f4a_7c15))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}

struct PathBuilder<'a> {
    seed: u64,
    cfg: &'a PathConfig,
    base_level: u32,
    refinements: u64,
    min_distance: f64,
}

impl PathBuilder<'_> {
    fn node_rng(&self, level: u32, k: u64) -> NodeRng {
        let id = (1u64 << level).wrapping_add(k);
        NodeRng(mix64(self.seed ^ mix64(id)))
    }

    /// Integral over dyadic interval `k` at `level`, of length `dt`.
    fn segment(&mut self, level: u32, k: u64, dt: f64, y0: &[f64], y1: &[f64], r0: f64, r1: f64) -> f64 {
        let rmin = r0.min(r1);
        let uniform = level < self.base_level;
        let unresolved = (2.0 * dt).sqrt() > self.cfg.delta * rmin;
        let exhausted = level >= self.base_level + self.cfg.max_depth;
        let refine = !uniform && !exhausted && unresolved;
        if uniform || refine {
            if refine {
                self.refinements += 1;
            }
            let mut rng = self.node_rng(level, k);
            let sd = (0.5 * dt).sqrt();
            let mid: Vec<f64> = y0
                .iter()
                .zip(y1)
                .map(|(a, b)| 0.5 * (a + b) + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let rm = norm(&mid);
            self.min_distance = self.min_distance.min(rm);
            let h = 0.5 * dt;
            return self.segment(level + 1, 2 * k, h, y0, &mid, r0, rm)
                + self.segment(level + 1, 2 * k + 1, h, &mid, y1, rm, r1);
        }
        if exhausted && unresolved {
            let d = y0.len() as f64;
            return leaf_near_pole(d, r0, 0.5 * dt) + leaf_near_pole(d, r1, 0.5 * dt);
        }
        let (q0, q1) = (r0 * r0, r1 * r1);
        let trapezoid = dt * 0.5 * (1.0 / q0 + 1.0 / q1);
        match self.cfg.near_pole {
            NearPoleRule::BridgeCorrected => {
                (trapezoid + (4.0 - y0.len() as f64) * dt * dt / (3.0 * q0 * q1)).max(0.0)
            }
            NearPoleRule::HarmonicMean if level > self.base_level => dt * 2.0 / (q0 + q1),
            _ => trapezoid,
        }
    }
}

/// `∫_0^h ds / |y + W_s|²` for `|y| = r`, with `1/|y+W_s|²` replaced by
/// `min(1/r², 1/(2(d-2)s))`. Used on leaves still unresolved at max depth,
/// where the trapezoid `h/r²` is unbounded as `r → 0`.
fn leaf_near_pole(d: f64, r: f64, h: f64) -> f64 {
    let s_star = r * r / (2.0 * (d - 2.0));
    if h <= s_star {
        h / (r * r)
    } else {
        (1.0 + (h / s_star).ln()) / (2.0 * (d - 2.0))
    }
}

/// One realization of `β_t(x)` on the path with seed `seed`.
pub fn sample_beta(x: &[f64], t: f64, cfg: &PathConfig, seed: u64) -> BetaSample {
    let mut b = PathBuilder {
        seed,
        cfg,
        base_level: cfg.base_steps.trailing_zeros(),
        refinements: 0,
        min_distance: norm(x),
    };
    // endpoint: node id 0
    let mut rng = NodeRng(mix64(seed ^ mix64(0)));
    let sd = (2.0 * t).sqrt();
    let end: Vec<f64> = x
        .iter()
        .map(|v| v + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let (r0, r1) = (norm(x), norm(&end));
    b.min_distance = r0.min(r1);
    let value = b.segment(0, 0, t, x, &end, r0, r1);
    BetaSample {
        value,
        refinements: b.refinements,
        min_distance: b.min_distance,
    }
}

fn check_point(x: &[f64], t: f64) -> Result<()> {
    check_dimension(x.len())?;
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("time must be positive, got {t}"));
    }
    if !(norm(x) > 0.0) {
        return domain("β_t(0) is not defined; use a nonzero point");
    }
    Ok(())
}

/// `n_paths` independent realizations of `β_t(x)`.
pub fn sample_beta_batch(
    x: &[f64],
    t: f64,
    n_paths: usize,
    cfg: &PathConfig,
    key: StreamKey,
    par: Parallelism,
) -> Result<BetaSampleBatch> {
    check_point(x, t)?;
    cfg.validate()?;
    let layout = blocks(n_paths, PATH_BLOCK);
    let parts = par.map(layout.len(), |b| {
        let (start, len) = layout[b];
        (start..start + len)
            .map(|i| sample_beta(x, t, cfg, path_seed(&key, i as u64)))
            .collect::<Vec<_>>()
    });
    let samples: Vec<BetaSample> = parts.into_iter().flatten().collect();
    Ok(BetaSampleBatch {
        values: samples.iter().map(|s| s.value).collect(),
        min_distances: samples.iter().map(|s| s.min_distance).collect(),
        refinement_events: samples.iter().map(|s| s.refinements).sum(),
        t,
        x: x.to_vec(),
        base_steps: cfg.base_steps,
        seed: key,
    })
}

fn group_means(values: &[f64], order: usize) -> (Vec<Vec<f64>>, Vec<u64>) {
    let groups = JACKKNIFE_GROUPS.min(values.len()).max(1);
    let layout = blocks(values.len(), values.len().div_ceil(groups));
    let mut means = Vec::with_capacity(layout.len());
    let mut counts = Vec::with_capacity(layout.len());
    for (start, len) in layout {
        let chunk = &values[start..start + len];
        let m: Vec<f64> = (1..=order)
            .map(|n| chunk.iter().map(|v| v.powi(n as i32)).sum::<f64>() / len as f64)
            .collect();
        means.push(m);
        counts.push(len as u64);
    }
    (means, counts)
}

/// `E[β_t(x)^n]` for `n = 0..=n_max` from one shared path ensemble, with
/// grouped jackknife standard errors. Entry 0 is exactly 1.
pub fn beta_moments(
    x: &[f64],
    t: f64,
    n_max: usize,
    n_paths: usize,
    cfg: &PathConfig,
    key: StreamKey,
    par: Parallelism,
) -> Result<Vec<Estimate>> {
    if n_max > MAX_MOMENT {
        return Err(Error::HeavyTail {
            order: n_max,
            max: MAX_MOMENT,
        });
    }
    if n_paths < 2 {
        return domain("need at least two paths");
    }
    let batch = sample_beta_batch(x, t, n_paths, cfg, key, par)?;
    let (means, counts) = group_means(&batch.values, n_max);
    let mut out = vec![Estimate::exact(1.0, Method::FkMc)];
    for n in 1..=n_max {
        let (value, stderr) = jackknife(&means, &counts, |m| m[n - 1]);
        out.push(Estimate {
            value,
            stderr,
            n_samples: n_paths as u64,
            method: Method::FkMc,
            seed: Some(key),
        });
    }
    Ok(out)
}

/// Post-stratification cell of an exponential-moment run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    /// Bounds on the path's minimum distance to the pole, relative to ‖x‖.
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub mean: f64,
    pub stderr: f64,
}

/// Relative-distance boundaries of the four strata.
pub const STRATA_EDGES: [f64; 5] = [0.0, 0.125, 0.25, 0.5, f64::INFINITY];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpMoment {
    pub estimate: Estimate,
    /// `exp(κ² · mean β)`, a Jensen lower bound evaluated on the same paths.
    pub jensen_bound: f64,
    /// Share of the total carried by the ten largest samples.
    pub top10_share: f64,
    pub strata: Vec<Stratum>,
    pub flags: Vec<String>,
}

impl ExpMoment {
    pub fn reliable(&self) -> bool {
        self.flags.is_empty()
    }
}

fn reliability_flags(est: &Estimate, top10_share: f64) -> Vec<String> {
    let mut flags = Vec::new();
    if est.rel_stderr() > 0.05 {
        flags.push(format!("relative stderr {:.3} exceeds 0.05", est.rel_stderr()));
    }
    if top10_share > 0.2 {
        flags.push(format!("top 10 samples carry {:.3} of the mass", top10_share));
    }
    flags
}

fn top_share(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = v.iter().sum();
    v.iter().take(k).sum::<f64>() / total
}

/// `E[exp(κ² β_t(x))]` with reliability diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn exp_moment(
    x: &[f64],
    t: f64,
    kappa: f64,
    n_paths: usize,
    cfg: &PathConfig,
    key: StreamKey,
    par: Parallelism,
) -> Result<ExpMoment> {
    check_coupling(x.len(), kappa)?;
    let batch = sample_beta_batch(x, t, n_paths, cfg, key, par)?;
    exp_moment_from_batch(&batch, kappa)
}

/// [`exp_moment`] on an existing path batch.
pub fn exp_moment_from_batch(batch: &BetaSampleBatch, kappa: f64) -> Result<ExpMoment> {
    check_coupling(batch.x.len(), kappa)?;
    let key = batch.seed;
    let x = &batch.x;
    let k2 = kappa * kappa;
    let weights: Vec<f64> = batch.values.iter().map(|b| (k2 * b).exp()).collect();
    let mut all = RunningStats::new();
    let mut beta = RunningStats::new();
    for (w, b) in weights.iter().zip(&batch.values) {
        all.push(*w);
        beta.push(*b);
    }
    let r = norm(x);
    let strata = STRATA_EDGES
        .windows(2)
        .map(|e| {
            let mut st = RunningStats::new();
            for (w, m) in weights.iter().zip(&batch.min_distances) {
                let rel = m / r;
                if rel >= e[0] && rel < e[1] {
                    st.push(*w);
                }
            }
            Stratum {
                lo: e[0],
                hi: e[1],
                count: st.count(),
                mean: st.mean(),
                stderr: st.stderr(),
            }
        })
        .collect();
    let estimate = Estimate::from_stats(&all, Method::FkMc, key);
    let top10_share = top_share(&weights, 10);
    Ok(ExpMoment {
        flags: reliability_flags(&estimate, top10_share),
        estimate,
        jensen_bound: (k2 * beta.mean()).exp(),
        top10_share,
        strata,
    })
}

/// Grid controls for [`exp_moment_radial`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    /// Spacing in `log r`.
    pub log_step: f64,
    /// Relative time-step growth per step.
    pub growth: f64,
    /// Inner cutoff as a fraction of the smallest requested radius.
    pub inner_factor: f64,
    pub outer_radius: f64,
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self {
            log_step: 0.01,
            growth: 1e-3,
            inner_factor: 1e-3,
            outer_radius: 200.0,
        }
    }
}

/// Deterministic `E[exp(κ² β_1(x))]` at `‖x‖ = τ^{-1/2}` for each `τ`.
///
/// Solves `∂_t u = u_rr + (d-1)/r u_r + κ²/r² u`, `u(0, ·) = 1`, in `ρ = log r`
/// with backward Euler on geometric time steps. The inner boundary carries the
/// regular branch `u ∝ r^{-α}`, the outer one `u = 1`.
pub fn exp_moment_radial(d: usize, kappa: f64, taus: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    check_coupling(d, kappa)?;
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return domain("τ values must be positive and finite");
    }
    let r_min = taus.iter().map(|t| t.powf(-0.5)).fold(f64::INFINITY, f64::min);
    let r_max = taus.iter().map(|t| t.powf(-0.5)).fold(0.0, f64::max);
    if r_max * 4.0 > grid.outer_radius {
        return domain("outer radius too close to the requested points");
    }
    let h = grid.log_step;
    let lo = (r_min * grid.inner_factor).ln();
    let m = ((grid.outer_radius.ln() - lo) / h).ceil() as usize;
    let rho: Vec<f64> = (0..=m).map(|i| lo + i as f64 * h).collect();
    let half = (d as f64 - 2.0) / 2.0;
    let alpha = half - (half * half - kappa * kappa).sqrt();
    // Ghost relation u_0 = g u_1 from the Robin condition u_ρ = -α u.
    let g = (1.0 + alpha * h / 2.0) / (1.0 - alpha * h / 2.0);
    let drift = d as f64 - 2.0;
    let k2 = kappa * kappa;
    // Operator coefficients at interior node i: a u_{i-1} + b u_i + c u_{i+1}.
    let coef: Vec<(f64, f64, f64)> = rho
        .iter()
        .map(|p| {
            let w = (-2.0 * p).exp();
            (
                w * (1.0 / (h * h) - drift / (2.0 * h)),
                w * (-2.0 / (h * h) + k2),
                w * (1.0 / (h * h) + drift / (2.0 * h)),
            )
        })
        .collect();
    let mut u = vec![1.0; m + 1];
    let n_int = m - 1;
    let (mut cp, mut dp) = (vec![0.0; n_int], vec![0.0; n_int]);
    let mut t = 0.0;
    let mut dt = (r_min * grid.inner_factor).powi(2) * 1e-3;
    while t < 1.0 {
        let step = dt.min(1.0 - t);
        // Thomas sweep over interior nodes 1..m-1 for (I - step L) u' = u.
        for k in 0..n_int {
            let i = k + 1;
            let (a, b, c) = coef[i];
            let (mut lower, mut diag, upper) = (-step * a, 1.0 - step * b, -step * c);
            let mut rhs = u[i];
            if i == 1 {
                diag += lower * g;
                lower = 0.0;
            }
            if i == m - 1 {
                rhs -= upper * 1.0;
            }
            let upper = if i == m - 1 { 0.0 } else { upper };
            let denom = if k == 0 { diag } else { diag - lower * cp[k - 1] };
            cp[k] = upper / denom;
            dp[k] = if k == 0 { rhs / denom } else { (rhs - lower * dp[k - 1]) / denom };
        }
        u[m - 1] = dp[n_int - 1];
        for k in (0..n_int - 1).rev() {
            u[k + 1] = dp[k] - cp[k] * u[k + 2];
        }
        u[0] = g * u[1];
        u[m] = 1.0;
        t += step;
        dt *= 1.0 + grid.growth;
    }
    let out = taus
        .iter()
        .map(|tau| {
            let p = -0.5 * tau.ln();
            let s = (p - lo) / h;
            let i = (s.floor() as usize).min(m - 1);
            let f = s - i as f64;
            (u[i].ln() * (1.0 - f) + u[i + 1].ln() * f).exp()
        })
        .collect::<Vec<_>>();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("radial solve produced a non-finite value".into()));
    }
    Ok(out)
}

/// Uniform point in `B_R ⊂ R^d`: isotropic direction times `R U^{1/d}`.
pub fn sample_uniform_ball<G: Rng + ?Sized>(d: usize, r: f64, rng: &mut G) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let scale = r * u.powf(1.0 / d as f64) / len;
        v.iter_mut().for_each(|c| *c *= scale);
        return v;
    }
}

/// Two independent uniform points in `B_R`.
pub fn sample_uniform_ball_pair<G: Rng + ?Sized>(d: usize, r: f64, rng: &mut G) -> (Vec<f64>, Vec<f64>) {
    (sample_uniform_ball(d, r, rng), sample_uniform_ball(d, r, rng))
}

/// Budgets for the ball-pair estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBudget {
    pub n_pairs: usize,
    /// Fresh paths drawn for every pair.
    pub paths_per_pair: usize,
}

/// Mean over uniform pairs `(x, y) ∈ B_R²` of the per-pair path average of
/// `g(β_t(x - y))`. Pair values are i.i.d., so their spread carries both
/// pair and path noise.
pub fn pair_average<G>(
    params: &ModelParams,
    budget: PairBudget,
    cfg: &PathConfig,
    key: StreamKey,
    par: Parallelism,
    g: G,
) -> Result<RunningStats>
where
    G: Fn(f64) -> f64 + Sync,
{
    cfg.validate()?;
    if budget.n_pairs < 2 || budget.paths_per_pair < 1 {
        return domain("need at least two pairs and one path per pair");
    }
    let d = params.d();
    let (t, r) = (params.t(), params.radius());
    let layout = blocks(budget.n_pairs, PATH_BLOCK);
    let pair_key = key.child("pairs", 0);
    let parts = par.map(layout.len(), |b| {
        let (start, len) = layout[b];
        let mut rng: ChaCha8Rng = pair_key.stream(b as u64);
        let mut st = RunningStats::new();
        for i in start..start + len {
            let (x, y) = sample_uniform_ball_pair(d, r, &mut rng);
            let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let mut acc = 0.0;
            for j in 0..budget.paths_per_pair {
                let idx = (i * budget.paths_per_pair + j) as u64;
                acc += g(sample_beta(&z, t, cfg, path_seed(&key, idx)).value);
            }
            st.push(acc / budget.paths_per_pair as f64);
        }
        st
    });
    Ok(RunningStats::merge_all(&parts))
}

/// `Var[I_t^{(n)}(1_{B_R})] = (κ^{2n}/n!) ∫∫_{B_R²} E[β_t(x-y)^n] dx dy`.
pub fn chaos_variance_fk(
    n: usize,
    params: &ModelParams,
    budget: PairBudget,
    cfg: &PathConfig,
    key: StreamKey,
    par: Parallelism,
) -> Result<Estimate> {
    if n == 0 {
        return domain("chaos order must be at least 1");
    }
    if n > MAX_MOMENT {
        return Err(Error::HeavyTail {
            order: n,
            max: MAX_MOMENT,
        });
    }
    let st = pair_average(params, budget, cfg, key, par, |b| b.powi(n as i32))?;
    let vol = ball_volume(params.d()) * params.radius().powi(params.d() as i32);
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let pref = vol * vol * params.kappa().powi(2 * n as i32) / fact;
    Ok(Estimate::from_stats(&st, Method::FkMc, key).scaled(pref))
}

/// `E[u_t(B_R)²] = ∫∫_{B_R²} E[exp(κ² β_t(x-y))] dx dy`.
pub fn second_moment_fk(
    params: &ModelParams,
    budget: PairBudget,
    cfg: &PathConfig,
    key: StreamKey,
    par: Parallelism,
) -> Result<Estimate> {
    let k2 = params.kappa().powi(2);
    let st = pair_average(params, budget, cfg, key, par, |b| (k2 * b).exp())?;
    let vol = ball_volume(params.d()) * params.radius().powi(params.d() as i32);
    Ok(Estimate::from_stats(&st, Method::FkMc, key).scaled(vol * vol))
}

/// ChaCha stream used by callers that need a plain generator under `key`.
pub fn plain_stream(key: &StreamKey, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(path_seed(key, index));
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::mean_beta;
    use crate::stats::ks_two_sample;

    fn e1(r: f64, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[0] = r;
        v
    }

    #[test]
    fn close_approach_is_stable_in_max_depth() {
        // a path whose minimum distance falls far below the max-depth step
        let key = StreamKey::new(1, "extinction/report").child("exp-moment", 0);
        let x = e1(10f64.powf(-4.0 / 3.0), 3);
        let seed = path_seed(&key, 52622);
        let at = |max_depth| {
            let cfg = PathConfig { max_depth, ..PathConfig::default() };
            sample_beta(&x, 1.0, &cfg, seed)
        };
        let (a, b) = (at(20), at(40));
        assert!(a.min_distance < 1e-5);
        assert!((0.5..2.0).contains(&(a.value / b.value)), "{} vs {}", a.value, b.value);
    }

    #[test]
    fn leaf_estimate_is_continuous() {
        let (d, r) = (3.0, 1e-3);
        let s = r * r / (2.0 * (d - 2.0));
        assert!((leaf_near_pole(d, r, s * (1.0 - 1e-12)) - leaf_near_pole(d, r, s * (1.0 + 1e-12))).abs() < 1e-9);
        assert!(leaf_near_pole(d, 1e-12, 1e-9) < 20.0);
    }

    #[test]
    fn far_point_concentrates() {
        let cfg = PathConfig::default();
        let x = e1(1e3, 3);
        for i in 0..20 {
            let s = sample_beta(&x, 1.0, &cfg, i);
            assert!((s.value * 1e6 - 1.0).abs() < 1e-2, "{}", s.value);
        }
    }

    #[test]
    fn sample_is_reproducible_and_coupled_across_resolution() {
        let cfg = PathConfig::default();
        let x = e1(0.5, 3);
        let a = sample_beta(&x, 1.0, &cfg, 77);
        let b = sample_beta(&x, 1.0, &cfg, 77);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        // the finer run refines the same path
        let fine = sample_beta(&x, 1.0, &cfg.with_base_steps(8192), 77);
        assert!(((fine.value - a.value) / a.value).abs() < 0.05, "{} {}", a.value, fine.value);
    }

    #[test]
    fn batch_is_thread_invariant() {
        let cfg = PathConfig::default();
        let key = StreamKey::new(3, "fk-par");
        let x = e1(0.3, 3);
        let a = sample_beta_batch(&x, 1.0, 700, &cfg, key, Parallelism(1)).unwrap();
        let b = sample_beta_batch(&x, 1.0, 700, &cfg, key, Parallelism(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn mean_matches_quadrature_oracle() {
        let cfg = PathConfig::default();
        for (d, r, t) in [(3, 1.0, 1.0), (4, 0.5, 1.0), (5, 1.0, 4.0)] {
            let x = e1(r, d);
            let key = StreamKey::new(21, "fk-mean").child("case", d as u64);
            let m = beta_moments(&x, t, 1, 40_000, &cfg, key, Parallelism(1)).unwrap();
            let exact = mean_beta(&x, t).unwrap();
            let z = (m[1].value - exact).abs() / m[1].stderr;
            assert!(z < 3.5, "d={d}: {} vs {exact} (z={z})", m[1]);
        }
    }

    #[test]
    fn moments_and_errors() {
        let cfg = PathConfig::default();
        let key = StreamKey::new(1, "fk-mom");
        let x = e1(1.0, 3);
        assert!(matches!(
            beta_moments(&x, 1.0, 9, 100, &cfg, key, Parallelism(1)),
            Err(Error::HeavyTail { order: 9, max: 8 })
        ));
        let short = beta_moments(&x, 0.5, 3, 2000, &cfg, key, Parallelism(1)).unwrap();
        let long = beta_moments(&x, 1.0, 3, 2000, &cfg, key, Parallelism(1)).unwrap();
        assert_eq!(short[0].value, 1.0);
        for n in 1..=3 {
            // same paths, longer horizon: pathwise larger
            assert!(long[n].value > short[n].value);
        }
        assert!(beta_moments(&[0.0; 3], 1.0, 1, 10, &cfg, key, Parallelism(1)).is_err());
        assert!(sample_beta_batch(&x, 1.0, 10, &cfg.with_base_steps(100), key, Parallelism(1)).is_err());
    }

    #[test]
    fn beta_law_is_scale_invariant() {
        let cfg = PathConfig::default();
        let x = e1(0.8, 3);
        let eps: f64 = 0.25;
        let xs: Vec<f64> = x.iter().map(|v| v * eps.sqrt()).collect();
        let a = sample_beta_batch(&x, 1.0, 5000, &cfg, StreamKey::new(4, "ks-a"), Parallelism(1)).unwrap();
        let b = sample_beta_batch(&xs, eps, 5000, &cfg, StreamKey::new(4, "ks-b"), Parallelism(1)).unwrap();
        let ks = ks_two_sample(&a.values, &b.values, 0.01);
        assert!(!ks.rejected(), "{ks:?}");
    }

    #[test]
    fn exp_moment_small_coupling_and_jensen() {
        let cfg = PathConfig::default();
        let x = e1(1.0, 3);
        let key = StreamKey::new(8, "exp");
        let r = exp_moment(&x, 1.0, 1e-3, 2000, &cfg, key, Parallelism(1)).unwrap();
        assert!((r.estimate.value - 1.0).abs() < 1e-4);
        assert!(r.estimate.value >= r.jensen_bound);
        assert_eq!(r.strata.iter().map(|s| s.count).sum::<u64>(), 2000);
        let r = exp_moment(&x, 4.0, 0.3, 2000, &cfg, key, Parallelism(1)).unwrap();
        assert!(r.estimate.value >= r.jensen_bound);
        assert!(exp_moment(&x, 1.0, 0.5, 10, &cfg, key, Parallelism(1)).is_err());
    }

    #[test]
    fn uniform_ball_second_moment() {
        let mut rng = StreamKey::new(2, "ball").stream(0);
        let mut st = RunningStats::new();
        for _ in 0..200_000 {
            let v = sample_uniform_ball(3, 1.0, &mut rng);
            let n2: f64 = v.iter().map(|c| c * c).sum();
            assert!(n2 < 1.0);
            st.push(n2);
        }
        assert!((st.mean() - 0.6).abs() < 3.0 * st.stderr());
    }

    #[test]
    fn first_chaos_scales_with_kappa_squared() {
        let cfg = PathConfig::default();
        let key = StreamKey::new(12, "kappa");
        let budget = PairBudget {
            n_pairs: 500,
            paths_per_pair: 1,
        };
        let p1 = ModelParams::new(3, 0.1, 1.0, 1.0).unwrap();
        let p2 = p1.with_kappa(0.2).unwrap();
        let a = chaos_variance_fk(2, &p1, budget, &cfg, key, Parallelism(1)).unwrap();
        let b = chaos_variance_fk(2, &p2, budget, &cfg, key, Parallelism(1)).unwrap();
        // same seed, same paths: ratio is exactly 2^4
        assert!((b.value / a.value - 16.0).abs() < 1e-9);
    }

    #[test]
    fn radial_profile_weak_coupling() {
        // u = 1 + κ² E[β] + O(κ⁴)
        let k = 0.01;
        let v = exp_moment_radial(3, k, &[100.0], &RadialGrid::default()).unwrap()[0];
        let m = mean_beta(&e1(0.1, 3), 1.0).unwrap();
        assert!(((v - 1.0) / (k * k) / m - 1.0).abs() < 2e-3);
    }

    #[test]
    fn radial_profile_matches_paths() {
        let v = exp_moment_radial(3, 0.4, &[100.0], &RadialGrid::default()).unwrap()[0];
        let key = StreamKey::new(5, "radial");
        let em = exp_moment(&e1(0.1, 3), 1.0, 0.4, 20_000, &PathConfig::default(), key, Parallelism(1)).unwrap();
        assert!(em.estimate.agrees_with(&Estimate::exact(v, Method::RadialPde), 4.0), "{v} {}", em.estimate);
    }

    #[test]
    fn radial_profile_power_law() {
        // f(τ) ~ τ^{α/2} once τ is large
        let v = exp_moment_radial(3, 0.4, &[1e3, 1e4], &RadialGrid::default()).unwrap();
        let slope = (v[1] / v[0]).ln() / 10f64.ln();
        assert!((slope - 0.1).abs() < 1e-3, "{slope}");
    }
}
