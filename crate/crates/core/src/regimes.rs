//! Experiment drivers for the three large-scale regimes: Gaussian
//! fluctuations for `t << R^2`, a non-degenerate limit at `t = R^2`, and
//! extinction of ball averages for `t >> R^2`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::feynman_kac::{self, PairBudget, PathConfig};
use crate::fourier::{self, ChaosVarianceSpec};
use crate::kernels::ball_volume;
use crate::lattice::{self, Checkpoint, Ensemble, LatticeConfig};
use crate::params::{ModelParams, QuadratureSpec};
use crate::rng::{Parallelism, StreamKey};
use crate::stats::{self, jackknife, Estimate, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Clt,
    FixedPoint,
    Extinction,
}

impl Regime {
    pub fn tag(&self) -> &'static str {
        match self {
            Regime::Clt => "clt",
            Regime::FixedPoint => "fixed-point",
            Regime::Extinction => "extinction",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One tabulated statistic, e.g. `var1_over_r2d2` at `R = 8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Name of the sweep variable (`R`, `t`, `tau`, ...).
    pub label: String,
    pub x: f64,
    pub statistic: String,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: String,
    pub pass: bool,
    /// Signed distance to the threshold (positive when passing), in the
    /// units stated by `property`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub rows: Vec<ReportRow>,
    pub verdicts: Vec<Verdict>,
}

impl RegimeReport {
    fn new(regime: Regime) -> Self {
        Self {
            regime,
            rows: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    fn row(&mut self, label: &str, x: f64, statistic: &str, estimate: Estimate) {
        self.rows.push(ReportRow {
            label: label.into(),
            x,
            statistic: statistic.into(),
            estimate,
        });
    }

    fn verdict(&mut self, property: impl Into<String>, pass: bool, margin: f64) {
        self.verdicts.push(Verdict {
            property: property.into(),
            pass,
            margin,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Verdict whose property starts with `prefix`.
    pub fn find_verdict(&self, prefix: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.property.starts_with(prefix))
    }

    /// Rows of one statistic in sweep order.
    pub fn series(&self, statistic: &str) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.statistic == statistic).collect()
    }

    pub fn merge(&mut self, other: RegimeReport) {
        self.rows.extend(other.rows);
        self.verdicts.extend(other.verdicts);
    }
}

/// Sample budgets for the regime drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    /// Minimum effective (Kish) sample size per higher-chaos Fourier estimate.
    pub fourier_mc_samples: usize,
    /// Ball pairs per Feynman-Kac pair average (one path per pair).
    pub fk_pairs: usize,
    /// Paths per side of the β-law KS test.
    pub ks_paths: usize,
    /// Paths per point of the exponential-moment profile.
    pub exp_paths: usize,
    pub quad: QuadratureSpec,
    pub path: PathConfig,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            fourier_mc_samples: 1_000_000,
            fk_pairs: 100_000,
            ks_paths: 100_000,
            exp_paths: 100_000,
            quad: QuadratureSpec::default(),
            path: PathConfig::default(),
        }
    }
}

/// True when each consecutive pair satisfies `cmp`; the margin is the
/// smallest consecutive step in the passing direction.
fn monotone(values: &[f64], increasing: bool) -> (bool, f64) {
    let margin = values
        .windows(2)
        .map(|w| if increasing { w[1] - w[0] } else { w[0] - w[1] })
        .fold(f64::INFINITY, f64::min);
    (margin > 0.0, margin)
}

/// Fourier Monte Carlo with at least `min_ess` effective samples: if a run
/// falls short, it is repeated with the sample count scaled up by the
/// observed shortfall (plus 10%).
pub fn fourier_mc_min_ess(
    mut spec: ChaosVarianceSpec,
    min_ess: f64,
    key: StreamKey,
    par: Parallelism,
) -> Result<fourier::FourierMcResult> {
    spec.mc_samples = spec.mc_samples.max(min_ess.ceil() as usize);
    let mut res = fourier::nth_chaos_fourier_mc_detailed(&spec, key, par)?;
    for _ in 0..3 {
        if res.effective_samples >= min_ess {
            break;
        }
        let grow = 1.1 * min_ess / res.effective_samples;
        spec.mc_samples = (spec.mc_samples as f64 * grow).ceil() as usize;
        res = fourier::nth_chaos_fourier_mc_detailed(&spec, key, par)?;
    }
    Ok(res)
}

/// Chaos-1 and chaos-2 variances normalised by `R^{2d-2}` along an `R` sweep
/// at `t = 1`, against σ².
pub fn clt_convergence_table(
    r_list: &[f64],
    params: &ModelParams,
    budgets: &Budgets,
    key: StreamKey,
    par: Parallelism,
) -> Result<RegimeReport> {
    if params.t() != 1.0 {
        return domain("the convergence table is computed at t = 1");
    }
    if r_list.len() < 2 {
        return domain("need at least two radii");
    }
    let d = params.d();
    let expo = 2 * d as i32 - 2;
    let sigma2 = fourier::sigma_squared_fourier(d, params.kappa(), &budgets.quad)?;
    let mut rep = RegimeReport::new(Regime::Clt);
    let (mut v1s, mut v2s) = (Vec::new(), Vec::new());
    for (i, &r) in r_list.iter().enumerate() {
        let p = params.with_radius(r)?;
        let norm = r.powi(expo);
        let v1 = fourier::first_chaos_variance_exact(&p, &budgets.quad)? / norm;
        let spec = ChaosVarianceSpec {
            n: 2,
            params: p,
            quad: budgets.quad,
            mc_samples: budgets.fourier_mc_samples,
        };
        let mc = fourier_mc_min_ess(spec, budgets.fourier_mc_samples as f64, key.child("chaos2", i as u64), par)?;
        let v2 = mc.estimate.scaled(1.0 / norm);
        rep.row(
            "R",
            r,
            "effective_samples",
            Estimate {
                value: mc.effective_samples,
                stderr: 0.0,
                ..v2
            },
        );
        let dominance = v1 / (v1 + v2.value);
        let dom_se = v1 * v2.stderr / (v1 + v2.value).powi(2);
        rep.row("R", r, "var1_over_r2d2", Estimate::exact(v1, Method::FourierQuad));
        rep.row("R", r, "var2_over_r2d2", v2);
        rep.row("R", r, "sigma2", Estimate::exact(sigma2, Method::FourierQuad));
        rep.row(
            "R",
            r,
            "first_chaos_dominance",
            Estimate {
                value: dominance,
                stderr: dom_se,
                ..v2
            },
        );
        v1s.push(v1);
        v2s.push(v2.value);
    }
    let (inc, m1) = monotone(&v1s, true);
    rep.verdict("var1 ratio increasing at every consecutive R (min step)", inc, m1);
    let last1 = *v1s.last().unwrap();
    let gap = (last1 - sigma2).abs() / sigma2;
    rep.verdict(
        "var1 ratio within 2% of sigma2 at the largest R (relative slack)",
        gap < 0.02,
        0.02 - gap,
    );
    let (dec, m2) = monotone(&v2s, false);
    rep.verdict("var2 ratio decreasing at every consecutive R (min step)", dec, m2);
    let share = v2s.last().unwrap() / sigma2;
    rep.verdict(
        "var2 ratio below 5% of sigma2 at the largest R (slack)",
        share < 0.05,
        0.05 - share,
    );
    Ok(rep)
}

/// Diffusive scaling checks at `(t, R)` against `(eps t, sqrt(eps) R)`, the
/// second-moment collapse, and the non-degeneracy witness at `t = R^2`.
pub fn scaling_check(
    params: &ModelParams,
    epsilon_list: &[f64],
    budgets: &Budgets,
    key: StreamKey,
    par: Parallelism,
) -> Result<RegimeReport> {
    let d = params.d();
    let df = d as f64;
    let mut rep = RegimeReport::new(Regime::FixedPoint);

    // (i) n = 1 variance identity, Fourier side against the real-space pair quadrature.
    for &eps in epsilon_list {
        if !(eps > 0.0) {
            return domain(format!("epsilon must be positive, got {eps}"));
        }
        let lhs = fourier::first_chaos_variance(params, &budgets.quad)?;
        let scaled = ModelParams::new(d, params.kappa(), eps * params.t(), eps.sqrt() * params.radius())?;
        let rhs = eps.powf(-df) * fourier::first_chaos_variance_pair_quadrature(&scaled)?;
        let rel = (lhs - rhs).abs() / lhs;
        rep.row("eps", eps, "var1_direct", Estimate::exact(lhs, Method::FourierQuad));
        rep.row("eps", eps, "var1_rescaled", Estimate::exact(rhs, Method::Exact));
        rep.verdict(
            format!("var1 scaling identity at eps={eps} to 1e-6 relative (slack)"),
            rel < 1e-6,
            1e-6 - rel,
        );
    }

    // (ii) law of beta: beta_{eps t}(sqrt(eps) x) against beta_t(x), KS at 1%.
    let eps = epsilon_list
        .iter()
        .copied()
        .find(|&e| e != 1.0)
        .unwrap_or(0.25);
    let mut x = vec![0.0; d];
    x[0] = params.radius();
    let xs: Vec<f64> = x.iter().map(|c| c * eps.sqrt()).collect();
    let a = feynman_kac::sample_beta_batch(&x, params.t(), budgets.ks_paths, &budgets.path, key.child("ks", 0), par)?;
    let b = feynman_kac::sample_beta_batch(&xs, eps * params.t(), budgets.ks_paths, &budgets.path, key.child("ks", 1), par)?;
    let ks = stats::ks_two_sample(&a.values, &b.values, 0.01);
    rep.row(
        "eps",
        eps,
        "beta_law_ks_statistic",
        Estimate {
            value: ks.statistic,
            stderr: 0.0,
            n_samples: budgets.ks_paths as u64,
            method: Method::FkMc,
            seed: Some(key.child("ks", 0)),
        },
    );
    rep.verdict(
        "beta law KS statistic below the 1% critical value (slack)",
        !ks.rejected(),
        ks.critical_value - ks.statistic,
    );

    // (iii) n = 2 variance identity by Feynman-Kac on both sides.
    let pairs = PairBudget {
        n_pairs: budgets.fk_pairs,
        paths_per_pair: 1,
    };
    let scaled = ModelParams::new(d, params.kappa(), eps * params.t(), eps.sqrt() * params.radius())?;
    let v2 = feynman_kac::chaos_variance_fk(2, params, pairs, &budgets.path, key.child("var2", 0), par)?;
    let v2s = feynman_kac::chaos_variance_fk(2, &scaled, pairs, &budgets.path, key.child("var2", 1), par)?
        .scaled(eps.powf(-df));
    rep.row("eps", eps, "var2_direct", v2);
    rep.row("eps", eps, "var2_rescaled", v2s);
    let z = v2.z_score(&v2s);
    rep.verdict("var2 scaling identity within 3 sigma (slack in sigma)", z <= 3.0, 3.0 - z);

    // (iv) R^{-2d} E[u_t(B_R)^2] depends only on t / R^2; kept at a coupling
    // with finite Monte Carlo variance.
    let kc = 0.6 * ModelParams::critical_kappa(d);
    let c = params.t() / params.radius().powi(2);
    let mut collapse = Vec::new();
    for (i, r) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let p = ModelParams::new(d, kc, c * r * r, r)?;
        let m2 = feynman_kac::second_moment_fk(&p, pairs, &budgets.path, key.child("collapse", i as u64), par)?
            .scaled(r.powf(-2.0 * df));
        rep.row("R", r, "second_moment_over_r2d", m2);
        collapse.push(m2);
    }
    let zmax = collapse
        .iter()
        .enumerate()
        .flat_map(|(i, a)| collapse[i + 1..].iter().map(move |b| a.z_score(b)))
        .fold(0.0, f64::max);
    rep.verdict(
        format!("second-moment collapse at kappa={kc} within 3 sigma (slack in sigma)"),
        zmax <= 3.0,
        3.0 - zmax,
    );

    // (v) Var[u_c(B_1)] > 0 at c = t / R^2.
    let unit = ModelParams::new(d, params.kappa(), c, 1.0)?;
    let m2 = feynman_kac::second_moment_fk(&unit, pairs, &budgets.path, key.child("nondegenerate", 0), par)?;
    let mean_sq = ball_volume(d).powi(2);
    let var = Estimate {
        value: m2.value - mean_sq,
        ..m2
    };
    rep.row("c", c, "variance_u_c_b1", var);
    let sig = var.value / var.stderr;
    rep.verdict("Var[u_c(B_1)] > 0 with a 5 sigma margin (sigma units above 5)", sig > 5.0, sig - 5.0);
    Ok(rep)
}

/// Growth exponent `alpha = (d-2)/2 - sqrt(((d-2)/2)^2 - kappa^2)` of the
/// second-moment bound.
pub fn growth_exponent(d: usize, kappa: f64) -> Result<f64> {
    crate::params::check_coupling(d, kappa)?;
    let g = ModelParams::critical_kappa(d);
    Ok(g - (g * g - kappa * kappa).sqrt())
}

/// Least-squares slope of `y` on `x`.
fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (stats::mean(x), stats::mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Result of [`extinction_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionProfile {
    pub report: RegimeReport,
    pub alpha: f64,
    /// Fitted slope of `log E[exp(kappa^2 beta)]` against `log tau` over the
    /// largest decade of `tau`, with its jackknife stderr.
    pub slope: Estimate,
    /// The same slope from the deterministic radial profile.
    pub radial_slope: f64,
    /// Every `exp_moment` reliability flag raised along the profile.
    pub flags: Vec<String>,
}

/// Scaling function `f(tau) = E[exp(kappa^2 beta_1(x))]` at `|x| = tau^{-1/2}`
/// (equal in law to `beta_tau(e_1)`), its log-log slope over the largest
/// decade against `alpha`, and the moment signature of extinction: the ball
/// mean stays `omega_d R^d` while `R^{-2d} E[u_t(B_R)^2]` grows with `t / R^2`.
///
/// All `tau` points reuse the same path seeds, so the slope is estimated on
/// coupled samples and its stderr comes from a grouped jackknife.
pub fn extinction_profile(
    tau_list: &[f64],
    kappa: f64,
    d: usize,
    budgets: &Budgets,
    key: StreamKey,
    par: Parallelism,
) -> Result<ExtinctionProfile> {
    let alpha = growth_exponent(d, kappa)?;
    let mut taus = tau_list.to_vec();
    taus.sort_by(|a, b| a.total_cmp(b));
    let (lo, hi) = (taus[0], *taus.last().unwrap());
    if !(lo > 0.0 && hi / lo >= 100.0 * (1.0 - 1e-12)) {
        return domain("tau values must be positive and span at least two decades");
    }
    let mut rep = RegimeReport::new(Regime::Extinction);
    let k2 = kappa * kappa;
    let n = budgets.exp_paths;
    let groups = 32.min(n);
    let layout = crate::rng::blocks(n, n.div_ceil(groups));
    let mut flags = Vec::new();
    // group_means[g][i] = mean weight in group g at tau i
    let mut group_means = vec![vec![0.0; taus.len()]; layout.len()];
    let path_key = key.child("exp-moment", 0);
    for (i, &tau) in taus.iter().enumerate() {
        let mut x = vec![0.0; d];
        x[0] = tau.powf(-0.5);
        let batch = feynman_kac::sample_beta_batch(&x, 1.0, n, &budgets.path, path_key, par)?;
        let em = feynman_kac::exp_moment_from_batch(&batch, kappa)?;
        for (g, &(start, len)) in layout.iter().enumerate() {
            let s: f64 = batch.values[start..start + len].iter().map(|b| (k2 * b).exp()).sum();
            group_means[g][i] = s / len as f64;
        }
        flags.extend(em.flags.iter().map(|f| format!("tau={tau}: {f}")));
        rep.row("tau", tau, "exp_moment", em.estimate);
    }
    let counts: Vec<u64> = layout.iter().map(|&(_, len)| len as u64).collect();
    let fit_idx: Vec<usize> = (0..taus.len()).filter(|&i| taus[i] >= hi / 10.0 * (1.0 - 1e-12)).collect();
    if fit_idx.len() < 2 {
        return domain("the largest decade of tau needs at least two points");
    }
    let lx: Vec<f64> = fit_idx.iter().map(|&i| taus[i].ln()).collect();
    let (value, stderr) = jackknife(&group_means, &counts, |m| {
        let ly: Vec<f64> = fit_idx.iter().map(|&i| m[i].ln()).collect();
        ls_slope(&lx, &ly)
    });
    let slope = Estimate {
        value,
        stderr,
        n_samples: n as u64,
        method: Method::FkMc,
        seed: Some(path_key),
    };
    rep.row("tau", hi, "growth_slope", slope);
    rep.row("tau", hi, "alpha", Estimate::exact(alpha, Method::Exact));
    let rel = value / alpha;
    rep.verdict(
        "growth slope within [0.85, 1.15] alpha (slack in units of alpha)",
        (0.85..=1.15).contains(&rel),
        0.15 - (rel - 1.0).abs(),
    );
    let rel_half = value / (alpha / 2.0);
    rep.verdict(
        "growth slope within [0.85, 1.15] alpha/2 (slack in units of alpha/2)",
        (0.85..=1.15).contains(&rel_half),
        0.15 - (rel_half - 1.0).abs(),
    );
    rep.verdict("exp_moment reliability flags absent", flags.is_empty(), -(flags.len() as f64));

    // Noise-free profile from the radial backward equation.
    let radial = feynman_kac::exp_moment_radial(d, kappa, &taus, &feynman_kac::RadialGrid::default())?;
    for (&tau, &v) in taus.iter().zip(&radial) {
        rep.row("tau", tau, "exp_moment_radial", Estimate::exact(v, Method::RadialPde));
    }
    let ly: Vec<f64> = fit_idx.iter().map(|&i| radial[i].ln()).collect();
    let radial_slope = ls_slope(&lx, &ly);
    rep.row("tau", hi, "growth_slope_radial", Estimate::exact(radial_slope, Method::RadialPde));

    // Moment signature on B_1: mean fixed, normalised second moment growing.
    let mean = ball_volume(d);
    let pairs = PairBudget {
        n_pairs: budgets.fk_pairs,
        paths_per_pair: 1,
    };
    let mut m2s = Vec::new();
    for (i, c) in [1.0, 10.0, 100.0].into_iter().enumerate() {
        let p = ModelParams::new(d, kappa, c, 1.0)?;
        rep.row("t_over_r2", c, "first_moment", Estimate::exact(mean, Method::Exact));
        let m2 = feynman_kac::second_moment_fk(&p, pairs, &budgets.path, key.child("signature", i as u64), par)?
            .scaled(1.0 / (mean * mean));
        rep.row("t_over_r2", c, "normalized_second_moment", m2);
        m2s.push(m2.value);
    }
    let (grows, m) = monotone(&m2s, true);
    rep.verdict("normalized second moment increasing in t/R^2 (min step)", grows, m);
    Ok(ExtinctionProfile {
        report: rep,
        alpha,
        slope,
        radial_slope,
        flags,
    })
}

/// Lattice checkpoints of one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeRegimeSpec {
    pub regime: Regime,
    /// Ball radius in units of the grid spacing.
    pub r_cells: f64,
    /// Times in units of `h^2`; several for the extinction sweep.
    pub times: Vec<f64>,
}

/// Default desk-scale checkpoints for `h = 1`, `dt = h^2/12`:
/// CLT at `R = 16h`, `T = 4 dt`; fixed point at `R = 4h`, `T = R^2`;
/// extinction at `R = 2h`, `T in {2, 3, 4} R^2`.
pub fn default_lattice_regimes(dt: f64) -> Vec<LatticeRegimeSpec> {
    vec![
        LatticeRegimeSpec {
            regime: Regime::Clt,
            r_cells: 16.0,
            times: vec![4.0 * dt],
        },
        LatticeRegimeSpec {
            regime: Regime::FixedPoint,
            r_cells: 4.0,
            times: vec![16.0],
        },
        LatticeRegimeSpec {
            regime: Regime::Extinction,
            r_cells: 2.0,
            times: vec![8.0, 12.0, 16.0],
        },
    ]
}

fn checkpoints_of(specs: &[LatticeRegimeSpec], h: f64) -> Vec<Checkpoint> {
    let mut out = Vec::new();
    for s in specs {
        for &t in &s.times {
            out.push(Checkpoint {
                t: t * h * h,
                r: s.r_cells * h,
            });
        }
    }
    out
}

/// Resample replicas with replacement (all centres of a replica together)
/// and return the stderr of `stat`.
fn cluster_bootstrap<F>(values: &[f64], replicas: usize, resamples: usize, key: StreamKey, stat: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let per = values.len() / replicas;
    let mut rng = key.stream(0);
    let mut buf = Vec::with_capacity(values.len());
    let draws: Vec<f64> = (0..resamples)
        .map(|_| {
            buf.clear();
            for _ in 0..replicas {
                let r = rng.random_range(0..replicas);
                buf.extend_from_slice(&values[r * per..(r + 1) * per]);
            }
            stat(&buf)
        })
        .collect();
    stats::variance(&draws).sqrt()
}

const BOOTSTRAP_RESAMPLES: usize = 200;

fn lattice_estimate(value: f64, stderr: f64, n: usize, key: StreamKey) -> Estimate {
    Estimate {
        value,
        stderr,
        n_samples: n as u64,
        method: Method::Lattice,
        seed: Some(key),
    }
}

/// Regime statistics from a finished ensemble.
pub fn lattice_report(ensemble: &Ensemble, spec: &LatticeRegimeSpec) -> Result<RegimeReport> {
    let h = ensemble.config.spacing;
    let r = spec.r_cells * h;
    let reps = ensemble.replicas;
    let key = ensemble.seed;
    let mut rep = RegimeReport::new(spec.regime);
    let mut medians = Vec::new();
    let mut mean_z_max: f64 = 0.0;
    for (i, &tc) in spec.times.iter().enumerate() {
        let t = tc * h * h;
        let v = ensemble.averages(t, r);
        if v.is_empty() {
            return domain(format!("ensemble has no checkpoint at T={t}, R={r}"));
        }
        let per = v.len() / reps;
        let rep_means: Vec<f64> = v.chunks(per).map(stats::mean).collect();
        let mean = lattice_estimate(
            stats::mean(&v),
            (stats::variance(&rep_means) / reps as f64).sqrt(),
            v.len(),
            key,
        );
        let bkey = key.child("bootstrap", i as u64);
        let skew = lattice_estimate(
            stats::skewness(&v),
            cluster_bootstrap(&v, reps, BOOTSTRAP_RESAMPLES, bkey, stats::skewness),
            v.len(),
            key,
        );
        let median = lattice_estimate(
            stats::median(&v),
            cluster_bootstrap(&v, reps, BOOTSTRAP_RESAMPLES, bkey, stats::median),
            v.len(),
            key,
        );
        let var = lattice_estimate(stats::variance(&v), 0.0, v.len(), key);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        rep.row("T", t, "mean", mean);
        rep.row("T", t, "skewness", skew);
        rep.row("T", t, "median", median);
        rep.row("T", t, "variance", var);
        rep.row("T", t, "minimum", lattice_estimate(min, 0.0, v.len(), key));
        mean_z_max = mean_z_max.max((mean.value - 1.0).abs() / mean.stderr);
        medians.push(median.value);
        match spec.regime {
            Regime::Clt => rep.verdict(
                format!("|skewness| < 0.3 at T={t} (slack)"),
                skew.value.abs() < 0.3,
                0.3 - skew.value.abs(),
            ),
            Regime::FixedPoint => {
                rep.verdict(
                    format!("skewness > 0.3 at T={t} (slack)"),
                    skew.value > 0.3,
                    skew.value - 0.3,
                );
                rep.verdict(format!("variance positive at T={t}"), var.value > 0.0, var.value);
                rep.verdict(format!("all averages positive at T={t} (minimum)"), min > 0.0, min);
            }
            Regime::Extinction => {}
        }
    }
    if spec.regime == Regime::Extinction {
        let (dec, m) = monotone(&medians, false);
        rep.verdict("median strictly decreasing along the T sweep (min step)", dec, m);
        let last = *medians.last().unwrap();
        rep.verdict("median below 0.5 at the last T (slack)", last < 0.5, 0.5 - last);
    }
    rep.verdict(
        "ensemble mean within 3 sigma of 1 at every T (slack in sigma)",
        mean_z_max <= 3.0,
        3.0 - mean_z_max,
    );
    Ok(rep)
}

/// Run one shared ensemble serving every regime in `specs` and report each.
pub fn lattice_trichotomy(
    cfg: &LatticeConfig,
    specs: &[LatticeRegimeSpec],
    replicas: usize,
    key: StreamKey,
    par: Parallelism,
) -> Result<(Ensemble, Vec<RegimeReport>)> {
    if replicas < 100 {
        return domain(format!("lattice regimes need at least 100 replicas, got {replicas}"));
    }
    let cps = checkpoints_of(specs, cfg.spacing);
    let ens = lattice::run_ensemble(cfg, &cps, replicas, key, par)?;
    let reports = specs
        .iter()
        .map(|s| lattice_report(&ens, s))
        .collect::<Result<Vec<_>>>()?;
    Ok((ens, reports))
}

/// Ensemble statistics for a single regime.
pub fn regime_ensemble(
    spec: &LatticeRegimeSpec,
    replicas: usize,
    cfg: &LatticeConfig,
    key: StreamKey,
    par: Parallelism,
) -> Result<RegimeReport> {
    let (_, mut reports) = lattice_trichotomy(cfg, std::slice::from_ref(spec), replicas, key, par)?;
    Ok(reports.remove(0))
}
