//! One runner per subcommand. Each reads its settings from a [`RunConfig`]
//! and returns rows; nothing here touches the filesystem.

use serde_json::json;

use super::config::RunConfig;
use super::output::Outcome;
use crate::error::{Error, Result};
use crate::feynman_kac::{self, PairBudget, PathConfig, RadialGrid};
use crate::fourier::{self, ChaosVarianceSpec};
use crate::kernels;
use crate::lattice::{LatticeConfig, Scheme};
use crate::params::{ModelParams, QuadratureSpec};
use crate::regimes::{self, Budgets};
use crate::rng::StreamKey;
use crate::simplex::{self, RateVector};
use crate::stats::{Estimate, Method};

fn key(cfg: &RunConfig, estimator: &str) -> Result<StreamKey> {
    Ok(StreamKey::new(cfg.seed()?, &format!("{}/{estimator}", cfg.subcommand)))
}

fn path_config(cfg: &RunConfig) -> Result<PathConfig> {
    let p = PathConfig::default().with_base_steps(cfg.budget("base-steps")?);
    p.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(p)
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.subcommand.as_str() {
        "sigma" => sigma(cfg),
        "chaos-var" => chaos_var(cfg),
        "phi" => phi(cfg),
        "fk-moments" => fk_moments(cfg),
        "scaling-check" => scaling_check(cfg),
        "clt-table" => clt_table(cfg),
        "extinction" => extinction(cfg),
        "lattice" => lattice(cfg),
        "constants" => constants(cfg),
        other => Err(Error::Usage(format!("unknown subcommand {other}"))),
    }
}

/// σ² is κ² times a κ-free integral, so any positive κ is accepted here.
fn sigma(cfg: &RunConfig) -> Result<Outcome> {
    let d: usize = cfg.get("d")?;
    let kappa: f64 = cfg.get("kappa")?;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Usage(format!("kappa must be positive, got {kappa}")));
    }
    let samples = cfg.budget("samples")?;
    let s = fourier::sigma_squared(
        d,
        kappa,
        &QuadratureSpec::default(),
        samples,
        key(cfg, "real-space")?,
        cfg.parallelism()?,
    )?;
    let mut out = Outcome::default();
    out.push("sigma2_fourier", &Estimate::exact(s.fourier, Method::FourierQuad));
    out.push("sigma2_real_space", &s.real_space);
    let tol = (0.005 * s.fourier).max(3.0 * s.real_space.stderr);
    let diff = (s.fourier - s.real_space.value).abs();
    out.verdict(
        "fourier and real-space agree within max(0.5%, 3 sigma) (relative slack)",
        s.agree(),
        (tol - diff) / s.fourier,
    );
    Ok(out)
}

fn chaos_var(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.model_params()?;
    let n: usize = cfg.get("n")?;
    if n == 0 {
        return Err(Error::Usage("chaos order n must be at least 1".into()));
    }
    let method = cfg.raw("method");
    if !["fourier", "fk", "both"].contains(&method) {
        return Err(Error::Usage(format!("method must be fourier, fk or both, got '{method}'")));
    }
    let par = cfg.parallelism()?;
    let quad = QuadratureSpec::default();
    let mut out = Outcome::default();
    let mut fourier_est = None;
    let mut fk_est = None;
    if method != "fk" {
        let e = if n == 1 {
            Estimate::exact(fourier::first_chaos_variance(&params, &quad)?, Method::FourierQuad)
        } else {
            let min_ess = cfg.budget("mc-samples")? as f64;
            let spec = ChaosVarianceSpec {
                n,
                params,
                quad,
                mc_samples: min_ess as usize,
            };
            let r = regimes::fourier_mc_min_ess(spec, min_ess, key(cfg, "fourier-mc")?, par)?;
            out.push_exact("effective_samples", r.effective_samples);
            r.estimate
        };
        out.push("variance_fourier", &e);
        fourier_est = Some(e);
    }
    if method != "fourier" {
        let budget = PairBudget {
            n_pairs: cfg.budget("pairs")?,
            paths_per_pair: cfg.budget("paths-per-pair")?,
        };
        let e = feynman_kac::chaos_variance_fk(n, &params, budget, &path_config(cfg)?, key(cfg, "fk-mc")?, par)?;
        out.push("variance_fk", &e);
        fk_est = Some(e);
    }
    if let (Some(a), Some(b)) = (fourier_est, fk_est) {
        let z = a.z_score(&b);
        out.verdict("fourier and fk agree within combined 3 sigma (slack in sigma)", z <= 3.0, 3.0 - z);
    }
    Ok(out)
}

fn phi(cfg: &RunConfig) -> Result<Outcome> {
    let rates = RateVector::new(cfg.list("rates")?).map_err(|e| Error::Usage(e.to_string()))?;
    let n = rates.n();
    let mut out = Outcome::default();
    let v = simplex::phi(&rates);
    out.push_exact("phi", v);
    if let Some(c) = simplex::phi_closed_form(&rates) {
        out.push_exact("phi_closed_form", c);
    }
    out.push_exact("phi_matrix_exp", simplex::phi_matrix_exp(&rates));
    let cap = (1..=n).fold(1.0, |acc, k| acc / k as f64);
    out.verdict("0 < phi <= 1/n! (slack)", v > 0.0 && v <= cap, v.min(cap - v));
    if n >= 2 {
        let k: usize = cfg.get("chain-k")?;
        let b = simplex::phi_chain_bound(&rates, k).map_err(|e| Error::Usage(e.to_string()))?;
        out.push_exact(format!("chain_bound_k{k}"), b);
        out.verdict("phi below the chain bound (slack)", v <= b, b - v);
    }
    let mc = simplex::phi_mc_oracle(&rates, cfg.budget("mc-samples")?, key(cfg, "simplex-mc")?, cfg.parallelism()?)?;
    out.push("phi_simplex_mc", &mc);
    let z = mc.z_score(&Estimate::exact(v, Method::Exact));
    out.verdict("simplex mc agrees within 3 sigma (slack in sigma)", z <= 3.0, 3.0 - z);
    Ok(out)
}

fn fk_moments(cfg: &RunConfig) -> Result<Outcome> {
    let x = cfg.list("x")?;
    let d = x.len();
    if d < 3 {
        return Err(Error::Usage(format!("point x needs at least 3 coordinates, got {d}")));
    }
    let t: f64 = cfg.get("t")?;
    let kappa = cfg.coupling(d)?;
    let n_max: usize = cfg.get("n-max")?;
    let paths = cfg.budget("paths")?;
    let pc = path_config(cfg)?;
    let par = cfg.parallelism()?;
    let mut out = Outcome::default();
    let moments = feynman_kac::beta_moments(&x, t, n_max, paths, &pc, key(cfg, "beta")?, par)?;
    for (n, m) in moments.iter().enumerate() {
        out.push(format!("beta_moment@n={n}"), m);
    }
    if n_max >= 1 {
        let exact = kernels::mean_beta(&x, t)?;
        out.push_exact("beta_mean_exact", exact);
        let z = moments[1].z_score(&Estimate::exact(exact, Method::Exact));
        out.verdict("beta mean agrees with the exact mean within 3 sigma (slack in sigma)", z <= 3.0, 3.0 - z);
    }
    let em = feynman_kac::exp_moment(&x, t, kappa, paths, &pc, key(cfg, "exp-moment")?, par)?;
    out.push("exp_moment", &em.estimate);
    out.push_exact("exp_moment_jensen_bound", em.jensen_bound);
    out.push_exact("exp_moment_top10_share", em.top10_share);
    for s in &em.strata {
        out.rows.push(super::output::Row {
            name: format!("exp_moment_stratum@min_distance={}..{}", s.lo, s.hi),
            value: s.mean,
            stderr: s.stderr,
            n_samples: s.count,
            method: Method::FkMc.tag().into(),
            seed: super::output::seed_tag(&em.estimate.seed.unwrap_or(key(cfg, "exp-moment")?)),
        });
    }
    let r = kernels::norm(&x);
    let tau = t / (r * r);
    if tau >= 1e-2 {
        let v = feynman_kac::exp_moment_radial(d, kappa, &[tau], &RadialGrid::default())?[0];
        out.push("exp_moment_radial", &Estimate::exact(v, Method::RadialPde));
    }
    out.flags.extend(em.flags.iter().cloned());
    Ok(out)
}

fn scaling_check(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.model_params()?;
    let eps = cfg.list("eps")?;
    let budgets = Budgets {
        fk_pairs: cfg.budget("pairs")?,
        ks_paths: cfg.budget("ks-paths")?,
        path: path_config(cfg)?,
        ..Budgets::default()
    };
    let rep = regimes::scaling_check(&params, &eps, &budgets, key(cfg, "report")?, cfg.parallelism()?)?;
    let mut out = Outcome::default();
    out.push_report(&rep, None);
    out.details = Some(json!(rep));
    Ok(out)
}

fn clt_table(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.model_params()?;
    let r_list = cfg.list("r-list")?;
    let budgets = Budgets {
        fourier_mc_samples: cfg.budget("mc-samples")?,
        ..Budgets::default()
    };
    let rep = regimes::clt_convergence_table(&r_list, &params, &budgets, key(cfg, "report")?, cfg.parallelism()?)?;
    let mut out = Outcome::default();
    out.push_report(&rep, None);
    out.details = Some(json!(rep));
    Ok(out)
}

fn extinction(cfg: &RunConfig) -> Result<Outcome> {
    let d: usize = cfg.get("d")?;
    let kappa = cfg.coupling(d)?;
    let taus = cfg.list("taus")?;
    let budgets = Budgets {
        exp_paths: cfg.budget("exp-paths")?,
        fk_pairs: cfg.budget("pairs")?,
        path: path_config(cfg)?,
        ..Budgets::default()
    };
    let prof = regimes::extinction_profile(&taus, kappa, d, &budgets, key(cfg, "report")?, cfg.parallelism()?)?;
    let mut out = Outcome::default();
    out.push_report(&prof.report, None);
    out.flags.extend(prof.flags.iter().cloned());
    out.details = Some(json!(prof));
    Ok(out)
}

fn lattice(cfg: &RunConfig) -> Result<Outcome> {
    let spacing: f64 = cfg.get("spacing")?;
    let dt = match cfg.raw("dt") {
        "auto" => spacing * spacing / 12.0,
        _ => cfg.get("dt")?,
    };
    let scheme = match cfg.raw("scheme") {
        "exponential-euler" => Scheme::ExponentialEuler,
        "euler-maruyama" => Scheme::EulerMaruyama,
        other => {
            return Err(Error::Usage(format!(
                "scheme must be exponential-euler or euler-maruyama, got '{other}'"
            )))
        }
    };
    let lc = LatticeConfig {
        n: cfg.get("grid")?,
        spacing,
        dt,
        kappa: cfg.coupling(3)?,
        scheme,
    };
    let specs = regimes::default_lattice_regimes(dt);
    let replicas = cfg.budget("replicas")?;
    let (ens, reports) = regimes::lattice_trichotomy(&lc, &specs, replicas, key(cfg, "ensemble")?, cfg.parallelism()?)?;
    let mut out = Outcome::default();
    for rep in &reports {
        out.push_report(rep, Some(rep.regime.tag()));
    }
    if cfg.flag("dump")? {
        out.extra.push(("lattice.ensemble.csv".into(), ens.to_csv()));
    }
    out.details = Some(json!(reports));
    Ok(out)
}

/// Accepts any positive κ so the summability flag can be inspected on
/// both sides of the critical coupling.
fn constants(cfg: &RunConfig) -> Result<Outcome> {
    let d: usize = cfg.get("d")?;
    let kappa: f64 = cfg.get("kappa")?;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Usage(format!("kappa must be positive, got {kappa}")));
    }
    let c = fourier::proof_constants(d, kappa).map_err(|e| Error::Usage(e.to_string()))?;
    let mut out = Outcome::default();
    out.push_exact("m0", c.m0 as f64);
    out.push_exact("gamma0", c.gamma0);
    out.push_exact("gamma_j", c.gamma_j);
    out.push_exact("k_j", c.k_j);
    out.push_exact("k_k", c.k_k);
    out.push_exact("geometric_ratio", c.geometric_ratio);
    out.push_exact("summable", if c.summable { 1.0 } else { 0.0 });
    out.push_exact("critical_kappa", ModelParams::critical_kappa(d));
    out.push_exact("c_d", kernels::riesz_spectral_constant(d)?);
    if c.summable {
        out.push_exact("alpha", regimes::growth_exponent(d, kappa)?);
    }
    let lhs = 2.0 * c.m0 as f64 + 2.0 - c.gamma0;
    out.verdict(
        "2 m0 + 2 - gamma0 = (d-2)/2 (absolute slack)",
        (lhs - c.gamma_j).abs() < 1e-12,
        1e-12 - (lhs - c.gamma_j).abs(),
    );
    out.details = Some(json!(c));
    Ok(out)
}
