//! Periodic d=3 lattice simulation of the equation with Riesz-correlated
//! noise, for qualitative regime experiments on ball averages.
//!
//! Noise is synthesised spectrally: one inverse complex FFT of white noise
//! shaped by the discrete spectral multiplier yields two independent real
//! time slices (real and imaginary parts). The equation is advanced by an
//! explicit 7-point heat step split with a multiplicative Itô noise step.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels;
use crate::rng::{Parallelism, StreamKey};

/// Field entries beyond this magnitude abort the run.
pub const BLOW_UP_LIMIT: f64 = 1e12;

/// Real field on an `n^3` periodic grid, stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    n: usize,
    spacing: f64,
    pub time: f64,
    pub data: Vec<f64>,
}

impl LatticeField {
    pub fn constant(n: usize, spacing: f64, value: f64) -> Result<Self> {
        check_grid(n, spacing)?;
        Ok(Self {
            n,
            spacing,
            time: 0.0,
            data: vec![value; n * n * n],
        })
    }

    pub fn from_data(n: usize, spacing: f64, data: Vec<f64>) -> Result<Self> {
        check_grid(n, spacing)?;
        if data.len() != n * n * n {
            return domain(format!("expected {} entries, got {}", n * n * n, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return domain("lattice field has non-finite entries");
        }
        Ok(Self {
            n,
            spacing,
            time: 0.0,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Side length `L = n h`.
    pub fn extent(&self) -> f64 {
        self.n as f64 * self.spacing
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n + j) * self.n + i
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn spatial_mean(&self) -> f64 {
        crate::rng::pairwise_sum(&self.data) / self.data.len() as f64
    }
}

fn check_grid(n: usize, spacing: f64) -> Result<()> {
    if n < 4 || !n.is_power_of_two() {
        return domain(format!("grid size must be a power of two >= 4, got {n}"));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return domain(format!("grid spacing must be positive, got {spacing}"));
    }
    Ok(())
}

/// Signed frequency index of DFT bin `i`.
fn wave_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Discrete Riesz spectral multiplier `sqrt(c_3) |xi_k|^{-1/2}` with the
/// zero mode removed, plus the cell factor `(2 pi / L)^{3/2}` that turns
/// the spectral density into discrete mode amplitudes.
#[derive(Debug, Clone)]
pub struct NoiseSpectrum {
    n: usize,
    spacing: f64,
    pub multiplier: Vec<f64>,
    pub cell_factor: f64,
}

impl NoiseSpectrum {
    pub fn riesz(n: usize, spacing: f64) -> Result<Self> {
        check_grid(n, spacing)?;
        let d = 3;
        let cd = kernels::riesz_spectral_constant(d)?;
        let l = n as f64 * spacing;
        let dk = 2.0 * std::f64::consts::PI / l;
        let mut multiplier = vec![0.0; n * n * n];
        for k in 0..n {
            let kz = wave_index(k, n) as f64;
            for j in 0..n {
                let ky = wave_index(j, n) as f64;
                for i in 0..n {
                    let kx = wave_index(i, n) as f64;
                    let norm = dk * (kx * kx + ky * ky + kz * kz).sqrt();
                    if norm > 0.0 {
                        multiplier[(k * n + j) * n + i] =
                            cd.sqrt() * norm.powf(-(d as f64 - 2.0) / 2.0);
                    }
                }
            }
        }
        Ok(Self {
            n,
            spacing,
            multiplier,
            cell_factor: dk.powf(d as f64 / 2.0),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Discrete mode variance `(cell_factor * multiplier)^2`.
    fn mode_variance(&self, idx: usize) -> f64 {
        (self.cell_factor * self.multiplier[idx]).powi(2)
    }

    /// Variance of the unit-time noise at one site, `sum_k` of the mode variances.
    pub fn site_variance(&self) -> f64 {
        let v: Vec<f64> = (0..self.multiplier.len())
            .map(|i| self.mode_variance(i))
            .collect();
        crate::rng::pairwise_sum(&v)
    }

    /// Torus covariance of the unit-time noise at lag `lag` grid cells along
    /// the first axis, summed directly over the spectrum.
    pub fn axis_covariance(&self, lag: usize) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for idx in 0..self.multiplier.len() {
            let kx = wave_index(idx % n, n) as f64;
            let phase = 2.0 * std::f64::consts::PI * kx * lag as f64 / n as f64;
            acc += self.mode_variance(idx) * phase.cos();
        }
        acc
    }
}

/// Tiled transpose of an `n x n` row-major block.
fn transpose<T: Copy>(src: &[T], dst: &mut [T], n: usize) {
    let tile = n.min(16);
    for r0 in (0..n).step_by(tile) {
        for c0 in (0..n).step_by(tile) {
            for r in r0..r0 + tile {
                let row = &src[r * n + c0..r * n + c0 + tile];
                for (c, v) in row.iter().enumerate() {
                    dst[(c0 + c) * n + r] = *v;
                }
            }
        }
    }
}

/// In-place 3D inverse DFT. The x axis is contiguous; y and z lines are
/// brought into contiguous order through cache-sized plane transposes.
struct Fft3 {
    n: usize,
    fft: Arc<dyn Fft<f32>>,
    scratch: Vec<Complex<f32>>,
    plane: Vec<Complex<f32>>,
    plane_t: Vec<Complex<f32>>,
}

impl Fft3 {
    fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(n);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self {
            n,
            fft,
            scratch,
            plane: vec![Complex::default(); n * n],
            plane_t: vec![Complex::default(); n * n],
        }
    }

    fn inverse(&mut self, data: &mut [Complex<f32>]) {
        let n = self.n;
        let nn = n * n;
        self.fft.process_with_scratch(data, &mut self.scratch);
        // y axis: each z-plane is an (y, x) block.
        for plane in data.chunks_exact_mut(nn) {
            transpose(plane, &mut self.plane_t, n);
            self.fft.process_with_scratch(&mut self.plane_t, &mut self.scratch);
            transpose(&self.plane_t, plane, n);
        }
        // z axis: gather the (z, x) slab at each y.
        for y in 0..n {
            for z in 0..n {
                let src = (z * n + y) * n;
                self.plane[z * n..(z + 1) * n].copy_from_slice(&data[src..src + n]);
            }
            transpose(&self.plane, &mut self.plane_t, n);
            self.fft.process_with_scratch(&mut self.plane_t, &mut self.scratch);
            transpose(&self.plane_t, &mut self.plane, n);
            for z in 0..n {
                let dst = (z * n + y) * n;
                data[dst..dst + n].copy_from_slice(&self.plane[z * n..(z + 1) * n]);
            }
        }
    }
}

/// Reusable spectral noise synthesiser. Each call to [`NoiseGenerator::pair`]
/// consumes one random stream and yields two independent unit-time slices.
/// Synthesis runs in single precision; the slices are returned as `f32`.
pub struct NoiseGenerator {
    amplitude: Vec<f32>,
    fft: Fft3,
    buf: Vec<Complex<f32>>,
}

impl NoiseGenerator {
    pub fn new(spectrum: &NoiseSpectrum) -> Self {
        let n = spectrum.n;
        let amplitude = spectrum
            .multiplier
            .iter()
            .map(|m| (m * spectrum.cell_factor) as f32)
            .collect();
        Self {
            amplitude,
            fft: Fft3::new(n),
            buf: vec![Complex::default(); n * n * n],
        }
    }

    /// Two independent slices scaled by `sqrt(dt)`, written into `a` and `b`.
    pub fn pair(&mut self, dt: f64, rng: &mut ChaCha8Rng, a: &mut [f32], b: &mut [f32]) {
        let scale = dt.sqrt() as f32;
        for z in self.buf.iter_mut() {
            *z = Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        for (z, m) in self.buf.iter_mut().zip(&self.amplitude) {
            *z *= scale * m;
        }
        self.fft.inverse(&mut self.buf);
        for ((x, y), z) in a.iter_mut().zip(b.iter_mut()).zip(&self.buf) {
            *x = z.re;
            *y = z.im;
        }
    }
}

/// One noise time slice scaled by `sqrt(dt)`.
pub fn generate_riesz_noise(
    spectrum: &NoiseSpectrum,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<LatticeField> {
    if !(dt.is_finite() && dt > 0.0) {
        return domain(format!("dt must be positive, got {dt}"));
    }
    let len = spectrum.multiplier.len();
    let (mut a, mut b) = (vec![0.0; len], vec![0.0; len]);
    NoiseGenerator::new(spectrum).pair(dt, rng, &mut a, &mut b);
    LatticeField::from_data(spectrum.n, spectrum.spacing, a.into_iter().map(f64::from).collect())
}

/// Time discretisation of the multiplicative noise term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `u <- u exp(kappa dW - kappa^2 Var(dW) / 2)`; keeps the field positive.
    ExponentialEuler,
    /// `u <- u (1 + kappa dW)`.
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheConfig {
    pub kappa: f64,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
}

impl SheConfig {
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    fn validate(&self, spacing: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= spacing * spacing / 6.0) {
            return domain(format!(
                "dt={} violates the explicit stability bound h^2/6 = {}",
                self.dt,
                spacing * spacing / 6.0
            ));
        }
        if self.kappa != 0.0 {
            crate::params::check_coupling(3, self.kappa)?;
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return domain(format!("final time must be nonnegative, got {}", self.t_final));
        }
        Ok(())
    }
}

/// `out = u + dt/2 * Delta_h u` with periodic 7-point Laplacian;
/// `coef = dt / (2 h^2)`. Constant fields are reproduced exactly.
fn heat_step(u: &[f64], out: &mut [f64], n: usize, coef: f64) {
    let mask = n - 1;
    for k in 0..n {
        let (kp, km) = ((k + 1) & mask, (k + mask) & mask);
        for j in 0..n {
            let (jp, jm) = ((j + 1) & mask, (j + mask) & mask);
            let row = |kk: usize, jj: usize| &u[(kk * n + jj) * n..(kk * n + jj + 1) * n];
            let c = row(k, j);
            let o = &mut out[(k * n + j) * n..(k * n + j + 1) * n];
            for (((((o, c), a), b), f), g) in o
                .iter_mut()
                .zip(c)
                .zip(row(k, jp))
                .zip(row(k, jm))
                .zip(row(kp, j))
                .zip(row(km, j))
            {
                *o = a + b + f + g - 6.0 * c;
            }
            for ((o, l), r) in o[1..n - 1].iter_mut().zip(&c[..n - 2]).zip(&c[2..]) {
                *o += l + r;
            }
            o[0] += c[n - 1] + c[1];
            o[n - 1] += c[n - 2] + c[0];
            for (o, c) in o.iter_mut().zip(c) {
                *o = c + coef * *o;
            }
        }
    }
}

fn gen_amplitudes(spectrum: &NoiseSpectrum) -> impl Iterator<Item = f64> + '_ {
    spectrum
        .multiplier
        .iter()
        .map(|m| f64::from((m * spectrum.cell_factor) as f32))
}

/// Evolve `initial` to `cfg.t_final`, calling `observe(step, field)` after
/// every step (and once with step 0 before the first). Step pair `p` draws
/// its noise from stream `p` of `key`.
pub fn evolve_she<F>(
    initial: LatticeField,
    cfg: &SheConfig,
    spectrum: &NoiseSpectrum,
    key: StreamKey,
    mut observe: F,
) -> Result<LatticeField>
where
    F: FnMut(usize, &LatticeField),
{
    if spectrum.n != initial.n || spectrum.spacing != initial.spacing {
        return domain("noise spectrum does not match the field grid");
    }
    cfg.validate(initial.spacing)?;
    let n = initial.n;
    let len = n * n * n;
    let steps = cfg.steps();
    let coef = 0.5 * cfg.dt / (initial.spacing * initial.spacing);
    // Variance correction uses the single-precision amplitudes actually synthesised.
    let site_var: f64 = {
        let v: Vec<f64> = gen_amplitudes(spectrum).map(|a| a * a).collect();
        crate::rng::pairwise_sum(&v)
    };
    let ito = (0.5 * cfg.kappa * cfg.kappa * cfg.dt * site_var) as f32;
    let kappa = cfg.kappa as f32;

    let mut field = initial;
    let mut next = vec![0.0; len];
    let mut gen = NoiseGenerator::new(spectrum);
    let (mut na, mut nb) = (vec![0.0f32; len], vec![0.0f32; len]);
    observe(0, &field);
    for step in 0..steps {
        heat_step(&field.data, &mut next, n, coef);
        if cfg.kappa != 0.0 {
            if step % 2 == 0 {
                let mut rng = key.stream((step / 2) as u64);
                gen.pair(cfg.dt, &mut rng, &mut na, &mut nb);
            }
            let noise = if step % 2 == 0 { &na } else { &nb };
            match cfg.scheme {
                Scheme::ExponentialEuler => {
                    for (u, w) in next.iter_mut().zip(noise) {
                        *u *= f64::from((kappa * w - ito).exp());
                    }
                }
                Scheme::EulerMaruyama => {
                    for (u, w) in next.iter_mut().zip(noise) {
                        *u *= 1.0 + cfg.kappa * f64::from(*w);
                    }
                }
            }
        }
        std::mem::swap(&mut field.data, &mut next);
        field.time = (step + 1) as f64 * cfg.dt;
        if let Some(v) = field.data.iter().find(|v| !(v.abs() <= BLOW_UP_LIMIT)) {
            return Err(Error::Aborted {
                step: step + 1,
                reason: format!("field entry {v:e} beyond {BLOW_UP_LIMIT:e}"),
            });
        }
        observe(step + 1, &field);
    }
    Ok(field)
}

/// How a ball average is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallNorm {
    /// Sum of entries times cell volume.
    Mass,
    /// Mass divided by the discrete ball volume (cell count times cell volume).
    PerVolume,
}

/// Lattice sites whose centres lie within `r` of site `center`, as offsets.
pub fn ball_offsets(spacing: f64, r: f64) -> Vec<(i64, i64, i64)> {
    let m = (r / spacing).floor() as i64;
    let r2 = (r / spacing).powi(2);
    let mut out = Vec::new();
    for dk in -m..=m {
        for dj in -m..=m {
            for di in -m..=m {
                if ((di * di + dj * dj + dk * dk) as f64) <= r2 {
                    out.push((di, dj, dk));
                }
            }
        }
    }
    out
}

/// Ball integral of `field` over radius `r` around site `center`.
pub fn ball_average_at(
    field: &LatticeField,
    center: (usize, usize, usize),
    r: f64,
    norm: BallNorm,
) -> Result<f64> {
    let h = field.spacing;
    if !(r >= 2.0 * h && r <= field.extent() / 4.0) {
        return domain(format!(
            "ball radius {r} outside the resolved range [2h, L/4] = [{}, {}]",
            2.0 * h,
            field.extent() / 4.0
        ));
    }
    let n = field.n as i64;
    let offsets = ball_offsets(h, r);
    let mut sum = 0.0;
    for (di, dj, dk) in &offsets {
        let i = (center.0 as i64 + di).rem_euclid(n) as usize;
        let j = (center.1 as i64 + dj).rem_euclid(n) as usize;
        let k = (center.2 as i64 + dk).rem_euclid(n) as usize;
        sum += field.get(i, j, k);
    }
    let cell = h.powi(3);
    Ok(match norm {
        BallNorm::Mass => sum * cell,
        BallNorm::PerVolume => sum / offsets.len() as f64,
    })
}

/// Ball integral around the grid centre.
pub fn ball_average(field: &LatticeField, r: f64, norm: BallNorm) -> Result<f64> {
    let c = field.n / 2;
    ball_average_at(field, (c, c, c), r, norm)
}

/// Ball centres on a cubic sublattice whose spacing is the smallest power of
/// two of at least `4 r / h` cells (capped at `n`), so balls are disjoint and
/// at least two diameters apart.
pub fn ball_centers(n: usize, spacing: f64, r: f64) -> Vec<(usize, usize, usize)> {
    let s = ((4.0 * r / spacing).ceil() as usize).next_power_of_two().min(n);
    let c: Vec<usize> = (0..n / s).map(|m| s / 2 + m * s).collect();
    let mut out = Vec::with_capacity(c.len().pow(3));
    for &k in &c {
        for &j in &c {
            for &i in &c {
                out.push((i, j, k));
            }
        }
    }
    out
}

/// Grid and time-step settings of a lattice ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub n: usize,
    pub spacing: f64,
    pub dt: f64,
    pub kappa: f64,
    pub scheme: Scheme,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            n: 128,
            spacing: 1.0,
            dt: 1.0 / 12.0,
            kappa: 0.4,
            scheme: Scheme::ExponentialEuler,
        }
    }
}

/// A `(T, R)` pair at which ball averages are recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub r: f64,
}

/// One recorded ball average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub replica: usize,
    pub center: usize,
    pub t: f64,
    pub r: f64,
    /// Per-volume ball average (initial value 1).
    pub average: f64,
}

/// Ball averages of an ensemble of independent replicas, one shared run per
/// replica serving every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub config: LatticeConfig,
    pub checkpoints: Vec<Checkpoint>,
    pub replicas: usize,
    pub seed: StreamKey,
    pub records: Vec<EnsembleRecord>,
}

impl Ensemble {
    /// All averages recorded at checkpoint `(t, r)`, in replica-then-centre order.
    pub fn averages(&self, t: f64, r: f64) -> Vec<f64> {
        self.records
            .iter()
            .filter(|rec| rec.t == t && rec.r == r)
            .map(|rec| rec.average)
            .collect()
    }

    /// Raw dump: one CSV row per `(replica, center, T, R, average)`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("replica,center,T,R,average\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{:.17e}\n",
                r.replica, r.center, r.t, r.r, r.average
            ));
        }
        s
    }
}

/// Run `replicas` independent lattice solutions from flat data and record
/// per-volume ball averages around [`ball_centers`] at every checkpoint.
pub fn run_ensemble(
    cfg: &LatticeConfig,
    checkpoints: &[Checkpoint],
    replicas: usize,
    key: StreamKey,
    par: Parallelism,
) -> Result<Ensemble> {
    if replicas == 0 || checkpoints.is_empty() {
        return domain("ensemble needs at least one replica and one checkpoint");
    }
    let spectrum = NoiseSpectrum::riesz(cfg.n, cfg.spacing)?;
    let probe = LatticeField::constant(cfg.n, cfg.spacing, 1.0)?;
    for c in checkpoints {
        ball_average(&probe, c.r, BallNorm::PerVolume)?;
    }
    let step_of = |t: f64| (t / cfg.dt).round() as usize;
    let t_final = checkpoints.iter().map(|c| c.t).fold(0.0, f64::max);
    let she = SheConfig {
        kappa: cfg.kappa,
        dt: cfg.dt,
        t_final,
        scheme: cfg.scheme,
    };
    let per_replica = par.map(replicas, |rep| -> Result<Vec<EnsembleRecord>> {
        let mut out = Vec::new();
        let mut err = None;
        evolve_she(
            probe.clone(),
            &she,
            &spectrum,
            key.child("replica", rep as u64),
            |step, field| {
                for c in checkpoints.iter().filter(|c| step_of(c.t) == step) {
                    let centers = ball_centers(cfg.n, cfg.spacing, c.r);
                    for (ci, &center) in centers.iter().enumerate() {
                        match ball_average_at(field, center, c.r, BallNorm::PerVolume) {
                            Ok(average) => out.push(EnsembleRecord {
                                replica: rep,
                                center: ci,
                                t: c.t,
                                r: c.r,
                                average,
                            }),
                            Err(e) => err = Some(e),
                        }
                    }
                }
            },
        )?;
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    });
    let mut records = Vec::new();
    for r in per_replica {
        records.extend(r?);
    }
    Ok(Ensemble {
        config: *cfg,
        checkpoints: checkpoints.to_vec(),
        replicas,
        seed: key,
        records,
    })
}
