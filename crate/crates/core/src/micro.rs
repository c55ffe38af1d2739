//! Microscopic reference: analytic Smoluchowski association times and a
//! fixed-step Brownian-dynamics oracle with a perfectly absorbing contact
//! sphere.
//!
//! The BD walker is simulated in unfolded coordinates; the boundary only
//! enters through the offset to the central A molecule. Several time steps
//! that are integer multiples of the finest one are evaluated on the same
//! fine path, so level-to-level differences carry little sampling noise.
//!
//! Far from the contact sphere consecutive fine steps are merged into one
//! Gaussian step with the summed variance. Merging only happens when the
//! gap to the sphere exceeds seven standard deviations of the merged
//! displacement per axis, so the skipped intermediate positions cannot
//! reach the sphere except with negligible probability.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fpt_mc::trajectory_rng;
use crate::model::{Boundary, PhysParams};
use crate::rates::conventional_ka;
use crate::stats::FptStats;

/// Mean association time of the microscopic model from a uniform start.
///
/// 3D: the well-mixed value L³/k_a. 2D (absorbing only): the disk of area
/// L², (L²/2πD)·(ln(L/(√π·ρ)) − 3/4).
pub fn tau_micro_analytic(params: &PhysParams) -> Result<f64> {
    match params.dim {
        2 => {
            if !params.is_absorbing() {
                return Err(Error::InvalidParameter(
                    "the 2D microscopic time is only available for k_r = inf".into(),
                ));
            }
            let l = params.l;
            let ratio = l / (PI.sqrt() * params.rho);
            Ok(l * l / (2.0 * PI * params.d) * (ratio.ln() - 0.75))
        }
        _ => Ok(params.l.powi(3) / conventional_ka(params)?.value),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartPosition {
    /// Uniform over the domain outside the contact sphere.
    Uniform,
    /// Fixed separation from A along the x axis (m).
    Separation(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct MicroConfig {
    pub params: PhysParams,
    /// BD time step (s).
    pub dt: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub boundary: Boundary,
    pub start: StartPosition,
    /// Count a contact when the Brownian bridge between two positions
    /// outside the sphere dips inside it (planar approximation).
    pub bridge_correction: bool,
    pub step_budget: u64,
}

impl MicroConfig {
    pub fn new(params: PhysParams, dt: f64, n_samples: usize, seed: u64) -> Self {
        Self {
            params,
            dt,
            n_samples,
            seed,
            boundary: Boundary::Reflective,
            start: StartPosition::Uniform,
            bridge_correction: true,
            step_budget: 10_000_000_000,
        }
    }

    /// Per-axis displacement standard deviation √(2·D·dt).
    pub fn step_sigma(&self) -> f64 {
        (2.0 * self.params.d * self.dt).sqrt()
    }

    /// Message when the total rms step √(2·dim·D·dt) exceeds ρ/5.
    pub fn step_warning(&self) -> Option<String> {
        let rms = (2.0 * self.params.dim as f64 * self.params.d * self.dt).sqrt();
        (rms > self.params.rho / 5.0).then(|| {
            format!(
                "BD step rms {rms:.3e} m exceeds rho/5 = {:.3e} m at dt = {:.3e} s",
                self.params.rho / 5.0,
                self.dt
            )
        })
    }

    fn validate(&self) -> Result<()> {
        if !self.params.is_absorbing() {
            return Err(Error::InvalidParameter(
                "the BD oracle supports only the perfectly absorbing limit".into(),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Geometry of the pair: A at the domain center, distances measured
/// through the boundary.
struct Geometry {
    l: f64,
    center: f64,
    rho: f64,
    dim: usize,
    boundary: Boundary,
}

impl Geometry {
    fn axis_offset(&self, x: f64) -> f64 {
        // With A at the center both boundaries place the images of the
        // sphere on the same period-L lattice in unfolded coordinates.
        match self.boundary {
            Boundary::Periodic => {
                let u = x - self.center;
                u - self.l * (u / self.l).round()
            }
            Boundary::Reflective => {
                let y = x.rem_euclid(2.0 * self.l);
                let folded = if y > self.l { 2.0 * self.l - y } else { y };
                folded - self.center
            }
        }
    }

    fn distance(&self, x: &[f64; 3]) -> f64 {
        x[..self.dim].iter().map(|&xi| self.axis_offset(xi).powi(2)).sum::<f64>().sqrt()
    }
}

const FAR_SIGMAS: f64 = 7.0;
const MAX_MERGE: u64 = 1 << 12;

fn lcm(a: u64, b: u64) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

struct Level {
    stride: u64,
    dt: f64,
    prev: f64,
    hit: Option<f64>,
    bridge_rng: ChaCha8Rng,
}

/// Simulates one unfolded fine path with step `dt_fine` and returns the
/// first contact time seen at each stride.
fn first_contacts(
    config: &MicroConfig,
    dt_fine: f64,
    strides: &[u64],
    sample_index: u64,
) -> Result<Vec<f64>> {
    let p = &config.params;
    let geo = Geometry { l: p.l, center: 0.5 * p.l, rho: p.rho, dim: p.dim, boundary: config.boundary };
    let mut rng = trajectory_rng(config.seed, sample_index);

    let mut x = [geo.center; 3];
    match config.start {
        StartPosition::Separation(r) if r <= geo.rho => return Ok(vec![0.0; strides.len()]),
        StartPosition::Separation(r) => x[0] += r,
        StartPosition::Uniform => loop {
            for xi in x.iter_mut().take(geo.dim) {
                *xi = rng.random::<f64>() * geo.l;
            }
            if geo.distance(&x) > geo.rho {
                break;
            }
        },
    }
    let d0 = geo.distance(&x);
    if d0 <= geo.rho {
        return Ok(vec![0.0; strides.len()]);
    }

    let sigma = (2.0 * p.d * dt_fine).sqrt();
    let mut levels: Vec<Level> = strides
        .iter()
        .map(|&stride| {
            let mut bridge_rng =
                ChaCha8Rng::seed_from_u64(config.seed ^ stride.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            bridge_rng.set_stream(sample_index);
            Level { stride, dt: dt_fine * stride as f64, prev: d0, hit: None, bridge_rng }
        })
        .collect();
    let base = strides.iter().fold(1, |acc, &s| lcm(acc, s));
    // A merged step of m fine steps is taken only when the gap to the sphere
    // exceeds FAR_SIGMAS·√dim per-axis standard deviations of the merged
    // displacement, so a skipped contact has probability below ~1e-10.
    let far = FAR_SIGMAS * (geo.dim as f64).sqrt() * sigma;
    let mut remaining = levels.len();
    let mut step = 0u64;
    let mut d = d0;
    while remaining > 0 {
        if step >= config.step_budget {
            return Err(Error::StepBudget { sample: sample_index, budget: config.step_budget });
        }
        let mut merged = 1;
        if step.is_multiple_of(base) {
            let gap = (d - geo.rho) / far;
            while merged < MAX_MERGE && ((4 * merged * base) as f64).sqrt() <= gap {
                merged *= 4;
            }
            if merged > 1 || (base as f64).sqrt() <= gap {
                merged *= base;
            }
        }
        let scale = sigma * (merged as f64).sqrt();
        for xi in x.iter_mut().take(geo.dim) {
            let z: f64 = rng.sample(StandardNormal);
            *xi += scale * z;
        }
        step += merged;
        d = geo.distance(&x);
        if merged > 1 {
            for lv in levels.iter_mut() {
                lv.prev = d;
            }
            continue;
        }
        for lv in levels.iter_mut().filter(|lv| lv.hit.is_none() && step.is_multiple_of(lv.stride)) {
            let t = step as f64 * dt_fine;
            if d <= geo.rho {
                let frac = (lv.prev - geo.rho) / (lv.prev - d);
                lv.hit = Some(t - lv.dt + frac * lv.dt);
                remaining -= 1;
            } else if config.bridge_correction {
                let exponent = (lv.prev - geo.rho) * (d - geo.rho) / (p.d * lv.dt);
                if exponent < 40.0 && lv.bridge_rng.random::<f64>() < (-exponent).exp() {
                    lv.hit = Some(t - 0.5 * lv.dt);
                    remaining -= 1;
                }
            }
            lv.prev = d;
        }
    }
    Ok(levels.into_iter().map(|lv| lv.hit.unwrap_or(0.0)).collect())
}

/// One BD first-contact time (s) at the configured `dt`.
pub fn bd_sample(config: &MicroConfig, sample_index: u64) -> Result<f64> {
    config.validate()?;
    Ok(first_contacts(config, config.dt, &[1], sample_index)?[0])
}

#[derive(Debug, Clone, Copy)]
pub struct BdLevel {
    pub dt: f64,
    pub stats: FptStats,
}

#[derive(Debug, Clone)]
pub struct BdReport {
    pub levels: Vec<BdLevel>,
    /// Least-squares intercept of the level means against √dt.
    pub extrapolated: f64,
    pub extrapolated_stderr: f64,
    /// Whether all levels were evaluated on shared fine paths.
    pub coupled: bool,
}

/// Least-squares weights of the intercept of a linear fit in `x`; equal
/// weights when all `x` coincide.
fn intercept_weights(x: &[f64]) -> Vec<f64> {
    let k = x.len() as f64;
    let mean = x.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|xi| (xi - mean).powi(2)).sum();
    if sxx <= 1e-24 * mean * mean {
        return vec![1.0 / k; x.len()];
    }
    x.iter().map(|xi| 1.0 / k - mean * (xi - mean) / sxx).collect()
}

/// BD estimates at several time steps and their extrapolation to dt → 0,
/// assuming a bias linear in √dt.
pub fn bd_estimate(config: &MicroConfig, dt_levels: &[f64]) -> Result<BdReport> {
    config.validate()?;
    if dt_levels.len() < 2 {
        return Err(Error::InvalidParameter("need at least two dt levels".into()));
    }
    if dt_levels.iter().any(|&dt| !(dt > 0.0)) {
        return Err(Error::InvalidParameter("dt levels must be positive".into()));
    }
    let dt_fine = dt_levels.iter().cloned().fold(f64::INFINITY, f64::min);
    let strides: Option<Vec<u64>> = dt_levels
        .iter()
        .map(|&dt| {
            let r = dt / dt_fine;
            let m = r.round();
            ((r - m).abs() <= 1e-9 * r).then_some(m as u64)
        })
        .collect();
    let weights = intercept_weights(&dt_levels.iter().map(|dt| dt.sqrt()).collect::<Vec<_>>());
    let n = config.n_samples as u64;

    let per_level: Vec<Vec<f64>>;
    let extrapolated_stats;
    let coupled = strides.is_some();
    if let Some(strides) = strides {
        let samples = (0..n)
            .into_par_iter()
            .map(|i| first_contacts(config, dt_fine, &strides, i))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        per_level = (0..dt_levels.len()).map(|k| samples.iter().map(|s| s[k]).collect()).collect();
        let combined: Vec<f64> =
            samples.iter().map(|s| s.iter().zip(&weights).map(|(t, w)| t * w).sum()).collect();
        let s = FptStats::from_samples(&combined).expect("n_samples >= 1");
        extrapolated_stats = (s.mean, s.stderr);
    } else {
        per_level = dt_levels
            .iter()
            .enumerate()
            .map(|(k, &dt)| {
                let cfg = MicroConfig { dt, seed: config.seed.wrapping_add(k as u64), ..*config };
                (0..n)
                    .into_par_iter()
                    .map(|i| first_contacts(&cfg, dt, &[1], i).map(|v| v[0]))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let stats: Vec<FptStats> = per_level.iter().map(|v| FptStats::from_samples(v).unwrap()).collect();
        let mean = stats.iter().zip(&weights).map(|(s, w)| s.mean * w).sum();
        let var: f64 = stats.iter().zip(&weights).map(|(s, w)| (s.stderr * w).powi(2)).sum();
        extrapolated_stats = (mean, var.sqrt());
    }

    let levels = dt_levels
        .iter()
        .zip(&per_level)
        .map(|(&dt, v)| BdLevel { dt, stats: FptStats::from_samples(v).expect("n_samples >= 1") })
        .collect();
    Ok(BdReport {
        levels,
        extrapolated: extrapolated_stats.0,
        extrapolated_stderr: extrapolated_stats.1,
        coupled,
    })
}
