//! Association-rate models and the critical mesh size.
//!
//! Macroscopic rates (m^dim/s) and per-voxel propensities (1/s) are kept
//! as separate types; [`to_propensity`] is the only bridge between them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fpt_exact::{tau_d_asymptotic, MONTROLL_2D, MONTROLL_3D};
use crate::model::PhysParams;

/// Erban–Chapman lattice constant for L ≫ h.
pub const BETA_INFINITY: f64 = 0.25272;

/// Macroscopic bimolecular rate constant, m³/s in 3D and m²/s in 2D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroRate {
    pub value: f64,
    pub dim: usize,
}

/// Per-pair reaction propensity inside one voxel (1/s).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Propensity(pub f64);

impl Propensity {
    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
}

pub fn to_propensity(rate: MacroRate, h: f64) -> Result<Propensity> {
    if !(rate.value >= 0.0) {
        return Err(Error::InvalidParameter(format!("rate must be non-negative, got {}", rate.value)));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
    }
    Ok(Propensity(rate.value / h.powi(rate.dim as i32)))
}

/// Diffusion-influenced 3D rate 4πρD·k_r/(4πρD + k_r).
pub fn conventional_ka(params: &PhysParams) -> Result<MacroRate> {
    if params.dim != 3 {
        return Err(Error::UnsupportedModel { model: "conventional rate", dim: params.dim });
    }
    let kd = params.diffusion_limit();
    let value = if params.is_absorbing() { kd } else { kd * params.k_r / (kd + params.k_r) };
    Ok(MacroRate { value, dim: 3 })
}

/// Root of the Erban–Chapman denominator, h = β∞·k_a/D.
pub fn erban_chapman_h_crit(k_a: MacroRate, d: f64) -> f64 {
    BETA_INFINITY * k_a.value / d
}

/// Erban–Chapman propensity D·k_a/(D·h³ − β∞·k_a·h²); infinite at and
/// below h_crit.
pub fn erban_chapman_q(h: f64, k_a: MacroRate, d: f64) -> Result<Propensity> {
    if k_a.dim != 3 {
        return Err(Error::UnsupportedModel { model: "Erban-Chapman propensity", dim: k_a.dim });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
    }
    if h <= erban_chapman_h_crit(k_a, d) {
        return Ok(Propensity(f64::INFINITY));
    }
    let denom = d * h.powi(3) - BETA_INFINITY * k_a.value * h * h;
    Ok(Propensity(d * k_a.value / denom))
}

/// Smallest voxel for which the Fange et al. β = ρ/(ρ+ℓ) stays ≤ 1.
pub fn fange_min_h(params: &PhysParams) -> f64 {
    match params.dim {
        2 => PI.sqrt() * params.rho,
        _ => (4.0 * PI / 3.0).cbrt() * params.rho,
    }
}

/// β = ρ/(ρ+ℓ), with ρ+ℓ the radius of the disk of area h² or the sphere
/// of volume h³.
pub fn fange_beta(params: &PhysParams, h: f64) -> f64 {
    let radius = match params.dim {
        2 => h / PI.sqrt(),
        _ => (3.0 / (4.0 * PI)).cbrt() * h,
    };
    params.rho / radius
}

/// Fange et al. mesh-dependent macroscopic rate.
pub fn fange_p(params: &PhysParams, h: f64) -> Result<MacroRate> {
    let beta = fange_beta(params, h);
    if !(beta <= 1.0 + 1e-12) || !(h > 0.0) {
        return Err(Error::OutsideDomain { model: "Fange rate", h, h_min: fange_min_h(params) });
    }
    let beta = beta.min(1.0);
    let dim = params.dim;
    let kr = params.k_r;
    let value = match dim {
        2 => {
            let g = (1.0 + 0.544 * (1.0 - beta) / beta).ln();
            if params.is_absorbing() {
                2.0 * PI * params.d / g
            } else {
                kr / (1.0 + kr / (2.0 * PI * params.d) * g)
            }
        }
        _ => {
            let g = (1.0 - beta) * (1.0 - 0.58 * beta);
            if params.is_absorbing() {
                4.0 * PI * params.rho * params.d / g
            } else {
                kr / (1.0 + kr / (4.0 * PI * params.rho * params.d) * g)
            }
        }
    };
    Ok(MacroRate { value, dim })
}

/// How τ_D and the one-step return count enter the matched propensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KMesoMode {
    /// Small-h asymptotics with 1 + (L/h)^dim in the numerator.
    Asymptotic,
    /// Solver-supplied τ_D (s, uniform start including the target) and
    /// mean step count from a target neighbor.
    Exact { tau_d: f64, n_steps_one: f64 },
}

/// Propensity (1 + N¹)/(τ_micro − τ_D) that makes the mean mesoscopic
/// association time equal `tau_micro`.
pub fn matched_k_meso(params: &PhysParams, h: f64, tau_micro: f64, mode: KMesoMode) -> Result<Propensity> {
    let (tau_d, n_one) = match mode {
        KMesoMode::Asymptotic => (tau_d_asymptotic(params, h)?, (params.l / h).powi(params.dim as i32)),
        KMesoMode::Exact { tau_d, n_steps_one } => (tau_d, n_steps_one),
    };
    if tau_micro <= tau_d {
        let h_star = critical_h(params, tau_micro).unwrap_or(f64::NAN);
        return Err(Error::BelowCriticalMesh { h, h_star, tau_d, tau_micro });
    }
    Ok(Propensity((1.0 + n_one) / (tau_micro - tau_d)))
}

/// Mesh size at which the asymptotic τ_D equals `tau_micro`.
pub fn critical_h(params: &PhysParams, tau_micro: f64) -> Result<f64> {
    if !(tau_micro > 0.0) {
        return Err(Error::InvalidParameter(format!("tau_micro must be positive, got {tau_micro}")));
    }
    let (l, d) = (params.l, params.d);
    let h = match params.dim {
        2 => l * (-2.0 * PI * d / (l * l) * (tau_micro - MONTROLL_2D * l * l / (4.0 * d))).exp(),
        _ => MONTROLL_3D * l.powi(3) / (6.0 * d * tau_micro),
    };
    if h > 0.0 && h < l {
        Ok(h)
    } else {
        Err(Error::NoCriticalMesh(format!("closed form gives h* = {h:.6e} m for L = {l:.6e} m")))
    }
}

/// Root of `tau_d(h) = tau_micro` for a τ_D that decreases in h, by
/// bisection on [lo, hi].
pub fn critical_h_bisection<F>(tau_d: F, tau_micro: f64, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let g = |h: f64| tau_d(h).map(|t| t - tau_micro);
    let (mut a, mut b) = (lo, hi);
    let (ga, gb) = (g(a)?, g(b)?);
    if ga.signum() == gb.signum() {
        return Err(Error::NoCriticalMesh(format!(
            "tau_D - tau_micro does not change sign on [{lo:.6e}, {hi:.6e}]"
        )));
    }
    let rising = ga < 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a) <= rel_tol * m {
            return Ok(m);
        }
        if (g(m)? < 0.0) == rising {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Rate models compared in the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateModel {
    Conventional,
    ErbanChapman,
    Fange,
    /// Matched propensity from the small-h asymptotics.
    RenewalAsymptotic,
    /// Matched propensity from exact lattice solves.
    RenewalExact,
}

impl RateModel {
    pub const ALL: [RateModel; 5] = [
        RateModel::Conventional,
        RateModel::ErbanChapman,
        RateModel::Fange,
        RateModel::RenewalAsymptotic,
        RateModel::RenewalExact,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RateModel::Conventional => "conventional",
            RateModel::ErbanChapman => "erban_chapman",
            RateModel::Fange => "fange",
            RateModel::RenewalAsymptotic => "renewal_asym",
            RateModel::RenewalExact => "renewal_exact",
        }
    }

    pub fn supports_dim(&self, dim: usize) -> bool {
        match self {
            RateModel::Conventional | RateModel::ErbanChapman => dim == 3,
            _ => dim == 2 || dim == 3,
        }
    }

    /// Propensity of this model at voxel size `h`. `exact` carries τ_D and
    /// N¹ from a hitting solve and is only needed by `RenewalExact`.
    pub fn propensity(
        &self,
        params: &PhysParams,
        h: f64,
        tau_micro: f64,
        exact: Option<(f64, f64)>,
    ) -> Result<Propensity> {
        match self {
            RateModel::Conventional => to_propensity(conventional_ka(params)?, h),
            RateModel::ErbanChapman => erban_chapman_q(h, conventional_ka(params)?, params.d),
            RateModel::Fange => to_propensity(fange_p(params, h)?, h),
            RateModel::RenewalAsymptotic => matched_k_meso(params, h, tau_micro, KMesoMode::Asymptotic),
            RateModel::RenewalExact => {
                let (tau_d, n_steps_one) = exact.ok_or_else(|| {
                    Error::InvalidParameter("renewal_exact needs exact tau_D and N1".into())
                })?;
                matched_k_meso(params, h, tau_micro, KMesoMode::Exact { tau_d, n_steps_one })
            }
        }
    }
}

impl fmt::Display for RateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RateModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        RateModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown rate model '{s}'")))
    }
}
