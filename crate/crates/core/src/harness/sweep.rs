use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fpt_exact::{solve_absorption, solve_hitting, tau_d_asymptotic};
use crate::fpt_mc::{self, SsaConfig};
use crate::harness::ExperimentConfig;
use crate::micro::tau_micro_analytic;
use crate::model::{Boundary, Lattice, LatticeSpec, PhysParams};
use crate::rates::{
    conventional_ka, critical_h, critical_h_bisection, erban_chapman_h_crit, erban_chapman_q, fange_min_h,
    fange_p, matched_k_meso, KMesoMode, RateModel,
};

/// Domain markers for one mesh size. Each one mirrors a domain error (or
/// infinite propensity) of the rates module.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    /// Asymptotic τ_D ≥ τ_micro: no asymptotic matched propensity.
    pub below_h_star: bool,
    /// Exact τ_D ≥ τ_micro: no exact matched propensity.
    pub below_h_star_exact: bool,
    /// Erban–Chapman propensity is infinite (3D only).
    pub below_h_crit: bool,
    /// Fange et al. β exceeds 1.
    pub outside_fange: bool,
}

impl Flags {
    const NAMES: [&'static str; 4] = ["below_h_star", "below_h_star_exact", "below_h_crit", "outside_fange"];

    pub fn evaluate(params: &PhysParams, h: f64, tau_d_exact: f64, tau_micro: f64) -> Self {
        let below_h_crit = match conventional_ka(params) {
            Ok(ka) => erban_chapman_q(h, ka, params.d).map_or(true, |q| q.is_infinite()),
            Err(_) => false,
        };
        Self {
            below_h_star: matched_k_meso(params, h, tau_micro, KMesoMode::Asymptotic).is_err(),
            below_h_star_exact: tau_d_exact >= tau_micro,
            below_h_crit,
            outside_fange: fange_p(params, h).is_err(),
        }
    }

    fn bits(&self) -> [bool; 4] {
        [self.below_h_star, self.below_h_star_exact, self.below_h_crit, self.outside_fange]
    }
}

/// Set flags joined by ';', empty when none is set.
impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set: Vec<&str> =
            Self::NAMES.iter().zip(self.bits()).filter_map(|(n, b)| b.then_some(*n)).collect();
        f.write_str(&set.join(";"))
    }
}

impl FromStr for Flags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut flags = Flags::default();
        for token in s.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            match token {
                "below_h_star" => flags.below_h_star = true,
                "below_h_star_exact" => flags.below_h_star_exact = true,
                "below_h_crit" => flags.below_h_crit = true,
                "outside_fange" => flags.outside_fange = true,
                other => return Err(Error::Config(format!("unknown flag '{other}'"))),
            }
        }
        Ok(flags)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// One rate model at one mesh size. `None` marks an inapplicable cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCell {
    pub model: RateModel,
    /// Reaction propensity in the target voxel (1/s).
    pub propensity: Option<f64>,
    /// Exact mean association time from a uniform start (s).
    pub tau_meso: Option<f64>,
    /// (τ_meso − τ_micro) / τ_micro.
    pub relerr: Option<f64>,
    pub mc: Option<McEstimate>,
}

impl ModelCell {
    fn empty(model: RateModel) -> Self {
        Self { model, propensity: None, tau_meso: None, relerr: None, mc: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Voxel size (m).
    pub h: f64,
    pub h_over_rho: f64,
    /// Voxel count.
    pub n_voxels: usize,
    /// Exact τ_D (s) on the configured boundary, uniform start.
    pub tau_d_exact: f64,
    pub tau_d_asym: f64,
    pub tau_micro: f64,
    pub models: Vec<ModelCell>,
    pub flags: Flags,
}

/// Sign change of τ_D − τ_micro between two neighboring rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// Coarser mesh of the bracket, where τ_D < τ_micro (m).
    pub h_upper: f64,
    pub h_lower: f64,
    /// Zero of the difference, linear in ln h between the two rows.
    pub h_interp: f64,
}

impl Crossing {
    pub fn brackets(&self, h: f64) -> bool {
        self.h_lower <= h && h <= self.h_upper
    }
}

#[derive(Debug, Clone)]
pub struct Fig1Sweep {
    pub rows: Vec<SweepRow>,
    pub boundary: Boundary,
    /// Exact τ_D on the other boundary, aligned with `rows`.
    pub tau_d_other: Vec<f64>,
    pub crossing: Option<Crossing>,
    pub crossing_other: Option<Crossing>,
    /// Closed-form h* from the asymptotic τ_D.
    pub h_star: Option<f64>,
}

fn other(boundary: Boundary) -> Boundary {
    match boundary {
        Boundary::Periodic => Boundary::Reflective,
        Boundary::Reflective => Boundary::Periodic,
    }
}

fn lattice(cfg: &ExperimentConfig, n: usize, boundary: Boundary) -> Result<Lattice> {
    let p = &cfg.params;
    Lattice::new(LatticeSpec::centered(p.dim, n, p.l, boundary)?)
}

fn at(h: f64) -> impl Fn(Error) -> Error {
    move |e| Error::AtMesh { h, source: Box::new(e) }
}

/// First sign change of `tau_d[i] − tau_micro` along rows of descending h.
pub fn find_crossing(h: &[f64], tau_d: &[f64], tau_micro: f64) -> Option<Crossing> {
    (1..h.len()).find_map(|i| {
        let (g0, g1) = (tau_d[i - 1] - tau_micro, tau_d[i] - tau_micro);
        (g0 < 0.0 && g1 >= 0.0).then(|| {
            let (x0, x1) = (h[i - 1].ln(), h[i].ln());
            let x = x0 + (x1 - x0) * g0 / (g0 - g1);
            Crossing { h_upper: h[i - 1], h_lower: h[i], h_interp: x.exp() }
        })
    })
}

/// τ_D against τ_micro over the mesh list: exact on both boundaries,
/// asymptotic, and where they cross.
pub fn run_fig1_sweep(cfg: &ExperimentConfig) -> Result<Fig1Sweep> {
    cfg.validate()?;
    let p = cfg.params;
    let tau_micro = tau_micro_analytic(&p)?;
    let alt = other(cfg.boundary);
    let solved = cfg
        .mesh
        .par_iter()
        .map(|&n| {
            let h = p.l / n as f64;
            let run = || -> Result<(SweepRow, f64)> {
                let lat = lattice(cfg, n, cfg.boundary)?;
                let tau_d = solve_hitting(&lat, p.d, &cfg.solver)?.tau_d_uniform(true)?;
                let tau_d_other =
                    solve_hitting(&lattice(cfg, n, alt)?, p.d, &cfg.solver)?.tau_d_uniform(true)?;
                let row = SweepRow {
                    h,
                    h_over_rho: h / p.rho,
                    n_voxels: lat.len(),
                    tau_d_exact: tau_d,
                    tau_d_asym: tau_d_asymptotic(&p, h)?,
                    tau_micro,
                    models: Vec::new(),
                    flags: Flags::evaluate(&p, h, tau_d, tau_micro),
                };
                Ok((row, tau_d_other))
            };
            run().map_err(at(h))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, tau_d_other): (Vec<SweepRow>, Vec<f64>) = solved.into_iter().unzip();
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let tau_d: Vec<f64> = rows.iter().map(|r| r.tau_d_exact).collect();
    Ok(Fig1Sweep {
        crossing: find_crossing(&hs, &tau_d, tau_micro),
        crossing_other: find_crossing(&hs, &tau_d_other, tau_micro),
        h_star: critical_h(&p, tau_micro).ok(),
        rows,
        boundary: cfg.boundary,
        tau_d_other,
    })
}

fn mc_seed(seed: u64, n: usize, model: usize) -> u64 {
    seed ^ ((n as u64) << 8 | model as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Exact τ_meso under each configured rate model over the mesh list.
/// Meshes outside a model's domain give empty cells and a flag.
pub fn run_fig2_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let p = cfg.params;
    let tau_micro = tau_micro_analytic(&p)?;
    cfg.mesh
        .par_iter()
        .map(|&n| {
            let h = p.l / n as f64;
            let run = || -> Result<SweepRow> {
                let lat = lattice(cfg, n, cfg.boundary)?;
                let hit = solve_hitting(&lat, p.d, &cfg.solver)?;
                let tau_d = hit.tau_d_uniform(true)?;
                let n_one = hit.n_steps_one(&lat)?;
                let models = cfg
                    .models
                    .iter()
                    .enumerate()
                    .map(|(mi, &model)| {
                        let k = match model.propensity(&p, h, tau_micro, Some((tau_d, n_one))) {
                            Ok(k) if k.0.is_finite() => k.0,
                            Ok(_) | Err(Error::BelowCriticalMesh { .. } | Error::OutsideDomain { .. }) => {
                                return Ok(ModelCell::empty(model));
                            }
                            Err(e) => return Err(e),
                        };
                        let tau_meso = solve_absorption(&lat, p.d, k, &cfg.solver)?.mean_seconds();
                        let mc = if cfg.with_mc {
                            let ssa =
                                SsaConfig::new(*lat.spec(), p.d, k, cfg.samples, mc_seed(cfg.seed, n, mi));
                            let s = fpt_mc::estimate(&ssa)?;
                            Some(McEstimate { mean: s.mean, stderr: s.stderr })
                        } else {
                            None
                        };
                        Ok(ModelCell {
                            model,
                            propensity: Some(k),
                            tau_meso: Some(tau_meso),
                            relerr: Some((tau_meso - tau_micro) / tau_micro),
                            mc,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SweepRow {
                    h,
                    h_over_rho: h / p.rho,
                    n_voxels: lat.len(),
                    tau_d_exact: tau_d,
                    tau_d_asym: tau_d_asymptotic(&p, h)?,
                    tau_micro,
                    models,
                    flags: Flags::evaluate(&p, h, tau_d, tau_micro),
                })
            };
            run().map_err(at(h))
        })
        .collect()
}

/// Propensity of every configured model at one mesh size; `None` outside
/// the model's domain. The exact matched propensity needs a solve and is
/// left out.
#[derive(Debug, Clone, PartialEq)]
pub struct RatesRow {
    pub h: f64,
    pub h_over_rho: f64,
    pub rates: Vec<(RateModel, Option<f64>)>,
}

pub fn rates_table(cfg: &ExperimentConfig) -> Result<Vec<RatesRow>> {
    cfg.validate()?;
    let p = cfg.params;
    let tau_micro = tau_micro_analytic(&p)?;
    cfg.mesh
        .iter()
        .map(|&n| {
            let h = p.l / n as f64;
            let rates = cfg
                .models
                .iter()
                .filter(|m| **m != RateModel::RenewalExact)
                .map(|&m| match m.propensity(&p, h, tau_micro, None) {
                    Ok(k) => Ok((m, k.0.is_finite().then_some(k.0))),
                    Err(Error::BelowCriticalMesh { .. } | Error::OutsideDomain { .. }) => Ok((m, None)),
                    Err(e) => Err(at(h)(e)),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RatesRow { h, h_over_rho: h / p.rho, rates })
        })
        .collect()
}

/// Mesh-size limits of the configured geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalSizes {
    pub tau_micro: f64,
    /// Closed-form h* (m).
    pub h_star: f64,
    /// h* by bisection on the asymptotic τ_D.
    pub h_star_bisection: f64,
    /// Erban–Chapman h_crit (3D only).
    pub h_crit: Option<f64>,
    pub fange_min_h: f64,
}

pub fn critical_sizes(params: &PhysParams) -> Result<CriticalSizes> {
    let tau_micro = tau_micro_analytic(params)?;
    let h_star = critical_h(params, tau_micro)?;
    let h_star_bisection = critical_h_bisection(
        |h| tau_d_asymptotic(params, h),
        tau_micro,
        1e-6 * params.l,
        0.999 * params.l,
        1e-12,
    )?;
    let h_crit = conventional_ka(params).ok().map(|ka| erban_chapman_h_crit(ka, params.d));
    Ok(CriticalSizes { tau_micro, h_star, h_star_bisection, h_crit, fange_min_h: fange_min_h(params) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_round_trip() {
        for bits in 0..16u8 {
            let f = Flags {
                below_h_star: bits & 1 != 0,
                below_h_star_exact: bits & 2 != 0,
                below_h_crit: bits & 4 != 0,
                outside_fange: bits & 8 != 0,
            };
            assert_eq!(f.to_string().parse::<Flags>().unwrap(), f);
        }
        assert_eq!(Flags::default().to_string(), "");
        assert!("below_h_star;bogus".parse::<Flags>().is_err());
    }

    #[test]
    fn crossing_interpolates_in_log_h() {
        let h = [4.0, 2.0, 1.0];
        let tau = [1.0, 3.0, 5.0];
        let c = find_crossing(&h, &tau, 2.0).unwrap();
        assert_eq!((c.h_upper, c.h_lower), (4.0, 2.0));
        assert!((c.h_interp - 8f64.sqrt()).abs() < 1e-12);
        assert!(find_crossing(&h, &tau, 10.0).is_none());
        assert!(find_crossing(&h, &tau, 0.5).is_none());
    }

    #[test]
    fn flags_match_rate_domains_3d() {
        let p = PhysParams::cube_preset();
        let tau_micro = tau_micro_analytic(&p).unwrap();
        let f = Flags::evaluate(&p, 10.0 * p.rho, 0.1, tau_micro);
        assert_eq!(f, Flags::default());
        let f = Flags::evaluate(&p, 3.0 * p.rho, 0.2, tau_micro);
        assert!(f.below_h_star && f.below_h_crit && !f.below_h_star_exact && !f.outside_fange);
        let f = Flags::evaluate(&p, 1.5 * p.rho, 1.0, tau_micro);
        assert!(f.below_h_star_exact && f.outside_fange);
    }

    #[test]
    fn critical_sizes_cube() {
        let p = PhysParams::cube_preset();
        let c = critical_sizes(&p).unwrap();
        assert!((c.h_star / p.rho - 3.17594).abs() < 1e-4);
        assert!((c.h_star_bisection / c.h_star - 1.0).abs() < 1e-9);
        assert!((c.h_crit.unwrap() / p.rho - 3.1757).abs() < 1e-3);
    }

    #[test]
    fn critical_sizes_square() {
        let p = PhysParams::square_preset();
        let c = critical_sizes(&p).unwrap();
        assert!((c.h_star / p.rho - 5.0979).abs() < 1e-3);
        assert!(c.h_crit.is_none());
    }

    #[test]
    fn small_fig2_sweep_is_consistent() {
        let mut cfg = ExperimentConfig::cube();
        cfg.mesh = vec![5, 10, 20];
        let rows = run_fig2_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert_eq!(row.models.len(), 5);
            let exact = row.models.iter().find(|c| c.model == RateModel::RenewalExact).unwrap();
            assert!(exact.relerr.unwrap().abs() < 1e-9);
            for c in &row.models {
                assert_eq!(c.propensity.is_some(), c.tau_meso.is_some());
                assert!(c.mc.is_none());
            }
        }
        assert!(rows.iter().all(|r| !r.flags.below_h_star));
    }
}
