use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fpt_exact::SolverOptions;
use crate::model::{Boundary, PhysParams};
use crate::rates::RateModel;

/// Everything a sweep or validation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: PhysParams,
    pub boundary: Boundary,
    /// Voxels per side, strictly increasing (decreasing h).
    pub mesh: Vec<usize>,
    pub models: Vec<RateModel>,
    pub solver: SolverOptions,
    /// Monte Carlo samples per estimate (SSA columns and BD levels).
    pub samples: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// BD time steps (s).
    pub dt_levels: Vec<f64>,
    pub with_mc: bool,
    pub threads: Option<usize>,
}

const KEYS: &[&str] = &[
    "preset",
    "dim",
    "rho",
    "D",
    "k_r",
    "L",
    "L_over_rho",
    "boundary",
    "n_per_side",
    "grid",
    "models",
    "tol",
    "max_iter",
    "samples",
    "seed",
    "out",
    "dt_levels",
    "with_mc",
    "threads",
];

/// Voxels-per-side values for a geometric grid of h from `h_max_over_rho`
/// down to `h_min_over_rho`, `per_decade` points per decade, anchored at
/// the upper end. Duplicates after rounding are dropped.
pub fn geometric_mesh(
    params: &PhysParams,
    h_max_over_rho: f64,
    h_min_over_rho: f64,
    per_decade: usize,
) -> Result<Vec<usize>> {
    if !(h_max_over_rho >= h_min_over_rho && h_min_over_rho > 0.0) || per_decade == 0 {
        return Err(Error::Config(format!("bad grid {h_max_over_rho}, {h_min_over_rho}, {per_decade}")));
    }
    let span = (h_max_over_rho / h_min_over_rho).log10();
    let steps = (span * per_decade as f64 + 1e-9).floor() as usize;
    let mut mesh: Vec<usize> = (0..=steps)
        .map(|k| {
            let h = h_max_over_rho * params.rho * 10f64.powf(-(k as f64) / per_decade as f64);
            ((params.l / h).round() as usize).max(2)
        })
        .collect();
    mesh.dedup();
    Ok(mesh)
}

impl ExperimentConfig {
    /// Reflective cube of side 100ρ, D = 1e-12 m²/s, all five rate models.
    pub fn cube() -> Self {
        let params = PhysParams::cube_preset();
        Self::from_params(params, RateModel::ALL.to_vec(), vec![2e-6, 1e-6, 5e-7])
    }

    /// Reflective square of side 250ρ, D = 1e-14 m²/s, the models defined in 2D.
    pub fn square() -> Self {
        let params = PhysParams::square_preset();
        let models = RateModel::ALL.into_iter().filter(|m| m.supports_dim(2)).collect();
        Self::from_params(params, models, vec![8e-4, 4e-4, 2e-4])
    }

    pub fn preset(dim: usize) -> Result<Self> {
        match dim {
            2 => Ok(Self::square()),
            3 => Ok(Self::cube()),
            _ => Err(Error::UnsupportedDimension(dim)),
        }
    }

    fn from_params(params: PhysParams, models: Vec<RateModel>, dt_levels: Vec<f64>) -> Self {
        let mesh = geometric_mesh(&params, 20.0, 2.0, 12).expect("preset grid");
        Self {
            params,
            boundary: Boundary::Reflective,
            mesh,
            models,
            solver: SolverOptions::default(),
            samples: 10_000,
            seed: 42,
            out: None,
            dt_levels,
            with_mc: false,
            threads: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        text.parse()
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        PhysParams::new(p.dim, p.rho, p.d, p.k_r, p.l)?;
        if self.mesh.is_empty() {
            return Err(Error::Config("mesh list is empty".into()));
        }
        if self.mesh[0] < 2 {
            return Err(Error::Config("n_per_side must be at least 2".into()));
        }
        if self.mesh.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("n_per_side values must be strictly increasing".into()));
        }
        if let Some(m) = self.models.iter().find(|m| !m.supports_dim(p.dim)) {
            return Err(Error::Config(format!("rate model {m} is not defined in {}D", p.dim)));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(Error::Config("solver tol and max_iter must be positive".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if self.dt_levels.iter().any(|&dt| !(dt > 0.0)) {
            return Err(Error::Config("dt_levels must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{v}'"))),
    }
}

/// Flat `key = value` text, `#` starts a comment. `preset` or `dim` picks the
/// starting point; every other key overrides it.
impl std::str::FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key '{k}'", lineno + 1)));
            }
            if kv.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", lineno + 1)));
            }
        }

        let preset_dim = match kv.get("preset").map(|s| s.as_str()) {
            Some("cube") => Some(3),
            Some("square") => Some(2),
            Some(other) => return Err(Error::Config(format!("unknown preset '{other}'"))),
            None => None,
        };
        let dim = match (kv.get("dim"), preset_dim) {
            (Some(v), p) => {
                let d: usize = parse_num("dim", v)?;
                if p.is_some_and(|p| p != d) {
                    return Err(Error::Config("dim contradicts preset".into()));
                }
                d
            }
            (None, Some(p)) => p,
            (None, None) => 3,
        };
        let mut cfg = ExperimentConfig::preset(dim)
            .map_err(|_| Error::Config(format!("dim must be 2 or 3, got {dim}")))?;

        let p = &mut cfg.params;
        if let Some(v) = kv.get("rho") {
            p.rho = parse_num("rho", v)?;
        }
        if let Some(v) = kv.get("D") {
            p.d = parse_num("D", v)?;
        }
        if let Some(v) = kv.get("k_r") {
            p.k_r = parse_num("k_r", v)?;
        }
        match (kv.get("L"), kv.get("L_over_rho")) {
            (Some(_), Some(_)) => return Err(Error::Config("give L or L_over_rho, not both".into())),
            (Some(v), None) => p.l = parse_num("L", v)?,
            (None, Some(v)) => p.l = p.rho * parse_num::<f64>("L_over_rho", v)?,
            (None, None) => {}
        }
        let params = *p;

        if let Some(v) = kv.get("boundary") {
            cfg.boundary = v.parse()?;
        }
        match (kv.get("n_per_side"), kv.get("grid")) {
            (Some(_), Some(_)) => return Err(Error::Config("give n_per_side or grid, not both".into())),
            (Some(v), None) => cfg.mesh = parse_list("n_per_side", v)?,
            (None, Some(v)) => {
                let g: Vec<f64> = parse_list("grid", v)?;
                if g.len() != 3 || g[2].fract() != 0.0 || g[2] < 1.0 {
                    return Err(Error::Config(
                        "grid = h_max_over_rho, h_min_over_rho, points_per_decade".into(),
                    ));
                }
                cfg.mesh = geometric_mesh(&params, g[0], g[1], g[2] as usize)?;
            }
            (None, None) => cfg.mesh = geometric_mesh(&params, 20.0, 2.0, 12)?,
        }
        if let Some(v) = kv.get("models") {
            cfg.models =
                v.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
        }
        if let Some(v) = kv.get("tol") {
            cfg.solver.tol = parse_num("tol", v)?;
        }
        if let Some(v) = kv.get("max_iter") {
            cfg.solver.max_iter = parse_num("max_iter", v)?;
        }
        if let Some(v) = kv.get("samples") {
            cfg.samples = parse_num("samples", v)?;
        }
        if let Some(v) = kv.get("seed") {
            cfg.seed = parse_num("seed", v)?;
        }
        if let Some(v) = kv.get("out") {
            cfg.out = Some(PathBuf::from(v));
        }
        if let Some(v) = kv.get("dt_levels") {
            cfg.dt_levels = parse_list("dt_levels", v)?;
        }
        if let Some(v) = kv.get("with_mc") {
            cfg.with_mc = parse_bool("with_mc", v)?;
        }
        if let Some(v) = kv.get("threads") {
            cfg.threads = Some(parse_num("threads", v)?);
        }
        cfg.validate().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        Ok(cfg)
    }
}
