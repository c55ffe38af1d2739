//! Exact stochastic simulation of the single-pair RDME.
//!
//! Every trajectory draws from its own ChaCha stream selected by the sample
//! index, so estimates are a pure function of the configuration and seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{total_jump_rate, Lattice, LatticeSpec};
use crate::stats::FptStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialDistribution {
    UniformAllVoxels,
    UniformExcludingTarget,
    FixedVoxel(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct SsaConfig {
    pub lattice: LatticeSpec,
    pub d: f64,
    /// Reaction propensity in the target voxel (1/s); infinite means
    /// reaction on first arrival.
    pub k_meso: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub initial: InitialDistribution,
    /// Maximum events per trajectory.
    pub step_budget: u64,
}

impl SsaConfig {
    pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000_000;

    pub fn new(lattice: LatticeSpec, d: f64, k_meso: f64, n_samples: usize, seed: u64) -> Self {
        Self {
            lattice,
            d,
            k_meso,
            n_samples,
            seed,
            initial: InitialDistribution::UniformAllVoxels,
            step_budget: Self::DEFAULT_STEP_BUDGET,
        }
    }
}

/// Per-trajectory RNG: stream `sample_index` of the ChaCha8 generator
/// seeded with `seed`.
pub fn trajectory_rng(seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    rng
}

/// A validated simulation setup with its lattice built once.
pub struct PairSimulator {
    config: SsaConfig,
    lattice: Lattice,
    inv_jump_rate: f64,
    jump_rate: f64,
}

impl PairSimulator {
    pub fn new(config: SsaConfig) -> Result<Self> {
        let lattice = Lattice::new(config.lattice)?;
        let jump_rate = total_jump_rate(&config.lattice, config.d)?;
        if !(config.k_meso > 0.0) {
            return Err(Error::InvalidParameter(format!("k_meso must be positive, got {}", config.k_meso)));
        }
        if config.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
        }
        if let InitialDistribution::FixedVoxel(i) = config.initial {
            if i >= lattice.len() {
                return Err(Error::InvalidParameter(format!("start voxel {i} out of range")));
            }
        }
        Ok(Self { config, lattice, inv_jump_rate: 1.0 / jump_rate, jump_rate })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn start(&self, rng: &mut ChaCha8Rng) -> usize {
        let n = self.lattice.len();
        let target = self.lattice.target();
        match self.config.initial {
            InitialDistribution::UniformAllVoxels => rng.random_range(0..n),
            InitialDistribution::UniformExcludingTarget => {
                let i = rng.random_range(0..n - 1);
                if i >= target {
                    i + 1
                } else {
                    i
                }
            }
            InitialDistribution::FixedVoxel(i) => i,
        }
    }

    /// One trajectory; returns the reaction time in seconds.
    pub fn simulate(&self, sample_index: u64) -> Result<f64> {
        self.simulate_counting(sample_index).map(|(t, _)| t)
    }

    /// One trajectory; returns the reaction time and the number of jump
    /// attempts made before the reaction.
    pub fn simulate_counting(&self, sample_index: u64) -> Result<(f64, u64)> {
        let mut rng = trajectory_rng(self.config.seed, sample_index);
        let target = self.lattice.target();
        let degree = self.lattice.degree();
        let k = self.config.k_meso;
        let absorbing = k.is_infinite();
        let inv_rate_at_target = 1.0 / (self.jump_rate + k);
        let react_prob = k / (self.jump_rate + k);

        let mut pos = self.start(&mut rng);
        let mut t = 0.0;
        let mut jumps = 0u64;
        loop {
            if pos == target {
                if absorbing {
                    return Ok((t, jumps));
                }
                let e: f64 = rng.sample(Exp1);
                t += e * inv_rate_at_target;
                if rng.random::<f64>() < react_prob {
                    return Ok((t, jumps));
                }
            } else {
                let e: f64 = rng.sample(Exp1);
                t += e * self.inv_jump_rate;
            }
            if jumps >= self.config.step_budget {
                return Err(Error::StepBudget { sample: sample_index, budget: self.config.step_budget });
            }
            jumps += 1;
            pos = self.lattice.slots(pos)[rng.random_range(0..degree)] as usize;
        }
    }

    pub fn estimate(&self) -> Result<FptStats> {
        let samples = (0..self.config.n_samples as u64)
            .into_par_iter()
            .map(|i| self.simulate(i))
            .collect::<Result<Vec<f64>>>()?;
        Ok(FptStats::from_samples(&samples).expect("n_samples >= 1"))
    }
}

pub fn simulate_pair(config: &SsaConfig, sample_index: u64) -> Result<f64> {
    PairSimulator::new(*config)?.simulate(sample_index)
}

pub fn estimate(config: &SsaConfig) -> Result<FptStats> {
    PairSimulator::new(*config)?.estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpt_exact::{solve_hitting, SolverOptions};
    use crate::model::Boundary;

    fn spec_3x3() -> LatticeSpec {
        LatticeSpec::centered(2, 3, 3e-8, Boundary::Periodic).unwrap()
    }

    #[test]
    fn start_at_target_with_instant_reaction() {
        let spec = spec_3x3();
        let mut cfg = SsaConfig::new(spec, 1e-14, f64::INFINITY, 1, 7);
        cfg.initial = InitialDistribution::FixedVoxel(spec.target);
        for i in 0..20 {
            assert_eq!(simulate_pair(&cfg, i).unwrap(), 0.0);
        }
    }

    #[test]
    fn three_by_three_uniform_mean() {
        let cfg = SsaConfig::new(spec_3x3(), 1e-14, f64::INFINITY, 100_000, 2024);
        let s = estimate(&cfg).unwrap();
        assert!(s.z_score(0.02) < 3.0, "{s:?}");
    }

    #[test]
    fn absorbing_limit_matches_embedded_walk() {
        // With instant reaction the returned time is the first arrival, whose
        // mean jump count from each start is the hitting field.
        let spec = LatticeSpec::centered(2, 5, 5e-8, Boundary::Reflective).unwrap();
        let lat = Lattice::new(spec).unwrap();
        let field = solve_hitting(&lat, 1e-14, &SolverOptions::default()).unwrap();
        let start = spec.index(&[0, 0]);
        let mut cfg = SsaConfig::new(spec, 1e-14, f64::INFINITY, 40_000, 5);
        cfg.initial = InitialDistribution::FixedVoxel(start);
        let sim = PairSimulator::new(cfg).unwrap();
        let counts: Vec<f64> = (0..40_000).map(|i| sim.simulate_counting(i).unwrap().1 as f64).collect();
        let s = FptStats::from_samples(&counts).unwrap();
        assert!(s.z_score(field.steps()[start]) < 3.5, "{s:?} vs {}", field.steps()[start]);
    }

    #[test]
    fn kac_from_neighbor() {
        let spec = LatticeSpec::centered(2, 6, 6e-8, Boundary::Periodic).unwrap();
        let neighbor = Lattice::new(spec).unwrap().slots(spec.target)[0] as usize;
        let mut cfg = SsaConfig::new(spec, 1e-14, f64::INFINITY, 20_000, 11);
        cfg.initial = InitialDistribution::FixedVoxel(neighbor);
        let sim = PairSimulator::new(cfg).unwrap();
        let counts: Vec<f64> = (0..20_000).map(|i| sim.simulate_counting(i).unwrap().1 as f64).collect();
        let s = FptStats::from_samples(&counts).unwrap();
        assert!(s.z_score(35.0) < 3.5, "{s:?}");
    }

    #[test]
    fn excluding_target_never_starts_there() {
        let spec = spec_3x3();
        let mut cfg = SsaConfig::new(spec, 1e-14, f64::INFINITY, 1, 3);
        cfg.initial = InitialDistribution::UniformExcludingTarget;
        for i in 0..500 {
            assert!(simulate_pair(&cfg, i).unwrap() > 0.0);
        }
    }

    #[test]
    fn step_budget_is_enforced() {
        let spec = LatticeSpec::centered(3, 10, 1e-7, Boundary::Periodic).unwrap();
        let mut cfg = SsaConfig::new(spec, 1e-12, 1.0, 4, 1);
        cfg.initial = InitialDistribution::UniformExcludingTarget;
        cfg.step_budget = 5;
        match estimate(&cfg) {
            Err(Error::StepBudget { budget: 5, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_config() {
        let spec = spec_3x3();
        assert!(estimate(&SsaConfig::new(spec, 1e-14, 1.0, 0, 1)).is_err());
        assert!(estimate(&SsaConfig::new(spec, 1e-14, 0.0, 1, 1)).is_err());
        assert!(estimate(&SsaConfig::new(spec, 0.0, 1.0, 1, 1)).is_err());
    }

    #[test]
    fn same_seed_same_samples() {
        let cfg = SsaConfig::new(spec_3x3(), 1e-14, 50.0, 64, 99);
        let a = estimate(&cfg).unwrap();
        let b = estimate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = estimate(&SsaConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.mean, c.mean);
    }
}
