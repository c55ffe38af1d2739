//! Exact mean first-passage and association times on the lattice.
//!
//! Fields are solved in jump-step units (time × total jump rate) and
//! converted to seconds only on the way out.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, PairOperator};
use crate::model::{check_dim, total_jump_rate, Lattice, PhysParams};

/// Montroll's constant for the simple cubic lattice.
pub const MONTROLL_3D: f64 = 1.5164;
/// Additive constant of the square-lattice first-passage law.
pub const MONTROLL_2D: f64 = 0.1951;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative max-norm residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FptMode {
    /// First arrival of B in the target voxel.
    Hitting,
    /// Reaction with propensity `k_meso` (1/s) while B sits in the target.
    Absorption { k_meso: f64 },
}

#[derive(Debug, Clone)]
pub struct ExactFptField {
    steps: Vec<f64>,
    jump_rate: f64,
    target: usize,
    mode: FptMode,
    residual: f64,
    tolerance: f64,
    iterations: usize,
}

impl ExactFptField {
    /// Per-voxel mean, in jump steps.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Per-voxel mean, in seconds.
    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s / self.jump_rate).collect()
    }

    pub fn jump_rate(&self) -> f64 {
        self.jump_rate
    }

    pub fn mode(&self) -> FptMode {
        self.mode
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Residual tolerance that was enforced: the requested one, raised to
    /// the f64 rounding floor for very large fields.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Mean step count over a uniform start. With `include_target` the
    /// target voxel is part of the average (weight 1/N).
    pub fn mean_steps(&self, include_target: bool) -> f64 {
        let n = self.steps.len();
        let sum: f64 = self.steps.iter().sum();
        if include_target {
            sum / n as f64
        } else {
            (sum - self.steps[self.target]) / (n - 1) as f64
        }
    }

    /// Mean over all N voxels in seconds; for an absorption field this is τ_meso.
    pub fn mean_seconds(&self) -> f64 {
        self.mean_steps(true) / self.jump_rate
    }

    /// τ_D from a uniform start, in seconds.
    pub fn tau_d_uniform(&self, include_target: bool) -> Result<f64> {
        self.require_hitting("tau_d_uniform")?;
        Ok(self.mean_steps(include_target) / self.jump_rate)
    }

    /// Mean step count to reach the target starting one jump away from it,
    /// averaged over the target's jump slots. A slot blocked by a wall leaves
    /// B in the target and contributes zero.
    pub fn n_steps_one(&self, lattice: &Lattice) -> Result<f64> {
        self.require_hitting("n_steps_one")?;
        let slots = lattice.slots(self.target);
        Ok(slots.iter().map(|&j| self.steps[j as usize]).sum::<f64>() / slots.len() as f64)
    }

    fn require_hitting(&self, what: &str) -> Result<()> {
        match self.mode {
            FptMode::Hitting => Ok(()),
            FptMode::Absorption { .. } => {
                Err(Error::InvalidParameter(format!("{what} requires a hitting-time field")))
            }
        }
    }
}

pub fn solve_hitting(lattice: &Lattice, d: f64, opts: &SolverOptions) -> Result<ExactFptField> {
    check_tol(opts)?;
    let jump_rate = total_jump_rate(lattice.spec(), d)?;
    let sol = linalg::solve(&PairOperator::hitting(lattice), opts.tol, opts.max_iter)?;
    Ok(ExactFptField {
        steps: sol.x,
        jump_rate,
        target: lattice.target(),
        mode: FptMode::Hitting,
        residual: sol.residual,
        tolerance: sol.tolerance,
        iterations: sol.iterations,
    })
}

/// Mean association time field for reaction propensity `k_meso` (1/s) in the
/// target voxel. An infinite propensity reduces to [`solve_hitting`].
pub fn solve_absorption(
    lattice: &Lattice,
    d: f64,
    k_meso: f64,
    opts: &SolverOptions,
) -> Result<ExactFptField> {
    if k_meso.is_infinite() && k_meso > 0.0 {
        return solve_hitting(lattice, d, opts);
    }
    if !(k_meso > 0.0) {
        return Err(Error::InvalidParameter(format!("k_meso must be positive, got {k_meso}")));
    }
    check_tol(opts)?;
    let jump_rate = total_jump_rate(lattice.spec(), d)?;
    let op = PairOperator::absorbing(lattice, k_meso / jump_rate);
    let sol = linalg::solve(&op, opts.tol, opts.max_iter)?;
    Ok(ExactFptField {
        steps: sol.x,
        jump_rate,
        target: lattice.target(),
        mode: FptMode::Absorption { k_meso },
        residual: sol.residual,
        tolerance: sol.tolerance,
        iterations: sol.iterations,
    })
}

fn check_tol(opts: &SolverOptions) -> Result<()> {
    if opts.tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("solver tolerance must be positive, got {}", opts.tol)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticPrediction {
    /// Mean steps to the target from a uniform non-target start.
    pub n_steps: f64,
    /// Mean steps to the target from a neighbor of the target.
    pub n_steps_one: f64,
    pub dim: usize,
}

/// Large-N first-passage step counts on the periodic square / cubic lattice.
pub fn montroll_asymptotic(dim: usize, voxels: usize) -> Result<AsymptoticPrediction> {
    check_dim(dim)?;
    if voxels < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 voxels, got {voxels}")));
    }
    let n = voxels as f64;
    let n_steps = match dim {
        2 => n * n.ln() / PI + MONTROLL_2D * n,
        _ => MONTROLL_3D * n,
    };
    Ok(AsymptoticPrediction { n_steps, n_steps_one: n, dim })
}

/// Small-h asymptotic τ_D (seconds) for voxel size `h`.
pub fn tau_d_asymptotic(params: &PhysParams, h: f64) -> Result<f64> {
    if !(h > 0.0 && h < params.l) {
        return Err(Error::InvalidParameter(format!("h must lie in (0, L), got {h}")));
    }
    let (l, d) = (params.l, params.d);
    Ok(match params.dim {
        2 => l * l / (2.0 * PI * d) * (l / h).ln() + MONTROLL_2D * l * l / (4.0 * d),
        _ => MONTROLL_3D * l.powi(3) / (6.0 * d * h),
    })
}
