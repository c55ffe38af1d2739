//! Physical parameters of the pair problem and the Cartesian voxel lattice.
//!
//! Voxels are indexed row-major with the x axis fastest:
//! `index = x + n * (y + n * z)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Constants of the A + B pair problem. A is pinned, B diffuses with the
/// relative diffusivity `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    /// Sum of reaction radii (m).
    pub rho: f64,
    /// Relative diffusivity D_A + D_B (m²/s).
    pub d: f64,
    /// Microscopic association rate (m^dim/s). `f64::INFINITY` is the
    /// perfectly absorbing limit.
    pub k_r: f64,
    /// Domain side length (m).
    pub l: f64,
    pub dim: usize,
}

impl PhysParams {
    pub fn new(dim: usize, rho: f64, d: f64, k_r: f64, l: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!("D must be positive, got {d}")));
        }
        if !(k_r > 0.0) {
            return Err(Error::InvalidParameter(format!("k_r must be positive or infinite, got {k_r}")));
        }
        if !(l > rho && l.is_finite()) {
            return Err(Error::InvalidParameter(format!("L must exceed rho, got L = {l}")));
        }
        Ok(Self { rho, d, k_r, l, dim })
    }

    /// Square of side 250ρ with ρ = 2 nm, D = 1e-14 m²/s, perfectly absorbing.
    pub fn square_preset() -> Self {
        let rho = 2e-9;
        Self { rho, d: 1e-14, k_r: f64::INFINITY, l: 250.0 * rho, dim: 2 }
    }

    /// Cube of side 100ρ with ρ = 2 nm, D = 1e-12 m²/s, perfectly absorbing.
    pub fn cube_preset() -> Self {
        let rho = 2e-9;
        Self { rho, d: 1e-12, k_r: f64::INFINITY, l: 100.0 * rho, dim: 3 }
    }

    pub fn is_absorbing(&self) -> bool {
        self.k_r.is_infinite()
    }

    /// Smoluchowski diffusion-limited rate 4πρD (3D) or the 2D analogue 2πD.
    pub fn diffusion_limit(&self) -> f64 {
        match self.dim {
            2 => 2.0 * std::f64::consts::PI * self.d,
            _ => 4.0 * std::f64::consts::PI * self.rho * self.d,
        }
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    /// Jumps across a wall are null events: the walker stays put.
    Reflective,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Reflective => "reflective",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodic" => Ok(Boundary::Periodic),
            "reflective" | "reflecting" => Ok(Boundary::Reflective),
            other => Err(Error::Config(format!("unknown boundary '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub dim: usize,
    pub n_per_side: usize,
    /// Domain side length; the voxel size is derived from it.
    pub l: f64,
    pub boundary: Boundary,
    /// Voxel holding the stationary A molecule.
    pub target: usize,
}

impl LatticeSpec {
    /// Lattice with the target in the central voxel (the voxel at
    /// coordinate `n / 2` along every axis).
    pub fn centered(dim: usize, n_per_side: usize, l: f64, boundary: Boundary) -> Result<Self> {
        check_dim(dim)?;
        let c = n_per_side / 2;
        let target = (0..dim).fold(0, |acc, _| acc * n_per_side + c);
        let spec = Self { dim, n_per_side, l, boundary, target };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if self.n_per_side < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_per_side must be at least 2, got {}",
                self.n_per_side
            )));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::InvalidParameter(format!("L must be positive, got {}", self.l)));
        }
        if self.target >= self.voxel_count() {
            return Err(Error::InvalidParameter(format!(
                "target {} out of range for {} voxels",
                self.target,
                self.voxel_count()
            )));
        }
        Ok(())
    }

    /// Voxel side h = L / n.
    pub fn h(&self) -> f64 {
        self.l / self.n_per_side as f64
    }

    pub fn voxel_count(&self) -> usize {
        self.n_per_side.pow(self.dim as u32)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let n = self.n_per_side;
        let mut c = [0; 3];
        let mut rest = index;
        for axis in c.iter_mut().take(self.dim) {
            *axis = rest % n;
            rest /= n;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        let n = self.n_per_side;
        coords[..self.dim].iter().rev().fold(0, |acc, &c| acc * n + c)
    }
}

/// Total jump rate 2·dim·D/h² out of a voxel (1/s).
pub fn total_jump_rate(spec: &LatticeSpec, d: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("D must be positive, got {d}")));
    }
    let h = spec.h();
    Ok(2.0 * spec.dim as f64 * d / (h * h))
}

/// A lattice with its neighbor table. Every voxel owns `2·dim` jump slots,
/// ordered (+x, −x, +y, −y, +z, −z). A slot blocked by a reflective wall
/// points back at the voxel itself.
#[derive(Debug, Clone)]
pub struct Lattice {
    spec: LatticeSpec,
    slots: Vec<u32>,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_per_side;
        let total = spec.voxel_count();
        if total > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!("{total} voxels is too many")));
        }
        let degree = 2 * spec.dim;
        let mut slots = Vec::with_capacity(total * degree);
        for i in 0..total {
            let c = spec.coords(i);
            for axis in 0..spec.dim {
                for step in [1isize, -1] {
                    let x = c[axis] as isize + step;
                    let mut nc = c;
                    let j = if (0..n as isize).contains(&x) {
                        nc[axis] = x as usize;
                        spec.index(&nc)
                    } else {
                        match spec.boundary {
                            Boundary::Periodic => {
                                nc[axis] = x.rem_euclid(n as isize) as usize;
                                spec.index(&nc)
                            }
                            Boundary::Reflective => i,
                        }
                    };
                    slots.push(j as u32);
                }
            }
        }
        Ok(Self { spec, slots })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn degree(&self) -> usize {
        2 * self.spec.dim
    }

    pub fn len(&self) -> usize {
        self.spec.voxel_count()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn target(&self) -> usize {
        self.spec.target
    }

    /// Raw jump slots of voxel `i`, including self-entries for blocked jumps.
    pub fn slots(&self, i: usize) -> &[u32] {
        let d = self.degree();
        &self.slots[i * d..(i + 1) * d]
    }

    /// Distinct voxels reachable from `i` in one jump (self excluded).
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.slots(i).iter().map(|&j| j as usize).filter(|&j| j != i).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}
