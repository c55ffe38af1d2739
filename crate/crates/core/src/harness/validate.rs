use std::fmt;

use crate::error::Result;
use crate::fpt_exact::{
    montroll_asymptotic, solve_absorption, solve_hitting, ExactFptField, SolverOptions, MONTROLL_3D,
};
use crate::model::{Boundary, Lattice, LatticeSpec, PhysParams};

/// One invariant with its measured value.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    /// Relative tolerance on |measured − expected| / |expected|.
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn relative(name: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Self {
        let err = ((measured - expected) / expected).abs();
        Self { name: name.into(), measured, expected, tolerance, passed: err <= tolerance }
    }

    pub fn relative_error(&self) -> f64 {
        ((self.measured - self.expected) / self.expected).abs()
    }
}

/// `check=<name> status=PASS|FAIL measured=.. expected=.. rel_err=.. tol=..`
impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} status={} measured={:.12e} expected={:.12e} rel_err={:.3e} tol={:.3e}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.measured,
            self.expected,
            self.relative_error(),
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn periodic(dim: usize, n: usize, l: f64) -> Result<Lattice> {
    Lattice::new(LatticeSpec::centered(dim, n, l, Boundary::Periodic)?)
}

fn hitting(
    dim: usize,
    n: usize,
    params: &PhysParams,
    opts: &SolverOptions,
) -> Result<(Lattice, ExactFptField)> {
    let lat = periodic(dim, n, params.l)?;
    let field = solve_hitting(&lat, params.d, opts)?;
    Ok((lat, field))
}

/// Mean steps from a uniform non-target start over N for periodic n^dim.
fn montroll_ratio(dim: usize, n: usize, opts: &SolverOptions) -> Result<(f64, f64)> {
    let params = if dim == 2 { PhysParams::square_preset() } else { PhysParams::cube_preset() };
    let (lat, field) = hitting(dim, n, &params, opts)?;
    let voxels = lat.len();
    let predicted = montroll_asymptotic(dim, voxels)?.n_steps / voxels as f64;
    Ok((field.mean_steps(false) / voxels as f64, predicted))
}

/// Kac return counts, Montroll asymptotics and the renewal identity on
/// periodic lattices, all from exact solves.
pub fn run_validation_suite(opts: &SolverOptions) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    let desk = [(2usize, 16usize, PhysParams::square_preset()), (3, 12, PhysParams::cube_preset())];

    for (dim, n, params) in &desk {
        let (lat, field) = hitting(*dim, *n, params, opts)?;
        let n_one = field.n_steps_one(&lat)?;
        let name = format!("kac_{dim}d_n{n}");
        checks.push(Check::relative(name, n_one, (lat.len() - 1) as f64, 1e-9));
    }

    let (ratio, _) = montroll_ratio(3, 20, opts)?;
    checks.push(Check::relative("montroll_3d_n20", ratio, MONTROLL_3D, 0.03));

    let (r64, p64) = montroll_ratio(2, 64, opts)?;
    let (r128, p128) = montroll_ratio(2, 128, opts)?;
    checks.push(Check::relative("montroll_2d_n64", r64, p64, 0.015));
    checks.push(Check::relative("montroll_2d_n128", r128, p128, 0.015));
    let (e64, e128) = (((r64 - p64) / p64).abs(), ((r128 - p128) / p128).abs());
    checks.push(Check {
        name: "montroll_2d_error_shrinks".into(),
        measured: e128,
        expected: e64,
        tolerance: 0.0,
        passed: e128 < e64,
    });

    for (dim, n, params) in &desk {
        let (lat, field) = hitting(*dim, *n, params, opts)?;
        let tau_d = field.tau_d_uniform(true)?;
        let n_one = field.n_steps_one(&lat)?;
        for k in [10.0, 1e3, 1e5] {
            let tau_meso = solve_absorption(&lat, params.d, k, opts)?.mean_seconds();
            let name = format!("renewal_{dim}d_n{n}_k{k:e}");
            checks.push(Check::relative(name, tau_meso, tau_d + (1.0 + n_one) / k, 1e-9));
        }
    }
    Ok(ValidationReport { checks })
}
