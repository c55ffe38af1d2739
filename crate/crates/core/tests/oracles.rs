use rdme_lab::fpt_exact::{solve_absorption, SolverOptions};
use rdme_lab::fpt_mc::{estimate, SsaConfig};
use rdme_lab::micro::{bd_estimate, tau_micro_analytic, MicroConfig};
use rdme_lab::model::{Boundary, Lattice, LatticeSpec, PhysParams};

#[test]
fn bd_square_matches_disk_formula() {
    let p = PhysParams::square_preset();
    let tau = tau_micro_analytic(&p).unwrap();
    let cfg = MicroConfig::new(p, 8e-4, 3000, 11);
    let report = bd_estimate(&cfg, &[8e-4, 4e-4, 2e-4]).unwrap();
    assert!(report.coupled);
    let tol = (0.05 * tau).max(3.0 * report.extrapolated_stderr);
    assert!((report.extrapolated - tau).abs() <= tol, "{} vs {tau}", report.extrapolated);
}

#[test]
fn ssa_mean_independent_of_worker_count() {
    let p = PhysParams::square_preset();
    let spec = LatticeSpec::centered(2, 10, p.l, Boundary::Reflective).unwrap();
    let cfg = SsaConfig::new(spec, p.d, 50.0, 4000, 9);
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let one = pool(1).install(|| estimate(&cfg).unwrap());
    let eight = pool(8).install(|| estimate(&cfg).unwrap());
    assert_eq!(one.mean.to_bits(), eight.mean.to_bits());
    assert_eq!(one.stderr.to_bits(), eight.stderr.to_bits());

    let exact = solve_absorption(&Lattice::new(spec).unwrap(), p.d, 50.0, &SolverOptions::default())
        .unwrap()
        .mean_seconds();
    assert!(one.z_score(exact) < 4.0);
}
