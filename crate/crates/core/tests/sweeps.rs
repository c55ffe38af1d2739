use rdme_lab::harness::{
    read_csv, run_fig1_sweep, run_fig2_sweep, write_csv, ExperimentConfig, Flags, SweepRow,
};
use rdme_lab::model::Boundary;
use rdme_lab::rates::RateModel;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
}

fn rows_close(a: &SweepRow, b: &SweepRow) -> bool {
    let cells = a.models.iter().zip(&b.models).all(|(x, y)| {
        let opt = |p: Option<f64>, q: Option<f64>| match (p, q) {
            (Some(p), Some(q)) => close(p, q, 1e-9),
            (None, None) => true,
            _ => false,
        };
        x.model == y.model
            && opt(x.propensity, y.propensity)
            && opt(x.tau_meso, y.tau_meso)
            && opt(x.relerr, y.relerr)
    });
    close(a.h, b.h, 1e-9)
        && close(a.tau_d_exact, b.tau_d_exact, 1e-9)
        && close(a.tau_d_asym, b.tau_d_asym, 1e-9)
        && close(a.tau_micro, b.tau_micro, 1e-9)
        && a.n_voxels == b.n_voxels
        && a.flags == b.flags
        && a.models.len() == b.models.len()
        && cells
}

#[test]
fn fig2_csv_round_trip() {
    let rows = run_fig2_sweep(&ExperimentConfig::cube()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig2.csv");
    write_csv(&rows, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        assert!(rows_close(a, b), "{a:?}\n{b:?}");
    }
}

#[test]
fn fig1_file_brackets_critical_mesh() {
    let cfg = ExperimentConfig::cube();
    let sweep = run_fig1_sweep(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig1.csv");
    write_csv(&sweep.rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("h_m,h_over_rho,N,tau_D_exact_s,tau_D_asym_s,tau_micro_s,flags\n"));

    let rows = read_csv(&path).unwrap();
    assert!(rows.windows(2).all(|w| w[0].h > w[1].h));
    let bracket = rows
        .windows(2)
        .find(|w| w[0].tau_d_exact < w[0].tau_micro && w[1].tau_d_exact >= w[1].tau_micro)
        .expect("sign change");
    let h_star = 3.1759 * cfg.params.rho;
    assert!(bracket[1].h <= h_star && h_star <= bracket[0].h);
}

#[test]
fn sweep_and_closed_form_agree_within_one_mesh_step() {
    for cfg in [ExperimentConfig::cube(), ExperimentConfig::square()] {
        let sweep = run_fig1_sweep(&cfg).unwrap();
        let c = sweep.crossing.unwrap();
        let h_star = sweep.h_star.unwrap();
        let step = c.h_upper - c.h_lower;
        assert!((c.h_interp - h_star).abs() <= step, "{}D", cfg.params.dim);
        // Periodic and reflective τ_D differ by well under a percent here.
        let other = sweep.crossing_other.unwrap();
        assert!(close(other.h_interp, c.h_interp, 0.01));
    }
}

#[test]
fn row_at_ten_rho() {
    let mut cfg = ExperimentConfig::cube();
    cfg.mesh = vec![10];
    let sweep = run_fig1_sweep(&cfg).unwrap();
    let row = &sweep.rows[0];
    assert!(close(row.h_over_rho, 10.0, 1e-12));
    assert!(close(row.tau_d_asym, 0.101093, 1e-5));
    assert!(!row.flags.below_h_star);
    assert_eq!(sweep.rows.len(), sweep.tau_d_other.len());
}

#[test]
fn flags_agree_with_empty_cells() {
    for cfg in [ExperimentConfig::cube(), ExperimentConfig::square()] {
        for row in run_fig2_sweep(&cfg).unwrap() {
            for cell in &row.models {
                let expect_empty = match cell.model {
                    RateModel::Conventional => false,
                    RateModel::ErbanChapman => row.flags.below_h_crit,
                    RateModel::Fange => row.flags.outside_fange,
                    RateModel::RenewalAsymptotic => row.flags.below_h_star,
                    RateModel::RenewalExact => row.flags.below_h_star_exact,
                };
                assert_eq!(cell.tau_meso.is_none(), expect_empty, "{} at {}", cell.model, row.h_over_rho);
                assert_eq!(cell.propensity.is_none(), expect_empty);
                if let Some(t) = cell.tau_meso {
                    assert!(t > 0.0 && t.is_finite());
                }
            }
            assert!(row.tau_d_exact > 0.0 && row.tau_d_asym > 0.0);
        }
    }
}

#[test]
fn renewal_exact_is_matched() {
    for cfg in [ExperimentConfig::cube(), ExperimentConfig::square()] {
        for row in run_fig2_sweep(&cfg).unwrap() {
            let cell = row.models.iter().find(|c| c.model == RateModel::RenewalExact).unwrap();
            if let Some(e) = cell.relerr {
                assert!(e.abs() <= 1e-9, "{e}");
            }
        }
    }
}

#[test]
fn renewal_asym_close_to_erban_chapman() {
    let cfg = ExperimentConfig::cube();
    let tau_micro = rdme_lab::micro::tau_micro_analytic(&cfg.params).unwrap();
    let h_star = 3.17594 * cfg.params.rho;
    for row in run_fig2_sweep(&cfg).unwrap() {
        if row.h <= h_star || row.h > 10.0 * cfg.params.rho {
            continue;
        }
        let t = |m| row.models.iter().find(|c| c.model == m).unwrap().tau_meso.unwrap();
        let d = (t(RateModel::RenewalAsymptotic) - t(RateModel::ErbanChapman)).abs() / tau_micro;
        assert!(d <= 0.1, "{d}");
    }
}

#[test]
fn with_mc_adds_columns_deterministically() {
    let mut cfg = ExperimentConfig::square();
    cfg.boundary = Boundary::Periodic;
    cfg.mesh = vec![8, 12];
    cfg.models = vec![RateModel::Fange, RateModel::RenewalExact];
    cfg.with_mc = true;
    cfg.samples = 2000;
    let a = run_fig2_sweep(&cfg).unwrap();
    let b = run_fig2_sweep(&cfg).unwrap();
    assert_eq!(a, b);
    for row in &a {
        for cell in &row.models {
            let mc = cell.mc.unwrap();
            let exact = cell.tau_meso.unwrap();
            assert!((mc.mean - exact).abs() <= 4.0 * mc.stderr, "{mc:?} vs {exact}");
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mc.csv");
    write_csv(&a, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().next().unwrap().contains("model_fange_mc_mean_s,model_fange_mc_stderr_s"));
    assert_eq!(read_csv(&path).unwrap(), {
        let mut sorted = a.clone();
        sorted.sort_by(|x, y| y.h.total_cmp(&x.h));
        sorted
    });
}

#[test]
fn thread_count_does_not_change_rows() {
    let cfg = ExperimentConfig::square();
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let one = pool(1).install(|| run_fig2_sweep(&cfg).unwrap());
    let many = pool(6).install(|| run_fig2_sweep(&cfg).unwrap());
    assert_eq!(one, many);
}

#[test]
fn solver_failure_names_the_mesh() {
    let mut cfg = ExperimentConfig::cube();
    cfg.mesh = vec![20];
    cfg.solver.max_iter = 2;
    let err = run_fig1_sweep(&cfg).unwrap_err();
    assert!(err.to_string().starts_with("at h = 1.000000e-8 m"), "{err}");
    assert!(!err.is_config());
}

#[test]
fn flags_column_parses_back() {
    let f: Flags = "below_h_star;below_h_crit".parse().unwrap();
    assert!(f.below_h_star && f.below_h_crit && !f.outside_fange);
}
