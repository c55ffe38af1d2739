use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rdme_lab::harness::{self, table, ExperimentConfig};
use rdme_lab::micro::{bd_estimate, tau_micro_analytic, MicroConfig};
use rdme_lab::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "rdme-lab", version, about = "Mesh-size limits of RDME association kinetics")]
struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Desk preset when no config is given: 2 (square) or 3 (cube).
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Add SSA estimates next to the exact association times.
    #[arg(long, global = true)]
    with_mc: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact τ_D against τ_micro over the mesh grid, with the crossing h*.
    SweepFig1,
    /// Association times under each rate model over the mesh grid.
    SweepFig2,
    /// Propensities of the rate models over the mesh grid.
    RatesTable,
    /// Critical mesh sizes of the configured geometry.
    CriticalH,
    /// Exact-solver invariants; exits with status 1 on any failure.
    Validate,
    /// Brownian-dynamics estimate of τ_micro at the configured dt levels.
    MicroBd,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cli.dim.is_some_and(|d| d != cfg.params.dim) {
                return Err(Error::Config("--dim contradicts the config file".into()));
            }
            cfg
        }
        None => ExperimentConfig::preset(cli.dim.unwrap_or(3))
            .map_err(|_| Error::Config(format!("--dim must be 2 or 3, got {}", cli.dim.unwrap_or(3))))?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(samples) = cli.samples {
        cfg.samples = samples;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = Some(threads);
    }
    cfg.with_mc |= cli.with_mc;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `f` on the output file, or on stdout.
fn emit(out: Option<&Path>, f: impl FnOnce(&mut dyn Write, &Path) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
            f(&mut std::io::BufWriter::new(file), path)
        }
        None => f(&mut std::io::stdout().lock(), Path::new("<stdout>")),
    }
}

fn rho_units(h: f64, rho: f64) -> String {
    format!("{:.6e} m ({:.4} rho)", h, h / rho)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = build_config(cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let rho = cfg.params.rho;
    let out = cfg.out.as_deref();

    match cli.command {
        Command::SweepFig1 => {
            let sweep = harness::run_fig1_sweep(&cfg)?;
            emit(out, |w, p| table::write_rows(&sweep.rows, w, p))?;
            match sweep.crossing {
                Some(c) => eprintln!(
                    "crossing ({}): {} bracket [{:.4}, {:.4}] rho",
                    sweep.boundary,
                    rho_units(c.h_interp, rho),
                    c.h_lower / rho,
                    c.h_upper / rho
                ),
                None => eprintln!("crossing ({}): none on this grid", sweep.boundary),
            }
            if let Some(c) = sweep.crossing_other {
                eprintln!("crossing (other boundary): {}", rho_units(c.h_interp, rho));
            }
            if let Some(h) = sweep.h_star {
                eprintln!("closed-form h*: {}", rho_units(h, rho));
            }
        }
        Command::SweepFig2 => {
            let rows = harness::run_fig2_sweep(&cfg)?;
            emit(out, |w, p| table::write_rows(&rows, w, p))?;
        }
        Command::RatesTable => {
            let rows = harness::rates_table(&cfg)?;
            emit(out, |w, p| table::write_rates(&rows, w, p))?;
        }
        Command::CriticalH => {
            let c = harness::critical_sizes(&cfg.params)?;
            emit(out, |w, p| {
                let io = |source| Error::Io { path: p.to_path_buf(), source };
                writeln!(w, "tau_micro_s={:.12e}", c.tau_micro).map_err(io)?;
                writeln!(w, "h_star_m={:.12e}", c.h_star).map_err(io)?;
                writeln!(w, "h_star_over_rho={:.12e}", c.h_star / rho).map_err(io)?;
                writeln!(w, "h_star_bisection_over_rho={:.12e}", c.h_star_bisection / rho).map_err(io)?;
                if let Some(h) = c.h_crit {
                    writeln!(w, "erban_chapman_h_crit_over_rho={:.12e}", h / rho).map_err(io)?;
                }
                writeln!(w, "fange_min_h_over_rho={:.12e}", c.fange_min_h / rho).map_err(io)?;
                Ok(())
            })?;
        }
        Command::Validate => {
            let report = harness::run_validation_suite(&cfg.solver)?;
            let passed = report.passed();
            emit(out, |w, p| {
                let io = |source| Error::Io { path: p.to_path_buf(), source };
                for c in &report.checks {
                    writeln!(w, "{c}").map_err(io)?;
                }
                let failed = report.checks.iter().filter(|c| !c.passed).count();
                writeln!(w, "summary checks={} failed={failed}", report.checks.len()).map_err(io)
            })?;
            if !passed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::MicroBd => {
            let micro = MicroConfig::new(cfg.params, cfg.dt_levels[0], cfg.samples, cfg.seed);
            let report = bd_estimate(&micro, &cfg.dt_levels)?;
            let tau = tau_micro_analytic(&cfg.params)?;
            emit(out, |w, p| {
                let io = |source| Error::Io { path: p.to_path_buf(), source };
                for level in &report.levels {
                    let m = MicroConfig { dt: level.dt, ..micro };
                    if let Some(warn) = m.step_warning() {
                        eprintln!("warning: {warn}");
                    }
                    writeln!(
                        w,
                        "dt={:.6e} mean={:.10e} stderr={:.3e} rel_err={:+.4e}",
                        level.dt,
                        level.stats.mean,
                        level.stats.stderr,
                        (level.stats.mean - tau) / tau
                    )
                    .map_err(io)?;
                }
                writeln!(
                    w,
                    "extrapolated={:.10e} stderr={:.3e} analytic={:.10e} rel_err={:+.4e} coupled={}",
                    report.extrapolated,
                    report.extrapolated_stderr,
                    tau,
                    (report.extrapolated - tau) / tau,
                    report.coupled
                )
                .map_err(io)
            })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
