use clap::{Parser, Subcommand, ValueEnum};
use polymelt::config::SimConfig;
use polymelt::convergence::{study_with, Refinement};
use polymelt::io::CsvWriter;
use polymelt::memory_kernel::IaMemory;
use polymelt::ode::{Cauchy, CauchyParams};
use polymelt::oracle;
use polymelt::orientation::{s_of_g, SphereQuadrature};
use polymelt::quad::integrate_to_infinity;
use polymelt::sim::{run_with, validate_scenario};
use polymelt::tensor::Tensor2;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "polymelt", version, about = "Polymer melt flow on the periodic square")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the time series, snapshots and manifest.
    Run {
        config: PathBuf,
        /// `section.key=value`, applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        quiet: bool,
    },
    /// Check parameters and initial data without running.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Write a reference table computed independently of the solver.
    Oracle {
        name: OracleName,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Refine `dt` (or the grid) and report observed orders.
    Convergence {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = Refine::Time)]
        refine: Refine,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleName {
    /// High-resolution quadrature of S(G) for a sweep of shears and stretches.
    Orientation,
    /// IA memory, survival function and their integrals.
    IaMemory,
    /// Taylor-Green velocity and pressure decay.
    TaylorGreen,
    /// Explicit Cauchy-problem solution against Dormand-Prince.
    Cauchy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Refine {
    Time,
    Space,
}

fn load(path: &Path, set: &[String]) -> Result<SimConfig, Box<dyn std::error::Error>> {
    Ok(SimConfig::load(path)?.with_overrides(set)?)
}

fn oracle_table(name: OracleName) -> Result<(Vec<&'static str>, Vec<Vec<f64>>), Box<dyn std::error::Error>> {
    let mut rows = Vec::new();
    let header = match name {
        OracleName::Orientation => {
            let quad = SphereQuadrature::<2>::circle(64);
            for i in 0..=20 {
                let kappa = 0.5 * i as f64;
                for lambda in [1.0, 2.0, 5.0] {
                    let g = Tensor2::new(lambda, kappa, 0.0, 1.0 / lambda);
                    let r = oracle::orientation_reference(&g, 1 << 20);
                    let s = s_of_g(&g, &quad)?;
                    rows.push(vec![kappa, lambda, r.0[0][0], r.0[0][1], r.0[1][1], (s - r).frobenius()]);
                }
            }
            vec!["kappa", "lambda", "s_xx", "s_xy", "s_yy", "err_n64"]
        }
        OracleName::IaMemory => {
            let ia = IaMemory::new(1999);
            for i in 0..=40 {
                let t = 0.05 * i as f64;
                let tail = integrate_to_infinity(|s| ia.eval(s), t, 1e-14, 1e-12)?;
                rows.push(vec![t, ia.eval(t), ia.survival(t), oracle::ia_relaxation_modulus(t, 1999), tail.value]);
            }
            vec!["t", "memory", "survival", "modulus_direct", "memory_tail_integral"]
        }
        OracleName::TaylorGreen => {
            let (amp, re, omega) = (1.0, 1.0, 0.5);
            let nu = (1.0 - omega) / re;
            for i in 0..=20 {
                let t = 0.05 * i as f64;
                let v = oracle::taylor_green_velocity(1.0, 0.5, t, amp, nu);
                let p = oracle::taylor_green_pressure(1.0, 0.5, t, amp, nu, re);
                rows.push(vec![t, v.0[0], v.0[1], p, amp * amp * (-4.0 * nu * t).exp() * std::f64::consts::PI.powi(2)]);
            }
            vec!["t", "u_at_1_0.5", "v_at_1_0.5", "p_at_1_0.5", "energy"]
        }
        OracleName::Cauchy => {
            let sets = [(1.0, 1.0, 1.0, 1.0), (0.5, 1.0, 2.0, 2.0), (2.0, 0.5, 1.0, 1.0), (0.2, 2.0, 1.0, 0.5), (0.0, 1.5, 1.0, 3.0)];
            for (set, &(xi0, xi1, xi2, k)) in sets.iter().enumerate() {
                let c = Cauchy::new(CauchyParams { xi0, xi1, xi2, k })?;
                let end = 0.9 * c.blowup_point().min(2.0);
                let xs: Vec<f64> = (1..=20).map(|i| end * i as f64 / 20.0).collect();
                let reference = oracle::cauchy_reference(xi0, xi1, xi2, k, &xs)?;
                for (x, r) in xs.iter().zip(&reference) {
                    let e = c.solution(*x)?;
                    rows.push(vec![set as f64, xi0, xi1, xi2, k, *x, *r, e, ((e - r) / r.abs()).abs()]);
                }
            }
            vec!["set", "xi0", "xi1", "xi2", "k", "x", "reference", "explicit", "rel_err"]
        }
    };
    Ok((header, rows))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode, Box<dyn std::error::Error>> {
    match Cli::parse().command {
        Command::Run { config, set, quiet } => {
            let cfg = load(&config, &set)?;
            let every = (cfg.steps() / 20).max(1);
            let summary = run_with(&cfg, |d| {
                if !quiet && d.step % every == 0 {
                    eprintln!("step {:>6}  t {:>8.3}  |grad v| {:.4e}  |sigma| {:.4e}  min det {:.9}", d.step, d.t, d.grad_v_max, d.sigma_max, d.min_det);
                }
            });
            let summary = match summary {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("run aborted: {e}");
                    eprintln!("diagnostics in {}", cfg.output.dir.display());
                    return Ok(ExitCode::FAILURE);
                }
            };
            for v in &summary.verdicts {
                println!("{:<22} {:<4} worst {:.6e} at step {} (limit {:.6e})", v.name, if v.passed { "ok" } else { "FAIL" }, v.worst, v.worst_step, v.limit);
            }
            println!("manifest: {}", summary.manifest.display());
            Ok(if summary.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Validate { config, set } => {
            let cfg = load(&config, &set)?;
            let report = validate_scenario(&cfg);
            print!("{report}");
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Oracle { name, out } => {
            let (header, rows) = oracle_table(name)?;
            let sink: Box<dyn std::io::Write> = match &out {
                Some(p) => Box::new(std::fs::File::create(p)?),
                None => Box::new(std::io::stdout().lock()),
            };
            let mut w = CsvWriter::new(sink, &header)?;
            for r in &rows {
                w.row(r)?;
            }
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Convergence { config, set, levels, refine } => {
            let cfg = load(&config, &set)?;
            let refinement = match refine {
                Refine::Time => Refinement::Time,
                Refine::Space => Refinement::Space,
            };
            let s = study_with(&cfg, refinement, levels, |l| eprintln!("level n={} n_t={} dt={:.3e} done", l.n, l.n_t, l.dt))?;
            print!("{}", s.table());
            Ok(ExitCode::SUCCESS)
        }
    }
}
