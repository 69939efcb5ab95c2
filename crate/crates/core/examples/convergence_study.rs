//! Self-convergence of a short startup-shear run under `dt` halving and
//! grid doubling.
//!
//! `cargo run --release --example convergence_study -- [time|space] [levels] [key=value ...]`

use polymelt::config::SimConfig;
use polymelt::convergence::{study_with, Refinement};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let refinement = match args.next().as_deref() {
        Some("space") => Refinement::Space,
        _ => Refinement::Time,
    };
    let levels: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let mut overrides: Vec<String> =
        ["grids.n=32", "grids.n_t=50", "grids.t_max=2.0", "grids.n_s=16", "scenario.t_end=2.0"].map(String::from).to_vec();
    overrides.extend(args);
    let cfg = SimConfig::default().with_overrides(&overrides)?;
    let s = study_with(&cfg, refinement, levels, |l| eprintln!("level n={} n_t={} dt={:.3e} done", l.n, l.n_t, l.dt))?;
    print!("{}", s.table());
    Ok(())
}
