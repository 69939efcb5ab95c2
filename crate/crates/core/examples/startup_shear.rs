//! Startup shear of a quiescent melt: run the default scenario for a few
//! steps and print the monitored quantities.
//!
//! `cargo run --release --example startup_shear -- [steps] [key=value ...]`

use polymelt::config::SimConfig;
use polymelt::sim::Simulation;
use std::time::Instant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    let overrides: Vec<String> = args.collect();
    let cfg = SimConfig::default().with_overrides(&overrides)?;
    let start = Instant::now();
    let mut sim = Simulation::new(cfg)?;
    println!("setup {:.2}s, dt = {}", start.elapsed().as_secs_f64(), sim.dt());
    println!("{:>5} {:>8} {:>12} {:>12} {:>12} {:>12} {:>12}", "step", "t", "energy", "|sigma|", "min det", "k min", "decay");
    for _ in 0..steps {
        let t0 = Instant::now();
        sim.step()?;
        let d = sim.diagnostics();
        sim.record(&d);
        println!(
            "{:>5} {:>8.3} {:>12.5e} {:>12.5e} {:>12.9} {:>12.3e} {:>12.5e}  ({:.2}s)",
            d.step,
            d.t,
            d.energy,
            d.sigma_max,
            d.min_det,
            d.k_min,
            d.decay_ratio,
            t0.elapsed().as_secs_f64()
        );
    }
    for v in sim.verdicts() {
        println!("{:<22} {:<4} worst {:.6e} (limit {:.6e})", v.name, if v.passed { "ok" } else { "FAIL" }, v.worst, v.limit);
    }
    Ok(())
}
