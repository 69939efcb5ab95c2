//! Dimensionless groups of a polymer melt from physical inputs, and the
//! config they produce.

use polymelt::config::{nondimensionalize, DimensionalInputs, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a polystyrene-like melt in a 1 mm channel at 1 mm/s (SI units)
    let d = DimensionalInputs {
        rho: 1050.0,
        eta_s: 1e3,
        modulus: 2e5,
        contour_length: 1e-6,
        diffusion: 1e-12,
        length: 1e-3,
        velocity: 1e-3,
    };
    let g = nondimensionalize(&d)?;
    println!("Re = {:.3e}, omega = {:.6}, We = {:.3e}", g.reynolds, g.omega, g.weissenberg);
    let cfg = SimConfig::default().with_overrides(&[
        format!("flow.reynolds={}", g.reynolds),
        format!("flow.omega={}", g.omega),
        format!("polymer.weissenberg={}", g.weissenberg),
    ])?;
    print!("{}", cfg.to_toml());
    Ok(())
}
