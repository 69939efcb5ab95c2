//! The nonlinear Cauchy problem `y'' = ξ₀ (y + ξ₂)^k (y')²`: explicit
//! solution against Dormand-Prince, and the blowup point.

use polymelt::ode::{Cauchy, CauchyParams};
use polymelt::oracle::cauchy_reference;

fn main() {
    for (xi0, xi1, xi2, k) in [(1.0, 1.0, 1.0, 1.0), (0.5, 2.0, 1.5, 2.0), (0.0, 1.5, 1.0, 1.0)] {
        let c = Cauchy::new(CauchyParams { xi0, xi1, xi2, k }).unwrap();
        let end = 0.9 * c.blowup_point().min(2.0);
        println!("xi0={xi0} xi1={xi1} xi2={xi2} k={k}: blowup at x = {:.6}", c.blowup_point());
        let xs: Vec<f64> = (1..=5).map(|i| end * i as f64 / 5.0).collect();
        let reference = cauchy_reference(xi0, xi1, xi2, k, &xs).unwrap();
        for (x, r) in xs.iter().zip(&reference) {
            let y = c.solution(*x).unwrap();
            println!("  x {x:>8.5}  explicit {y:>18.12}  reference {r:>18.12}  rel {:.1e}", ((y - r) / r).abs());
        }
    }
}
