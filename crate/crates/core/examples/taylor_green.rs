//! Newtonian limit: the Taylor-Green vortex under the spectral solver with
//! no polymer stress, compared with the exact decay.

use polymelt::flow::{pressure, FlowParams, FlowSolver, SpectralVelocity};
use polymelt::grid::PeriodicGrid;
use polymelt::oracle::{taylor_green_pressure, taylor_green_velocity};
use polymelt::spectral::Spectral;
use polymelt::tensor::{Tensor2, Vector};
use std::f64::consts::PI;

fn main() {
    let sp = Spectral::new(PeriodicGrid::new(64, 2.0 * PI));
    let params = FlowParams::new(1.0, 0.5).unwrap();
    let nu = params.nu();
    let mut v = SpectralVelocity::from_physical(&sp, &sp.grid().map(|x, y| taylor_green_velocity(x, y, 0.0, 1.0, nu)));
    let mut solver = FlowSolver::new(sp.clone(), params);
    let zero = vec![Vector::zero(); sp.grid().cells()];
    let dt = 1e-3;
    println!("{:>6} {:>14} {:>14} {:>12}", "t", "energy", "exact", "L2 error");
    for n in 1..=1000 {
        solver.step(&mut v, &zero, dt).unwrap();
        if n % 200 == 0 {
            let t = n as f64 * dt;
            let exact = sp.grid().map(|x, y| taylor_green_velocity(x, y, t, 1.0, nu));
            let err = v.to_physical(&sp).iter().zip(&exact).map(|(a, b)| (*a - *b).norm_sq()).sum::<f64>().sqrt() * sp.grid().dx();
            println!("{t:>6.2} {:>14.10} {:>14.10} {err:>12.3e}", v.energy(&sp), PI * PI * (-4.0 * nu * t).exp());
        }
    }
    let p = pressure(&sp, &v, &vec![Tensor2::zero(); sp.grid().cells()], 1.0);
    let worst = p
        .iter()
        .enumerate()
        .map(|(c, pc)| {
            let (x, y) = sp.grid().coords(c);
            (pc - taylor_green_pressure(x, y, 1.0, 1.0, nu, 1.0)).abs()
        })
        .fold(0.0, f64::max);
    println!("pressure error at t = 1: {worst:.3e}");
}
