//! The memory kernel under a prescribed straining flow: the discrete
//! maximum principle, memory positivity and monotonicity per step.

use polymelt::grid::{AgeGrid, ArcGrid, PeriodicGrid};
use polymelt::memory_kernel::{admissible_dt, step_kernel, KernelField};
use polymelt::tensor::Vector;
use std::f64::consts::PI;

fn main() {
    let grid = PeriodicGrid::new(32, 2.0 * PI);
    let arc = ArcGrid::new(32);
    let age = AgeGrid::new(100, 0.02);
    let (mut k, q) = KernelField::geometric(grid, arc, age);
    let (we, mu) = (1.0, 1.0);
    let v = grid.map(|x, y| Vector::new(0.8 * y.sin(), 0.3 * x.cos()));
    // retraction drift odd in s, stronger near the chain ends
    let g: Vec<f64> = (0..grid.cells())
        .flat_map(|c| {
            let strength = 0.5 * ((c % 7) as f64 / 7.0 - 0.5);
            (0..arc.nodes()).map(move |i| strength * arc.s(i))
        })
        .collect();
    let dt = we * age.dt_age;
    println!("geometric ratio q = {q:.4}, dt = {dt}, admissible dt = {:.4}", admissible_dt(&grid, &arc, &v, &g));
    let s0 = k.stats(1, mu, we);
    println!("K0 range [{}, {}], C0 = {:.4}", s0.min, s0.max, s0.envelope_constant);
    println!("{:>5} {:>12} {:>12} {:>12} {:>12}", "step", "min K", "max K", "min m", "max dm/dT");
    // monitors cover ages still governed by K0: j > n, so stop before n reaches n_t
    for n in 1..=90 {
        step_kernel(&mut k, &v, &g, dt, we).unwrap();
        if n % 15 == 0 {
            let s = k.stats(n + 1, mu, we);
            println!("{n:>5} {:>12.3e} {:>12.9} {:>12.3e} {:>12.3e}", s.min, s.max, s.min_memory, s.max_age_increase);
        }
    }
}
