//! Sweep `S(G)` over random deformations and print the largest norm, trace
//! and asymmetry next to the a-priori bound, then `|G||S'(G)|` along rays.

use polymelt::orientation::{s_bound, s_of_g, s_prime, SphereQuadrature};
use polymelt::tensor::Tensor2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let quad = SphereQuadrature::<2>::circle(64);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut s_max, mut tr, mut asym) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..10_000 {
        let g = Tensor2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let g = g * (10f64.powf(rng.gen_range(-2.0..2.0)) / g.frobenius());
        let s = s_of_g(&g, &quad).unwrap();
        s_max = s_max.max(s.frobenius());
        tr = tr.max(s.trace().abs());
        asym = asym.max(s.asymmetry());
    }
    println!("max |S| = {s_max:.10}  bound {:.10}", s_bound(2));
    println!("max |tr S| = {tr:.2e}, max asymmetry = {asym:.2e}");

    let g0 = Tensor2::new(1.0, 3.0, 0.0, 1.0);
    println!("\n{:>10} {:>14}", "|G|", "|G||S'(G)|");
    for i in -2..=2 {
        let g = g0 * (10f64.powi(i) / g0.frobenius());
        let d = s_prime(&g, &quad).unwrap();
        println!("{:>10.2e} {:>14.10}", g.frobenius(), g.frobenius() * d.frobenius());
    }
}
