//! `S'(G)[H]` against central differences of `S`, and the truncated map's
//! derivative near the norm floor.

use polymelt::orientation::{s_of_g, s_prime, s_truncated, s_truncated_prime, SphereQuadrature, TruncationProfile};
use polymelt::tensor::{DoubleDot, Tensor2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let quad = SphereQuadrature::<2>::circle(64);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rand_t = || Tensor2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let h = 1e-5;
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let g = rand_t() + Tensor2::identity();
        let dir = rand_t();
        let exact = dir.double_dot(&s_prime(&g, &quad).unwrap());
        let fd = (s_of_g(&(g + dir * h), &quad).unwrap() - s_of_g(&(g - dir * h), &quad).unwrap()) * (0.5 / h);
        worst = worst.max((fd - exact).frobenius() / exact.frobenius());
    }
    println!("S': max relative error vs central differences = {worst:.3e}");

    let profile = TruncationProfile::from_det_floor(1.0).unwrap();
    println!("truncated map, gamma~ = {:.6}", profile.gamma_tilde());
    for r in [0.5, 1.0, 1.2, 1.4, 2.0] {
        let g = Tensor2::new(1.0, 0.7, 0.2, 0.9);
        let g = g * (r * profile.gamma_tilde() / g.frobenius());
        let dir = Tensor2::new(0.3, -0.1, 0.4, 0.2);
        let exact = dir.double_dot(&s_truncated_prime(&g, &profile, &quad));
        let fd = (s_truncated(&(g + dir * h), &profile, &quad) - s_truncated(&(g - dir * h), &profile, &quad))
            * (0.5 / h);
        println!("  |G|/gamma~ = {r:.1}: |F~'[H]| = {:.6e}, fd error {:.2e}", exact.frobenius(), (fd - exact).frobenius());
    }
}
