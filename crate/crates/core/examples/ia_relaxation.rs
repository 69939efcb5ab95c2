//! Independent-alignment memory: normalization, survival function and the
//! step-strain stress relaxation it implies.

use polymelt::memory_kernel::IaMemory;
use polymelt::oracle::ia_relaxation_modulus;
use polymelt::orientation::{s_ia, SphereQuadrature};
use polymelt::quad::integrate_to_infinity;
use polymelt::tensor::Tensor2;

fn main() {
    let ia = IaMemory::new(1999);
    let q = integrate_to_infinity(|t| ia.eval(t), 0.0, 1e-13, 1e-12).unwrap();
    println!("int_0^inf m = {:.14} ({} evaluations)", q.value, q.evaluations);
    // step shear of size kappa at t = 0: sigma_xy(t) = omega S_xy(G) G(t)
    let quad = SphereQuadrature::<2>::circle(64);
    let omega = 0.5;
    let kappa = 1.0;
    let s = s_ia(&Tensor2::new(1.0, kappa, 0.0, 1.0), &quad).unwrap();
    println!("{:>6} {:>14} {:>14} {:>14}", "t", "survival", "series", "sigma_xy");
    for i in 0..=10 {
        let t = 0.1 * i as f64;
        println!("{t:>6.2} {:>14.10} {:>14.10} {:>14.10}", ia.survival(t), ia_relaxation_modulus(t, 1999), omega * s.0[0][1] * ia.survival(t));
    }
}
