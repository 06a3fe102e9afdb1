//! Contour-shift certificates against measured decay rates.

use correspondence::fit::geometric_grid;
use correspondence::kinematics::FourVector;
use correspondence::wavepacket::{contour_certificate, falloff_fit, MomentumWavePacket};

fn main() {
    let taus = geometric_grid(10.0, 150.0, 16);
    let p = MomentumWavePacket::at_rest(1.0, 0.8, 3.0, 0.1);
    for ux in [0.0, 0.3, 0.5, 1.0] {
        for alpha in [0.05, 0.5, 0.7] {
            let u = FourVector::new(1.0, ux, 0.0, 0.0);
            match contour_certificate(&p, u, alpha) {
                Ok(c) => {
                    let measured = falloff_fit(&p, u, &taus, p.gamma).unwrap().fit.rate();
                    println!("u_x {ux} alpha {alpha}: bound {:.4}, measured {measured:.4}, shift {:.3}", c.rate, c.max_shift);
                }
                Err(e) => println!("u_x {ux} alpha {alpha}: {e}"),
            }
        }
    }
}
