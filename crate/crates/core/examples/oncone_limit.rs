//! Scaled on-cone amplitude for the two candidate exponents.

use correspondence::fit::geometric_grid;
use correspondence::kinematics::FourVector;
use correspondence::wavepacket::{oncone_limit_check, MomentumWavePacket};

fn main() {
    let p = MomentumWavePacket::at_rest(1.0, 0.8, 3.0, 0.0);
    let v = FourVector::new(1.0, 0.0, 0.0, 0.0);
    let taus = geometric_grid(20.0, 200.0, 8);
    for e in [1.5, 2.0 / 3.0] {
        let r = oncone_limit_check(&p, v, &taus, e).unwrap();
        println!("exponent {e:.4}: converged {} (final error {:.3})", r.converged, r.final_error);
        for (t, err) in r.taus.iter().zip(&r.errors) {
            println!("  tau {t:>7.2}  error {err:.4}");
        }
    }
}
