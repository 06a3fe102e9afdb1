//! Decay of |Ψ(uτ)| outside the velocity cone at γ = 0 and off the packet
//! momentum at γ > 0.

use correspondence::fit::geometric_grid;
use correspondence::kinematics::FourVector;
use correspondence::wavepacket::{falloff_fit, MomentumWavePacket};

fn main() {
    let p = MomentumWavePacket::at_rest(1.0, 0.8, 3.0, 0.0);
    let taus = geometric_grid(10.0, 150.0, 24);
    let run = falloff_fit(&p, FourVector::new(1.0, 1.5, 0.0, 0.0), &taus, 0.0).unwrap();
    println!("gamma 0, u = (1, 1.5, 0, 0): {:?}", run.fit.kind);
    for (t, k) in &run.fit.windowed {
        println!("  local exponent {k:6.2} by tau {t:.0}");
    }
    for g in [0.1, 0.2] {
        let run = falloff_fit(&p, FourVector::new(1.0, 0.3, 0.0, 0.0), &taus, g).unwrap();
        println!("gamma {g}, u = (1, 0.3, 0, 0): {:?}, rate {:.5}, alpha {:.4}", run.fit.kind, run.fit.rate(), run.fit.alpha.unwrap_or(f64::NAN));
    }
}
