//! Classical region probabilities against the quantum fall-off, on the cone
//! and off the packet momentum.

use correspondence::classical::{correspondence_compare, region_probability, AxisProfile, PhaseSpaceDensity, COMPARISON_TOL};
use correspondence::fit::{fit_falloff_with_errors, geometric_grid, FitOptions};
use correspondence::kinematics::FourVector;
use correspondence::wavepacket::{falloff_fit, MomentumWavePacket};

fn main() {
    let taus = geometric_grid(10.0, 150.0, 12);
    for (gamma, ux) in [(0.0, 0.0), (0.1, 0.3)] {
        let p = MomentumWavePacket::at_rest(1.0, 0.8, 3.0, gamma);
        let quantum = falloff_fit(&p, FourVector::new(1.0, ux, 0.0, 0.0), &taus, gamma).unwrap();
        let est: Vec<_> = taus
            .iter()
            .map(|&t| {
                let rho = PhaseSpaceDensity::from_packet(&p, t, [AxisProfile::Gaussian { sigma: 1.0 }; 3]);
                region_probability(&rho, [ux * t, 0.0, 0.0], 1.0, t, 20_000, 1).unwrap()
            })
            .collect();
        let probs: Vec<f64> = est.iter().map(|e| e.probability).collect();
        let errs: Vec<f64> = est.iter().map(|e| e.statistical_error).collect();
        let classical = fit_falloff_with_errors(&taus, &probs, Some(&errs), gamma, &FitOptions::default()).unwrap();
        let cmp = correspondence_compare(&classical, &quantum.fit, COMPARISON_TOL).unwrap();
        println!("gamma {gamma}, u_x {ux}: {}", serde_json::to_string(&cmp).unwrap());
    }
}
