//! Samples the Landau surface of the pole and triangle diagrams and re-solves
//! every sample.

use correspondence::fixtures::{pole_diagram, triangle_diagram};
use correspondence::landau::{channel_momentum, sample_surface, solve_landau, SolverOptions};

fn main() {
    let opts = SolverOptions::default();
    for (name, d) in [("pole", pole_diagram(1.0, 1.5)), ("triangle", triangle_diagram())] {
        let s = sample_surface(&d, 25, 1).unwrap();
        let ok = s.samples.iter().filter(|k| solve_landau(&d, k, &opts).unwrap().feasible).count();
        println!("{name}: {} samples in {} attempts, {ok} re-solved feasible", s.samples.len(), s.attempts);
        if name == "pole" {
            let worst = s
                .samples
                .iter()
                .map(|k| (channel_momentum(&d, k, 0).lorentz_square() - 2.25).abs())
                .fold(0.0, f64::max);
            println!("  max |s - m_c^2| = {worst:.2e}");
        }
    }
}
