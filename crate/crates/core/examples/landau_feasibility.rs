//! Classical realizability of the single-exchange diagram on and off its
//! pole surface.

use correspondence::fixtures::{pole_diagram, pole_kinematics_shifted};
use correspondence::landau::{solve_landau, SolverOptions};

fn main() {
    let d = pole_diagram(1.0, 1.5);
    let opts = SolverOptions::default();
    println!("{:>8} {:>14} {:>12}  alphas", "delta", "status", "residual");
    for delta in [-0.5, -0.05, 0.0, 0.05, 0.5] {
        let k = pole_kinematics_shifted(1.0, 1.5, delta, 3);
        let r = solve_landau(&d, &k, &opts).unwrap();
        let alphas = r.realization.map(|x| format!("{:.4?}", x.alphas)).unwrap_or_default();
        println!("{delta:>8} {:>14} {:>12.2e}  {alphas}", format!("{:?}", r.status), r.residual);
    }
}
