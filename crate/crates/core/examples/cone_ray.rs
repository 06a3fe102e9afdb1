//! Reduced direction of the classical displacement at a pole point; stable
//! across solver seeds and not realizable backward in time.

use correspondence::displacement::cone_ray;
use correspondence::fixtures::{pole_diagram, pole_kinematics};
use correspondence::landau::SolverOptions;

fn main() {
    let d = pole_diagram(1.0, 1.5);
    let k = pole_kinematics(1.0, 1.5, 5);
    let a = cone_ray(&d, &k, &SolverOptions { seed: 1, ..Default::default() }).unwrap();
    let b = cone_ray(&d, &k, &SolverOptions { seed: 2, ..Default::default() }).unwrap();
    let cos: f64 = a.direction.coordinates.iter().zip(&b.direction.coordinates).map(|(x, y)| x * y).sum();
    println!("direction {:.4?}", a.direction.coordinates);
    println!("alphas {:.4?}, reversed realizable: {}", a.alphas, a.reversed_realizable);
    println!("angle between seeds: {:.1e} rad", cos.clamp(-1.0, 1.0).acos());
}
