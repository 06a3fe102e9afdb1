//! The displacement of a pole realization is Lorentz-normal to the surface;
//! a generic direction is not.

use correspondence::displacement::{compute_u, gauge_basis, normality_check, surface_tangents, GaugeProjector, ReducedU};
use correspondence::fixtures::{pole_diagram, pole_kinematics};
use correspondence::landau::{solve_landau, SolverOptions};

fn main() {
    let d = pole_diagram(1.0, 1.5);
    let k = pole_kinematics(1.0, 1.5, 2);
    let r = solve_landau(&d, &k, &SolverOptions::default()).unwrap().realization.unwrap();
    let tangents = surface_tangents(&d, &k, &r, 20, 1).unwrap();
    let basis = gauge_basis(&k);
    let p = GaugeProjector::new(&basis).unwrap();
    let u = p.lift(&p.reduce(&compute_u(&r, &d)));
    println!("reduced dimension {}", p.reduced_dimension());
    println!("U:          {:.2e}", normality_check(&u, &tangents).unwrap());
    let g = basis.generators.iter().map(|g| normality_check(g, &tangents).unwrap()).fold(0.0, f64::max);
    println!("gauge:      {g:.2e}");
    let coords: Vec<f64> = (0..p.reduced_dimension()).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
    let other = p.lift(&ReducedU { coordinates: coords, fingerprint: String::new() });
    println!("arbitrary:  {:.2e}", normality_check(&other, &tangents).unwrap());
}
