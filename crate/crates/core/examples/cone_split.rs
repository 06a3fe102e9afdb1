//! Cone-of-analyticity split for a pole model: the hole part converges only
//! from the upper half plane, and the boundary value reproduces +iε.

use correspondence::transform::{boundary_value, cone_split, ConeOptions, HoleSpec, ScatteringModel};
use num_complex::Complex64 as C;

fn main() {
    let m = ScatteringModel::pole(0.3, 0.05);
    let t = |v: &[f64]| m.closed_form_t0(v).unwrap();
    let hole = HoleSpec { center: vec![1.0], theta: 0.3 };
    let o = ConeOptions { bandwidth: 2.0, ..Default::default() };
    for im in [0.2, -0.2] {
        let s = cone_split(&t, 1, &hole, &[C::new(0.1, im)], &o).unwrap();
        println!("Im q = {im}: convergent {}, F_H = {:?}, damping {:.3}", s.convergent, s.f_h, s.damping);
    }
    for q in [0.0, 0.3, 0.5] {
        let b = boundary_value(&t, 1, &hole, &[q], 1e-5, &o).unwrap();
        println!("q = {q}: boundary value {b:.6}, model {:.6}", m.eval(&[q]));
    }
}
