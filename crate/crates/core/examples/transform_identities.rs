//! Round trip, Hefer factorization and the F1 + F2 split for a bump model.

use correspondence::transform::{hefer_factor, inverse_f, sample_t0, split_f, MuForm, ScatteringModel, TransformOptions};
use num_complex::Complex64 as C;

fn main() {
    let o = TransformOptions::default();
    let m = ScatteringModel::bump(1, 0.8, 1.8);
    let mu = MuForm::quadratic(&[1.0]);
    let tab = sample_t0(&m, &mu, &o).unwrap();
    let worst = (0..=40)
        .map(|i| -2.0 + 0.1 * i as f64)
        .map(|q| (inverse_f(&tab, &[q]).value - m.eval(&[q])).norm())
        .fold(0.0, f64::max);
    println!("table radius {}, {} nodes, edge ratio {:.1e}", tab.radius, tab.axis.len(), tab.edge_ratio);
    println!("round trip max error {worst:.2e}");

    let (q, q2) = ([C::new(0.3, 0.1)], [C::new(-0.7, 0.2)]);
    let rho = hefer_factor(&mu, &q, &q2);
    println!("hefer residual {:.1e}", (mu.eval(&q) - mu.eval(&q2) - rho[0] * (q[0] - q2[0])).norm());

    for z in [C::new(0.0, 0.0), C::new(0.2, 0.0), C::new(0.1, 0.05)] {
        let s = split_f(&m, &mu, 0.5, &[z], &o).unwrap();
        println!("q = {z}: F1 = {:.6}, F2 = {:.6}, sum = {:.12}", s.f1, s.f2, s.total());
    }
}
