//! Degree of singularity and local model for small line/vertex counts,
//! plus the itemized accounting for the fixture diagrams.

use correspondence::degree::{degree, degree_accounting, fmt_ratio, local_model};
use correspondence::fixtures::{pole_diagram, threshold_diagram, triangle_diagram};

fn main() {
    println!("{:>3} {:>3} {:>6}  model", "Nl", "Nv", "d");
    for (nl, nv) in [(1, 2), (2, 2), (3, 3), (2, 1), (4, 3), (5, 4)] {
        let d = degree(nl, nv);
        let m = serde_json::to_string(&local_model(&d)).unwrap();
        println!("{nl:>3} {nv:>3} {:>6}  {m}", fmt_ratio(&d.d));
    }
    for (name, d) in [("pole", pole_diagram(1.0, 1.5)), ("threshold", threshold_diagram()), ("triangle", triangle_diagram())] {
        let r = degree_accounting(&d);
        println!("\n{name}: total {}", fmt_ratio(&r.total));
        for row in &r.rows {
            println!("  {:<28} {:>2} x {:>4} = {}", row.item, row.count, fmt_ratio(&row.per_unit), fmt_ratio(&row.contribution));
        }
        for w in &r.warnings {
            println!("  warning: {w}");
        }
    }
}
