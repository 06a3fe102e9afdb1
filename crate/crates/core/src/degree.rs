//! Degree of a Landau singularity from the diagram's line and vertex counts,
//! and the local forms `i/(E+iε)`, `log`, `sqrt` and general powers.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Serialize, Serializer};

use crate::diagram::Diagram;

pub const DEFAULT_EPSILON: f64 = 1e-6;

fn ser_ratio<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_ratio(r))
}

pub fn fmt_ratio(r: &Rational64) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SingularityDegree {
    #[serde(serialize_with = "ser_ratio")]
    pub d: Rational64,
    pub n_lines: u32,
    pub n_vertices: u32,
}

/// `d = ½(3N_l − 4N_v + 3)`, exact.
pub fn degree(n_lines: u32, n_vertices: u32) -> SingularityDegree {
    assert!(n_vertices >= 1, "a diagram has at least one vertex");
    let d = Rational64::new(3 * n_lines as i64 - 4 * n_vertices as i64 + 3, 2);
    SingularityDegree { d, n_lines, n_vertices }
}

/// `2d = 3N_l − 4(N_v − 1) − 1`, the counting form.
pub fn twice_degree(n_lines: u32, n_vertices: u32) -> i64 {
    3 * n_lines as i64 - 4 * (n_vertices as i64 - 1) - 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "d", rename_all = "snake_case")]
pub enum ModelKind {
    Pole,
    Log,
    Sqrt,
    Power(#[serde(serialize_with = "ser_ratio")] Rational64),
}

/// Local behaviour near the surface in the variable `E = p² − m²`,
/// continued from the upper half plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalModel {
    #[serde(flatten)]
    pub kind: ModelKind,
}

pub fn local_model(deg: &SingularityDegree) -> LocalModel {
    let d = deg.d;
    let kind = if d == Rational64::from_integer(-1) {
        ModelKind::Pole
    } else if d == Rational64::from_integer(0) {
        ModelKind::Log
    } else if d == Rational64::new(1, 2) {
        ModelKind::Sqrt
    } else {
        ModelKind::Power(d)
    };
    LocalModel { kind }
}

impl LocalModel {
    pub fn evaluate(&self, e: f64, epsilon: f64) -> Complex64 {
        let z = Complex64::new(e, epsilon);
        match self.kind {
            ModelKind::Pole => Complex64::i() / z,
            ModelKind::Log => z.ln(),
            ModelKind::Sqrt => z.sqrt(),
            ModelKind::Power(d) => z.powf(*d.numer() as f64 / *d.denom() as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerRow {
    pub item: &'static str,
    pub count: i64,
    #[serde(serialize_with = "ser_ratio")]
    pub per_unit: Rational64,
    #[serde(serialize_with = "ser_ratio")]
    pub contribution: Rational64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccountingReport {
    pub rows: Vec<LedgerRow>,
    #[serde(serialize_with = "ser_ratio")]
    pub total: Rational64,
    pub model: LocalModel,
    /// Conditions under which the counting is known to hold and that this
    /// diagram violates. Reported only.
    pub warnings: Vec<String>,
}

/// Itemized count: `+3/2` per internal line from the `τ^{-3}` spreading of
/// each intermediate particle, `−2` per vertex beyond the first from the
/// four conservation constraints it removes, and the constant `−1/2` that
/// makes the single-exchange case a pole.
pub fn degree_accounting(d: &Diagram) -> AccountingReport {
    let nl = d.n_internal() as i64;
    let nv = d.n_vertices() as i64;
    let row = |item, count, per_unit: Rational64| LedgerRow {
        item,
        count,
        per_unit,
        contribution: per_unit * Rational64::from_integer(count),
    };
    let rows = vec![
        row("internal lines", nl, Rational64::new(3, 2)),
        row("vertices beyond the first", nv - 1, Rational64::from_integer(-2)),
        row("constant", 1, Rational64::new(-1, 2)),
    ];
    let total = rows.iter().map(|r| r.contribution).sum();
    let deg = degree(nl as u32, nv.max(1) as u32);
    debug_assert_eq!(total, deg.d);

    let mut warnings = Vec::new();
    let mut pairs: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for l in &d.internal {
        *pairs.entry((l.from.min(l.to), l.from.max(l.to))).or_default() += 1;
    }
    for ((a, b), c) in pairs {
        if c > 2 {
            warnings.push(format!("{c} lines connect vertices {a} and {b}"));
        }
    }
    for (&v, deg) in d.vertices.iter().zip(d.degrees()) {
        if deg <= 2 {
            warnings.push(format!("vertex {v} is trivial (degree {deg})"));
        }
    }
    for l in &d.internal {
        if l.from == l.to {
            warnings.push(format!("line at vertex {} is a self-loop", l.from));
        }
    }
    AccountingReport { rows, total, model: local_model(&deg), warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;

    #[test]
    fn named_cases() {
        assert_eq!(degree(1, 2).d, Rational64::from_integer(-1));
        assert_eq!(degree(3, 3).d, Rational64::from_integer(0));
        assert_eq!(degree(2, 2).d, Rational64::new(1, 2));
    }

    #[test]
    fn both_forms_agree() {
        for nl in 0..=10 {
            for nv in 1..=10 {
                assert_eq!(degree(nl, nv).d * 2, Rational64::from_integer(twice_degree(nl, nv)));
            }
        }
    }

    #[test]
    fn model_kinds() {
        assert_eq!(local_model(&degree(1, 2)).kind, ModelKind::Pole);
        assert_eq!(local_model(&degree(3, 3)).kind, ModelKind::Log);
        assert_eq!(local_model(&degree(2, 2)).kind, ModelKind::Sqrt);
        assert_eq!(local_model(&degree(4, 3)).kind, ModelKind::Power(Rational64::new(3, 2)));
    }

    #[test]
    fn pole_evaluator() {
        let v = local_model(&degree(1, 2)).evaluate(1.0, 1e-6);
        assert!((v - Complex64::i()).norm() < 1e-5);
        // O(ε) approach to i/E
        let e = -0.7;
        let err1 = (local_model(&degree(1, 2)).evaluate(e, 1e-3) - Complex64::i() / e).norm();
        let err2 = (local_model(&degree(1, 2)).evaluate(e, 1e-4) - Complex64::i() / e).norm();
        assert!((err1 / err2 - 10.0).abs() < 0.1);
    }

    #[test]
    fn log_branch_cut() {
        let m = local_model(&degree(3, 3));
        let a = m.evaluate(0.8, 1e-4);
        let b = m.evaluate(0.8, 1e-6);
        assert!((a - b).norm() < 1e-3);
        let above = m.evaluate(-0.8, 1e-6);
        let below = m.evaluate(-0.8, -1e-6);
        let jump = above - below;
        assert!((jump - Complex64::new(0.0, 2.0 * std::f64::consts::PI)).norm() < 1e-5);
        assert!((m.evaluate(-0.8, 1e-4) - above).norm() < 1e-3);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = local_model(&degree(2, 2));
        for e in [-2.0, -0.1, 0.3, 5.0] {
            let z = m.evaluate(e, 1e-6);
            assert!((z * z - Complex64::new(e, 1e-6)).norm() < 1e-12);
            assert!(z.im >= 0.0);
        }
    }

    #[test]
    fn accounting_matches_formula() {
        let pole = degree_accounting(&pole_diagram(1.0, 1.5));
        assert_eq!(pole.total, Rational64::from_integer(-1));
        assert_eq!(pole.rows[0].contribution, Rational64::new(3, 2));
        assert_eq!(pole.rows[1].contribution, Rational64::from_integer(-2));
        assert_eq!(pole.rows[2].contribution, Rational64::new(-1, 2));
        assert_eq!(degree_accounting(&triangle_diagram()).total, Rational64::from_integer(0));
        assert_eq!(degree_accounting(&threshold_diagram()).total, Rational64::new(1, 2));
        assert!(degree_accounting(&triangle_diagram()).warnings.is_empty());
    }

    #[test]
    fn report_serializes_rationals_as_strings() {
        let json = serde_json::to_string(&degree_accounting(&threshold_diagram())).unwrap();
        assert!(json.contains("\"total\":\"1/2\""), "{json}");
        assert!(json.contains("\"kind\":\"sqrt\""), "{json}");
    }
}
