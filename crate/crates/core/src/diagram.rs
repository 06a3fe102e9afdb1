//! Scattering-diagram topology, external momentum configurations and their
//! JSON persistence.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::FourVector;

pub type VertexId = u32;

/// Default mass-shell tolerance, natural units.
pub const TOL_SHELL: f64 = 1e-9;
/// Default momentum-conservation tolerance, natural units.
pub const TOL_CONS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DiagramError {
    #[error("missing mass on {0}")]
    MissingMass(String),
    #[error("non-positive mass {mass} on {what}")]
    NonPositiveMass { what: String, mass: f64 },
    #[error("invalid diagram document: {0}")]
    Parse(String),
    #[error("diagram is disconnected")]
    Disconnected,
    #[error("missing internal momentum: expected {expected} assignments, got {got}")]
    MissingInternalMomentum { expected: usize, got: usize },
    #[error("external configuration has {got} momenta, diagram has {expected} external lines")]
    ExternalCountMismatch { expected: usize, got: usize },
    #[error("external line {index} off shell: |k² − m²| = {deviation:e}")]
    OffShell { index: usize, deviation: f64 },
    #[error("external line {index} has the wrong energy sign for its orientation")]
    WrongEnergySign { index: usize },
    #[error("total momentum not conserved: |Σk| = {0:e}")]
    NotConserved(f64),
    #[error("invalid diagram: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSpec {
    pub mass: f64,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Initial,
    Final,
}

/// An internal line; momentum flows `from → to` with positive energy.
#[derive(Clone, Debug, PartialEq)]
pub struct InternalLine {
    pub from: VertexId,
    pub to: VertexId,
    pub particle: ParticleSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExternalLine {
    pub vertex: VertexId,
    pub particle: ParticleSpec,
    pub orientation: Orientation,
}

/// Topology of a scattering diagram. Counts (lines, vertices, loops) are
/// always derived, never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagram {
    pub vertices: Vec<VertexId>,
    pub internal: Vec<InternalLine>,
    pub external: Vec<ExternalLine>,
    /// Test fixtures may carry vertices of degree < 2.
    pub allow_leaves: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoVertices,
    Disconnected,
    DuplicateVertex { vertex: VertexId },
    UnknownVertex { line: String, vertex: VertexId },
    LowDegree { vertex: VertexId, degree: usize },
    NonPositiveMass { line: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoVertices => write!(f, "no vertices"),
            Violation::Disconnected => write!(f, "disconnected"),
            Violation::DuplicateVertex { vertex } => write!(f, "duplicate vertex {vertex}"),
            Violation::UnknownVertex { line, vertex } => {
                write!(f, "{line} references unknown vertex {vertex}")
            }
            Violation::LowDegree { vertex, degree } => {
                write!(f, "vertex {vertex} has degree {degree} < 2")
            }
            Violation::NonPositiveMass { line } => write!(f, "non-positive mass on {line}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub internal_lines: usize,
    pub vertices: usize,
    pub external_lines: usize,
    /// First Betti number; only meaningful for connected diagrams.
    pub loops: Option<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Diagram {
    pub fn n_internal(&self) -> usize {
        self.internal.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_external(&self) -> usize {
        self.external.len()
    }

    /// Position of a vertex id in `vertices`.
    pub fn vertex_index(&self, id: VertexId) -> Option<usize> {
        self.vertices.iter().position(|&v| v == id)
    }

    pub(crate) fn index_map(&self) -> BTreeMap<VertexId, usize> {
        self.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect()
    }

    /// Number of line ends (internal and external) at each vertex, in
    /// `vertices` order.
    pub fn degrees(&self) -> Vec<usize> {
        let idx = self.index_map();
        let mut deg = vec![0usize; self.vertices.len()];
        for l in &self.internal {
            if let Some(&i) = idx.get(&l.from) {
                deg[i] += 1;
            }
            if let Some(&j) = idx.get(&l.to) {
                deg[j] += 1;
            }
        }
        for e in &self.external {
            if let Some(&i) = idx.get(&e.vertex) {
                deg[i] += 1;
            }
        }
        deg
    }

    fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        let idx = self.index_map();
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for l in &self.internal {
            if let (Some(&a), Some(&b)) = (idx.get(&l.from), idx.get(&l.to)) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Lines attached to `vertex`, split by direction: (incoming, outgoing)
    /// internal line indices and external line indices.
    pub fn incidence(&self, vertex: VertexId) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let incoming = (0..self.internal.len()).filter(|&l| self.internal[l].to == vertex).collect();
        let outgoing = (0..self.internal.len()).filter(|&l| self.internal[l].from == vertex).collect();
        let ext = (0..self.external.len()).filter(|&e| self.external[e].vertex == vertex).collect();
        (incoming, outgoing, ext)
    }
}

pub fn validate_diagram(d: &Diagram) -> ValidationReport {
    let mut violations = Vec::new();
    if d.vertices.is_empty() {
        violations.push(Violation::NoVertices);
    }
    let mut seen = BTreeSet::new();
    for &v in &d.vertices {
        if !seen.insert(v) {
            violations.push(Violation::DuplicateVertex { vertex: v });
        }
    }
    for (i, l) in d.internal.iter().enumerate() {
        let name = format!("internal line {i} ({})", l.particle.label);
        for v in [l.from, l.to] {
            if !seen.contains(&v) {
                violations.push(Violation::UnknownVertex { line: name.clone(), vertex: v });
            }
        }
        if !(l.particle.mass > 0.0) {
            violations.push(Violation::NonPositiveMass { line: name });
        }
    }
    for (i, e) in d.external.iter().enumerate() {
        let name = format!("external line {i} ({})", e.particle.label);
        if !seen.contains(&e.vertex) {
            violations.push(Violation::UnknownVertex { line: name.clone(), vertex: e.vertex });
        }
        if !(e.particle.mass > 0.0) {
            violations.push(Violation::NonPositiveMass { line: name });
        }
    }
    let connected = !d.vertices.is_empty() && d.is_connected();
    if !d.vertices.is_empty() && !connected {
        violations.push(Violation::Disconnected);
    }
    if !d.allow_leaves {
        for (&v, deg) in d.vertices.iter().zip(d.degrees()) {
            if deg < 2 {
                violations.push(Violation::LowDegree { vertex: v, degree: deg });
            }
        }
    }
    ValidationReport {
        violations,
        internal_lines: d.n_internal(),
        vertices: d.n_vertices(),
        external_lines: d.n_external(),
        loops: connected.then(|| d.n_internal() + 1 - d.n_vertices()),
    }
}

/// Number of independent internal cycles, `N_l − N_v + 1`.
pub fn loop_count(d: &Diagram) -> Result<usize, DiagramError> {
    if d.vertices.is_empty() || !d.is_connected() {
        return Err(DiagramError::Disconnected);
    }
    Ok(d.n_internal() + 1 - d.n_vertices())
}

/// External momenta `k_i` (mathematical convention: `k = p` for initial,
/// `k = −p` for final lines), ordered as the diagram's external list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KConfiguration {
    pub momenta: Vec<FourVector>,
}

impl KConfiguration {
    pub fn new(momenta: Vec<FourVector>) -> Self {
        Self { momenta }
    }

    pub fn len(&self) -> usize {
        self.momenta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.momenta.is_empty()
    }

    pub fn total(&self) -> FourVector {
        self.momenta.iter().copied().sum()
    }

    /// Checks mass shell, energy sign and overall conservation against the
    /// diagram's external lines.
    pub fn check(&self, d: &Diagram, tol_shell: f64, tol_cons: f64) -> Result<(), DiagramError> {
        if self.momenta.len() != d.n_external() {
            return Err(DiagramError::ExternalCountMismatch {
                expected: d.n_external(),
                got: self.momenta.len(),
            });
        }
        for (i, (k, e)) in self.momenta.iter().zip(&d.external).enumerate() {
            let m = e.particle.mass;
            let deviation = (k.lorentz_square() - m * m).abs();
            if !(deviation <= tol_shell) {
                return Err(DiagramError::OffShell { index: i, deviation });
            }
            let ok = match e.orientation {
                Orientation::Initial => k.t > 0.0,
                Orientation::Final => k.t < 0.0,
            };
            if !ok {
                return Err(DiagramError::WrongEnergySign { index: i });
            }
        }
        let total = self.total().euclidean_norm();
        if !(total <= tol_cons) {
            return Err(DiagramError::NotConserved(total));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite momenta serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, DiagramError> {
        serde_json::from_str(s).map_err(|e| DiagramError::Parse(e.to_string()))
    }
}

/// Per-vertex sum of incoming minus outgoing momentum, in `vertices` order.
///
/// External lines contribute `+k_i` (for both orientations, given the
/// mathematical sign convention); internal line `l` contributes `+q_l` at its
/// `to` vertex and `−q_l` at its `from` vertex.
pub fn conservation_residual(
    d: &Diagram,
    k: &KConfiguration,
    q: &[FourVector],
) -> Result<Vec<FourVector>, DiagramError> {
    if q.len() != d.n_internal() {
        return Err(DiagramError::MissingInternalMomentum { expected: d.n_internal(), got: q.len() });
    }
    if k.len() != d.n_external() {
        return Err(DiagramError::ExternalCountMismatch { expected: d.n_external(), got: k.len() });
    }
    let idx = d.index_map();
    let mut res = vec![FourVector::ZERO; d.n_vertices()];
    for (e, km) in d.external.iter().zip(&k.momenta) {
        let i = lookup(&idx, e.vertex)?;
        res[i] += *km;
    }
    for (l, qm) in d.internal.iter().zip(q) {
        res[lookup(&idx, l.to)?] += *qm;
        res[lookup(&idx, l.from)?] -= *qm;
    }
    Ok(res)
}

fn lookup(idx: &BTreeMap<VertexId, usize>, v: VertexId) -> Result<usize, DiagramError> {
    idx.get(&v).copied().ok_or_else(|| DiagramError::Invalid(format!("unknown vertex {v}")))
}

// JSON document shapes. Masses are optional here so that a missing mass gets
// its own error instead of serde's generic one.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagramDoc {
    vertices: Vec<VertexId>,
    #[serde(default)]
    internal: Vec<InternalDoc>,
    #[serde(default)]
    external: Vec<ExternalDoc>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_leaves: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InternalDoc {
    from: VertexId,
    to: VertexId,
    mass: Option<f64>,
    #[serde(default)]
    label: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExternalDoc {
    vertex: VertexId,
    mass: Option<f64>,
    #[serde(default)]
    label: String,
    orientation: Orientation,
}

fn checked_particle(mass: Option<f64>, label: String, what: String) -> Result<ParticleSpec, DiagramError> {
    match mass {
        None => Err(DiagramError::MissingMass(what)),
        Some(m) if !(m > 0.0) || !m.is_finite() => Err(DiagramError::NonPositiveMass { what, mass: m }),
        Some(m) => Ok(ParticleSpec { mass: m, label }),
    }
}

pub fn save_diagram(d: &Diagram) -> Vec<u8> {
    let doc = DiagramDoc {
        vertices: d.vertices.clone(),
        internal: d
            .internal
            .iter()
            .map(|l| InternalDoc {
                from: l.from,
                to: l.to,
                mass: Some(l.particle.mass),
                label: l.particle.label.clone(),
            })
            .collect(),
        external: d
            .external
            .iter()
            .map(|e| ExternalDoc {
                vertex: e.vertex,
                mass: Some(e.particle.mass),
                label: e.particle.label.clone(),
                orientation: e.orientation,
            })
            .collect(),
        allow_leaves: d.allow_leaves,
    };
    serde_json::to_vec(&doc).expect("diagram serializes")
}

pub fn load_diagram(bytes: &[u8]) -> Result<Diagram, DiagramError> {
    let doc: DiagramDoc = serde_json::from_slice(bytes).map_err(|e| DiagramError::Parse(e.to_string()))?;
    let internal = doc
        .internal
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            Ok(InternalLine {
                from: l.from,
                to: l.to,
                particle: checked_particle(l.mass, l.label, format!("internal line {i}"))?,
            })
        })
        .collect::<Result<Vec<_>, DiagramError>>()?;
    let external = doc
        .external
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            Ok(ExternalLine {
                vertex: e.vertex,
                particle: checked_particle(e.mass, e.label, format!("external line {i}"))?,
                orientation: e.orientation,
            })
        })
        .collect::<Result<Vec<_>, DiagramError>>()?;
    Ok(Diagram { vertices: doc.vertices, internal, external, allow_leaves: doc.allow_leaves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn smallest_legal_diagram() {
        let d = fixtures::single_vertex(&[1.0, 1.0], &[1.0, 1.0]);
        let r = validate_diagram(&d);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!((r.internal_lines, r.vertices, r.external_lines), (0, 1, 4));
        assert_eq!(r.loops, Some(0));
    }

    #[test]
    fn unreachable_vertex_is_disconnected() {
        let mut d = fixtures::pole_diagram(1.0, 1.5);
        d.vertices.push(9);
        d.external.push(ExternalLine {
            vertex: 9,
            particle: ParticleSpec { mass: 1.0, label: "x".into() },
            orientation: Orientation::Initial,
        });
        d.external.push(ExternalLine {
            vertex: 9,
            particle: ParticleSpec { mass: 1.0, label: "y".into() },
            orientation: Orientation::Final,
        });
        let r = validate_diagram(&d);
        assert!(!r.is_valid());
        assert!(r.violations.iter().any(|v| v.to_string() == "disconnected"));
        assert_eq!(loop_count(&d), Err(DiagramError::Disconnected));
    }

    #[test]
    fn triangle_fixture_counts() {
        let d = fixtures::triangle_diagram();
        let r = validate_diagram(&d);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!((r.internal_lines, r.vertices, r.external_lines), (3, 3, 6));
    }

    #[test]
    fn loop_counts_of_fixtures() {
        assert_eq!(loop_count(&fixtures::pole_diagram(1.0, 1.5)).unwrap(), 0);
        assert_eq!(loop_count(&fixtures::triangle_diagram()).unwrap(), 1);
        assert_eq!(loop_count(&fixtures::threshold_diagram()).unwrap(), 1);
    }

    #[test]
    fn low_degree_vertex_flagged_unless_fixture() {
        let mut d = fixtures::pole_diagram(1.0, 1.5);
        d.vertices.push(5);
        d.internal.push(InternalLine {
            from: 1,
            to: 5,
            particle: ParticleSpec { mass: 1.0, label: "leaf".into() },
        });
        let r = validate_diagram(&d);
        assert!(r.violations.contains(&Violation::LowDegree { vertex: 5, degree: 1 }));
        d.allow_leaves = true;
        assert!(validate_diagram(&d).is_valid());
    }

    #[test]
    fn residual_zero_on_single_vertex() {
        let d = fixtures::single_vertex(&[1.0, 1.0], &[1.0, 1.0]);
        let k = fixtures::elastic_two_to_two(1.0, 0.8, 0.7);
        let r = conservation_residual(&d, &k, &[]).unwrap();
        assert!(r[0].euclidean_norm() < 1e-14);
    }

    #[test]
    fn pole_residual_with_channel_momentum() {
        let d = fixtures::pole_diagram(1.0, 1.5);
        let k = fixtures::pole_kinematics(1.0, 1.5, 42);
        // oracle: q is the plain component sum of the first vertex's externals
        let (_, _, ext) = d.incidence(0);
        let mut q = [0.0; 4];
        for e in ext {
            for mu in 0..4 {
                q[mu] += k.momenta[e][mu];
            }
        }
        let r = conservation_residual(&d, &k, &[FourVector::from(q)]).unwrap();
        assert!(r.iter().all(|v| v.euclidean_norm() < 1e-12), "{r:?}");
    }

    #[test]
    fn perturbed_energy_shows_up_at_its_vertex() {
        let d = fixtures::pole_diagram(1.0, 1.5);
        let mut k = fixtures::pole_kinematics(1.0, 1.5, 3);
        let q = crate::landau::channel_momentum(&d, &k, 0);
        let delta = 1e-3;
        let target = d.external.iter().position(|e| e.vertex == 1).unwrap();
        k.momenta[target].t += delta;
        let r = conservation_residual(&d, &k, &[q]).unwrap();
        assert!(r[0].euclidean_norm() < 1e-12);
        assert!((r[1].euclidean_norm() - delta).abs() < 1e-12);
    }

    #[test]
    fn missing_internal_assignment_is_an_error() {
        let d = fixtures::pole_diagram(1.0, 1.5);
        let k = fixtures::pole_kinematics(1.0, 1.5, 1);
        assert!(matches!(
            conservation_residual(&d, &k, &[]),
            Err(DiagramError::MissingInternalMomentum { expected: 1, got: 0 })
        ));
    }

    #[test]
    fn triangle_round_trip() {
        let d = fixtures::triangle_diagram();
        let bytes = save_diagram(&d);
        let back = load_diagram(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(save_diagram(&back), bytes);
    }

    #[test]
    fn missing_mass_is_reported() {
        let doc = br#"{"vertices":[0],"external":[{"vertex":0,"label":"a","orientation":"initial"}]}"#;
        let err = load_diagram(doc).unwrap_err();
        assert!(err.to_string().contains("missing mass"), "{err}");
    }

    #[test]
    fn zero_mass_is_rejected() {
        let doc = br#"{"vertices":[0],"external":[{"vertex":0,"mass":0,"label":"a","orientation":"initial"}]}"#;
        let err = load_diagram(doc).unwrap_err();
        assert!(err.to_string().contains("non-positive mass"), "{err}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let doc = br#"{"vertices":[0],"colour":"red"}"#;
        let err = load_diagram(doc).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
    }

    #[test]
    fn k_configuration_checks() {
        let d = fixtures::pole_diagram(1.0, 1.5);
        let k = fixtures::pole_kinematics(1.0, 1.5, 11);
        k.check(&d, TOL_SHELL, TOL_CONS).unwrap();
        let mut bad = k.clone();
        bad.momenta[0].x += 1e-3;
        assert!(bad.check(&d, TOL_SHELL, TOL_CONS).is_err());
        let json = k.to_json();
        assert!(json.starts_with("{\"momenta\":[["));
        assert_eq!(KConfiguration::from_json(&json).unwrap(), k);
    }
}
