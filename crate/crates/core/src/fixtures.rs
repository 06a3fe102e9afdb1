//! Reference diagrams and kinematics used by the examples and tests.
//!
//! External masses default to 1. Vertex ids count from 0 in topological
//! order of the internal lines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::diagram::{Diagram, ExternalLine, InternalLine, KConfiguration, Orientation, ParticleSpec};
use crate::kinematics::{random_unit3, two_body_split, FourVector};

fn particle(mass: f64, label: impl Into<String>) -> ParticleSpec {
    ParticleSpec { mass, label: label.into() }
}

fn ext(vertex: u32, mass: f64, label: &str, orientation: Orientation) -> ExternalLine {
    ExternalLine { vertex, particle: particle(mass, label), orientation }
}

fn int(from: u32, to: u32, mass: f64, label: &str) -> InternalLine {
    InternalLine { from, to, particle: particle(mass, label) }
}

/// One vertex, no internal lines.
pub fn single_vertex(initial: &[f64], fin: &[f64]) -> Diagram {
    let mut external = Vec::new();
    for (i, &m) in initial.iter().enumerate() {
        external.push(ext(0, m, &format!("in{i}"), Orientation::Initial));
    }
    for (i, &m) in fin.iter().enumerate() {
        external.push(ext(0, m, &format!("out{i}"), Orientation::Final));
    }
    Diagram { vertices: vec![0], internal: vec![], external, allow_leaves: false }
}

/// The 3→3 single-exchange process: `a + b → f1 + c*` at vertex 0, then
/// `c* + c → f2 + f3` at vertex 1.
///
/// External order is `a, b, f1, c, f2, f3`.
pub fn pole_diagram(m_ext: f64, m_c: f64) -> Diagram {
    use Orientation::*;
    Diagram {
        vertices: vec![0, 1],
        internal: vec![int(0, 1, m_c, "c*")],
        external: vec![
            ext(0, m_ext, "a", Initial),
            ext(0, m_ext, "b", Initial),
            ext(0, m_ext, "f1", Final),
            ext(1, m_ext, "c", Initial),
            ext(1, m_ext, "f2", Final),
            ext(1, m_ext, "f3", Final),
        ],
        allow_leaves: false,
    }
}

/// Triangle: lines 0→1, 1→2, 0→2, two external lines at every vertex.
pub fn triangle_diagram() -> Diagram {
    use Orientation::*;
    Diagram {
        vertices: vec![0, 1, 2],
        internal: vec![int(0, 1, 1.0, "l01"), int(1, 2, 1.0, "l12"), int(0, 2, 1.0, "l02")],
        external: vec![
            ext(0, 1.0, "a0", Initial),
            ext(0, 1.0, "b0", Initial),
            ext(1, 1.0, "a1", Initial),
            ext(1, 1.0, "b1", Final),
            ext(2, 1.0, "a2", Final),
            ext(2, 1.0, "b2", Final),
        ],
        allow_leaves: false,
    }
}

/// Two-particle threshold: two lines 0→1, two initial lines in, two final
/// lines out.
pub fn threshold_diagram() -> Diagram {
    use Orientation::*;
    Diagram {
        vertices: vec![0, 1],
        internal: vec![int(0, 1, 1.0, "l1"), int(0, 1, 1.2, "l2")],
        external: vec![
            ext(0, 1.0, "a", Initial),
            ext(0, 1.0, "b", Initial),
            ext(1, 1.0, "c", Final),
            ext(1, 1.0, "d", Final),
        ],
        allow_leaves: false,
    }
}

/// Elastic 2→2 in the centre-of-mass frame: momentum `p` along z in,
/// scattered by polar angle `theta` in the x–z plane.
pub fn elastic_two_to_two(mass: f64, p: f64, theta: f64) -> KConfiguration {
    let a = FourVector::on_shell(mass, [0.0, 0.0, p]);
    let b = FourVector::on_shell(mass, [0.0, 0.0, -p]);
    let dir = [theta.sin(), 0.0, theta.cos()];
    let c = FourVector::on_shell(mass, [p * dir[0], 0.0, p * dir[2]]);
    let d = FourVector::on_shell(mass, [-p * dir[0], 0.0, -p * dir[2]]);
    KConfiguration::new(vec![a, b, -c, -d])
}

/// External momenta for [`pole_diagram`] whose channel momentum
/// `k_a + k_b + k_f1` has invariant mass `channel_mass` and positive
/// energy. On the pole surface iff `channel_mass == m_c`.
pub fn pole_kinematics(m_ext: f64, channel_mass: f64, seed: u64) -> KConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = Normal::new(0.0, 0.4).unwrap();
    let draw3 = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        [spread.sample(rng), spread.sample(rng), spread.sample(rng)]
    };
    loop {
        let q = FourVector::on_shell(channel_mass, draw3(&mut rng));
        let pc = FourVector::on_shell(m_ext, draw3(&mut rng));
        let pf1 = FourVector::on_shell(m_ext, draw3(&mut rng));
        let Some((pf2, pf3)) = two_body_split(q + pc, m_ext, m_ext, random_unit3(&mut rng)) else {
            continue;
        };
        let Some((pa, pb)) = two_body_split(q + pf1, m_ext, m_ext, random_unit3(&mut rng)) else {
            continue;
        };
        return KConfiguration::new(vec![pa, pb, -pf1, pc, -pf2, -pf3]);
    }
}

/// Pole-diagram kinematics either on the surface or displaced from it by
/// `delta` in the channel invariant `s − m_c²`.
pub fn pole_kinematics_shifted(m_ext: f64, m_c: f64, delta: f64, seed: u64) -> KConfiguration {
    pole_kinematics(m_ext, (m_c * m_c + delta).sqrt(), seed)
}

/// Random on-shell 2→2 configuration with total energy above threshold.
pub fn random_two_to_two(mass: f64, seed: u64) -> KConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: f64 = rng.random_range(0.2..1.5);
    let a = FourVector::on_shell(mass, [0.0, 0.0, p]);
    let b = FourVector::on_shell(mass, [0.0, 0.0, -p]);
    let (c, d) = two_body_split(a + b, mass, mass, random_unit3(&mut rng)).unwrap();
    let beta = [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)];
    KConfiguration::new(vec![a.boost(beta), b.boost(beta), -c.boost(beta), -d.boost(beta)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{TOL_CONS, TOL_SHELL};

    #[test]
    fn pole_kinematics_is_valid_and_on_surface() {
        let d = pole_diagram(1.0, 1.5);
        for seed in 0..20 {
            let k = pole_kinematics(1.0, 1.5, seed);
            k.check(&d, TOL_SHELL, TOL_CONS).unwrap();
            let q = k.momenta[0] + k.momenta[1] + k.momenta[2];
            assert!((q.lorentz_square() - 2.25).abs() < 1e-10);
            assert!(q.t > 0.0);
        }
    }

    #[test]
    fn random_two_to_two_is_valid() {
        let d = single_vertex(&[1.0, 1.0], &[1.0, 1.0]);
        for seed in 0..10 {
            random_two_to_two(1.0, seed).check(&d, TOL_SHELL, TOL_CONS).unwrap();
        }
    }
}
