//! Displacement vectors of realizations, their gauge freedom (translations
//! and slides along external lines) and normality against surface tangents.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diagram::{Diagram, KConfiguration};
use crate::kinematics::FourVector;
use crate::landau::{self, realize_spacetime, solve_landau, LandauError, Realization, SolverOptions};

#[derive(Debug, Error, PartialEq)]
pub enum DisplacementError {
    #[error(transparent)]
    Landau(#[from] LandauError),
    #[error("gauge basis is rank deficient: rank {rank} of {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty tangent list")]
    NoTangents,
    #[error("no ray: the configuration is not realizable by this diagram")]
    NoRay,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("tangent construction failed: {0}")]
    Projection(String),
}

/// One point per external line, `u_1..u_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementVector {
    pub components: Vec<FourVector>,
}

impl DisplacementVector {
    pub fn zeros(n: usize) -> Self {
        Self { components: vec![FourVector::ZERO; n] }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.components.iter().flat_map(|c| c.components()).collect()
    }

    pub fn from_flat(v: &[f64]) -> Self {
        Self { components: v.chunks(4).map(|c| FourVector::new(c[0], c[1], c[2], c[3])).collect() }
    }

    pub fn add(&self, other: &DisplacementVector) -> DisplacementVector {
        Self { components: self.components.iter().zip(&other.components).map(|(&a, &b)| a + b).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeBasis {
    pub generators: Vec<DisplacementVector>,
}

/// Coordinates of a displacement modulo gauge in a fixed orthonormal
/// complement basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedU {
    pub coordinates: Vec<f64>,
    pub fingerprint: String,
}

impl ReducedU {
    pub fn norm(&self) -> f64 {
        self.coordinates.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// `u_i` is the position of the vertex carrying external line `i`.
pub fn compute_u(r: &Realization, d: &Diagram) -> DisplacementVector {
    let idx = d.index_map();
    DisplacementVector {
        components: d.external.iter().map(|e| r.vertex_positions[idx[&e.vertex]]).collect(),
    }
}

/// Four translations followed by one slide per external line.
pub fn gauge_basis(k: &KConfiguration) -> GaugeBasis {
    let n = k.len();
    let mut generators = Vec::with_capacity(n + 4);
    for mu in 0..4 {
        generators.push(DisplacementVector { components: vec![FourVector::axis(mu); n] });
    }
    for i in 0..n {
        let mut g = DisplacementVector::zeros(n);
        g.components[i] = k.momenta[i];
        generators.push(g);
    }
    GaugeBasis { generators }
}

/// Orthonormal bases of the gauge span and of its complement.
#[derive(Clone, Debug)]
pub struct GaugeProjector {
    gauge: Vec<DVector<f64>>,
    complement: Vec<DVector<f64>>,
    fingerprint: String,
}

fn orthogonalize(v: &mut DVector<f64>, against: &[DVector<f64>]) {
    // twice is enough
    for _ in 0..2 {
        for q in against {
            let c = q.dot(v);
            v.axpy(-c, q, 1.0);
        }
    }
}

impl GaugeProjector {
    pub fn new(basis: &GaugeBasis) -> Result<Self, DisplacementError> {
        let expected = basis.generators.len();
        let dim = basis.generators.first().map(|g| 4 * g.components.len()).unwrap_or(0);
        let mut gauge: Vec<DVector<f64>> = Vec::with_capacity(expected);
        for g in &basis.generators {
            let mut v = DVector::from_vec(g.flatten());
            if v.len() != dim {
                return Err(DisplacementError::Dimension("generators differ in length".into()));
            }
            let n0 = v.norm();
            orthogonalize(&mut v, &gauge);
            let n1 = v.norm();
            if n0 == 0.0 || n1 < 1e-10 * n0 {
                continue;
            }
            gauge.push(v / n1);
        }
        if gauge.len() < expected {
            return Err(DisplacementError::RankDeficient { rank: gauge.len(), expected });
        }
        let mut complement: Vec<DVector<f64>> = Vec::with_capacity(dim - gauge.len());
        for e in 0..dim {
            if gauge.len() + complement.len() == dim {
                break;
            }
            let mut v = DVector::zeros(dim);
            v[e] = 1.0;
            orthogonalize(&mut v, &gauge);
            orthogonalize(&mut v, &complement);
            let n = v.norm();
            if n > 1e-6 {
                complement.push(v / n);
            }
        }
        let mut hasher = Sha256::new();
        for g in &basis.generators {
            for c in g.flatten() {
                hasher.update(c.to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        let fingerprint = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Ok(Self { gauge, complement, fingerprint })
    }

    pub fn reduced_dimension(&self) -> usize {
        self.complement.len()
    }

    pub fn gauge_rank(&self) -> usize {
        self.gauge.len()
    }

    /// Euclidean projection onto the orthogonal complement of the gauge span.
    pub fn project(&self, u: &DisplacementVector) -> DisplacementVector {
        let mut v = DVector::from_vec(u.flatten());
        for q in &self.gauge {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        DisplacementVector::from_flat(v.as_slice())
    }

    pub fn reduce(&self, u: &DisplacementVector) -> ReducedU {
        let v = DVector::from_vec(u.flatten());
        ReducedU {
            coordinates: self.complement.iter().map(|c| c.dot(&v)).collect(),
            fingerprint: self.fingerprint.clone(),
        }
    }

    /// Displacement with the given reduced coordinates.
    pub fn lift(&self, r: &ReducedU) -> DisplacementVector {
        let mut v = DVector::zeros(self.complement.first().map_or(0, |c| c.len()));
        for (c, &x) in self.complement.iter().zip(&r.coordinates) {
            v.axpy(x, c, 1.0);
        }
        DisplacementVector::from_flat(v.as_slice())
    }
}

pub fn reduce_mod_gauge(u: &DisplacementVector, basis: &GaugeBasis) -> Result<ReducedU, DisplacementError> {
    let p = GaugeProjector::new(basis)?;
    if basis.generators.first().map(|g| g.components.len()) != Some(u.components.len()) {
        return Err(DisplacementError::Dimension("U and basis have different slot counts".into()));
    }
    Ok(p.reduce(u))
}

/// Lorentz pairing summed over external slots, `Σ_i u_i·t_i`.
pub fn lorentz_pairing(u: &DisplacementVector, t: &DisplacementVector) -> f64 {
    u.components.iter().zip(&t.components).map(|(a, b)| a.lorentz_dot(b)).sum()
}

fn euclid_norm(u: &DisplacementVector) -> f64 {
    u.components.iter().map(|c| c.euclidean_square()).sum::<f64>().sqrt()
}

/// Largest normalized pairing `|⟨U,t⟩| / (‖U‖‖t‖)` over the tangents.
pub fn normality_check(u: &DisplacementVector, tangents: &[DisplacementVector]) -> Result<f64, DisplacementError> {
    if tangents.is_empty() {
        return Err(DisplacementError::NoTangents);
    }
    let nu = euclid_norm(u);
    if nu == 0.0 {
        return Ok(0.0);
    }
    Ok(tangents
        .iter()
        .map(|t| lorentz_pairing(u, t).abs() / (nu * euclid_norm(t)))
        .fold(0.0, f64::max))
}

/// Min-norm Newton projection onto `{z : c(z) = 0}`.
fn newton_project<F>(c: &F, mut z: DVector<f64>, tol: f64) -> Result<DVector<f64>, DisplacementError>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    for _ in 0..50 {
        let r = c(&z);
        if r.norm() <= tol {
            return Ok(z);
        }
        let h = 1e-7;
        let mut j = DMatrix::zeros(r.len(), z.len());
        for col in 0..z.len() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[col] += h;
            zm[col] -= h;
            let dc = (c(&zp) - c(&zm)) / (2.0 * h);
            j.set_column(col, &dc);
        }
        let svd = j.svd(true, true);
        let step = svd
            .solve(&r, 1e-12)
            .map_err(|e| DisplacementError::Projection(e.to_string()))?;
        z -= step;
    }
    let r = c(&z).norm();
    if r <= 1e3 * tol {
        Ok(z)
    } else {
        Err(DisplacementError::Projection(format!("residual {r:e} after 50 steps")))
    }
}

fn random_dir(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let v = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(rng));
    let norm = v.norm();
    v / norm
}

fn central_tangents<F>(
    c: &F,
    z0: &DVector<f64>,
    n_k: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<DisplacementVector>, DisplacementError>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let eps = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w = random_dir(&mut rng, z0.len());
        let zp = newton_project(c, z0 + eps * &w, 1e-14)?;
        let zm = newton_project(c, z0 - eps * &w, 1e-14)?;
        let t = (zp - zm) / (2.0 * eps);
        out.push(DisplacementVector::from_flat(&t.as_slice()[..4 * n_k]));
    }
    Ok(out)
}

fn shell_rows(k: &[f64], masses: &[f64], out: &mut Vec<f64>) {
    for (i, m) in masses.iter().enumerate() {
        let v = FourVector::new(k[4 * i], k[4 * i + 1], k[4 * i + 2], k[4 * i + 3]);
        out.push(v.lorentz_square() - m * m);
    }
}

/// Finite-difference tangents of the mass-shell plus total-conservation
/// manifold at `k`.
pub fn constraint_tangents(
    d: &Diagram,
    k: &KConfiguration,
    count: usize,
    seed: u64,
) -> Result<Vec<DisplacementVector>, DisplacementError> {
    let masses: Vec<f64> = d.external.iter().map(|e| e.particle.mass).collect();
    let n = masses.len();
    let c = |z: &DVector<f64>| {
        let mut out = Vec::with_capacity(n + 4);
        shell_rows(z.as_slice(), &masses, &mut out);
        for mu in 0..4 {
            out.push((0..n).map(|i| z[4 * i + mu]).sum());
        }
        DVector::from_vec(out)
    };
    let z0 = DVector::from_vec(DisplacementVector { components: k.momenta.clone() }.flatten());
    central_tangents(&c, &z0, n, count, seed)
}

/// Finite-difference tangents of the Landau surface of `d` at a realizable
/// `k`, obtained by projecting jointly onto external shell, internal shell,
/// vertex conservation and cycle closure.
pub fn surface_tangents(
    d: &Diagram,
    k: &KConfiguration,
    realization: &Realization,
    count: usize,
    seed: u64,
) -> Result<Vec<DisplacementVector>, DisplacementError> {
    let topo = landau::topology(d)?;
    let (from, to) = landau::line_ends(&topo);
    let cycles = landau::fundamental_cycles(&topo);
    let idx = d.index_map();
    let ext_vertex: Vec<usize> = d.external.iter().map(|e| idx[&e.vertex]).collect();
    let ext_masses: Vec<f64> = d.external.iter().map(|e| e.particle.mass).collect();
    let int_masses: Vec<f64> = d.internal.iter().map(|l| l.particle.mass).collect();
    let (n, nl, nv) = (ext_masses.len(), int_masses.len(), d.n_vertices());
    let c = |z: &DVector<f64>| {
        let z = z.as_slice();
        let kq = &z[..4 * n];
        let qq = &z[4 * n..4 * (n + nl)];
        let al = &z[4 * (n + nl)..];
        let mut out = Vec::new();
        shell_rows(kq, &ext_masses, &mut out);
        shell_rows(qq, &int_masses, &mut out);
        let fv = |s: &[f64], i: usize| FourVector::new(s[4 * i], s[4 * i + 1], s[4 * i + 2], s[4 * i + 3]);
        let mut vres = vec![FourVector::ZERO; nv];
        for i in 0..n {
            vres[ext_vertex[i]] += fv(kq, i);
        }
        for l in 0..nl {
            vres[to[l]] += fv(qq, l);
            vres[from[l]] -= fv(qq, l);
        }
        for v in vres {
            out.extend(v.components());
        }
        for cyc in &cycles {
            let s: FourVector = cyc.iter().map(|&(l, w)| (w * al[l]) * fv(qq, l)).sum();
            out.extend(s.components());
        }
        DVector::from_vec(out)
    };
    let mut z0 = DisplacementVector { components: k.momenta.clone() }.flatten();
    z0.extend(DisplacementVector { components: realization.internal_momenta.clone() }.flatten());
    z0.extend(&realization.alphas);
    central_tangents(&c, &DVector::from_vec(z0), n, count, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeRay {
    pub direction: ReducedU,
    pub alphas: Vec<f64>,
    /// Whether the time-reversed segments (α → −α) are realizable.
    pub reversed_realizable: bool,
}

/// Unit reduced direction of the displacement of a forward realization of
/// `d` at `k`.
pub fn cone_ray(d: &Diagram, k: &KConfiguration, opts: &SolverOptions) -> Result<ConeRay, DisplacementError> {
    let res = solve_landau(d, k, opts)?;
    let Some(real) = res.realization.filter(|_| res.feasible) else {
        return Err(DisplacementError::NoRay);
    };
    if d.n_internal() == 0 {
        return Err(DisplacementError::NoRay);
    }
    if res.degenerate {
        return Err(DisplacementError::Unsupported(
            "contracted lines: the point lies on more than one surface".into(),
        ));
    }
    let projector = GaugeProjector::new(&gauge_basis(k))?;
    let mut direction = projector.reduce(&compute_u(&real, d));
    let norm = direction.norm();
    if norm < 1e-12 {
        return Err(DisplacementError::NoRay);
    }
    direction.coordinates.iter_mut().for_each(|c| *c /= norm);
    let reversed: Vec<f64> = real.alphas.iter().map(|a| -a).collect();
    let reversed_realizable = realize_spacetime(d, &real.internal_momenta, &reversed).is_ok();
    Ok(ConeRay { direction, alphas: real.alphas, reversed_realizable })
}
