//! Classical realizability of a diagram at fixed external momenta.
//!
//! A realization places every vertex in space-time so that each internal
//! line is a forward segment parallel to its on-shell momentum,
//! `x_to − x_from = α q`, `α ≥ 0`, with momentum conserved at each vertex.

use std::collections::VecDeque;

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt, TerminationReason};
use nalgebra::{storage::Owned, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{
    conservation_residual, validate_diagram, Diagram, DiagramError, KConfiguration, Orientation,
    TOL_CONS, TOL_SHELL,
};
use crate::kinematics::{random_unit3, two_body_split, FourVector};

pub const TOL_REAL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum LandauError {
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),
    #[error("line {line} runs backward in time (alpha = {alpha})")]
    BackwardInTime { line: usize, alpha: f64 },
    #[error("cycle through line {line} does not close: residual {residual:e}")]
    ClosureViolated { line: usize, residual: f64 },
    #[error("expected {expected} values per internal line, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub starts: usize,
    pub tol_feas: f64,
    pub alpha_min: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iters: 400, starts: 16, tol_feas: 1e-8, alpha_min: 1e-10, seed: 0x1a7d_a0 }
    }
}

/// Space-time embedding of a diagram. Vectors are indexed like the diagram's
/// `vertices` and `internal` lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub vertex_positions: Vec<FourVector>,
    pub internal_momenta: Vec<FourVector>,
    pub alphas: Vec<f64>,
}

impl Realization {
    pub fn translated(&self, a: FourVector) -> Realization {
        Realization {
            vertex_positions: self.vertex_positions.iter().map(|&x| x + a).collect(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, lambda: f64) -> Realization {
        Realization {
            vertex_positions: self.vertex_positions.iter().map(|&x| lambda * x).collect(),
            internal_momenta: self.internal_momenta.clone(),
            alphas: self.alphas.iter().map(|a| lambda * a).collect(),
        }
    }

    /// Largest violation of the realization invariants: segment
    /// proportionality, mass shell, positive energy, non-negative α and
    /// vertex conservation. Returns `None` if any check fails outright.
    pub fn defect(&self, d: &Diagram, k: &KConfiguration) -> Option<f64> {
        let idx = d.index_map();
        let mut worst: f64 = 0.0;
        for (l, line) in d.internal.iter().enumerate() {
            let q = self.internal_momenta[l];
            let a = self.alphas[l];
            if a < 0.0 || q.t <= 0.0 {
                return None;
            }
            let dx = self.vertex_positions[idx[&line.to]] - self.vertex_positions[idx[&line.from]];
            worst = worst.max((dx - a * q).euclidean_norm());
            let m = line.particle.mass;
            worst = worst.max((q.lorentz_square() - m * m).abs());
        }
        for r in conservation_residual(d, k, &self.internal_momenta).ok()? {
            worst = worst.max(r.euclidean_norm());
        }
        Some(worst)
    }

    pub fn satisfies(&self, d: &Diagram, k: &KConfiguration) -> bool {
        self.defect(d, k).is_some_and(|e| e <= TOL_REAL.max(TOL_SHELL).max(TOL_CONS))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    Infeasible,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub status: Status,
    pub feasible: bool,
    pub residual: f64,
    pub realization: Option<Realization>,
    pub iterations: usize,
    /// Some line has α below `alpha_min`: the diagram is realized only in a
    /// contracted form.
    pub degenerate: bool,
}

/// Spanning-tree bookkeeping shared by the solver, realizer and sampler.
#[derive(Clone, Debug)]
pub(crate) struct Topology {
    /// BFS order of vertex indices, root first.
    order: Vec<usize>,
    /// For each non-root vertex: (parent index, line, +1 if line runs parent→child).
    parent: Vec<Option<(usize, usize, f64)>>,
    pub non_tree: Vec<usize>,
    pub on_cycle: Vec<bool>,
    /// Position of vertex v as Σ_l coef[v][l] · α_l q_l.
    coef: Vec<Vec<f64>>,
    from: Vec<usize>,
    to: Vec<usize>,
}

impl Topology {
    pub(crate) fn new(d: &Diagram) -> Result<Self, LandauError> {
        let report = validate_diagram(d);
        if !report.is_valid() {
            let msg = report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
            return Err(LandauError::InvalidDiagram(msg));
        }
        let idx = d.index_map();
        let nv = d.n_vertices();
        let nl = d.n_internal();
        let from: Vec<usize> = d.internal.iter().map(|l| idx[&l.from]).collect();
        let to: Vec<usize> = d.internal.iter().map(|l| idx[&l.to]).collect();
        let mut adj = vec![Vec::new(); nv];
        for l in 0..nl {
            adj[from[l]].push((to[l], l, 1.0));
            adj[to[l]].push((from[l], l, -1.0));
        }
        let mut parent = vec![None; nv];
        let mut seen = vec![false; nv];
        let mut in_tree = vec![false; nl];
        let mut order = vec![0];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for &(w, l, sign) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    in_tree[l] = true;
                    parent[w] = Some((v, l, sign));
                    order.push(w);
                    queue.push_back(w);
                }
            }
        }
        let mut coef = vec![vec![0.0; nl]; nv];
        for &v in order.iter().skip(1) {
            let (p, l, sign) = parent[v].unwrap();
            let mut c = coef[p].clone();
            c[l] += sign;
            coef[v] = c;
        }
        let non_tree: Vec<usize> = (0..nl).filter(|&l| !in_tree[l]).collect();
        let mut on_cycle = vec![false; nl];
        for &c in &non_tree {
            on_cycle[c] = true;
            for l in 0..nl {
                if coef[to[c]][l] != coef[from[c]][l] {
                    on_cycle[l] = true;
                }
            }
        }
        Ok(Self { order, parent, non_tree, on_cycle, coef, from, to })
    }

    fn positions(&self, q: &[FourVector], alphas: &[f64]) -> Vec<FourVector> {
        let mut pos = vec![FourVector::ZERO; self.coef.len()];
        for &v in self.order.iter().skip(1) {
            let (p, l, sign) = self.parent[v].unwrap();
            pos[v] = pos[p] + (sign * alphas[l]) * q[l];
        }
        pos
    }

    /// Closure coefficients for the fundamental cycle of non-tree line `c`:
    /// Σ_l w_l α_l q_l = 0.
    fn cycle(&self, c: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for l in 0..self.from.len() {
            let mut w = self.coef[self.to[c]][l] - self.coef[self.from[c]][l];
            if l == c {
                w -= 1.0;
            }
            if w != 0.0 {
                out.push((l, w));
            }
        }
        out
    }
}

/// Vertex positions from a spanning-tree walk anchored at the first vertex.
pub fn realize_spacetime(
    d: &Diagram,
    q: &[FourVector],
    alphas: &[f64],
) -> Result<Vec<FourVector>, LandauError> {
    let topo = Topology::new(d)?;
    realize_with(&topo, q, alphas, TOL_REAL)
}

fn realize_with(
    topo: &Topology,
    q: &[FourVector],
    alphas: &[f64],
    tol: f64,
) -> Result<Vec<FourVector>, LandauError> {
    let nl = topo.from.len();
    if q.len() != nl || alphas.len() != nl {
        return Err(LandauError::LengthMismatch { expected: nl, got: q.len().min(alphas.len()) });
    }
    if let Some((line, &alpha)) = alphas.iter().enumerate().find(|(_, &a)| a < 0.0) {
        return Err(LandauError::BackwardInTime { line, alpha });
    }
    let pos = topo.positions(q, alphas);
    for &c in &topo.non_tree {
        let dx = pos[topo.to[c]] - pos[topo.from[c]];
        let residual = (dx - alphas[c] * q[c]).euclidean_norm();
        if !(residual <= tol) {
            return Err(LandauError::ClosureViolated { line: c, residual });
        }
    }
    Ok(pos)
}

/// Σ of the external `k` attached at a vertex; for a vertex with a single
/// outgoing internal line this is the line's momentum.
pub fn channel_momentum(d: &Diagram, k: &KConfiguration, vertex: u32) -> FourVector {
    d.external
        .iter()
        .zip(&k.momenta)
        .filter(|(e, _)| e.vertex == vertex)
        .map(|(_, &m)| m)
        .sum()
}

struct LandauSystem<'a> {
    d: &'a Diagram,
    topo: &'a Topology,
    ext_sum: Vec<FourVector>,
    cycles: Vec<Vec<(usize, f64)>>,
    slack_of: Vec<Option<usize>>,
    n_slack: usize,
    x: DVector<f64>,
}

impl<'a> LandauSystem<'a> {
    fn new(d: &'a Diagram, topo: &'a Topology, k: &KConfiguration) -> Self {
        let idx = d.index_map();
        let mut ext_sum = vec![FourVector::ZERO; d.n_vertices()];
        for (e, &km) in d.external.iter().zip(&k.momenta) {
            ext_sum[idx[&e.vertex]] += km;
        }
        let mut slack_of = vec![None; d.n_internal()];
        let mut n_slack = 0;
        for (l, s) in slack_of.iter_mut().enumerate() {
            if topo.on_cycle[l] {
                *s = Some(n_slack);
                n_slack += 1;
            }
        }
        let cycles = topo.non_tree.iter().map(|&c| topo.cycle(c)).collect();
        let n = 3 * d.n_internal() + n_slack;
        Self { d, topo, ext_sum, cycles, slack_of, n_slack, x: DVector::zeros(n) }
    }

    fn n_params(&self) -> usize {
        3 * self.d.n_internal() + self.n_slack
    }

    fn n_residuals(&self) -> usize {
        4 * self.d.n_vertices() + 4 * self.cycles.len() + usize::from(self.n_slack > 0)
    }

    fn momenta(&self, x: &DVector<f64>) -> Vec<FourVector> {
        self.d
            .internal
            .iter()
            .enumerate()
            .map(|(l, line)| FourVector::on_shell(line.particle.mass, [x[3 * l], x[3 * l + 1], x[3 * l + 2]]))
            .collect()
    }

    fn alphas(&self, x: &DVector<f64>) -> Vec<f64> {
        let base = 3 * self.d.n_internal();
        self.slack_of
            .iter()
            .map(|s| match s {
                Some(j) => x[base + j] * x[base + j],
                None => 1.0,
            })
            .collect()
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let q = self.momenta(x);
        let a = self.alphas(x);
        let mut r = DVector::zeros(self.n_residuals());
        let mut vres = self.ext_sum.clone();
        for l in 0..q.len() {
            vres[self.topo.to[l]] += q[l];
            vres[self.topo.from[l]] -= q[l];
        }
        let mut row = 0;
        for v in vres {
            for mu in 0..4 {
                r[row + mu] = v[mu];
            }
            row += 4;
        }
        for cyc in &self.cycles {
            let s: FourVector = cyc.iter().map(|&(l, w)| (w * a[l]) * q[l]).sum();
            for mu in 0..4 {
                r[row + mu] = s[mu];
            }
            row += 4;
        }
        if self.n_slack > 0 {
            let total: f64 = (0..a.len()).filter(|&l| self.topo.on_cycle[l]).map(|l| a[l]).sum();
            r[row] = total - 1.0;
        }
        r
    }

    fn jac(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let q = self.momenta(x);
        let a = self.alphas(x);
        let nl = q.len();
        let base = 3 * nl;
        let mut j = DMatrix::zeros(self.n_residuals(), self.n_params());
        // dq_l/dp_l: row 0 = p/E, rows 1..3 = identity
        let dq = |l: usize, mu: usize, c: usize| -> f64 {
            if mu == 0 {
                q[l][c + 1] / q[l].t
            } else if mu == c + 1 {
                1.0
            } else {
                0.0
            }
        };
        for l in 0..nl {
            for (v, sign) in [(self.topo.to[l], 1.0), (self.topo.from[l], -1.0)] {
                for mu in 0..4 {
                    for c in 0..3 {
                        j[(4 * v + mu, 3 * l + c)] += sign * dq(l, mu, c);
                    }
                }
            }
        }
        let mut row = 4 * self.d.n_vertices();
        for cyc in &self.cycles {
            for &(l, w) in cyc {
                for mu in 0..4 {
                    for c in 0..3 {
                        j[(row + mu, 3 * l + c)] += w * a[l] * dq(l, mu, c);
                    }
                    if let Some(s) = self.slack_of[l] {
                        j[(row + mu, base + s)] += w * 2.0 * x[base + s] * q[l][mu];
                    }
                }
            }
            row += 4;
        }
        if self.n_slack > 0 {
            for s in 0..self.n_slack {
                j[(row, base + s)] = 2.0 * x[base + s];
            }
        }
        j
    }
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for LandauSystem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let r = self.eval(&self.x);
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        Some(self.jac(&self.x))
    }
}

struct StartOutcome {
    residual: f64,
    x: DVector<f64>,
    evaluations: usize,
    exhausted: bool,
}

fn momentum_scale(k: &KConfiguration) -> f64 {
    let s: f64 = k.momenta.iter().map(|m| m.spatial_norm()).sum();
    (s / k.len().max(1) as f64).max(0.5)
}

/// Decides classical realizability of `d` at external momenta `k`.
pub fn solve_landau(
    d: &Diagram,
    k: &KConfiguration,
    opts: &SolverOptions,
) -> Result<FeasibilityResult, LandauError> {
    let topo = Topology::new(d)?;
    k.check(d, TOL_SHELL.max(1e-8), TOL_CONS.max(1e-8))?;
    let sys = LandauSystem::new(d, &topo, k);
    if sys.n_params() == 0 {
        let residual = sys.eval(&sys.x).norm();
        let feasible = residual <= opts.tol_feas;
        return Ok(FeasibilityResult {
            status: if feasible { Status::Feasible } else { Status::Infeasible },
            feasible,
            residual,
            realization: feasible.then(|| Realization {
                vertex_positions: vec![FourVector::ZERO; d.n_vertices()],
                internal_momenta: vec![],
                alphas: vec![],
            }),
            iterations: 0,
            degenerate: false,
        });
    }
    let scale = momentum_scale(k);
    let n = sys.n_params();
    let nl = d.n_internal();
    let lm = LevenbergMarquardt::new()
        .with_ftol(1e-14)
        .with_xtol(1e-14)
        .with_gtol(1e-15)
        .with_patience(opts.max_iters.max(1));
    let outcomes: Vec<StartOutcome> = (0..opts.starts.max(1))
        .into_par_iter()
        .map(|start| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(start as u64 + 1);
            let normal = Normal::new(0.0, scale).unwrap();
            let mut x0 = DVector::zeros(n);
            for i in 0..3 * nl {
                x0[i] = normal.sample(&mut rng);
            }
            let ns = n - 3 * nl;
            for i in 0..ns {
                x0[3 * nl + i] = rng.random_range(0.3..1.0) / (ns as f64).sqrt();
            }
            let mut problem = LandauSystem::new(d, &topo, k);
            problem.x = x0;
            let (problem, report) = lm.minimize(problem);
            let residual = problem.eval(&problem.x).norm();
            StartOutcome {
                residual: if residual.is_finite() { residual } else { f64::INFINITY },
                x: problem.x,
                evaluations: report.number_of_evaluations,
                exhausted: matches!(
                    report.termination,
                    TerminationReason::LostPatience | TerminationReason::Numerical(_)
                ),
            }
        })
        .collect();
    let iterations = outcomes.iter().map(|o| o.evaluations).sum();
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.residual.total_cmp(&b.1.residual).then(a.0.cmp(&b.0)))
        .map(|(_, o)| o)
        .unwrap();
    let residual = best.residual;
    if residual <= opts.tol_feas {
        let q = sys.momenta(&best.x);
        let alphas = sys.alphas(&best.x);
        let degenerate = alphas.iter().any(|&a| a < opts.alpha_min);
        let positions = realize_with(&topo, &q, &alphas, TOL_REAL)?;
        return Ok(FeasibilityResult {
            status: Status::Feasible,
            feasible: true,
            residual,
            realization: Some(Realization { vertex_positions: positions, internal_momenta: q, alphas }),
            iterations,
            degenerate,
        });
    }
    let status = if outcomes.iter().any(|o| o.exhausted) { Status::Inconclusive } else { Status::Infeasible };
    Ok(FeasibilityResult { status, feasible: false, residual, realization: None, iterations, degenerate: false })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurfaceSample {
    pub samples: Vec<KConfiguration>,
    pub attempts: usize,
    /// Set when the attempt budget ran out before `count` samples.
    pub budget_exhausted: bool,
}

/// Draws external configurations on the Landau surface of `d`.
///
/// Vertex positions are drawn first, each internal line then carries the
/// on-shell momentum along its segment, and the external lines at each
/// vertex absorb the net momentum by two-body kinematics.
pub fn sample_surface(d: &Diagram, count: usize, seed: u64) -> Result<SurfaceSample, LandauError> {
    sample_surface_with(d, count, seed, &SolverOptions { seed, ..Default::default() })
}

pub fn sample_surface_with(
    d: &Diagram,
    count: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<SurfaceSample, LandauError> {
    let topo = Topology::new(d)?;
    let budget = 50 * count.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    let mut attempts = 0;
    while samples.len() < count && attempts < budget {
        attempts += 1;
        let Some(k) = draw_surface_point(d, &topo, &mut rng) else { continue };
        if k.check(d, 1e-9, 1e-9).is_err() {
            continue;
        }
        let verdict = solve_landau(d, &k, opts)?;
        if verdict.feasible {
            samples.push(k);
        }
    }
    Ok(SurfaceSample { budget_exhausted: samples.len() < count, samples, attempts })
}

fn depth_order(d: &Diagram, topo: &Topology) -> Option<Vec<f64>> {
    // Longest-path depth along line directions; None if the lines form a
    // directed cycle, which no forward realization admits.
    let nv = d.n_vertices();
    let mut depth = vec![0usize; nv];
    for _ in 0..nv {
        let mut changed = false;
        for l in 0..topo.from.len() {
            let (a, b) = (topo.from[l], topo.to[l]);
            if depth[b] < depth[a] + 1 {
                depth[b] = depth[a] + 1;
                changed = true;
            }
        }
        if !changed {
            return Some(depth.iter().map(|&x| x as f64).collect());
        }
    }
    None
}

fn draw_surface_point(d: &Diagram, topo: &Topology, rng: &mut ChaCha8Rng) -> Option<KConfiguration> {
    let depth = depth_order(d, topo)?;
    let nv = d.n_vertices();
    let spatial = Normal::new(0.0, 0.35).unwrap();
    let pos: Vec<FourVector> = (0..nv)
        .map(|v| {
            FourVector::new(
                depth[v] + rng.random_range(0.0..0.3),
                spatial.sample(rng),
                spatial.sample(rng),
                spatial.sample(rng),
            )
        })
        .collect();
    let mut q = Vec::with_capacity(d.n_internal());
    for (l, line) in d.internal.iter().enumerate() {
        let dx = pos[topo.to[l]] - pos[topo.from[l]];
        let s2 = dx.lorentz_square();
        if dx.t <= 0.0 || s2 <= 0.0 || dx.spatial_norm() > 0.9 * dx.t {
            return None;
        }
        q.push((line.particle.mass / s2.sqrt()) * dx);
    }
    // net external momentum each vertex must supply
    let mut need = vec![FourVector::ZERO; nv];
    for l in 0..q.len() {
        need[topo.from[l]] += q[l];
        need[topo.to[l]] -= q[l];
    }
    let mut k = vec![FourVector::ZERO; d.n_external()];
    let p_draw = Normal::new(0.0, 0.4).unwrap();
    for (v, &vid) in d.vertices.iter().enumerate() {
        let (_, _, ext) = d.incidence(vid);
        if ext.len() < 2 {
            return None;
        }
        let (free, last) = ext.split_at(ext.len() - 2);
        let mut rest = need[v];
        for &e in free {
            let line = &d.external[e];
            let p = FourVector::on_shell(
                line.particle.mass,
                [p_draw.sample(rng), p_draw.sample(rng), p_draw.sample(rng)],
            );
            let km = match line.orientation {
                Orientation::Initial => p,
                Orientation::Final => -p,
            };
            k[e] = km;
            rest -= km;
        }
        let (e1, e2) = (last[0], last[1]);
        let (l1, l2) = (&d.external[e1], &d.external[e2]);
        let (m1, m2) = (l1.particle.mass, l2.particle.mass);
        match (l1.orientation, l2.orientation) {
            (Orientation::Initial, Orientation::Initial) => {
                let (p1, p2) = two_body_split(rest, m1, m2, random_unit3(rng))?;
                k[e1] = p1;
                k[e2] = p2;
            }
            (Orientation::Final, Orientation::Final) => {
                let (p1, p2) = two_body_split(-rest, m1, m2, random_unit3(rng))?;
                k[e1] = -p1;
                k[e2] = -p2;
            }
            (Orientation::Initial, Orientation::Final) => {
                let (pi, pf) = mixed_split(rest, m1, m2, rng)?;
                k[e1] = pi;
                k[e2] = -pf;
            }
            (Orientation::Final, Orientation::Initial) => {
                let (pi, pf) = mixed_split(rest, m2, m1, rng)?;
                k[e2] = pi;
                k[e1] = -pf;
            }
        }
    }
    Some(KConfiguration::new(k))
}

/// Finds on-shell positive-energy `p_i` (mass `mi`) and `p_f` (mass `mf`)
/// with `p_i − p_f = target`, `p_i` along a random direction.
fn mixed_split(target: FourVector, mi: f64, mf: f64, rng: &mut ChaCha8Rng) -> Option<(FourVector, FourVector)> {
    let n = random_unit3(rng);
    let c = 0.5 * (mi * mi + target.lorentz_square() - mf * mf);
    let g = |kappa: f64| {
        let p = FourVector::on_shell(mi, [kappa * n[0], kappa * n[1], kappa * n[2]]);
        (p.lorentz_dot(&target) - c, p)
    };
    let kmax = 4.0 * (1.0 + target.euclidean_norm());
    let steps = 400;
    let mut prev = g(0.0);
    for i in 1..=steps {
        let kappa = kmax * i as f64 / steps as f64;
        let cur = g(kappa);
        if prev.0.signum() != cur.0.signum() {
            let (mut lo, mut hi) = (kmax * (i - 1) as f64 / steps as f64, kappa);
            let flo = prev.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (g(mid).0 > 0.0) == (flo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let pi = g(0.5 * (lo + hi)).1;
            let pf = FourVector::on_shell(mf, (pi - target).spatial());
            if (pi - target).t > 0.0 && (pi - pf - target).euclidean_norm() < 1e-10 {
                return Some((pi, pf));
            }
        }
        prev = cur;
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classification {
    Trivial,
    Singular { diagrams: Vec<usize> },
    /// Some catalog entries could not be decided.
    Unknown { singular: Vec<usize>, undecided: Vec<usize> },
}

/// Trivial iff no catalog diagram is realizable at `k`; catalog entries are
/// reported by index.
pub fn classify_point(
    catalog: &[Diagram],
    k: &KConfiguration,
    opts: &SolverOptions,
) -> Result<Classification, LandauError> {
    let mut singular = Vec::new();
    let mut undecided = Vec::new();
    for (i, d) in catalog.iter().enumerate() {
        match solve_landau(d, k, opts)?.status {
            Status::Feasible => singular.push(i),
            Status::Inconclusive => undecided.push(i),
            Status::Infeasible => {}
        }
    }
    Ok(if !undecided.is_empty() {
        Classification::Unknown { singular, undecided }
    } else if singular.is_empty() {
        Classification::Trivial
    } else {
        Classification::Singular { diagrams: singular }
    })
}

pub(crate) fn topology(d: &Diagram) -> Result<Topology, LandauError> {
    Topology::new(d)
}

pub(crate) fn line_ends(topo: &Topology) -> (&[usize], &[usize]) {
    (&topo.from, &topo.to)
}

pub(crate) fn fundamental_cycles(topo: &Topology) -> Vec<Vec<(usize, f64)>> {
    topo.non_tree.iter().map(|&c| topo.cycle(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn pole_on_surface_is_feasible() {
        let d = pole_diagram(1.0, 1.5);
        for seed in 0..5 {
            let k = pole_kinematics(1.0, 1.5, seed);
            let r = solve_landau(&d, &k, &opts()).unwrap();
            assert!(r.feasible, "seed {seed}: {r:?}");
            assert!(r.residual < 1e-8);
            assert!(r.realization.unwrap().satisfies(&d, &k));
        }
    }

    #[test]
    fn pole_off_surface_is_infeasible() {
        let d = pole_diagram(1.0, 1.5);
        for seed in 0..5 {
            let k = pole_kinematics_shifted(1.0, 1.5, 0.5, seed);
            let r = solve_landau(&d, &k, &opts()).unwrap();
            assert_eq!(r.status, Status::Infeasible, "{r:?}");
            assert!(r.realization.is_none());
        }
    }

    #[test]
    fn single_vertex_is_feasible_with_nothing_to_assign() {
        let d = single_vertex(&[1.0, 1.0], &[1.0, 1.0]);
        let k = elastic_two_to_two(1.0, 0.6, 0.4);
        let r = solve_landau(&d, &k, &opts()).unwrap();
        assert!(r.feasible);
        let real = r.realization.unwrap();
        assert!(real.internal_momenta.is_empty());
    }

    #[test]
    fn pole_realization_by_hand() {
        let d = pole_diagram(1.0, 1.0);
        let pos = realize_spacetime(&d, &[FourVector::new(1.0, 0.0, 0.0, 0.0)], &[2.0]).unwrap();
        assert_eq!(pos[1], FourVector::new(2.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn negative_alpha_runs_backward() {
        let d = pole_diagram(1.0, 1.0);
        let err = realize_spacetime(&d, &[FourVector::new(1.0, 0.0, 0.0, 0.0)], &[-1.0]).unwrap_err();
        assert!(err.to_string().contains("backward in time"));
    }

    #[test]
    fn triangle_positions_close() {
        let d = triangle_diagram();
        let s = sample_surface(&d, 3, 5).unwrap();
        assert_eq!(s.samples.len(), 3);
        for k in &s.samples {
            let r = solve_landau(&d, k, &opts()).unwrap();
            let real = r.realization.unwrap();
            let p = &real.vertex_positions;
            let q = &real.internal_momenta;
            let a = &real.alphas;
            // independent cycle sum: 0→1→2 minus 0→2
            let cyc = a[0] * q[0] + a[1] * q[1] - a[2] * q[2];
            assert!(cyc.euclidean_norm() < 1e-10, "{cyc:?}");
            assert!((p[2] - p[0] - a[2] * q[2]).euclidean_norm() < 1e-10);
        }
    }

    #[test]
    fn pole_samples_sit_on_the_surface() {
        let d = pole_diagram(1.0, 1.5);
        let s = sample_surface(&d, 10, 9).unwrap();
        assert_eq!(s.samples.len(), 10);
        for k in &s.samples {
            let q = channel_momentum(&d, k, 0);
            assert!((q.lorentz_square() - 2.25).abs() < 1e-10);
        }
        assert!(sample_surface(&d, 0, 9).unwrap().samples.is_empty());
    }

    #[test]
    fn threshold_samples_round_trip() {
        let d = threshold_diagram();
        let s = sample_surface(&d, 4, 2).unwrap();
        assert_eq!(s.samples.len(), 4);
        for k in &s.samples {
            let total = channel_momentum(&d, k, 0);
            assert!((total.invariant_mass().unwrap() - 2.2).abs() < 1e-8);
        }
    }

    #[test]
    fn classification_against_kinematics() {
        let catalog = vec![pole_diagram(1.0, 1.5)];
        let on = pole_kinematics(1.0, 1.5, 4);
        let off = pole_kinematics_shifted(1.0, 1.5, 0.3, 4);
        assert_eq!(classify_point(&catalog, &off, &opts()).unwrap(), Classification::Trivial);
        assert_eq!(
            classify_point(&catalog, &on, &opts()).unwrap(),
            Classification::Singular { diagrams: vec![0] }
        );
        assert_eq!(classify_point(&[], &on, &opts()).unwrap(), Classification::Trivial);
    }

    #[test]
    fn scaled_and_translated_realizations_still_realize() {
        let d = pole_diagram(1.0, 1.5);
        let k = pole_kinematics(1.0, 1.5, 8);
        let real = solve_landau(&d, &k, &opts()).unwrap().realization.unwrap();
        assert!(real.scaled(3.7).satisfies(&d, &k));
        assert!(real.translated(FourVector::new(0.3, -2.0, 1.0, 5.0)).satisfies(&d, &k));
    }

    #[test]
    fn residual_grows_away_from_the_pole() {
        let d = pole_diagram(1.0, 1.5);
        let mut last = -1.0;
        for i in 0..6 {
            let delta = 0.1 * i as f64;
            let k = pole_kinematics_shifted(1.0, 1.5, delta, 21);
            let r = solve_landau(&d, &k, &opts()).unwrap().residual;
            assert!(r > last, "delta {delta}: {r} <= {last}");
            last = r;
        }
    }
}
