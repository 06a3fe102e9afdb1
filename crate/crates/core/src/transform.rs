//! Reduced transforms in `l ≤ 2` dimensions:
//!
//! ```text
//! T(v,r) = ∫ dq F(q) e^{−r μ(q)} e^{−iq·v},   F(q) = (2π)^{−l} ∫ dv e^{iq·v} T(v,0)
//! ```
//!
//! plus the split of the inversion into a damped term `F1` and a divergence
//! term `F2`, and the split of `v` space into a hole cap and its complement.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{graded_toward, panel};
use crate::wavepacket::Bump;

type C = Complex64;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("quadrature needs {needed} nodes (limit {limit})")]
    Quadrature { needed: usize, limit: usize },
    #[error("|T| at the box edge is {ratio:.3e} of its peak at radius {radius}")]
    BoundaryDecay { radius: f64, ratio: f64 },
    #[error("growth not dominated by the fall-off: integrand still {ratio:.3e} of peak at |v| = {radius}")]
    GrowthDomination { radius: f64, ratio: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Form {
    /// The envelope alone.
    Bump,
    /// `1/(q₁ − q₀ + iε)`.
    Pole { q0: f64, eps: f64 },
    /// `ln(q₁ − q₀ + iε)`.
    Log { q0: f64, eps: f64 },
    /// Samples `values[k]` at `start + k·step`, Lagrange interpolation of the
    /// given order. One-dimensional.
    Grid { start: f64, step: f64, values: Vec<f64>, order: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringModel {
    pub form: Form,
    pub l: usize,
    /// Radial envelope `χ(|q|)`; required for every form except the bare pole.
    pub envelope: Option<Bump>,
}

impl ScatteringModel {
    pub fn bump(l: usize, r1: f64, r2: f64) -> Self {
        Self { form: Form::Bump, l, envelope: Some(Bump::new(r1, r2)) }
    }

    pub fn pole(q0: f64, eps: f64) -> Self {
        Self { form: Form::Pole { q0, eps }, l: 1, envelope: None }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        let bad = |m: &str| Err(TransformError::Invalid(m.into()));
        if !(1..=2).contains(&self.l) {
            return bad("l must be 1 or 2");
        }
        match (&self.form, &self.envelope) {
            (Form::Pole { eps, .. }, _) | (Form::Log { eps, .. }, _) if !(*eps >= 0.0) => return bad("eps must be >= 0"),
            (Form::Grid { step, values, order, .. }, _) => {
                if self.l != 1 || !(*step > 0.0) || values.len() <= *order || *order == 0 {
                    return bad("grid form needs l = 1, step > 0, order >= 1 and more than order samples");
                }
            }
            _ => {}
        }
        if self.envelope.is_none() && !matches!(self.form, Form::Pole { .. }) {
            return bad("envelope required");
        }
        if let Some(b) = self.envelope {
            if !(0.0 < b.r1 && b.r1 < b.r2) {
                return bad("envelope needs 0 < r1 < r2");
            }
        }
        Ok(())
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.envelope.map(|b| b.r2)
    }

    fn form_value(&self, q: &[C]) -> C {
        match &self.form {
            Form::Bump => C::new(1.0, 0.0),
            Form::Pole { q0, eps } => 1.0 / (q[0] - q0 + C::i() * eps),
            Form::Log { q0, eps } => (q[0] - q0 + C::i() * eps).ln(),
            Form::Grid { start, step, values, order } => C::new(lagrange(*start, *step, values, *order, q[0].re), 0.0),
        }
    }

    /// `F(q)` at real `q`.
    pub fn eval(&self, q: &[f64]) -> C {
        let qc: Vec<C> = q.iter().map(|&x| C::new(x, 0.0)).collect();
        let env = self.envelope.map_or(1.0, |b| b.eval(q.iter().map(|x| x * x).sum::<f64>().sqrt()));
        if env == 0.0 {
            return C::new(0.0, 0.0);
        }
        env * self.form_value(&qc)
    }

    /// Analytic continuation where the model provides one: the bare pole
    /// everywhere off its singularity, and any analytic form inside the
    /// plateau of the envelope.
    pub fn eval_complex(&self, q: &[C]) -> Option<C> {
        if matches!(self.form, Form::Grid { .. }) {
            return None;
        }
        match self.envelope {
            None => Some(self.form_value(q)),
            Some(b) => {
                let re: f64 = q.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
                let im: f64 = q.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
                (re + im < b.r1).then(|| b.amplitude * self.form_value(q))
            }
        }
    }

    /// `T(v, 0)` in closed form for the bare pole:
    /// `−2πi θ(v₁) e^{−εv₁} e^{−iq₀v₁}`.
    pub fn closed_form_t0(&self, v: &[f64]) -> Option<C> {
        match (&self.form, self.envelope, self.l) {
            (Form::Pole { q0, eps }, None, 1) => {
                let th = if v[0] > 0.0 {
                    1.0
                } else if v[0] == 0.0 {
                    0.5
                } else {
                    0.0
                };
                Some(-2.0 * PI * C::i() * th * (-eps * v[0]).exp() * C::from_polar(1.0, -q0 * v[0]))
            }
            _ => None,
        }
    }

    /// Per-axis breakpoints and graded refinements for the `q` rule.
    fn axis_segments(&self) -> Vec<Segment> {
        let b = self.envelope.expect("numeric transforms need an envelope");
        let mut pts = vec![-b.r2, -b.r1, 0.0, b.r1, b.r2];
        let mut singular = None;
        if let Form::Pole { q0, eps } | Form::Log { q0, eps } = self.form {
            if q0.abs() < b.r2 {
                pts.push(q0);
                singular = Some((q0, eps.max(1e-12)));
            }
        }
        if let Form::Grid { start, step, values, .. } = &self.form {
            for k in 0..values.len() {
                let x = start + k as f64 * step;
                if x.abs() < b.r2 && k % 8 == 0 {
                    pts.push(x);
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts.windows(2)
            .map(|w| {
                let graded = singular.and_then(|(q0, eps)| {
                    if w[0] == q0 {
                        Some(Grade::Left(eps))
                    } else if w[1] == q0 {
                        Some(Grade::Right(eps))
                    } else {
                        None
                    }
                });
                Segment { a: w[0], b: w[1], graded }
            })
            .collect()
    }
}

fn lagrange(start: f64, step: f64, values: &[f64], order: usize, x: f64) -> f64 {
    let n = values.len();
    let s = (x - start) / step;
    if s < 0.0 || s > (n - 1) as f64 {
        return 0.0;
    }
    let lo = ((s - order as f64 / 2.0).floor().max(0.0) as usize).min(n - 1 - order);
    let mut acc = 0.0;
    for i in lo..=lo + order {
        let mut w = 1.0;
        for j in lo..=lo + order {
            if j != i {
                w *= (s - j as f64) / (i as f64 - j as f64);
            }
        }
        acc += w * values[i];
    }
    acc
}

#[derive(Clone, Copy, Debug)]
enum Grade {
    Left(f64),
    Right(f64),
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    graded: Option<Grade>,
}

/// Polynomial `μ(q) = Σ c Π q_j^{e_j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuForm {
    pub l: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl MuForm {
    /// `Σ c_j q_j²`.
    pub fn quadratic(c: &[f64]) -> Self {
        let l = c.len();
        let terms = c
            .iter()
            .enumerate()
            .map(|(j, &cj)| {
                let mut e = vec![0; l];
                e[j] = 2;
                (cj, e)
            })
            .collect();
        Self { l, terms }
    }

    pub fn eval(&self, q: &[C]) -> C {
        self.terms
            .iter()
            .map(|(c, e)| q.iter().zip(e).fold(C::new(*c, 0.0), |acc, (z, &k)| acc * z.powu(k)))
            .sum()
    }

    pub fn eval_real(&self, q: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| q.iter().zip(e).fold(*c, |acc, (x, &k)| acc * x.powi(k as i32)))
            .sum()
    }

    /// Checks `μ(0) = 0` and `μ ≥ 0` on a grid over the model's support.
    pub fn validate(&self, model: &ScatteringModel) -> Result<(), TransformError> {
        let bad = |m: String| Err(TransformError::Invalid(m));
        if self.l != model.l || self.terms.iter().any(|(_, e)| e.len() != self.l) {
            return bad("mu dimension differs from the model".into());
        }
        if self.terms.iter().any(|(c, e)| *c != 0.0 && e.iter().all(|&k| k == 0)) {
            return bad("mu(0) must vanish".into());
        }
        if let Some(r) = model.support_radius() {
            let n = 41;
            let g = |i: usize| -r + 2.0 * r * i as f64 / (n - 1) as f64;
            let check = |q: &[f64]| self.eval_real(q) < -1e-12;
            let neg = if self.l == 1 {
                (0..n).find(|&i| check(&[g(i)])).map(|i| vec![g(i)])
            } else {
                (0..n * n).find(|&k| check(&[g(k / n), g(k % n)])).map(|k| vec![g(k / n), g(k % n)])
            };
            if let Some(q) = neg {
                return bad(format!("mu negative at q = {q:?}"));
            }
        }
        Ok(())
    }
}

/// `ρ(q, q′)` with `μ(q) − μ(q′) = ρ·(q − q′)`, built term by term from
/// `xᵃ − yᵃ = (x − y) Σ_k x^k y^{a−1−k}` and telescoping over coordinates.
pub fn hefer_factor(mu: &MuForm, q: &[C], q2: &[C]) -> Vec<C> {
    let l = mu.l;
    let mut rho = vec![C::new(0.0, 0.0); l];
    for (c, e) in &mu.terms {
        for j in 0..l {
            if e[j] == 0 {
                continue;
            }
            let mut pre = C::new(*c, 0.0);
            for i in 0..j {
                pre *= q2[i].powu(e[i]);
            }
            for i in j + 1..l {
                pre *= q[i].powu(e[i]);
            }
            let a = e[j];
            let s: C = (0..a).map(|k| q[j].powu(k) * q2[j].powu(a - 1 - k)).sum();
            rho[j] += pre * s;
        }
    }
    rho
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformOptions {
    pub nodes_per_period: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Edge-to-peak ratio below which a truncated `v` box is accepted.
    pub truncation_tol: f64,
    pub max_radius: f64,
    /// Multiplies node counts.
    pub refine: usize,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self { nodes_per_period: 16.0, min_nodes: 24, max_nodes: 100_000, truncation_tol: 1e-10, max_radius: 4096.0, refine: 1 }
    }
}

impl TransformOptions {
    fn count(&self, len: f64, rate: f64, width: f64) -> Result<usize, TransformError> {
        let by_phase = (self.nodes_per_period * len * rate / (2.0 * PI)).ceil() as usize;
        let by_width = (8.0 * len / width).ceil() as usize;
        let n = self.min_nodes.max(by_phase).max(by_width) * self.refine.max(1);
        if n > self.max_nodes {
            return Err(TransformError::Quadrature { needed: n, limit: self.max_nodes });
        }
        Ok(n)
    }
}

/// One-axis `q` rule good for phases `e^{−iqv}` with `|v| ≤ vmax` and
/// Gaussian damping of width `width`.
fn q_axis_rule(model: &ScatteringModel, vmax: f64, width: f64, o: &TransformOptions) -> Result<Vec<(f64, f64)>, TransformError> {
    let mut out = Vec::new();
    for s in model.axis_segments() {
        let len = s.b - s.a;
        let n = o.count(len, vmax, width)?;
        match s.graded {
            None => out.extend(panel(s.a, s.b, n)),
            Some(Grade::Left(eps)) => out.extend(graded_toward(s.a, s.b, eps / 4.0, 2.0, n.min(64).max(o.min_nodes))),
            Some(Grade::Right(eps)) => {
                out.extend(graded_toward(-s.b, -s.a, eps / 4.0, 2.0, n.min(64).max(o.min_nodes)).into_iter().map(|(x, w)| (-x, w)))
            }
        }
    }
    Ok(out)
}

/// Tensor nodes `(q, w)` over the support.
fn q_nodes(model: &ScatteringModel, vmax: f64, width: f64, o: &TransformOptions) -> Result<Vec<(Vec<f64>, f64)>, TransformError> {
    let ax = q_axis_rule(model, vmax, width, o)?;
    Ok(match model.l {
        1 => ax.iter().map(|&(x, w)| (vec![x], w)).collect(),
        _ => ax.iter().flat_map(|&(x, wx)| ax.iter().map(move |&(y, wy)| (vec![x, y], wx * wy))).collect(),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_numeric(model: &ScatteringModel, mu: &MuForm) -> Result<(), TransformError> {
    model.validate()?;
    if model.envelope.is_none() {
        return Err(TransformError::Invalid("numeric transforms need an envelope".into()));
    }
    mu.validate(model)
}

/// `T(v, r)` by quadrature over the support of `F`.
pub fn forward_t(model: &ScatteringModel, mu: &MuForm, v: &[f64], r: f64, o: &TransformOptions) -> Result<C, TransformError> {
    check_numeric(model, mu)?;
    if !(r >= 0.0) {
        return Err(TransformError::Invalid("r must be >= 0".into()));
    }
    let width = if r > 0.0 { 1.0 / r.sqrt() } else { f64::INFINITY };
    let nodes = q_nodes(model, norm(v), width, o)?;
    Ok(nodes
        .par_iter()
        .map(|(q, w)| *w * model.eval(q) * (-r * mu.eval_real(q)).exp() * C::from_polar(1.0, -dot(q, v)))
        .sum())
}

/// `T(·, 0)` tabulated on a tensor Gauss grid over `[−R, R]ˡ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TTable {
    pub l: usize,
    pub axis: Vec<(f64, f64)>,
    pub values: Vec<C>,
    pub radius: f64,
    /// Largest `|T|` on the box edge over the peak.
    pub edge_ratio: f64,
    /// Largest `|q|` the grid resolves.
    pub max_q: f64,
}

fn edge_probes(l: usize, r: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for s in [1.0, 0.97, 0.93] {
        let x = s * r;
        if l == 1 {
            out.push(vec![x]);
            out.push(vec![-x]);
        } else {
            for k in 0..16 {
                let t = -1.0 + 2.0 * k as f64 / 15.0;
                out.extend([vec![x, t * r], vec![-x, t * r], vec![t * r, x], vec![t * r, -x]]);
            }
        }
    }
    out
}

/// Largest `|T(v, 0)|` over the probes near the edge of `[−R, R]ˡ`.
fn edge_value(model: &ScatteringModel, radius: f64, o: &TransformOptions) -> Result<f64, TransformError> {
    let qax = q_axis_rule(model, radius, f64::INFINITY, o)?;
    let probes = edge_probes(model.l, radius);
    if model.l == 1 {
        let fw: Vec<C> = qax.iter().map(|&(q, w)| w * model.eval(&[q])).collect();
        return Ok(probes
            .iter()
            .map(|v| qax.iter().zip(&fw).map(|(&(q, _), f)| f * C::from_polar(1.0, -q * v[0])).sum::<C>().norm())
            .fold(0.0, f64::max));
    }
    // separable: contract the second axis once per distinct coordinate
    let mut ys: Vec<f64> = probes.iter().map(|v| v[1]).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let n = qax.len();
    let f: Vec<C> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (k / n, k % n);
            qax[a].1 * qax[b].1 * model.eval(&[qax[a].0, qax[b].0])
        })
        .collect();
    let g: Vec<Vec<C>> = ys
        .par_iter()
        .map(|&y| {
            let ph: Vec<C> = qax.iter().map(|&(q, _)| C::from_polar(1.0, -q * y)).collect();
            (0..n).map(|a| f[a * n..(a + 1) * n].iter().zip(&ph).map(|(x, p)| x * p).sum()).collect()
        })
        .collect();
    Ok(probes
        .iter()
        .map(|v| {
            let gy = &g[ys.binary_search_by(|y| y.total_cmp(&v[1])).unwrap()];
            qax.iter().zip(gy).map(|(&(q, _), x)| x * C::from_polar(1.0, -q * v[0])).sum::<C>().norm()
        })
        .fold(0.0, f64::max))
}

/// Samples `T(v, 0)` on a box whose half-width doubles until the edge
/// values fall below `truncation_tol` of the peak.
pub fn sample_t0(model: &ScatteringModel, mu: &MuForm, o: &TransformOptions) -> Result<TTable, TransformError> {
    check_numeric(model, mu)?;
    let l = model.l;
    let peak = forward_t(model, mu, &vec![0.0; l], 0.0, o)?.norm().max(1e-300);
    let mut radius = 8.0;
    let edge_ratio = loop {
        let ratio = edge_value(model, radius, o)? / peak;
        if ratio < o.truncation_tol {
            break ratio;
        }
        radius *= 2.0;
        if radius > o.max_radius {
            return Err(TransformError::BoundaryDecay { radius: radius / 2.0, ratio });
        }
    };
    let support = model.support_radius().unwrap();
    let max_q = support + 1.0;
    let rate = support + max_q;
    let mut axis = Vec::new();
    let plen = 8.0;
    let np = (2.0 * radius / plen).ceil() as usize;
    for k in 0..np {
        let a = -radius + k as f64 * 2.0 * radius / np as f64;
        let b = a + 2.0 * radius / np as f64;
        axis.extend(panel(a, b, o.count(b - a, rate, f64::INFINITY)?));
    }
    let qax = q_axis_rule(model, radius, f64::INFINITY, o)?;
    let values = if l == 1 {
        let fw: Vec<C> = qax.iter().map(|&(q, w)| w * model.eval(&[q])).collect();
        axis.par_iter()
            .map(|&(v, _)| qax.iter().zip(&fw).map(|(&(q, _), f)| f * C::from_polar(1.0, -q * v)).sum())
            .collect()
    } else {
        use nalgebra::DMatrix;
        let e = DMatrix::<C>::from_fn(axis.len(), qax.len(), |i, a| C::from_polar(1.0, -qax[a].0 * axis[i].0));
        let f = DMatrix::<C>::from_fn(qax.len(), qax.len(), |a, b| {
            C::new(qax[a].1 * qax[b].1, 0.0) * model.eval(&[qax[a].0, qax[b].0])
        });
        let t = &e * f * e.transpose();
        (0..axis.len()).flat_map(|i| (0..axis.len()).map(move |j| (i, j))).map(|(i, j)| t[(i, j)]).collect()
    };
    Ok(TTable { l, axis, values, radius, edge_ratio, max_q })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InverseEstimate {
    pub value: C,
    /// `edge_ratio · peak · (2R)ˡ / (2π)ˡ`, a crude truncation bound.
    pub truncation_bound: f64,
}

/// `(2π)^{−l} Σ w e^{iq·v} T(v, 0)` over the table.
pub fn inverse_f(t: &TTable, q: &[f64]) -> InverseEstimate {
    let n = t.axis.len();
    let value: C = if t.l == 1 {
        t.axis.iter().zip(&t.values).map(|(&(v, w), tv)| w * tv * C::from_polar(1.0, q[0] * v)).sum()
    } else {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let (vi, wi) = t.axis[i];
                let row: C = (0..n)
                    .map(|j| {
                        let (vj, wj) = t.axis[j];
                        wj * t.values[i * n + j] * C::from_polar(1.0, q[1] * vj)
                    })
                    .sum();
                wi * row * C::from_polar(1.0, q[0] * vi)
            })
            .sum()
    };
    let norm = (2.0 * PI).powi(t.l as i32);
    let peak = t.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    InverseEstimate { value: value / norm, truncation_bound: t.edge_ratio * peak * (2.0 * t.radius).powi(t.l as i32) / norm }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitResult {
    pub f1: C,
    pub f2: C,
    pub radius: f64,
}

impl SplitResult {
    pub fn total(&self) -> C {
        self.f1 + self.f2
    }
}

/// `F1 = (2π)^{−l} ∫ dv e^{iqv} e^{γ₀|v|μ(q)} T(v, γ₀|v|)` and
/// `F2 = γ₀ (2π)^{−l} ∫ dv e^{iqv} e^{γ₀|v|μ(q)} v̂·H(q, v, γ₀|v|)` with
/// `H = −i ∫ dq′ F(q′) e^{−iq′v} e^{−rμ(q′)} ρ(q, q′)`. One-dimensional.
pub fn split_f(model: &ScatteringModel, mu: &MuForm, gamma0: f64, q: &[C], o: &TransformOptions) -> Result<SplitResult, TransformError> {
    check_numeric(model, mu)?;
    if model.l != 1 {
        return Err(TransformError::Invalid("split_f is one-dimensional".into()));
    }
    if !(gamma0 > 0.0) {
        return Err(TransformError::Invalid("gamma0 must be positive".into()));
    }
    let muq = mu.eval(q);
    let integrand = |v: f64, nodes: &[(f64, f64)], fw: &[C], rho: &[C]| -> (C, C) {
        let r = gamma0 * v.abs();
        let mut t = C::new(0.0, 0.0);
        let mut h = C::new(0.0, 0.0);
        for ((&(qp, _), f), rh) in nodes.iter().zip(fw).zip(rho) {
            let e = f * (-r * mu.eval_real(&[qp])).exp() * C::from_polar(1.0, -qp * v);
            t += e;
            h += e * rh;
        }
        h *= -C::i();
        let g = C::from_polar(1.0, 0.0) * (q[0] * C::i() * v + r * muq).exp();
        let sign = if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
        (g * t, gamma0 * g * sign * h)
    };
    let mut radius: f64 = 16.0;
    let rate = q[0].re.abs() + model.support_radius().unwrap();
    loop {
        let nodes = q_axis_rule(model, radius, 1.0 / (gamma0 * radius).sqrt(), o)?;
        let fw: Vec<C> = nodes.iter().map(|&(qp, w)| w * model.eval(&[qp])).collect();
        let rho: Vec<C> = nodes.iter().map(|&(qp, _)| hefer_factor(mu, q, &[C::new(qp, 0.0)])[0]).collect();
        let at = |v: f64| integrand(v, &nodes, &fw, &rho);
        let peak = [0.5, 1.0, 2.0].iter().map(|&v| at(v).0.norm() + at(-v).0.norm()).fold(0.0, f64::max).max(1e-300);
        let edge = [1.0, 0.97, 0.93]
            .iter()
            .flat_map(|s| [s * radius, -s * radius])
            .map(|v| {
                let (a, b) = at(v);
                a.norm() + b.norm()
            })
            .fold(0.0, f64::max);
        let ratio = edge / peak;
        if ratio < o.truncation_tol {
            let plen = 4.0;
            let np = (radius / plen).ceil() as usize;
            let mut vn = Vec::new();
            for k in 0..np {
                let a = k as f64 * radius / np as f64;
                let b = a + radius / np as f64;
                let pn = panel(a, b, o.count(b - a, rate, f64::INFINITY)?);
                vn.extend(pn.iter().map(|&(v, w)| (-v, w)));
                vn.extend(pn);
            }
            let (f1, f2) = vn
                .par_iter()
                .map(|&(v, w)| {
                    let (a, b) = at(v);
                    (w * a, w * b)
                })
                .reduce(|| (C::new(0.0, 0.0), C::new(0.0, 0.0)), |x, y| (x.0 + y.0, x.1 + y.1));
            return Ok(SplitResult { f1: f1 / (2.0 * PI), f2: f2 / (2.0 * PI), radius });
        }
        radius *= 2.0;
        if radius > o.max_radius {
            return Err(TransformError::GrowthDomination { radius: radius / 2.0, ratio });
        }
    }
}

/// Spherical cap around `center` of angular radius `theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleSpec {
    pub center: Vec<f64>,
    pub theta: f64,
}

impl HoleSpec {
    pub fn validate(&self, l: usize) -> Result<(), TransformError> {
        if self.center.len() != l || (norm(&self.center) - 1.0).abs() > 1e-9 {
            return Err(TransformError::Invalid("hole centre must be a unit vector of dimension l".into()));
        }
        if !(self.theta > 0.0 && self.theta < PI / 2.0) {
            return Err(TransformError::Invalid("hole radius must lie in (0, π/2)".into()));
        }
        Ok(())
    }

    fn center_angle(&self) -> f64 {
        if self.center.len() == 1 {
            0.0
        } else {
            self.center[1].atan2(self.center[0])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeOptions {
    /// Largest frequency present in `T(·, 0)`.
    pub bandwidth: f64,
    /// `Im q·v > margin |Im q||v|` is required on the whole cap.
    pub margin: f64,
    pub transform: TransformOptions,
}

impl Default for ConeOptions {
    fn default() -> Self {
        Self { bandwidth: 2.0, margin: 0.0, transform: TransformOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeSplit {
    /// Cap part at complex `q`; absent when `Im q` is outside the cone.
    pub f_h: Option<C>,
    /// Complement part at `Re q`.
    pub f_a: C,
    pub convergent: bool,
    /// `α` in the damping factor `exp(−α|Im q||v|)` on the cap.
    pub damping: f64,
    pub diagnostic: Option<String>,
}

fn radial_rule(radius: f64, rate: f64, o: &TransformOptions) -> Result<Vec<(f64, f64)>, TransformError> {
    let plen = 4.0;
    let np = (radius / plen).ceil().max(1.0) as usize;
    let mut out = Vec::new();
    for k in 0..np {
        let a = k as f64 * radius / np as f64;
        let b = a + radius / np as f64;
        out.extend(panel(a, b, o.count(b - a, rate, f64::INFINITY)?));
    }
    Ok(out)
}

/// Integral of `e^{iqv} T(v)` over the directions `dirs` (angles in the
/// plane, or ±1 on the line) out to the radius where the integrand dies.
fn sector_integral<Tf>(t: &Tf, l: usize, q: &[C], arcs: &[(f64, f64)], o: &ConeOptions) -> Result<C, TransformError>
where
    Tf: Fn(&[f64]) -> C + Sync,
{
    let point = |rad: f64, phi: f64| -> Vec<f64> {
        if l == 1 {
            vec![rad * phi.cos().signum()]
        } else {
            vec![rad * phi.cos(), rad * phi.sin()]
        }
    };
    let f = |v: &[f64]| {
        let ph: C = q.iter().zip(v).map(|(z, x)| z * x).sum();
        (C::i() * ph).exp() * t(v)
    };
    let probe_phis: Vec<f64> = arcs
        .iter()
        .flat_map(|&(a, b)| (0..9).map(move |k| a + (b - a) * k as f64 / 8.0))
        .collect();
    let peak = [0.25, 1.0, 2.0]
        .iter()
        .flat_map(|&r| probe_phis.iter().map(move |&p| (r, p)))
        .map(|(r, p)| t(&point(r, p)).norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut radius = 8.0;
    loop {
        let edge = [1.0, 0.97, 0.93]
            .iter()
            .flat_map(|&s| probe_phis.iter().map(move |&p| (s, p)))
            .map(|(s, p)| f(&point(s * radius, p)).norm())
            .fold(0.0, f64::max);
        if edge / peak < o.transform.truncation_tol {
            break;
        }
        radius *= 2.0;
        if radius > o.transform.max_radius {
            return Err(TransformError::BoundaryDecay { radius: radius / 2.0, ratio: edge / peak });
        }
    }
    let qre: f64 = q.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
    let rate = qre + o.bandwidth;
    let rr = radial_rule(radius, rate, &o.transform)?;
    let norm = (2.0 * PI).powi(l as i32);
    let mut total = C::new(0.0, 0.0);
    for &(a, b) in arcs {
        let angular: Vec<(f64, f64)> = if l == 1 {
            vec![(a, 1.0)]
        } else {
            panel(a, b, o.transform.count(b - a, radius * rate, f64::INFINITY)?)
        };
        total += rr
            .par_iter()
            .map(|&(rad, wr)| {
                let jac = if l == 1 { 1.0 } else { rad };
                angular.iter().map(|&(p, wp)| wp * f(&point(rad, p))).sum::<C>() * (wr * jac)
            })
            .sum::<C>();
    }
    Ok(total / norm)
}

/// Splits the inversion integral into the hole cap `V(H)` and the rest
/// `V(A)`. `F_H` is evaluated at complex `q` only inside the cone where
/// `e^{iqv}` decays on the whole cap; `F_A` at `Re q`.
pub fn cone_split<Tf>(t: &Tf, l: usize, hole: &HoleSpec, q: &[C], o: &ConeOptions) -> Result<ConeSplit, TransformError>
where
    Tf: Fn(&[f64]) -> C + Sync,
{
    hole.validate(l)?;
    if q.len() != l {
        return Err(TransformError::Invalid("q has the wrong dimension".into()));
    }
    let (cap, rest): (Vec<(f64, f64)>, Vec<(f64, f64)>) = if l == 1 {
        let c = if hole.center[0] > 0.0 { 0.0 } else { PI };
        (vec![(c, c)], vec![(PI - c, PI - c)])
    } else {
        let c = hole.center_angle();
        (vec![(c - hole.theta, c + hole.theta)], vec![(c + hole.theta, c + 2.0 * PI - hole.theta)])
    };
    let im: Vec<f64> = q.iter().map(|z| z.im).collect();
    let im_n = norm(&im);
    // worst-case cosine between Im q and any cap direction
    let damping = if im_n == 0.0 {
        0.0
    } else if l == 1 {
        (im[0] * hole.center[0]).signum()
    } else {
        let a = (im[1].atan2(im[0]) - hole.center_angle()).rem_euclid(2.0 * PI);
        let a = if a > PI { 2.0 * PI - a } else { a };
        (a + hole.theta).min(PI).cos()
    };
    let convergent = im_n > 0.0 && damping > o.margin;
    let qr: Vec<C> = q.iter().map(|z| C::new(z.re, 0.0)).collect();
    let f_a = sector_integral(t, l, &qr, &rest, o)?;
    let (f_h, diagnostic) = if convergent {
        (Some(sector_integral(t, l, q, &cap, o)?), None)
    } else {
        (None, Some(format!("Im q = {im:?} is outside the cone of the hole (worst cosine {damping:.3})")))
    };
    Ok(ConeSplit { f_h, f_a, convergent, damping, diagnostic })
}

/// `lim_{η→0⁺}` of `F_H(q + iηd) + F_A(q)` for real `q` and a direction
/// `d` in the cone, by Richardson extrapolation from `η` and `2η`.
pub fn boundary_value<Tf>(t: &Tf, l: usize, hole: &HoleSpec, q: &[f64], eta: f64, o: &ConeOptions) -> Result<C, TransformError>
where
    Tf: Fn(&[f64]) -> C + Sync,
{
    let at = |h: f64| -> Result<C, TransformError> {
        let qc: Vec<C> = q.iter().zip(&hole.center).map(|(x, d)| C::new(*x, h * d)).collect();
        let s = cone_split(t, l, hole, &qc, o)?;
        Ok(s.f_h.expect("centre direction lies in the cone") + s.f_a)
    };
    Ok(2.0 * at(eta)? - at(2.0 * eta)?)
}

/// `|∂_y f − i ∂_x f|` from the four-point stencil at `z`.
pub fn cauchy_riemann_residual<Ff: Fn(C) -> C>(f: Ff, z: C, h: f64) -> f64 {
    let dx = (f(z + h) - f(z - h)) / (2.0 * h);
    let dy = (f(z + C::i() * h) - f(z - C::i() * h)) / (2.0 * h);
    (dy - C::i() * dx).norm()
}
