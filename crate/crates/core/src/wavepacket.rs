//! Position-space wave functions of free mass-shell packets, their on-cone
//! limit, off-cone fall-off, and the contour-shift certificate for the
//! exponential rate.
//!
//! The packet in momentum space is `χ(p) exp(−γτ|p − p̄|²)` on the positive
//! energy sheet, and
//!
//! ```text
//! Ψ̃(x) = ∫ dᵈp / ((2π)ᵈ 2ω) χ(p) e^{−γτ|p−p̄|²} e^{−i(ω x⁰ − p·x)}
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{fit_falloff, FalloffFit, FitError, FitOptions};
use crate::kinematics::{dot3, norm3, FourVector};
use crate::quadrature::{panel, periodic};

#[derive(Debug, Error, PartialEq)]
pub enum PacketError {
    #[error("invalid packet: {0}")]
    Invalid(String),
    #[error("quadrature would need {needed} nodes per axis (limit {limit}); recommended grid size {needed}")]
    GridTooCoarse { needed: usize, limit: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

fn g(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 inside `r1`, 0 beyond `r2`, C∞ in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub r1: f64,
    pub r2: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Bump {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2, amplitude: 1.0 }
    }

    /// Value at distance `r` from the centre.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= self.r1 {
            return self.amplitude;
        }
        if r >= self.r2 {
            return 0.0;
        }
        let s = (r - self.r1) / (self.r2 - self.r1);
        let (a, b) = (g(1.0 - s), g(s));
        self.amplitude * a / (a + b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumWavePacket {
    pub mass: f64,
    pub pbar: FourVector,
    pub gamma: f64,
    pub chi: Bump,
    pub spatial_dim: u8,
}

impl MomentumWavePacket {
    /// Packet at rest, `p̄ = (m, 0, 0, 0)`.
    pub fn at_rest(mass: f64, r1: f64, r2: f64, gamma: f64) -> Self {
        Self { mass, pbar: FourVector::new(mass, 0.0, 0.0, 0.0), gamma, chi: Bump::new(r1, r2), spatial_dim: 3 }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), PacketError> {
        let bad = |m: &str| Err(PacketError::Invalid(m.to_string()));
        if !(self.mass > 0.0) {
            return bad("mass must be positive");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be non-negative");
        }
        if !(0.0 < self.chi.r1 && self.chi.r1 < self.chi.r2) {
            return bad("need 0 < r1 < r2");
        }
        if self.spatial_dim != 1 && self.spatial_dim != 3 {
            return bad("spatial_dim must be 1 or 3");
        }
        if self.pbar.t <= 0.0 || (self.pbar.lorentz_square() - self.mass * self.mass).abs() > 1e-9 {
            return bad("pbar must be on shell with positive energy");
        }
        if self.spatial_dim == 1 && (self.pbar.y != 0.0 || self.pbar.z != 0.0) {
            return bad("one-dimensional packets move along x");
        }
        Ok(())
    }

    fn omega(&self, p: [f64; 3]) -> f64 {
        (self.mass * self.mass + dot3(p, p)).sqrt()
    }

    /// Momentum-space amplitude `χ(p) exp(−γτ|p − p̄|²)`.
    pub fn momentum_amplitude(&self, p: [f64; 3], tau: f64) -> f64 {
        let c = self.pbar.spatial();
        let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        let r2 = dot3(d, d);
        self.chi.eval(r2.sqrt()) * (-self.gamma * tau * r2).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub nodes_per_period: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Multiplies every node count; 2 halves the spacing.
    pub refine: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { nodes_per_period: 16.0, min_nodes: 48, max_nodes: 200_000, refine: 1 }
    }
}

impl QuadratureOptions {
    fn count(&self, length: f64, rate: f64, gauss_width: f64) -> Result<usize, PacketError> {
        let periods = length * rate / (2.0 * PI);
        let by_phase = (self.nodes_per_period * periods).ceil() as usize;
        let by_gauss = (8.0 * length / gauss_width).ceil() as usize;
        let n = self.min_nodes.max(by_phase).max(by_gauss) * self.refine.max(1);
        if n > self.max_nodes {
            return Err(PacketError::GridTooCoarse { needed: n, limit: self.max_nodes });
        }
        Ok(n)
    }
}

pub fn evaluate_position(packet: &MomentumWavePacket, x: FourVector, tau: f64) -> Result<Complex64, PacketError> {
    evaluate_position_with(packet, x, tau, &QuadratureOptions::default())
}

pub fn evaluate_position_with(
    packet: &MomentumWavePacket,
    x: FourVector,
    tau: f64,
    q: &QuadratureOptions,
) -> Result<Complex64, PacketError> {
    packet.validate()?;
    if packet.gamma > 0.0 && !(tau > 0.0) {
        return Err(PacketError::Precondition("tau must be positive when gamma > 0".into()));
    }
    let width = if packet.gamma > 0.0 { 1.0 / (packet.gamma * tau).sqrt() } else { f64::INFINITY };
    if packet.spatial_dim == 1 {
        eval_1d(packet, x, tau, width, q)
    } else if norm3(packet.pbar.spatial()) == 0.0 {
        eval_radial(packet, x, tau, width, q)
    } else {
        eval_spherical(packet, x, tau, width, q)
    }
}

fn radial_breaks(chi: &Bump) -> [(f64, f64); 2] {
    [(0.0, chi.r1), (chi.r1, chi.r2)]
}

fn eval_1d(p: &MomentumWavePacket, x: FourVector, tau: f64, width: f64, q: &QuadratureOptions) -> Result<Complex64, PacketError> {
    let c = p.pbar.x;
    let (r1, r2) = (p.chi.r1, p.chi.r2);
    let rate = x.t.abs() + x.x.abs();
    let mut sum = Complex64::new(0.0, 0.0);
    for (a, b) in [(c - r2, c - r1), (c - r1, c), (c, c + r1), (c + r1, c + r2)] {
        let n = q.count(b - a, rate, width)?;
        for (pk, w) in panel(a, b, n) {
            let om = p.omega([pk, 0.0, 0.0]);
            let amp = p.momentum_amplitude([pk, 0.0, 0.0], tau) / (2.0 * om);
            sum += w * amp * Complex64::from_polar(1.0, -(om * x.t - pk * x.x));
        }
    }
    Ok(sum / (2.0 * PI))
}

/// `p̄` at rest: the angular integral is `4π sin(r|x|)/(r|x|)`.
fn eval_radial(p: &MomentumWavePacket, x: FourVector, tau: f64, width: f64, q: &QuadratureOptions) -> Result<Complex64, PacketError> {
    let xs = x.spatial_norm();
    let vmax = p.chi.r2 / p.omega([p.chi.r2, 0.0, 0.0]);
    let rate = x.t.abs() * vmax + xs;
    let mut nodes = Vec::new();
    for (a, b) in radial_breaks(&p.chi) {
        nodes.extend(panel(a, b, q.count(b - a, rate, width)?));
    }
    let sum: Complex64 = nodes
        .par_iter()
        .map(|&(r, w)| {
            let om = p.omega([r, 0.0, 0.0]);
            let ang = if xs == 0.0 { 1.0 } else { sinc(r * xs) };
            let amp = p.momentum_amplitude([r, 0.0, 0.0], tau);
            w * r * r * amp * ang / (2.0 * om) * Complex64::from_polar(1.0, -om * x.t)
        })
        .sum();
    Ok(sum * 4.0 * PI / (2.0 * PI).powi(3))
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

fn orthonormal_frame(axis: [f64; 3]) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let n = norm3(axis);
    let e3 = if n > 0.0 { [axis[0] / n, axis[1] / n, axis[2] / n] } else { [0.0, 0.0, 1.0] };
    let t = if e3[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = dot3(t, e3);
    let mut e1 = [t[0] - d * e3[0], t[1] - d * e3[1], t[2] - d * e3[2]];
    let n1 = norm3(e1);
    e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
    let e2 = [
        e3[1] * e1[2] - e3[2] * e1[1],
        e3[2] * e1[0] - e3[0] * e1[2],
        e3[0] * e1[1] - e3[1] * e1[0],
    ];
    (e1, e2, e3)
}

/// Spherical coordinates around `p̄`, polar axis along `x`.
fn eval_spherical(p: &MomentumWavePacket, x: FourVector, tau: f64, width: f64, q: &QuadratureOptions) -> Result<Complex64, PacketError> {
    let pb = p.pbar.spatial();
    let xs = x.spatial();
    let (e1, e2, e3) = orthonormal_frame(xs);
    let r2 = p.chi.r2;
    let xn = norm3(xs);
    let rate_r = x.t.abs() + xn;
    let rate_c = r2 * (x.t.abs() + xn);
    let pb_perp = {
        let d = dot3(pb, e3);
        norm3([pb[0] - d * e3[0], pb[1] - d * e3[1], pb[2] - d * e3[2]])
    };
    let rate_phi = x.t.abs() * r2 * pb_perp / p.mass;
    let mut radial = Vec::new();
    for (a, b) in radial_breaks(&p.chi) {
        radial.extend(panel(a, b, q.count(b - a, rate_r, width)?));
    }
    let cos_nodes = panel(-1.0, 1.0, q.count(2.0, rate_c, f64::INFINITY)?);
    let phi_nodes = if rate_phi == 0.0 {
        vec![(0.0, 2.0 * PI)]
    } else {
        let n = q.count(2.0 * PI, rate_phi, f64::INFINITY)?.max(8);
        periodic(n)
    };
    let sum: Complex64 = radial
        .par_iter()
        .map(|&(r, wr)| {
            let mut acc = Complex64::new(0.0, 0.0);
            let amp0 = p.chi.eval(r) * (-p.gamma * tau * r * r).exp();
            if amp0 == 0.0 {
                return acc;
            }
            for &(ct, wc) in &cos_nodes {
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                for &(phi, wp) in &phi_nodes {
                    let (s, c) = phi.sin_cos();
                    let mut pv = [0.0; 3];
                    for i in 0..3 {
                        pv[i] = pb[i] + r * (st * c * e1[i] + st * s * e2[i] + ct * e3[i]);
                    }
                    let om = p.omega(pv);
                    acc += wc * wp / (2.0 * om) * Complex64::from_polar(1.0, -(om * x.t - dot3(pv, xs)));
                }
            }
            acc * (wr * r * r * amp0)
        })
        .sum();
    Ok(sum / (2.0 * PI).powi(3))
}

/// `∫ dᵈp χ e^{−γτ|p−p̄|²} / ((2π)ᵈ 2ω)`, an upper bound on `|Ψ̃|`.
pub fn modulus_bound(packet: &MomentumWavePacket, tau: f64) -> Result<f64, PacketError> {
    Ok(evaluate_position(packet, FourVector::ZERO, tau)?.re)
}

/// `2m (2πiτ/m)^e e^{imτ}`, principal branch.
pub fn oncone_normalizer(m: f64, tau: f64, exponent: f64) -> Complex64 {
    let modulus = 2.0 * m * (2.0 * PI * tau / m).powf(exponent);
    Complex64::from_polar(modulus, m * tau + 0.5 * PI * exponent)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub exponent: f64,
    pub taus: Vec<f64>,
    /// `f(m,τ) Ψ̃(vτ)` as (re, im).
    pub scaled: Vec<(f64, f64)>,
    pub target: f64,
    pub errors: Vec<f64>,
    /// Largest error over the last decade of τ.
    pub final_error: f64,
    pub converged: bool,
}

pub const ONCONE_TOL: f64 = 0.05;

/// Checks `f(m,τ) Ψ̃(vτ) → χ(m v)` for a unit timelike `v`.
///
/// Errors are relative to the target when it is nonzero, absolute (in units
/// of the plateau value of χ) when `m v` lies outside the support.
pub fn oncone_limit_check(
    packet: &MomentumWavePacket,
    v: FourVector,
    taus: &[f64],
    exponent: f64,
) -> Result<ConvergenceReport, PacketError> {
    if packet.gamma != 0.0 {
        return Err(PacketError::Precondition("on-cone limit needs gamma = 0".into()));
    }
    if (v.lorentz_square() - 1.0).abs() > 1e-9 || v.t <= 0.0 {
        return Err(PacketError::Precondition("v must be future timelike with v² = 1".into()));
    }
    let m = packet.mass;
    let target = packet.momentum_amplitude(v.spatial().map(|c| m * c), 0.0);
    let scaled: Vec<Complex64> = taus
        .iter()
        .map(|&t| Ok(oncone_normalizer(m, t, exponent) * evaluate_position(packet, t * v, t)?))
        .collect::<Result<_, PacketError>>()?;
    let scale = if target.abs() > 0.0 { target.abs() } else { packet.chi.amplitude };
    let errors: Vec<f64> = scaled.iter().map(|s| (s - target).norm() / scale).collect();
    let tmax = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let final_error = taus
        .iter()
        .zip(&errors)
        .filter(|(t, _)| **t >= tmax / 10.0)
        .map(|(_, e)| *e)
        .fold(0.0, f64::max);
    Ok(ConvergenceReport {
        exponent,
        taus: taus.to_vec(),
        scaled: scaled.iter().map(|c| (c.re, c.im)).collect(),
        target,
        errors,
        final_error,
        converged: final_error <= ONCONE_TOL,
    })
}

/// `Ψ̃(uτ)` along a ray.
pub fn ray_samples(packet: &MomentumWavePacket, u: FourVector, taus: &[f64]) -> Result<Vec<Complex64>, PacketError> {
    taus.iter().map(|&t| evaluate_position(packet, t * u, t)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FalloffRun {
    pub taus: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub fit: FalloffFit,
}

/// Relative level below which `|Ψ̃|` is quadrature noise.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Fits the decay of `|Ψ̃(uτ)|` for the packet with width parameter `gamma`.
pub fn falloff_fit(
    packet: &MomentumWavePacket,
    u: FourVector,
    taus: &[f64],
    gamma: f64,
) -> Result<FalloffRun, PacketError> {
    let pk = packet.with_gamma(gamma);
    let magnitudes: Vec<f64> = ray_samples(&pk, u, taus)?.iter().map(|c| c.norm()).collect();
    // drop samples under the quadrature round-off floor
    let mut kept = (Vec::new(), Vec::new());
    for (&t, &m) in taus.iter().zip(&magnitudes) {
        if m > NOISE_FLOOR * modulus_bound(&pk, t)? {
            kept.0.push(t);
            kept.1.push(m);
        }
    }
    let fit = fit_falloff(&kept.0, &kept.1, gamma, &FitOptions::default())?;
    Ok(FalloffRun { taus: taus.to_vec(), magnitudes, fit })
}

#[derive(Debug, Error, PartialEq)]
pub enum CertificateError {
    #[error("direction inside the hole: |u| = {0} below the exclusion radius")]
    HoleExcluded(f64),
    #[error("no certificate at q = {q:?}: {reason}")]
    NoCertificate { q: [f64; 3], reason: String },
    #[error(transparent)]
    Packet(#[from] PacketError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub alpha: f64,
    /// Guaranteed exponential rate `αγ` of `|Ψ̃(uτ)|`.
    pub rate: f64,
    pub max_shift: f64,
    pub grid_points: usize,
}

pub const EPS_HOLE: f64 = 1e-3;

/// Decay rate of the integrand after shifting `q_∥ → q_∥ − i s`:
/// `γ(q² − s²) + s|u| − u⁰ Im ω`.
fn shifted_rate(gamma: f64, m: f64, u0: f64, un: f64, q_par: f64, q2: f64, s: f64) -> f64 {
    let w2 = Complex64::new(q2 - s * s + m * m, -2.0 * s * q_par);
    gamma * (q2 - s * s) + s * un - u0 * w2.sqrt().im
}

/// Certifies `|Ψ̃(uτ)| ≤ C e^{−αγτ}` by finding, at every real `q` with
/// `q² < α`, an imaginary shift along `u` of size below `m` that makes the
/// integrand decay at rate `αγ`. Requires the rest frame.
pub fn contour_certificate(
    packet: &MomentumWavePacket,
    u: FourVector,
    alpha: f64,
) -> Result<Certificate, CertificateError> {
    packet.validate()?;
    if norm3(packet.pbar.spatial()) != 0.0 {
        return Err(PacketError::Precondition("certificate is computed in the packet rest frame".into()).into());
    }
    let un = u.spatial_norm();
    if un < EPS_HOLE {
        return Err(CertificateError::HoleExcluded(un));
    }
    let m = packet.mass;
    let gamma = packet.gamma;
    if !(gamma > 0.0) || !(alpha > 0.0) {
        return Err(PacketError::Precondition("need gamma > 0 and alpha > 0".into()).into());
    }
    if alpha > packet.chi.r1 * packet.chi.r1 {
        return Err(CertificateError::NoCertificate {
            q: [alpha.sqrt(), 0.0, 0.0],
            reason: "region q² ≤ α leaves the plateau of χ".into(),
        });
    }
    let target = alpha * gamma;
    let rmax = alpha.sqrt();
    let n = 81;
    let mut max_shift: f64 = 0.0;
    let mut points = 0;
    for i in 0..n {
        let qp = -rmax + 2.0 * rmax * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let qt = rmax * j as f64 / (n - 1) as f64;
            let q2 = qp * qp + qt * qt;
            if q2 >= alpha {
                continue;
            }
            points += 1;
            let f = |s: f64| shifted_rate(gamma, m, u.t, un, qp, q2, s) - target;
            if f(0.0) >= 0.0 {
                continue;
            }
            let steps = 400;
            let mut found = None;
            for k in 1..steps {
                let s = m * k as f64 / steps as f64;
                if f(s) >= 0.0 {
                    let (mut lo, mut hi) = (m * (k - 1) as f64 / steps as f64, s);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if f(mid) >= 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    found = Some(hi);
                    break;
                }
            }
            match found {
                Some(s) => max_shift = max_shift.max(s),
                None => {
                    return Err(CertificateError::NoCertificate {
                        q: [qp, qt, 0.0],
                        reason: format!("required shift reaches the mass {m}"),
                    })
                }
            }
        }
    }
    Ok(Certificate { alpha, rate: target, max_shift, grid_points: points })
}
