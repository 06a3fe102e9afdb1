//! Classical free-particle statistics: phase-space densities, straight-line
//! propagation, the large-time density, region and overlap probabilities,
//! and the comparison of classical and quantum decay laws.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{FalloffFit, FitKind};
use crate::kinematics::{add3, dot3, norm3, scale3, sub3};
use crate::quadrature::panel;
use crate::wavepacket::{oncone_normalizer, Bump, MomentumWavePacket};

pub const BATCHES: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum ClassicalError {
    #[error("density cannot be normalized: {0}")]
    Unnormalizable(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("fits cover disjoint tau ranges {0:?} and {1:?}")]
    DisjointRanges((f64, f64), (f64, f64)),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxisProfile {
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
}

impl AxisProfile {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            AxisProfile::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            AxisProfile::Uniform { half_width } => rng.random_range(-half_width..=half_width),
        }
    }

    fn valid(&self) -> bool {
        match *self {
            AxisProfile::Gaussian { sigma } => sigma >= 0.0 && sigma.is_finite(),
            AxisProfile::Uniform { half_width } => half_width >= 0.0 && half_width.is_finite(),
        }
    }
}

/// `ρ(p) ∝ χ(|p − c|)² e^{−2γτ|p − c|²}`, the modulus squared of a packet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumDensity {
    pub chi: Bump,
    pub center: [f64; 3],
    pub gamma_tau: f64,
}

impl MomentumDensity {
    fn unnormalized(&self, p: [f64; 3]) -> f64 {
        let d = sub3(p, self.center);
        let r2 = dot3(d, d);
        let c = self.chi.eval(r2.sqrt());
        c * c * (-2.0 * self.gamma_tau * r2).exp()
    }

    fn norm(&self) -> f64 {
        let width = if self.gamma_tau > 0.0 { 0.5 / self.gamma_tau.sqrt() } else { f64::INFINITY };
        let mut z = 0.0;
        for (a, b) in [(0.0, self.chi.r1), (self.chi.r1, self.chi.r2)] {
            let n = 64usize.max((8.0 * (b - a) / width).ceil() as usize);
            for (r, w) in panel(a, b, n) {
                let c = self.chi.eval(r);
                z += w * 4.0 * PI * r * r * c * c * (-2.0 * self.gamma_tau * r * r).exp();
            }
        }
        z
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> [f64; 3] {
        let r2 = self.chi.r2;
        loop {
            let d = if self.gamma_tau > 0.0 {
                let n = Normal::new(0.0, 0.5 / self.gamma_tau.sqrt()).unwrap();
                [n.sample(rng), n.sample(rng), n.sample(rng)]
            } else {
                let d = [rng.random_range(-r2..r2), rng.random_range(-r2..r2), rng.random_range(-r2..r2)];
                if dot3(d, d) > r2 * r2 {
                    continue;
                }
                d
            };
            let c = self.chi.eval(norm3(d));
            if rng.random::<f64>() < c * c {
                return add3(self.center, d);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceDensity {
    pub position: [AxisProfile; 3],
    pub momentum: MomentumDensity,
    pub mass: f64,
}

impl PhaseSpaceDensity {
    /// Classical counterpart of `packet` at scale `tau` with the given
    /// position profile.
    pub fn from_packet(packet: &MomentumWavePacket, tau: f64, position: [AxisProfile; 3]) -> Self {
        Self {
            position,
            momentum: MomentumDensity { chi: packet.chi, center: packet.pbar.spatial(), gamma_tau: packet.gamma * tau },
            mass: packet.mass,
        }
    }

    pub fn validate(&self) -> Result<f64, ClassicalError> {
        if !(self.mass > 0.0) {
            return Err(ClassicalError::Unnormalizable("mass must be positive".into()));
        }
        if !self.position.iter().all(AxisProfile::valid) {
            return Err(ClassicalError::Unnormalizable("position widths must be finite and >= 0".into()));
        }
        let m = &self.momentum;
        if !(0.0 < m.chi.r1 && m.chi.r1 < m.chi.r2) || !(m.gamma_tau >= 0.0) {
            return Err(ClassicalError::Unnormalizable("momentum profile needs 0 < r1 < r2 and gamma_tau >= 0".into()));
        }
        let z = m.norm();
        if !(z > 0.0 && z.is_finite()) {
            return Err(ClassicalError::Unnormalizable(format!("momentum norm {z}")));
        }
        Ok(z)
    }

    /// Normalized momentum density.
    pub fn momentum_density(&self, p: [f64; 3]) -> Result<f64, ClassicalError> {
        Ok(self.momentum.unnormalized(p) / self.validate()?)
    }

    fn sample_x<R: Rng>(&self, rng: &mut R) -> [f64; 3] {
        [self.position[0].sample(rng), self.position[1].sample(rng), self.position[2].sample(rng)]
    }
}

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(batch as u64 + 1);
    r
}

/// Independent `(x, p)` draws, drawn in `BATCHES` parallel streams.
pub fn sample_density(rho: &PhaseSpaceDensity, count: usize, seed: u64) -> Result<Vec<([f64; 3], [f64; 3])>, ClassicalError> {
    rho.validate()?;
    let per = count.div_ceil(BATCHES);
    let batches: Vec<Vec<([f64; 3], [f64; 3])>> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let n = per.min(count.saturating_sub(b * per));
            let mut rng = batch_rng(seed, b);
            (0..n).map(|_| (rho.sample_x(&mut rng), rho.momentum.sample(&mut rng))).collect()
        })
        .collect();
    Ok(batches.concat())
}

/// `x + t p / m`.
pub fn propagate_free(x: [f64; 3], p: [f64; 3], t: f64, m: f64) -> [f64; 3] {
    add3(x, scale3(t / m, p))
}

/// Large-time density in velocity space,
/// `(2π)³ ρ(m u) / |f(m,t)|²`, with `ρ` the normalized momentum density.
/// With exponent 3/2, `t³ (2m)²` times this is the density of `x/t`.
pub fn asymptotic_density(rho: &PhaseSpaceDensity, u: [f64; 3], t: f64, exponent: f64) -> Result<f64, ClassicalError> {
    if !(t > 0.0) {
        return Err(ClassicalError::Precondition("t must be positive".into()));
    }
    let m = rho.mass;
    let f = oncone_normalizer(m, t, exponent).norm();
    Ok((2.0 * PI).powi(3) * rho.momentum_density(scale3(m, u))? / (f * f))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapEstimate {
    pub probability: f64,
    pub statistical_error: f64,
    pub tau: f64,
    pub region_radius: f64,
    pub samples: u64,
    pub accepted: u64,
    /// No batch accepted anything; `probability` is then a 1/N upper bound.
    pub upper_bound: bool,
}

fn batch_stats(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Probability that a particle drawn from `rho` is inside the ball of
/// `radius` around `center` at time `t`. For each position draw the momentum
/// ball reaching the region is integrated by uniform sampling inside it.
pub fn region_probability(
    rho: &PhaseSpaceDensity,
    center: [f64; 3],
    radius: f64,
    t: f64,
    count: usize,
    seed: u64,
) -> Result<OverlapEstimate, ClassicalError> {
    let z = rho.validate()?;
    if !(t > 0.0 && radius > 0.0) {
        return Err(ClassicalError::Precondition("need t > 0 and radius > 0".into()));
    }
    let m = rho.mass;
    let rp = m * radius / t;
    let vol = 4.0 / 3.0 * PI * rp * rp * rp;
    let per = count.div_ceil(BATCHES).max(1);
    let means: Vec<(f64, u64)> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            let mut s = 0.0;
            let mut hits = 0;
            for _ in 0..per {
                let x = rho.sample_x(&mut rng);
                let pc = scale3(m / t, sub3(center, x));
                let d = loop {
                    let d = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0f64)];
                    if dot3(d, d) <= 1.0 {
                        break d;
                    }
                };
                let w = rho.momentum.unnormalized(add3(pc, scale3(rp, d)));
                if w > 0.0 {
                    hits += 1;
                }
                s += vol * w / z;
            }
            (s / per as f64, hits)
        })
        .collect();
    let vals: Vec<f64> = means.iter().map(|m| m.0).collect();
    let (probability, statistical_error) = batch_stats(&vals);
    let accepted = means.iter().map(|m| m.1).sum();
    Ok(OverlapEstimate {
        probability,
        statistical_error,
        tau: t,
        region_radius: radius,
        samples: (per * BATCHES) as u64,
        accepted,
        upper_bound: false,
    })
}

/// Smallest ball radius reached by the lines `a_i + t b_i`, `0 ≤ t ≤ tmax`, by
/// alternating closest passage times and the centroid, started at the
/// centroid of the origins.
fn common_passage(a: &[[f64; 3]], b: &[[f64; 3]], tmax: f64) -> f64 {
    let n = a.len() as f64;
    let mut y = scale3(1.0 / n, a.iter().fold([0.0; 3], |s, v| add3(s, *v)));
    let mut best = f64::INFINITY;
    for _ in 0..40 {
        let pts: Vec<[f64; 3]> = a
            .iter()
            .zip(b)
            .map(|(ai, bi)| {
                let bb = dot3(*bi, *bi);
                let t = if bb > 0.0 { (dot3(sub3(y, *ai), *bi) / bb).clamp(0.0, tmax) } else { 0.0 };
                add3(*ai, scale3(t, *bi))
            })
            .collect();
        y = scale3(1.0 / n, pts.iter().fold([0.0; 3], |s, v| add3(s, *v)));
        let r = pts.iter().map(|p| norm3(sub3(*p, y))).fold(0.0, f64::max);
        if r >= best - 1e-12 {
            best = best.min(r);
            break;
        }
        best = r;
    }
    best
}

/// Probability that straight-line trajectories from every density, the
/// `i`-th displaced by `u_i τ`, all pass through a common ball of radius
/// `growth_c √τ` at times in `[0, τ]`.
pub fn overlap_probability(
    packets: &[(PhaseSpaceDensity, [f64; 3])],
    tau: f64,
    growth_c: f64,
    count: usize,
    seed: u64,
) -> Result<OverlapEstimate, ClassicalError> {
    if packets.len() < 2 {
        return Err(ClassicalError::Precondition("need at least two packets".into()));
    }
    for (p, _) in packets {
        p.validate()?;
    }
    let radius = growth_c * tau.sqrt();
    let per = count.div_ceil(BATCHES).max(1);
    let hits: Vec<u64> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            let mut h = 0;
            for _ in 0..per {
                let mut a = Vec::with_capacity(packets.len());
                let mut v = Vec::with_capacity(packets.len());
                for (rho, u) in packets {
                    a.push(add3(rho.sample_x(&mut rng), scale3(tau, *u)));
                    v.push(scale3(1.0 / rho.mass, rho.momentum.sample(&mut rng)));
                }
                if common_passage(&a, &v, tau) <= radius {
                    h += 1;
                }
            }
            h
        })
        .collect();
    let accepted: u64 = hits.iter().sum();
    let samples = (per * BATCHES) as u64;
    if accepted == 0 {
        return Ok(OverlapEstimate {
            probability: 1.0 / samples as f64,
            statistical_error: f64::NAN,
            tau,
            region_radius: radius,
            samples,
            accepted,
            upper_bound: true,
        });
    }
    let vals: Vec<f64> = hits.iter().map(|&h| h as f64 / per as f64).collect();
    let (probability, statistical_error) = batch_stats(&vals);
    Ok(OverlapEstimate { probability, statistical_error, tau, region_radius: radius, samples, accepted, upper_bound: false })
}

pub const COMPARISON_TOL: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub classical_kind: FitKind,
    pub quantum_kind: FitKind,
    pub kinds_match: bool,
    /// Probability exponent or rate from the classical fit.
    pub classical: f64,
    /// Twice the quantum amplitude exponent or rate.
    pub quantum: f64,
    pub difference: f64,
    pub relative_difference: f64,
    pub combined_error: f64,
    pub tolerance: f64,
    pub corresponds: bool,
}

fn law(f: &FalloffFit) -> (f64, f64) {
    match f.kind {
        FitKind::Exponential => (f.rate(), f.rate_stderr()),
        FitKind::Power => (f.power_exponent(), f.power.stderr[1]),
        FitKind::Superpoly => (f.exponent_or_rate, 0.0),
    }
}

/// Compares a classical probability fit with a quantum amplitude fit.
pub fn correspondence_compare(classical: &FalloffFit, quantum: &FalloffFit, tol: f64) -> Result<ComparisonReport, ClassicalError> {
    let (a, b) = (classical.tau_range, quantum.tau_range);
    if a.1 < b.0 || b.1 < a.0 {
        return Err(ClassicalError::DisjointRanges(a, b));
    }
    let kinds_match = classical.kind == quantum.kind;
    let (c, ce) = law(classical);
    let (q, qe) = law(quantum);
    let q2 = 2.0 * q;
    let difference = c - q2;
    let relative_difference = difference.abs() / q2.abs().max(1e-300);
    let combined_error = (ce * ce + 4.0 * qe * qe).sqrt();
    let corresponds = kinds_match && (classical.kind == FitKind::Superpoly || relative_difference <= tol);
    Ok(ComparisonReport {
        classical_kind: classical.kind,
        quantum_kind: quantum.kind,
        kinds_match,
        classical: c,
        quantum: q2,
        difference,
        relative_difference,
        combined_error,
        tolerance: tol,
        corresponds,
    })
}
