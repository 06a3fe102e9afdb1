//! Decay-law regression for τ-indexed magnitude sequences.
//!
//! Three linear models in `ln M` are fitted: power `a − k ln τ`, power times
//! exponential `a − k ln τ − b τ`, and pure exponential `a − b τ`. Local
//! power exponents over sliding windows separate super-polynomial decay from
//! a plain power law.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("underflow: all magnitudes below 1e-300")]
    Underflow,
    #[error("need at least {need} usable points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("tau and magnitude lengths differ")]
    LengthMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Power,
    Exponential,
    Superpoly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Largest RMS residual in `ln M` for the exponential model to be
    /// accepted. With errors a reduced χ up to 3 is also accepted.
    pub fit_tol: f64,
    /// Points per local-exponent window.
    pub window: usize,
    /// Minimal rise of the local exponent across the range to call the decay
    /// super-polynomial.
    pub min_rise: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { fit_tol: 0.05, window: 6, min_rise: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub stderr: Vec<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalloffFit {
    pub kind: FitKind,
    /// Power exponent (power kind), rate `b` (exponential kind) or the last
    /// local exponent (super-polynomial kind).
    pub exponent_or_rate: f64,
    pub c: f64,
    /// `rate / γ` for the exponential kind when γ > 0.
    pub alpha: Option<f64>,
    pub residual: f64,
    pub tau_range: (f64, f64),
    /// (τ at window end, local power exponent).
    pub windowed: Vec<(f64, f64)>,
    pub power: LinearFit,
    /// `a − k ln τ − b τ`; the polynomial prefactor absorbed.
    pub poly_exponential: LinearFit,
    /// `a − b τ`; raw rate without prefactor.
    pub exponential: LinearFit,
}

impl FalloffFit {
    pub fn power_exponent(&self) -> f64 {
        self.power.coef[1]
    }

    pub fn rate(&self) -> f64 {
        self.poly_exponential.coef[2]
    }

    pub fn rate_stderr(&self) -> f64 {
        self.poly_exponential.stderr[2]
    }

    pub fn raw_rate(&self) -> f64 {
        self.exponential.coef[1]
    }
}

/// Weighted least squares `y ≈ A c`; `sigma` gives per-point errors.
pub fn linear_fit(a: &DMatrix<f64>, y: &DVector<f64>, sigma: Option<&[f64]>) -> LinearFit {
    let (n, p) = a.shape();
    let w: Vec<f64> = match sigma {
        Some(s) => s.iter().map(|s| 1.0 / s).collect(),
        None => vec![1.0; n],
    };
    let aw = DMatrix::from_fn(n, p, |i, j| a[(i, j)] * w[i]);
    let yw = DVector::from_fn(n, |i, _| y[i] * w[i]);
    let svd = aw.clone().svd(true, true);
    let c = svd.solve(&yw, 1e-14).expect("svd solve");
    let r = &aw * &c - &yw;
    let dof = (n as f64 - p as f64).max(1.0);
    let chi2 = r.norm_squared();
    let residual = if sigma.is_some() { (chi2 / dof).sqrt() } else { (chi2 / n as f64).sqrt() };
    let s2 = if sigma.is_some() { 1.0f64.max(chi2 / dof) } else { chi2 / dof };
    let cov = (aw.transpose() * &aw).try_inverse().unwrap_or_else(|| DMatrix::zeros(p, p)) * s2;
    LinearFit {
        coef: c.iter().copied().collect(),
        stderr: (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(),
        residual,
    }
}

/// Local power exponents `−d ln M / d ln τ` over windows of `window` points
/// that share their end points.
pub fn windowed_exponents(taus: &[f64], mags: &[f64], window: usize) -> Vec<(f64, f64)> {
    let w = window.max(3);
    if taus.len() < w {
        return vec![];
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i + w <= taus.len() {
        let lt: Vec<f64> = taus[i..i + w].iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = mags[i..i + w].iter().map(|m| m.ln()).collect();
        let mt = lt.iter().sum::<f64>() / w as f64;
        let my = ly.iter().sum::<f64>() / w as f64;
        let sxy: f64 = lt.iter().zip(&ly).map(|(x, y)| (x - mt) * (y - my)).sum();
        let sxx: f64 = lt.iter().map(|x| (x - mt) * (x - mt)).sum();
        out.push((taus[i + w - 1], -sxy / sxx));
        i += w - 1;
    }
    out
}

pub fn fit_falloff(taus: &[f64], mags: &[f64], gamma: f64, opts: &FitOptions) -> Result<FalloffFit, FitError> {
    fit_falloff_with_errors(taus, mags, None, gamma, opts)
}

/// As [`fit_falloff`], with per-point standard errors of the magnitudes.
pub fn fit_falloff_with_errors(
    taus: &[f64],
    mags: &[f64],
    errors: Option<&[f64]>,
    gamma: f64,
    opts: &FitOptions,
) -> Result<FalloffFit, FitError> {
    if taus.len() != mags.len() || errors.is_some_and(|e| e.len() != mags.len()) {
        return Err(FitError::LengthMismatch);
    }
    if !mags.is_empty() && mags.iter().all(|&m| !(m >= 1e-300)) {
        return Err(FitError::Underflow);
    }
    let keep: Vec<usize> = (0..taus.len()).filter(|&i| mags[i] >= 1e-300 && taus[i] > 0.0).collect();
    if keep.len() < 4 {
        return Err(FitError::TooFewPoints { need: 4, got: keep.len() });
    }
    let t: Vec<f64> = keep.iter().map(|&i| taus[i]).collect();
    let m: Vec<f64> = keep.iter().map(|&i| mags[i]).collect();
    let sigma: Option<Vec<f64>> = errors.map(|e| keep.iter().map(|&i| (e[i] / mags[i]).max(1e-12)).collect());
    let n = t.len();
    let y = DVector::from_iterator(n, m.iter().map(|v| v.ln()));
    let power_a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { -t[i].ln() });
    let pe_a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => -t[i].ln(),
        _ => -t[i],
    });
    let ex_a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { -t[i] });
    let s = sigma.as_deref();
    let power = linear_fit(&power_a, &y, s);
    let poly_exponential = linear_fit(&pe_a, &y, s);
    let exponential = linear_fit(&ex_a, &y, s);
    let windowed = windowed_exponents(&t, &m, opts.window);
    let tau_range = (t[0], t[n - 1]);

    let b = poly_exponential.coef[2];
    let span = tau_range.1 - tau_range.0;
    let adequate = poly_exponential.residual <= opts.fit_tol
        || (s.is_some() && (poly_exponential.residual <= 3.0 || linear_fit(&pe_a, &y, None).residual <= opts.fit_tol));
    let exp_ok = b > 0.0 && b * span >= 0.5 && adequate && power.residual > 2.0 * poly_exponential.residual;
    let rising = windowed.len() >= 2
        && windowed.windows(2).all(|w| w[1].1 > w[0].1)
        && windowed.last().unwrap().1 - windowed[0].1 >= opts.min_rise;
    let (kind, exponent_or_rate, c, residual) = if exp_ok {
        (FitKind::Exponential, b, poly_exponential.coef[0].exp(), poly_exponential.residual)
    } else if rising {
        (FitKind::Superpoly, windowed.last().unwrap().1, power.coef[0].exp(), power.residual)
    } else {
        (FitKind::Power, power.coef[1], power.coef[0].exp(), power.residual)
    };
    let alpha = (kind == FitKind::Exponential && gamma > 0.0).then(|| b / gamma);
    Ok(FalloffFit { kind, exponent_or_rate, c, alpha, residual, tau_range, windowed, power, poly_exponential, exponential })
}

/// Geometric τ grid.
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let r = (b / a).ln() / (n - 1) as f64;
    (0..n).map(|i| a * (r * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power() {
        let t = geometric_grid(10.0, 200.0, 20);
        let m: Vec<f64> = t.iter().map(|t| 3.0 * t.powf(-1.5)).collect();
        let f = fit_falloff(&t, &m, 0.0, &FitOptions::default()).unwrap();
        assert_eq!(f.kind, FitKind::Power);
        assert!((f.exponent_or_rate - 1.5).abs() < 1e-10);
        assert!((f.c - 3.0).abs() < 1e-9);
    }

    #[test]
    fn recovers_exponential_with_prefactor() {
        let t = geometric_grid(10.0, 150.0, 24);
        let m: Vec<f64> = t.iter().map(|t| 0.1 * t.powf(-1.5) * (-0.01 * t).exp()).collect();
        let f = fit_falloff(&t, &m, 0.1, &FitOptions::default()).unwrap();
        assert_eq!(f.kind, FitKind::Exponential);
        assert!((f.rate() - 0.01).abs() < 1e-10);
        assert!((f.alpha.unwrap() - 0.1).abs() < 1e-8);
        assert!(f.raw_rate() > f.rate());
    }

    #[test]
    fn stretched_exponential_is_superpoly() {
        let t = geometric_grid(10.0, 150.0, 36);
        let m: Vec<f64> = t.iter().map(|t| (-3.0 * t.sqrt()).exp()).collect();
        let f = fit_falloff(&t, &m, 0.0, &FitOptions::default()).unwrap();
        assert_eq!(f.kind, FitKind::Superpoly, "{:?}", f.poly_exponential);
        assert!(f.windowed.windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn underflow_reported() {
        let t = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(fit_falloff(&t, &[0.0; 4], 0.0, &FitOptions::default()).unwrap_err(), FitError::Underflow);
    }
}
