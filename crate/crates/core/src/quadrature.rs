//! Gauss-Legendre panels with a process-wide node cache.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;

type Rule = Arc<Vec<(f64, f64)>>;

fn cache() -> &'static Mutex<HashMap<usize, Rule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Nodes and weights on [−1, 1].
pub fn gl_rule(n: usize) -> Rule {
    let n = n.max(1);
    if let Some(r) = cache().lock().unwrap().get(&n) {
        return r.clone();
    }
    let rule = GaussLegendre::new(NonZeroUsize::new(n).unwrap());
    let pairs: Rule = Arc::new(rule.as_node_weight_pairs().to_vec());
    cache().lock().unwrap().insert(n, pairs.clone());
    pairs
}

/// Nodes and weights mapped to [a, b].
pub fn panel(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    gl_rule(n).iter().map(|&(x, w)| (c + h * x, h * w)).collect()
}

/// Concatenated panels over consecutive breakpoints, `n` nodes each.
pub fn panels(breaks: &[f64], n: usize) -> Vec<(f64, f64)> {
    breaks.windows(2).flat_map(|w| panel(w[0], w[1], n)).collect()
}

/// Panels on [a, b] that shrink geometrically toward `a` with ratio `ratio`,
/// the smallest of width `h_min`.
pub fn graded_toward(a: f64, b: f64, h_min: f64, ratio: f64, n: usize) -> Vec<(f64, f64)> {
    let mut breaks = vec![a];
    let mut h = h_min;
    while breaks.last().unwrap() + h < b {
        let next = breaks.last().unwrap() + h;
        breaks.push(next);
        h *= ratio;
    }
    breaks.push(b);
    panels(&breaks, n)
}

/// Equal-weight nodes on a full period [0, 2π).
pub fn periodic(n: usize) -> Vec<(f64, f64)> {
    let n = n.max(1);
    let w = std::f64::consts::TAU / n as f64;
    (0..n).map(|i| (i as f64 * w, w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let s: f64 = panel(0.0, 2.0, 5).iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((s - 2f64.powi(10) / 10.0).abs() < 1e-10);
    }

    #[test]
    fn graded_panels_cover_the_interval() {
        let s: f64 = graded_toward(1.0, 4.0, 1e-6, 2.0, 8).iter().map(|(_, w)| w).sum();
        assert!((s - 3.0).abs() < 1e-13);
    }

    #[test]
    fn periodic_rule_is_spectral() {
        let s: f64 = periodic(16).iter().map(|(x, w)| w * x.cos().powi(4)).sum();
        assert!((s - 0.75 * std::f64::consts::PI).abs() < 1e-13);
    }
}
