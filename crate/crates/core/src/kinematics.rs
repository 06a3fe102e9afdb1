//! Four-vectors and the handful of relativistic kinematics helpers the rest of
//! the crate builds on.
//!
//! Components are stored raw; the metric is chosen by the accessor. The
//! Lorentz metric is `(1,-1,-1,-1)`, the Euclidean one `(1,1,1,1)`.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// A space-time point or a momentum-energy vector, `(t, x, y, z)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct FourVector {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FourVector {
    pub const ZERO: FourVector = FourVector { t: 0.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self { t, x, y, z }
    }

    pub fn from_parts(t: f64, spatial: [f64; 3]) -> Self {
        Self::new(t, spatial[0], spatial[1], spatial[2])
    }

    /// Unit vector along axis `mu` (0 = time).
    pub fn axis(mu: usize) -> Self {
        let mut c = [0.0; 4];
        c[mu] = 1.0;
        c.into()
    }

    /// Positive-energy mass-shell vector with the given spatial momentum.
    pub fn on_shell(mass: f64, spatial: [f64; 3]) -> Self {
        let e = (mass * mass + norm3_sq(spatial)).sqrt();
        Self::from_parts(e, spatial)
    }

    pub fn spatial(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn components(&self) -> [f64; 4] {
        [self.t, self.x, self.y, self.z]
    }

    /// Lorentz product with metric `(1,-1,-1,-1)`.
    pub fn lorentz_dot(&self, other: &FourVector) -> f64 {
        self.t * other.t - self.x * other.x - self.y * other.y - self.z * other.z
    }

    pub fn lorentz_square(&self) -> f64 {
        self.lorentz_dot(self)
    }

    pub fn euclidean_dot(&self, other: &FourVector) -> f64 {
        self.t * other.t + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn euclidean_square(&self) -> f64 {
        self.euclidean_dot(self)
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.euclidean_square().sqrt()
    }

    pub fn spatial_norm(&self) -> f64 {
        norm3_sq(self.spatial()).sqrt()
    }

    /// Invariant mass of a timelike vector; `None` when spacelike or null.
    pub fn invariant_mass(&self) -> Option<f64> {
        let s = self.lorentz_square();
        (s > 0.0).then(|| s.sqrt())
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    /// Velocity `p/E` of a timelike vector.
    pub fn velocity(&self) -> [f64; 3] {
        let s = self.spatial();
        [s[0] / self.t, s[1] / self.t, s[2] / self.t]
    }

    /// Pure boost by velocity `beta` (|beta| < 1).
    pub fn boost(&self, beta: [f64; 3]) -> FourVector {
        let b2 = norm3_sq(beta);
        if b2 == 0.0 {
            return *self;
        }
        let gamma = 1.0 / (1.0 - b2).sqrt();
        let bp = dot3(beta, self.spatial());
        let coef = (gamma - 1.0) * bp / b2 + gamma * self.t;
        FourVector::new(
            gamma * (self.t + bp),
            self.x + coef * beta[0],
            self.y + coef * beta[1],
            self.z + coef * beta[2],
        )
    }
}

impl From<[f64; 4]> for FourVector {
    fn from(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }
}

impl From<FourVector> for [f64; 4] {
    fn from(v: FourVector) -> Self {
        v.components()
    }
}

impl Index<usize> for FourVector {
    type Output = f64;
    fn index(&self, mu: usize) -> &f64 {
        match mu {
            0 => &self.t,
            1 => &self.x,
            2 => &self.y,
            3 => &self.z,
            _ => panic!("four-vector index {mu} out of range"),
        }
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, o: FourVector) -> FourVector {
        FourVector::new(self.t + o.t, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for FourVector {
    fn add_assign(&mut self, o: FourVector) {
        *self = *self + o;
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, o: FourVector) -> FourVector {
        FourVector::new(self.t - o.t, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for FourVector {
    fn sub_assign(&mut self, o: FourVector) {
        *self = *self - o;
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector::new(-self.t, -self.x, -self.y, -self.z)
    }
}

impl Mul<FourVector> for f64 {
    type Output = FourVector;
    fn mul(self, v: FourVector) -> FourVector {
        FourVector::new(self * v.t, self * v.x, self * v.y, self * v.z)
    }
}

impl Mul<f64> for FourVector {
    type Output = FourVector;
    fn mul(self, s: f64) -> FourVector {
        s * self
    }
}

impl std::iter::Sum for FourVector {
    fn sum<I: Iterator<Item = FourVector>>(iter: I) -> Self {
        iter.fold(FourVector::ZERO, |a, b| a + b)
    }
}

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3_sq(a: [f64; 3]) -> f64 {
    dot3(a, a)
}

pub fn norm3(a: [f64; 3]) -> f64 {
    norm3_sq(a).sqrt()
}

pub fn scale3(s: f64, a: [f64; 3]) -> [f64; 3] {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Uniformly distributed direction on the unit 2-sphere.
pub fn random_unit3<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = norm3(v);
        if n > 1e-12 {
            return scale3(1.0 / n, v);
        }
    }
}

/// Källén function λ(a, b, c).
pub fn kallen(a: f64, b: f64, c: f64) -> f64 {
    a * a + b * b + c * c - 2.0 * (a * b + a * c + b * c)
}

/// Splits the timelike, positive-energy `total` into two positive-energy
/// on-shell momenta with masses `m1`, `m2`, the first one emitted along
/// `direction` in the rest frame of `total`.
///
/// Returns `None` below threshold.
pub fn two_body_split(
    total: FourVector,
    m1: f64,
    m2: f64,
    direction: [f64; 3],
) -> Option<(FourVector, FourVector)> {
    let mass = total.invariant_mass()?;
    if total.t <= 0.0 || mass < m1 + m2 {
        return None;
    }
    let s = mass * mass;
    let pstar = kallen(s, m1 * m1, m2 * m2).max(0.0).sqrt() / (2.0 * mass);
    let n = scale3(1.0 / norm3(direction), direction);
    let p1 = FourVector::on_shell(m1, scale3(pstar, n));
    let beta = total.velocity();
    let p1 = p1.boost(beta);
    // p2 by difference keeps the sum exact to rounding
    let p2 = total - p1;
    debug_assert!((p2.lorentz_square() - m2 * m2).abs() < 1e-8 * (1.0 + s));
    Some((p1, p2))
}
