//! Ground-truth distributions of the simulation studies.
//!
//! Each cube-valued truth can draw points, evaluate its density and give the
//! exact mass of an axis-aligned box, so samplers can be checked against
//! evaluators with a chi-square test.

use polyamix::CubeBox;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::{SimError, SimResult};

pub trait TrueDensity: Sync {
    fn dim(&self) -> usize;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64>;
    fn density(&self, u: &[f64]) -> f64;
    fn box_mass(&self, b: &CubeBox) -> f64;
}

/// One linear piece `[lo, hi)` of a 1D density, from `start` to `end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub start: f64,
    pub end: f64,
}

impl Piece {
    fn mass(&self) -> f64 {
        0.5 * (self.start + self.end) * (self.hi - self.lo)
    }

    fn at(&self, u: f64) -> f64 {
        self.start + (self.end - self.start) * (u - self.lo) / (self.hi - self.lo)
    }

    /// Mass of `[lo, u]`.
    fn partial(&self, u: f64) -> f64 {
        0.5 * (self.start + self.at(u)) * (u - self.lo)
    }
}

/// Piecewise-linear density on `[0, 1]`, possibly discontinuous at breaks.
#[derive(Clone, Debug, PartialEq)]
pub struct Piecewise1D {
    pieces: Vec<Piece>,
}

impl Default for Piecewise1D {
    /// Constant 0.5, then a ramp from 0.5 to 1.75, then constant 1.25.
    fn default() -> Self {
        Self::new(vec![
            Piece { lo: 0.0, hi: 0.25, start: 0.5, end: 0.5 },
            Piece { lo: 0.25, hi: 0.75, start: 0.5, end: 1.75 },
            Piece { lo: 0.75, hi: 1.0, start: 1.25, end: 1.25 },
        ])
        .expect("valid default density")
    }
}

impl Piecewise1D {
    pub fn new(pieces: Vec<Piece>) -> SimResult<Self> {
        let contiguous = pieces.first().is_some_and(|p| p.lo == 0.0)
            && pieces.last().is_some_and(|p| p.hi == 1.0)
            && pieces.windows(2).all(|w| w[0].hi == w[1].lo)
            && pieces.iter().all(|p| p.lo < p.hi && p.start >= 0.0 && p.end >= 0.0);
        let total: f64 = pieces.iter().map(Piece::mass).sum();
        if !contiguous || (total - 1.0).abs() > 1e-12 {
            return Err(SimError::Validation("pieces must tile [0,1] with total mass 1".into()));
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Whether the density is constant on `[lo, hi]`.
    pub fn is_constant_on(&self, lo: f64, hi: f64) -> bool {
        self.pieces
            .iter()
            .any(|p| p.lo <= lo && hi <= p.hi && p.start == p.end)
    }

    pub fn cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let mut acc = 0.0;
        for p in &self.pieces {
            if u >= p.hi {
                acc += p.mass();
            } else {
                return acc + p.partial(u.max(p.lo));
            }
        }
        acc
    }
}

impl TrueDensity for Piecewise1D {
    fn dim(&self) -> usize {
        1
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut target: f64 = rng.random();
        for p in &self.pieces {
            let mass = p.mass();
            if target < mass {
                // solve partial(u) = target: a quadratic in t = u - lo
                let slope = (p.end - p.start) / (p.hi - p.lo);
                let t = if slope.abs() < 1e-15 {
                    target / p.start
                } else {
                    (-p.start + (p.start * p.start + 2.0 * slope * target).sqrt()) / slope
                };
                return vec![(p.lo + t).clamp(p.lo, p.hi)];
            }
            target -= mass;
        }
        vec![1.0]
    }

    fn density(&self, u: &[f64]) -> f64 {
        let u = u[0];
        self.pieces
            .iter()
            .find(|p| p.lo <= u && u < p.hi)
            .or(self.pieces.last())
            .map_or(0.0, |p| p.at(u))
    }

    fn box_mass(&self, b: &CubeBox) -> f64 {
        self.cdf(b.hi[0]) - self.cdf(b.lo[0])
    }
}

fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else {
        t.exp().ln_1p()
    }
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `2 * logistic(steepness * (u_x - 1/2))`, uniform in `u_y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Logistic2D {
    pub steepness: f64,
}

impl Default for Logistic2D {
    fn default() -> Self {
        Self { steepness: 20.0 }
    }
}

impl Logistic2D {
    /// Marginal CDF of `u_x`.
    pub fn cdf_x(&self, x: f64) -> f64 {
        let k = self.steepness;
        2.0 * (softplus(k * (x - 0.5)) - softplus(-0.5 * k)) / k
    }
}

impl TrueDensity for Logistic2D {
    fn dim(&self) -> usize {
        2
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.steepness;
        let f: f64 = rng.random();
        let s = f * k / 2.0 + softplus(-0.5 * k);
        let x = 0.5 + s.exp_m1().ln() / k;
        vec![x.clamp(0.0, 1.0), rng.random()]
    }

    fn density(&self, u: &[f64]) -> f64 {
        2.0 * logistic(self.steepness * (u[0] - 0.5))
    }

    fn box_mass(&self, b: &CubeBox) -> f64 {
        (self.cdf_x(b.hi[0]) - self.cdf_x(b.lo[0])) * (b.hi[1] - b.lo[1])
    }
}

/// `U = (logistic(X), logistic(Y))` with `X ~ N(0, sd_x^2)` and
/// `Y | X ~ N(mu(X), sd_y^2)`, `mu(x) = slope * max(x, knot)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantRegTruth {
    pub sd_x: f64,
    pub sd_y: f64,
    pub slope: f64,
    pub knot: f64,
}

impl Default for QuantRegTruth {
    fn default() -> Self {
        Self {
            sd_x: 2.0,
            sd_y: 0.5,
            slope: 0.9,
            knot: -1.0,
        }
    }
}

impl QuantRegTruth {
    pub fn mean_y(&self, x: f64) -> f64 {
        self.slope * x.max(self.knot)
    }

    /// `q`-quantile of `U_y` given `U_x = u_x`.
    pub fn conditional_quantile(&self, u_x: f64, q: f64) -> f64 {
        let z = Normal::standard().inverse_cdf(q);
        logistic(self.mean_y(logit(u_x)) + self.sd_y * z)
    }

    fn x_range(&self, lo: f64, hi: f64) -> (f64, f64) {
        let cap = 12.0 * self.sd_x;
        let to_x = |u: f64| if u <= 0.0 { -cap } else if u >= 1.0 { cap } else { logit(u).clamp(-cap, cap) };
        (to_x(lo), to_x(hi))
    }
}

impl TrueDensity for QuantRegTruth {
    fn dim(&self) -> usize {
        2
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (zx, z): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        let x = self.sd_x * zx;
        let y = self.mean_y(x) + self.sd_y * z;
        vec![logistic(x), logistic(y)]
    }

    fn density(&self, u: &[f64]) -> f64 {
        if u.iter().any(|&v| v <= 0.0 || v >= 1.0) {
            return 0.0;
        }
        let (x, y) = (logit(u[0]), logit(u[1]));
        let nx = Normal::new(0.0, self.sd_x).expect("positive sd");
        let ny = Normal::new(self.mean_y(x), self.sd_y).expect("positive sd");
        nx.pdf(x) * ny.pdf(y) / (u[0] * (1.0 - u[0]) * u[1] * (1.0 - u[1]))
    }

    fn box_mass(&self, b: &CubeBox) -> f64 {
        let (x_lo, x_hi) = self.x_range(b.lo[0], b.hi[0]);
        let (y_lo, y_hi) = self.x_range(b.lo[1], b.hi[1]);
        let nx = Normal::new(0.0, self.sd_x).expect("positive sd");
        let std = Normal::standard();
        let integrand = |x: f64| {
                let mu = self.mean_y(x);
            nx.pdf(x) * (std.cdf((y_hi - mu) / self.sd_y) - std.cdf((y_lo - mu) / self.sd_y))
        };
        simpson(integrand, x_lo, x_hi, 4000)
    }
}

/// Composite Simpson rule with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Categorical `X` in `{a, b, c}` and `Y in R^8`, `Y | X ~ N(0, Sigma_X)`
/// with `Sigma_X = I` except `cov(Y_1, Y_2) = rho` when `X = a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedTruth {
    pub level_probs: [f64; 3],
    pub rho: f64,
}

impl Default for MixedTruth {
    fn default() -> Self {
        Self {
            level_probs: [0.5, 0.3, 0.2],
            rho: 0.8,
        }
    }
}

pub const MIXED_LEVELS: [&str; 3] = ["a", "b", "c"];
pub const MIXED_CONTINUOUS: usize = 8;

impl MixedTruth {
    /// Level index and continuous vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, [f64; MIXED_CONTINUOUS]) {
        let r: f64 = rng.random();
        let level = if r < self.level_probs[0] {
            0
        } else if r < self.level_probs[0] + self.level_probs[1] {
            1
        } else {
            2
        };
        let mut y = [0.0; MIXED_CONTINUOUS];
        for v in &mut y {
            *v = StandardNormal.sample(rng);
        }
        if level == 0 {
            y[1] = self.rho * y[0] + (1.0 - self.rho * self.rho).sqrt() * y[1];
        }
        (level, y)
    }

    /// Probability of `(level, sign(Y_1) > 0, sign(Y_2) > 0)`, twelve cells in
    /// level-major order with quadrants `(-,-), (-,+), (+,-), (+,+)`.
    pub fn quadrant_cell_probs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(12);
        for (level, &p) in self.level_probs.iter().enumerate() {
            let rho = if level == 0 { self.rho } else { 0.0 };
            // orthant probability of a standard bivariate normal
            let same = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
            let diff = 0.5 - same;
            out.extend([same, diff, diff, same].map(|q| p * q));
        }
        out
    }
}
