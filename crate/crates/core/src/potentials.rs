//! Locally Lipschitz potentials `j(t, x, z, v)` (through their generalized directional
//! derivative and a subgradient selection) and convex potentials `phi(t, x, y, v)`.
//!
//! Besides the pointwise interface, a potential may expose a splitting of its `v`-dependence
//! into a part with Lipschitz gradient and a sum of convex ramps `c (v_i - s)_+` on single
//! coordinates. The per-step solver treats the ramps implicitly, so kinks are resolved exactly
//! instead of through the selection.

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{uniform_vector, Vector};

/// Argument sizes of a potential. `None` marks an argument the potential ignores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PotentialDims {
    pub x: Option<usize>,
    pub history: Option<usize>,
    pub v: usize,
}

/// Convex ramps acting on each coordinate of `v`: `ramps[i]` lists `(location, weight)` pairs.
pub type NodeRamps = Vec<Vec<(f64, f64)>>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub m: f64,
    pub m_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhiConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub m: f64,
}

pub trait NonsmoothPotential: Debug + Send + Sync {
    fn dims(&self) -> PotentialDims;

    fn eval(&self, t: f64, x: &Vector, z: &Vector, v: &Vector) -> f64;

    /// Generalized directional derivative `j^0(t, x, z, v; d)`.
    fn dir_deriv(&self, t: f64, x: &Vector, z: &Vector, v: &Vector, d: &Vector) -> f64;

    /// One element of the Clarke subdifferential in `v`.
    fn subgrad_select(&self, t: f64, x: &Vector, z: &Vector, v: &Vector) -> Vector;

    fn constants(&self) -> JConstants;

    /// Gradient of the smooth part; equals the selection when [`Self::ramps`] is empty.
    fn smooth_gradient(&self, t: f64, x: &Vector, z: &Vector, v: &Vector) -> Vector {
        self.subgrad_select(t, x, z, v)
    }

    fn ramps(&self, _t: f64, _x: &Vector, _z: &Vector) -> NodeRamps {
        Vec::new()
    }

    fn is_zero(&self) -> bool {
        false
    }
}

pub trait ConvexPotential: Debug + Send + Sync {
    fn dims(&self) -> PotentialDims;

    fn eval(&self, t: f64, x: &Vector, y: &Vector, v: &Vector) -> f64;

    fn subgrad(&self, t: f64, x: &Vector, y: &Vector, v: &Vector) -> Vector;

    fn constants(&self) -> PhiConstants;

    fn smooth_gradient(&self, t: f64, x: &Vector, y: &Vector, v: &Vector) -> Vector {
        self.subgrad(t, x, y, v)
    }

    fn ramps(&self, _t: f64, _x: &Vector, _y: &Vector) -> NodeRamps {
        Vec::new()
    }

    fn is_zero(&self) -> bool {
        false
    }
}

/// The zero potential on an `X` of the given dimension; usable as `j` or `phi`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPotential {
    pub dim: usize,
}

impl NonsmoothPotential for ZeroPotential {
    fn dims(&self) -> PotentialDims {
        PotentialDims {
            x: None,
            history: None,
            v: self.dim,
        }
    }
    fn eval(&self, _: f64, _: &Vector, _: &Vector, _: &Vector) -> f64 {
        0.0
    }
    fn dir_deriv(&self, _: f64, _: &Vector, _: &Vector, _: &Vector, _: &Vector) -> f64 {
        0.0
    }
    fn subgrad_select(&self, _: f64, _: &Vector, _: &Vector, _: &Vector) -> Vector {
        Vector::zeros(self.dim)
    }
    fn constants(&self) -> JConstants {
        JConstants::default()
    }
    fn is_zero(&self) -> bool {
        true
    }
}

impl ConvexPotential for ZeroPotential {
    fn dims(&self) -> PotentialDims {
        PotentialDims {
            x: None,
            history: None,
            v: self.dim,
        }
    }
    fn eval(&self, _: f64, _: &Vector, _: &Vector, _: &Vector) -> f64 {
        0.0
    }
    fn subgrad(&self, _: f64, _: &Vector, _: &Vector, _: &Vector) -> Vector {
        Vector::zeros(self.dim)
    }
    fn constants(&self) -> PhiConstants {
        PhiConstants::default()
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// A knot of a piecewise-linear slope function with one-sided limits `left` and `right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub at: f64,
    pub left: f64,
    pub right: f64,
}

/// Piecewise-linear function, linear between knots, constant outside the outermost knots,
/// possibly discontinuous at knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearSlope {
    knots: Vec<Knot>,
}

impl PiecewiseLinearSlope {
    pub fn new(mut knots: Vec<Knot>) -> Result<Self> {
        knots.sort_by(|a, b| a.at.total_cmp(&b.at));
        if knots.windows(2).any(|w| w[1].at <= w[0].at) {
            return Err(Error::InvalidInput("slope knots must be distinct".into()));
        }
        if knots
            .iter()
            .any(|k| !(k.at.is_finite() && k.left.is_finite() && k.right.is_finite()))
        {
            return Err(Error::InvalidInput("slope knots must be finite".into()));
        }
        Ok(Self { knots })
    }

    /// Continuous interpolant through `(s, p(s))`.
    pub fn continuous(points: &[(f64, f64)]) -> Result<Self> {
        Self::new(points.iter().map(|&(at, p)| Knot { at, left: p, right: p }).collect())
    }

    pub fn zero() -> Self {
        Self { knots: Vec::new() }
    }

    /// `clamp(s, lo, hi)`.
    pub fn clamp(lo: f64, hi: f64) -> Result<Self> {
        Self::continuous(&[(lo, lo), (hi, hi)])
    }

    /// `c sign(s)`: the slope of `c |s|`.
    pub fn sign(c: f64) -> Result<Self> {
        Self::new(vec![Knot {
            at: 0.0,
            left: -c,
            right: c,
        }])
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    /// `(p(r-), p(r+))`.
    pub fn one_sided(&self, r: f64) -> (f64, f64) {
        // the prox lands on knots up to rounding
        let snap = KNOT_SNAP * r.abs().max(1.0);
        if let Some(kn) = self.knots.iter().find(|kn| (kn.at - r).abs() <= snap) {
            return (kn.left, kn.right);
        }
        self.exact_one_sided(r)
    }

    fn exact_one_sided(&self, r: f64) -> (f64, f64) {
        let k = &self.knots;
        if k.is_empty() {
            return (0.0, 0.0);
        }
        let idx = k.partition_point(|kn| kn.at < r);
        if idx < k.len() && k[idx].at == r {
            return (k[idx].left, k[idx].right);
        }
        let v = if idx == 0 {
            k[0].left
        } else if idx == k.len() {
            k[k.len() - 1].right
        } else {
            let (a, b) = (&k[idx - 1], &k[idx]);
            let s = (r - a.at) / (b.at - a.at);
            a.right + s * (b.left - a.right)
        };
        (v, v)
    }

    /// `sup |p|`.
    pub fn bound(&self) -> f64 {
        self.knots
            .iter()
            .map(|k| k.left.abs().max(k.right.abs()))
            .fold(0.0, f64::max)
    }

    /// Largest decreasing slope `max(0, -min segment slope)`.
    pub fn max_decrease(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| -(w[1].left - w[0].right) / (w[1].at - w[0].at))
            .fold(0.0, f64::max)
    }

    /// Largest increasing slope of the linear pieces.
    pub fn max_increase(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| (w[1].left - w[0].right) / (w[1].at - w[0].at))
            .fold(0.0, f64::max)
    }

    pub fn has_downward_jump(&self) -> bool {
        self.knots.iter().any(|k| k.right < k.left)
    }

    /// `int_a^b p(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        if b < a {
            return -self.integral(b, a);
        }
        let mut pts = vec![a];
        pts.extend(self.knots.iter().map(|k| k.at).filter(|&s| s > a && s < b));
        pts.push(b);
        pts.windows(2)
            .map(|w| {
                let (lo, hi) = (w[0], w[1]);
                // p is linear on (lo, hi): use interior one-sided values at the ends
                let p_lo = self.one_sided(lo).1;
                let p_hi = self.one_sided(hi).0;
                0.5 * (p_lo + p_hi) * (hi - lo)
            })
            .sum()
    }

    /// `j(r) = int_0^r p`.
    pub fn primitive(&self, r: f64) -> f64 {
        self.integral(0.0, r)
    }

    /// `max(p(r-) d, p(r+) d)`.
    pub fn clarke_derivative(&self, r: f64, d: f64) -> f64 {
        let (l, rt) = self.one_sided(r);
        (l * d).max(rt * d)
    }

    pub fn midpoint_selection(&self, r: f64) -> f64 {
        let (l, rt) = self.one_sided(r);
        0.5 * (l + rt)
    }

    /// Continuous part `p(r-) - sum of jumps strictly below r`.
    pub fn continuous_part(&self, r: f64) -> f64 {
        let below: f64 = self.knots.iter().filter(|k| k.at < r).map(|k| k.right - k.left).sum();
        self.exact_one_sided(r).0 - below
    }

    /// Upward jumps as `(location, height)`.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        self.knots
            .iter()
            .filter(|k| k.right != k.left)
            .map(|k| (k.at, k.right - k.left))
            .collect()
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            knots: self
                .knots
                .iter()
                .map(|k| Knot {
                    at: k.at,
                    left: lambda * k.left,
                    right: lambda * k.right,
                })
                .collect(),
        }
    }
}

/// Displacement-dependent damper coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Damper {
    /// `k = 1`.
    Unit,
    /// `k(r) = clamp(k1 + slope r, k1, k2)` with `0 < k1 <= k2`.
    Clamped { k1: f64, k2: f64, slope: f64 },
}

impl Damper {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Damper::Unit => 1.0,
            Damper::Clamped { k1, k2, slope } => (k1 + slope * r).clamp(k1, k2),
        }
    }

    pub fn upper(&self) -> f64 {
        match *self {
            Damper::Unit => 1.0,
            Damper::Clamped { k2, .. } => k2,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Damper::Unit => 0.0,
            Damper::Clamped { slope, .. } => slope.abs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Damper::Clamped { k1, k2, slope } = *self {
            if !(k1 > 0.0 && k2 >= k1 && slope.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "damper needs 0 < k1 <= k2, got k1 = {k1}, k2 = {k2}"
                )));
            }
        }
        Ok(())
    }
}

/// `j(z, v) = sum_i weight_i k(z_i) j_nu(v_i)` with `j_nu(r) = int_0^r p`.
#[derive(Debug, Clone)]
pub struct NodalPotential {
    slope: PiecewiseLinearSlope,
    weights: Vec<f64>,
    damper: Damper,
    alpha: f64,
    c0: f64,
}

/// Scalar potential `j_nu(r) = int_0^r p(s) ds` with declared one-sided constant `alpha` and
/// bound `c0` on `|p|`.
pub fn builtin_jnu(p: PiecewiseLinearSlope, alpha: f64, c0: f64) -> Result<NodalPotential> {
    if p.bound() > c0 * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::InvalidInput(format!(
            "slope function is not bounded by c0 = {c0} (sup |p| = {})",
            p.bound()
        )));
    }
    if p.has_downward_jump() {
        return Err(Error::InvalidInput(
            "slope function jumps downward; no finite one-sided constant exists".into(),
        ));
    }
    if p.max_decrease() > alpha * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::InvalidInput(format!(
            "declared alpha = {alpha} is below the largest decreasing slope {}",
            p.max_decrease()
        )));
    }
    Ok(NodalPotential {
        slope: p,
        weights: vec![1.0],
        damper: Damper::Unit,
        alpha,
        c0,
    })
}

impl NodalPotential {
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInput("node weights must be positive".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn with_damper(mut self, damper: Damper) -> Result<Self> {
        damper.validate()?;
        self.damper = damper;
        Ok(self)
    }

    pub fn slope(&self) -> &PiecewiseLinearSlope {
        &self.slope
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn k(&self, z: &Vector, i: usize) -> f64 {
        match self.damper {
            Damper::Unit => 1.0,
            d => d.eval(z[i]),
        }
    }

    fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

impl NonsmoothPotential for NodalPotential {
    fn dims(&self) -> PotentialDims {
        PotentialDims {
            x: None,
            history: match self.damper {
                Damper::Unit => None,
                _ => Some(self.weights.len()),
            },
            v: self.weights.len(),
        }
    }

    fn eval(&self, _t: f64, _x: &Vector, z: &Vector, v: &Vector) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.k(z, i) * self.slope.primitive(v[i]))
            .sum()
    }

    fn dir_deriv(&self, _t: f64, _x: &Vector, z: &Vector, v: &Vector, d: &Vector) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.k(z, i) * self.slope.clarke_derivative(v[i], d[i]))
            .sum()
    }

    fn subgrad_select(&self, _t: f64, _x: &Vector, z: &Vector, v: &Vector) -> Vector {
        Vector::from_fn(self.weights.len(), |i, _| {
            self.weights[i] * self.k(z, i) * self.slope.midpoint_selection(v[i])
        })
    }

    fn constants(&self) -> JConstants {
        let w = self.max_weight();
        let n = (self.weights.len() as f64).sqrt();
        JConstants {
            c0: self.c0 * self.damper.upper() * w * n,
            c1: 0.0,
            c2: 0.0,
            c3: 0.0,
            m: self.alpha * self.damper.upper() * w,
            m_bar: self.c0 * self.damper.lipschitz() * w,
        }
    }

    fn smooth_gradient(&self, _t: f64, _x: &Vector, z: &Vector, v: &Vector) -> Vector {
        Vector::from_fn(self.weights.len(), |i, _| {
            self.weights[i] * self.k(z, i) * self.slope.continuous_part(v[i])
        })
    }

    fn ramps(&self, _t: f64, _x: &Vector, z: &Vector) -> NodeRamps {
        let jumps = self.slope.jumps();
        (0..self.weights.len())
            .map(|i| {
                let scale = self.weights[i] * self.k(z, i);
                jumps.iter().map(|&(s, h)| (s, h * scale)).collect()
            })
            .collect()
    }

    fn is_zero(&self) -> bool {
        self.slope.knots().is_empty()
    }
}

/// Friction coefficient `mu(r)` with `0 <= mu <= mu0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrictionCoefficient {
    Constant {
        mu0: f64,
    },
    /// `mu0 min(1, |r| / scale)`.
    Saturating {
        mu0: f64,
        scale: f64,
    },
}

impl FrictionCoefficient {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            FrictionCoefficient::Constant { mu0 } => mu0,
            FrictionCoefficient::Saturating { mu0, scale } => mu0 * (r.abs() / scale).min(1.0),
        }
    }
    pub fn cap(&self) -> f64 {
        match *self {
            FrictionCoefficient::Constant { mu0 } | FrictionCoefficient::Saturating { mu0, .. } => mu0,
        }
    }
    pub fn lipschitz(&self) -> f64 {
        match *self {
            FrictionCoefficient::Constant { .. } => 0.0,
            FrictionCoefficient::Saturating { mu0, scale } => mu0 / scale,
        }
    }
}

/// Bonding-dependent factor `h1(beta)` with `0 <= h1 <= h0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BondingFactor {
    /// `h0 clamp(beta, 0, 1)`.
    Clamped {
        h0: f64,
    },
    Constant {
        h0: f64,
    },
}

impl BondingFactor {
    pub fn eval(&self, beta: f64) -> f64 {
        match *self {
            BondingFactor::Clamped { h0 } => h0 * beta.clamp(0.0, 1.0),
            BondingFactor::Constant { h0 } => h0,
        }
    }
    pub fn cap(&self) -> f64 {
        match *self {
            BondingFactor::Clamped { h0 } | BondingFactor::Constant { h0 } => h0,
        }
    }
    pub fn lipschitz(&self) -> f64 {
        match *self {
            BondingFactor::Clamped { h0 } => h0,
            BondingFactor::Constant { .. } => 0.0,
        }
    }
}

/// `phi(beta, y, v) = sum_i weight_i mu(y_i) h1(beta_i) |v_i|`.
#[derive(Debug, Clone)]
pub struct CoulombPotential {
    weights: Vec<f64>,
    mu: FrictionCoefficient,
    h1: BondingFactor,
}

/// Coulomb-type friction potential on a single contact node with `mu = mu0` and
/// `h1(beta) = h0 clamp(beta, 0, 1)`.
pub fn builtin_phi_coulomb(mu0: f64, h0: f64) -> Result<CoulombPotential> {
    CoulombPotential::new(
        vec![1.0],
        FrictionCoefficient::Constant { mu0 },
        BondingFactor::Clamped { h0 },
    )
}

impl CoulombPotential {
    pub fn new(weights: Vec<f64>, mu: FrictionCoefficient, h1: BondingFactor) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInput("node weights must be positive".into()));
        }
        if !(mu.cap() >= 0.0 && h1.cap() >= 0.0) {
            return Err(Error::InvalidInput("friction caps must be nonnegative".into()));
        }
        if let FrictionCoefficient::Saturating { scale, .. } = mu {
            if !(scale > 0.0) {
                return Err(Error::InvalidInput("friction scale must be positive".into()));
            }
        }
        Ok(Self { weights, mu, h1 })
    }

    fn coeff(&self, x: &Vector, y: &Vector, i: usize) -> f64 {
        let mu = match self.mu {
            FrictionCoefficient::Constant { mu0 } => mu0,
            m => m.eval(y[i]),
        };
        let h = match self.h1 {
            BondingFactor::Constant { h0 } => h0,
            b => b.eval(x[i]),
        };
        self.weights[i] * mu * h
    }
}

impl ConvexPotential for CoulombPotential {
    fn dims(&self) -> PotentialDims {
        let n = self.weights.len();
        PotentialDims {
            x: match self.h1 {
                BondingFactor::Constant { .. } => None,
                _ => Some(n),
            },
            history: match self.mu {
                FrictionCoefficient::Constant { .. } => None,
                _ => Some(n),
            },
            v: n,
        }
    }

    fn eval(&self, _t: f64, x: &Vector, y: &Vector, v: &Vector) -> f64 {
        (0..self.weights.len()).map(|i| self.coeff(x, y, i) * v[i].abs()).sum()
    }

    fn subgrad(&self, _t: f64, x: &Vector, y: &Vector, v: &Vector) -> Vector {
        Vector::from_fn(self.weights.len(), |i, _| {
            let s = if v[i] > 0.0 {
                1.0
            } else if v[i] < 0.0 {
                -1.0
            } else {
                0.0
            };
            self.coeff(x, y, i) * s
        })
    }

    fn constants(&self) -> PhiConstants {
        let w = self.weights.iter().copied().fold(0.0, f64::max);
        let n = (self.weights.len() as f64).sqrt();
        PhiConstants {
            c0: self.mu.cap() * self.h1.cap() * w * n,
            c1: 0.0,
            c2: 0.0,
            c3: 0.0,
            m: w * (self.mu.cap() * self.h1.lipschitz()).max(self.h1.cap() * self.mu.lipschitz()),
        }
    }

    // |v| = 2 (v)_+ - v
    fn smooth_gradient(&self, _t: f64, x: &Vector, y: &Vector, _v: &Vector) -> Vector {
        Vector::from_fn(self.weights.len(), |i, _| -self.coeff(x, y, i))
    }

    fn ramps(&self, _t: f64, x: &Vector, y: &Vector) -> NodeRamps {
        (0..self.weights.len())
            .map(|i| vec![(0.0, 2.0 * self.coeff(x, y, i))])
            .collect()
    }
}

fn sample_arg<R: Rng>(rng: &mut R, dim: Option<usize>, scale: f64) -> Vector {
    uniform_vector(rng, dim.unwrap_or(0), scale)
}

fn pad(v: &Vector, dim: Option<usize>) -> Vector {
    if dim.is_none() && v.is_empty() {
        Vector::zeros(0)
    } else {
        v.clone()
    }
}

/// Arguments this close to a knot (relative) are treated as lying on it.
pub const KNOT_SNAP: f64 = 1e-12;

/// Range of sampled arguments in [`verify_onesided`] and [`verify_convex`].
pub const SAMPLE_RANGE: f64 = 3.0;

/// Smallest `(m_j, m_bar_j)` fitting the one-sided inequality on random samples, in Euclidean
/// coordinates. `m_j` is the raw maximum and may be negative for monotone potentials.
pub fn verify_onesided(pot: &dyn NonsmoothPotential, samples: usize, seed: u64) -> (f64, f64) {
    let dims = pot.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pair_sum = |x1: &Vector, z1: &Vector, v1: &Vector, x2: &Vector, z2: &Vector, v2: &Vector| {
        pot.dir_deriv(0.0, x1, z1, v1, &(v2 - v1)) + pot.dir_deriv(0.0, x2, z2, v2, &(v1 - v2))
    };
    let mut m = f64::NEG_INFINITY;
    let half = samples.div_ceil(2).max(1);
    for _ in 0..half {
        let x = sample_arg(&mut rng, dims.x, SAMPLE_RANGE);
        let z = sample_arg(&mut rng, dims.history, SAMPLE_RANGE);
        let v1 = uniform_vector(&mut rng, dims.v, SAMPLE_RANGE);
        let dir = uniform_vector(&mut rng, dims.v, 1.0);
        if dir.norm() == 0.0 {
            continue;
        }
        let h = 10f64.powf(rng.random_range(-3.0..0.5));
        let v2 = &v1 + dir.normalize() * h;
        let dv = (&v2 - &v1).norm_squared();
        m = m.max(pair_sum(&x, &z, &v1, &x, &z, &v2) / dv);
    }
    let mut m_bar: f64 = 0.0;
    for _ in 0..samples.saturating_sub(half) {
        let x1 = sample_arg(&mut rng, dims.x, SAMPLE_RANGE);
        let x2 = sample_arg(&mut rng, dims.x, SAMPLE_RANGE);
        let z1 = sample_arg(&mut rng, dims.history, SAMPLE_RANGE);
        let z2 = sample_arg(&mut rng, dims.history, SAMPLE_RANGE);
        let v1 = uniform_vector(&mut rng, dims.v, SAMPLE_RANGE);
        let v2 = uniform_vector(&mut rng, dims.v, SAMPLE_RANGE);
        let dv = (&v2 - &v1).norm();
        let dxz = (&x1 - &x2).norm() + (&z1 - &z2).norm();
        if dv == 0.0 || dxz == 0.0 {
            continue;
        }
        let s = pair_sum(&pad(&x1, dims.x), &z1, &v1, &x2, &z2, &v2);
        m_bar = m_bar.max((s - m.max(0.0) * dv * dv) / (dxz * dv));
    }
    (if m.is_finite() { m } else { 0.0 }, m_bar)
}

/// Worst sampled violations of the pointwise requirements on a nonsmooth potential.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct NonsmoothReport {
    /// `max (<selection, d> - j0(v; d))`; must stay below `1e-9`.
    pub selection_gap: f64,
    /// `max |j0(v; l d) - l j0(v; d)|`.
    pub homogeneity_gap: f64,
    /// `max (j0(v; d1 + d2) - j0(v; d1) - j0(v; d2))`.
    pub subadditivity_gap: f64,
    /// `max (|selection| - growth bound)`.
    pub growth_gap: f64,
    pub m_emp: f64,
    pub m_bar_emp: f64,
    pub samples: usize,
    pub seed: u64,
}

pub fn check_nonsmooth(pot: &dyn NonsmoothPotential, samples: usize, seed: u64) -> NonsmoothReport {
    let dims = pot.dims();
    let c = pot.constants();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = NonsmoothReport {
        selection_gap: f64::NEG_INFINITY,
        homogeneity_gap: 0.0,
        subadditivity_gap: f64::NEG_INFINITY,
        growth_gap: f64::NEG_INFINITY,
        samples,
        seed,
        ..Default::default()
    };
    for _ in 0..samples {
        let x = sample_arg(&mut rng, dims.x, SAMPLE_RANGE);
        let z = sample_arg(&mut rng, dims.history, SAMPLE_RANGE);
        let mut v = uniform_vector(&mut rng, dims.v, SAMPLE_RANGE);
        // land on kinks of the built-ins now and then
        if rng.random_bool(0.25) {
            v.iter_mut().for_each(|c| *c = c.round());
        }
        let d1 = uniform_vector(&mut rng, dims.v, 1.0);
        let d2 = uniform_vector(&mut rng, dims.v, 1.0);
        let lambda = rng.random_range(0.1..5.0);
        let j0 = |d: &Vector| pot.dir_deriv(0.0, &x, &z, &v, d);
        let sel = pot.subgrad_select(0.0, &x, &z, &v);
        r.selection_gap = r.selection_gap.max(sel.dot(&d1) - j0(&d1));
        r.homogeneity_gap = r.homogeneity_gap.max((j0(&(&d1 * lambda)) - lambda * j0(&d1)).abs());
        r.subadditivity_gap = r.subadditivity_gap.max(j0(&(&d1 + &d2)) - j0(&d1) - j0(&d2));
        let bound = c.c0 + c.c1 * x.norm() + c.c2 * z.norm() + c.c3 * v.norm();
        r.growth_gap = r.growth_gap.max(sel.norm() - bound);
    }
    let (m, mb) = verify_onesided(pot, samples, seed.wrapping_add(1));
    r.m_emp = m;
    r.m_bar_emp = mb;
    r
}

/// Worst sampled violations of the convex-potential requirements.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConvexReport {
    /// `max (phi(mid) - (phi(a) + phi(b)) / 2)`.
    pub convexity_gap: f64,
    /// `max (phi(v) + <g, w - v> - phi(w))`.
    pub subgradient_gap: f64,
    /// Smallest constant fitting the exchange inequality on the samples.
    pub m_emp: f64,
    pub growth_gap: f64,
    pub samples: usize,
    pub seed: u64,
}

pub fn verify_convex(pot: &dyn ConvexPotential, samples: usize, seed: u64) -> ConvexReport {
    let dims = pot.dims();
    let c = pot.constants();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = ConvexReport {
        convexity_gap: f64::NEG_INFINITY,
        subgradient_gap: f64::NEG_INFINITY,
        growth_gap: f64::NEG_INFINITY,
        samples,
        seed,
        ..Default::default()
    };
    for _ in 0..samples {
        let x1 = sample_arg(&mut rng, dims.x, SAMPLE_RANGE);
        let x2 = sample_arg(&mut rng, dims.x, SAMPLE_RANGE);
        let y1 = sample_arg(&mut rng, dims.history, SAMPLE_RANGE);
        let y2 = sample_arg(&mut rng, dims.history, SAMPLE_RANGE);
        let a = uniform_vector(&mut rng, dims.v, SAMPLE_RANGE);
        let b = uniform_vector(&mut rng, dims.v, SAMPLE_RANGE);
        let f = |x: &Vector, y: &Vector, v: &Vector| pot.eval(0.0, x, y, v);
        let mid = (&a + &b) * 0.5;
        r.convexity_gap = r
            .convexity_gap
            .max(f(&x1, &y1, &mid) - 0.5 * (f(&x1, &y1, &a) + f(&x1, &y1, &b)));
        let g = pot.subgrad(0.0, &x1, &y1, &a);
        r.subgradient_gap = r
            .subgradient_gap
            .max(f(&x1, &y1, &a) + g.dot(&(&b - &a)) - f(&x1, &y1, &b));
        let exch = f(&x1, &y1, &b) - f(&x1, &y1, &a) + f(&x2, &y2, &a) - f(&x2, &y2, &b);
        let denom = ((&x1 - &x2).norm() + (&y1 - &y2).norm()) * (&a - &b).norm();
        if denom > 0.0 {
            r.m_emp = r.m_emp.max(exch / denom);
        }
        let bound = c.c0 + c.c1 * x1.norm() + c.c2 * y1.norm() + c.c3 * a.norm();
        r.growth_gap = r.growth_gap.max(g.norm() - bound);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn empty() -> Vector {
        Vector::zeros(0)
    }

    /// Continuous slope with a decreasing middle piece of slope -sigma.
    fn nonmonotone(sigma: f64) -> PiecewiseLinearSlope {
        PiecewiseLinearSlope::continuous(&[(-1.0, -1.0), (0.0, 0.5), (0.5, 0.5 - 0.5 * sigma), (2.0, 1.0)]).unwrap()
    }

    #[test]
    fn zero_slope_gives_zero_potential() {
        let j = builtin_jnu(PiecewiseLinearSlope::zero(), 0.0, 0.0).unwrap();
        assert_eq!(j.eval(0.0, &empty(), &empty(), &s(2.0)), 0.0);
        assert_eq!(j.dir_deriv(0.0, &empty(), &empty(), &s(2.0), &s(1.0)), 0.0);
        assert_eq!(j.constants().m, 0.0);
        assert_eq!(verify_onesided(&j, 200, 1), (0.0, 0.0));
    }

    #[test]
    fn clamp_slope_is_monotone() {
        let j = builtin_jnu(PiecewiseLinearSlope::clamp(-1.0, 1.0).unwrap(), 0.0, 1.0).unwrap();
        assert_eq!(j.dir_deriv(0.0, &empty(), &empty(), &s(0.0), &s(1.0)), 0.0);
        assert!((j.eval(0.0, &empty(), &empty(), &s(0.5)) - 0.125).abs() < 1e-15);
        assert!((j.eval(0.0, &empty(), &empty(), &s(2.0)) - 1.5).abs() < 1e-15);
        let (m, _) = verify_onesided(&j, 2000, 3);
        assert!(m <= 1e-9, "m_emp = {m}");
    }

    #[test]
    fn decreasing_slope_requires_alpha() {
        assert!(builtin_jnu(nonmonotone(2.0), 1.0, 2.0).is_err());
        assert!(builtin_jnu(nonmonotone(2.0), 2.0, 2.0).is_ok());
        let jump_down = PiecewiseLinearSlope::new(vec![Knot {
            at: 1.0,
            left: 1.0,
            right: 0.0,
        }])
        .unwrap();
        assert!(builtin_jnu(jump_down, 10.0, 1.0).is_err());
        assert!(builtin_jnu(PiecewiseLinearSlope::clamp(-3.0, 3.0).unwrap(), 0.0, 1.0).is_err());
    }

    #[test]
    fn clarke_derivative_at_kink_takes_the_max() {
        let j = builtin_jnu(PiecewiseLinearSlope::sign(2.0).unwrap(), 0.0, 2.0).unwrap();
        assert_eq!(j.dir_deriv(0.0, &empty(), &empty(), &s(0.0), &s(1.0)), 2.0);
        assert_eq!(j.dir_deriv(0.0, &empty(), &empty(), &s(0.0), &s(-1.0)), 2.0);
        assert_eq!(j.subgrad_select(0.0, &empty(), &empty(), &s(0.0))[0], 0.0);
        let ramps = j.ramps(0.0, &empty(), &empty());
        assert_eq!(ramps, vec![vec![(0.0, 4.0)]]);
        assert_eq!(j.smooth_gradient(0.0, &empty(), &empty(), &s(0.5))[0], -2.0);
    }

    #[test]
    fn split_reconstructs_the_potential() {
        let p = PiecewiseLinearSlope::new(vec![
            Knot {
                at: -1.0,
                left: -0.5,
                right: 0.2,
            },
            Knot {
                at: 0.5,
                left: 0.0,
                right: 0.0,
            },
            Knot {
                at: 1.5,
                left: 0.3,
                right: 1.0,
            },
        ])
        .unwrap();
        let j = builtin_jnu(p.clone(), p.max_decrease(), p.bound()).unwrap();
        let ramps = &j.ramps(0.0, &empty(), &empty())[0];
        // d/dr of smooth part + ramps reproduces p away from knots
        for &r in &[-2.0, -0.3, 0.9, 2.4] {
            let ramp_slope: f64 = ramps.iter().filter(|(s, _)| *s < r).map(|(_, c)| c).sum();
            let total = j.smooth_gradient(0.0, &empty(), &empty(), &s(r))[0] + ramp_slope;
            assert!((total - p.one_sided(r).0).abs() < 1e-14);
        }
    }

    #[test]
    fn scaling_the_slope_scales_derivative_and_constant() {
        let base = builtin_jnu(nonmonotone(1.5), 1.5, 1.0).unwrap();
        let lam = 2.5;
        let scaled = builtin_jnu(nonmonotone(1.5).scaled(lam), 1.5 * lam, lam).unwrap();
        for &(r, d) in &[(0.2, 1.0), (-0.7, -2.0), (0.0, 0.3)] {
            let a = base.dir_deriv(0.0, &empty(), &empty(), &s(r), &s(d));
            let b = scaled.dir_deriv(0.0, &empty(), &empty(), &s(r), &s(d));
            assert!((b - lam * a).abs() <= 1e-9 * b.abs().max(1.0));
        }
        let (m, _) = verify_onesided(&base, 4000, 9);
        let (ms, _) = verify_onesided(&scaled, 4000, 9);
        assert!((ms - lam * m).abs() <= 1e-9 * ms.abs());
    }

    #[test]
    fn coulomb_examples() {
        let phi = builtin_phi_coulomb(2.0, 1.0).unwrap();
        let beta1 = s(1.0);
        assert_eq!(phi.eval(0.0, &beta1, &empty(), &s(0.0)), 0.0);
        assert_eq!(phi.subgrad(0.0, &beta1, &empty(), &s(0.0))[0], 0.0);
        assert_eq!(phi.eval(0.0, &s(0.0), &empty(), &s(5.0)), 0.0);
        assert_eq!(phi.eval(0.0, &beta1, &empty(), &s(-3.0)), 6.0);
        assert_eq!(phi.subgrad(0.0, &beta1, &empty(), &s(-3.0))[0], -2.0);
        let rep = verify_convex(&phi, 2000, 4);
        assert!(rep.convexity_gap <= 1e-9);
        assert!(rep.subgradient_gap <= 1e-9);
        assert!(rep.m_emp <= phi.constants().m + 1e-9);
    }

    #[test]
    fn damped_potential_satisfies_declared_constants() {
        let j = builtin_jnu(nonmonotone(1.0), 1.0, 1.0)
            .unwrap()
            .with_damper(Damper::Clamped {
                k1: 0.5,
                k2: 1.5,
                slope: 0.4,
            })
            .unwrap();
        let rep = check_nonsmooth(&j, 3000, 11);
        let c = j.constants();
        assert!(rep.selection_gap <= 1e-9);
        assert!(rep.homogeneity_gap <= 1e-9);
        assert!(rep.subadditivity_gap <= 1e-9);
        assert!(rep.growth_gap <= 1e-9);
        assert!(rep.m_emp <= c.m + 1e-6, "{} vs {}", rep.m_emp, c.m);
        assert!(rep.m_bar_emp <= c.m_bar + 1e-6, "{} vs {}", rep.m_bar_emp, c.m_bar);
    }
}
