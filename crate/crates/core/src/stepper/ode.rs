//! Right-hand sides `F(t, x, w, s)` of the state equation and the implicit Euler step.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, Matrix, Vector};

/// Sizes of `(x, w, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OdeDims {
    pub x: usize,
    pub w: usize,
    pub s: usize,
}

pub trait OdeRightHandSide: Debug + Send + Sync {
    fn dims(&self) -> OdeDims;

    fn eval(&self, t: f64, x: &Vector, w: &Vector, s: &Vector) -> Vector;

    /// Joint Lipschitz constant in `(x, w, s)`.
    fn lipschitz(&self) -> f64;
}

/// `F = 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroRhs {
    pub dims: OdeDims,
}

impl OdeRightHandSide for ZeroRhs {
    fn dims(&self) -> OdeDims {
        self.dims
    }
    fn eval(&self, _: f64, _: &Vector, _: &Vector, _: &Vector) -> Vector {
        Vector::zeros(self.dims.x)
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
}

/// `F = A x + B w + C s + c`.
#[derive(Debug, Clone)]
pub struct LinearRhs {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    offset: Vector,
    lipschitz: f64,
}

impl LinearRhs {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, offset: Vector) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.nrows() != n || offset.len() != n {
            return Err(Error::Dimension {
                what: "linear right-hand side",
                expected: n,
                found: b.nrows().min(c.nrows()).min(offset.len()),
            });
        }
        let spec = |m: &Matrix| {
            if m.is_empty() {
                0.0
            } else {
                m.clone().svd(false, false).singular_values.max()
            }
        };
        let lipschitz = spec(&a).max(spec(&b)).max(spec(&c));
        Ok(Self {
            a,
            b,
            c,
            offset,
            lipschitz,
        })
    }

    /// Declared constant for non-Euclidean norms; must dominate the true one.
    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = lipschitz;
        self
    }
}

impl OdeRightHandSide for LinearRhs {
    fn dims(&self) -> OdeDims {
        OdeDims {
            x: self.a.nrows(),
            w: self.b.ncols(),
            s: self.c.ncols(),
        }
    }
    fn eval(&self, _t: f64, x: &Vector, w: &Vector, s: &Vector) -> Vector {
        &self.a * x + &self.b * w + &self.c * s + &self.offset
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

type RhsFn = dyn Fn(f64, &Vector, &Vector, &Vector) -> Vector + Send + Sync;

/// Right-hand side given by a closure and a declared Lipschitz constant.
#[derive(Clone)]
pub struct ClosureRhs {
    f: Arc<RhsFn>,
    dims: OdeDims,
    lipschitz: f64,
}

impl ClosureRhs {
    pub fn new(
        dims: OdeDims,
        lipschitz: f64,
        f: impl Fn(f64, &Vector, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            dims,
            lipschitz,
        }
    }
}

impl Debug for ClosureRhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClosureRhs")
            .field("dims", &self.dims)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl OdeRightHandSide for ClosureRhs {
    fn dims(&self) -> OdeDims {
        self.dims
    }
    fn eval(&self, t: f64, x: &Vector, w: &Vector, s: &Vector) -> Vector {
        (self.f)(t, x, w, s)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

pub const PICARD_TOL: f64 = 1e-12;
pub const PICARD_MAX_ITER: usize = 10_000;

/// Implicit Euler `x = x_n + tau F(t, x, w, s)`, solved by Picard iteration from `x_n`.
pub fn ode_step(
    rhs: &dyn OdeRightHandSide,
    t_next: f64,
    x_n: &Vector,
    w_next: &Vector,
    s_next: &Vector,
    tau: f64,
) -> Result<Vector> {
    let dims = rhs.dims();
    check_dim("state", dims.x, x_n)?;
    check_dim("velocity argument of F", dims.w, w_next)?;
    check_dim("history argument of F", dims.s, s_next)?;
    let q = tau * rhs.lipschitz();
    if q >= 1.0 {
        return Err(Error::Picard(format!(
            "tau * L_F = {q:.4} must be below 1 for the implicit step"
        )));
    }
    let mut x = x_n.clone();
    for _ in 0..PICARD_MAX_ITER {
        let next = x_n + rhs.eval(t_next, &x, w_next, s_next) * tau;
        let change = (&next - &x).norm();
        x = next;
        if !change.is_finite() {
            break;
        }
        if change <= PICARD_TOL * x.norm().max(1.0) {
            return Ok(x);
        }
    }
    Err(Error::Picard(format!(
        "no convergence in {PICARD_MAX_ITER} iterations; the declared L_F = {} is likely too small",
        rhs.lipschitz()
    )))
}
