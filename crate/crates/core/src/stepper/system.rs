//! Complete description of one problem instance.

use std::fmt::Debug;
use std::ops::Deref;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TimeGrid};
use crate::history::HistoryOperator;
use crate::linalg::{check_dim, Matrix, Vector};
use crate::potentials::{ConvexPotential, NonsmoothPotential};
use crate::spaces::{AffineMap, ConstraintSet, GalerkinSpace, HypothesisConstants};
use crate::stepper::ode::OdeRightHandSide;

/// The operator `A(t, x, w)` with values in `V*` (pairing coordinates).
pub trait EvolutionOperator: Debug + Send + Sync {
    /// `(dim E, dim V)`.
    fn dims(&self) -> (usize, usize);

    fn eval(&self, t: f64, x: &Vector, w: &Vector) -> Vector;

    /// Exact `dA/dw` if available; a finite difference is used otherwise.
    fn jacobian(&self, _t: f64, _x: &Vector, _w: &Vector) -> Option<Matrix> {
        None
    }
}

/// `A(t, x, w) = K w + B x + c`.
#[derive(Debug, Clone)]
pub struct AffineOperator {
    pub stiffness: Matrix,
    pub coupling: Matrix,
    pub offset: Vector,
}

impl AffineOperator {
    pub fn new(stiffness: Matrix, coupling: Matrix, offset: Vector) -> Result<Self> {
        let n = stiffness.nrows();
        if stiffness.ncols() != n || coupling.nrows() != n || offset.len() != n {
            return Err(Error::Dimension {
                what: "affine operator",
                expected: n,
                found: coupling.nrows(),
            });
        }
        Ok(Self {
            stiffness,
            coupling,
            offset,
        })
    }

    pub fn stiffness_only(stiffness: Matrix, x_dim: usize) -> Result<Self> {
        let n = stiffness.nrows();
        Self::new(stiffness, Matrix::zeros(n, x_dim), Vector::zeros(n))
    }
}

impl EvolutionOperator for AffineOperator {
    fn dims(&self) -> (usize, usize) {
        (self.coupling.ncols(), self.stiffness.nrows())
    }
    fn eval(&self, _t: f64, x: &Vector, w: &Vector) -> Vector {
        &self.stiffness * w + &self.coupling * x + &self.offset
    }
    fn jacobian(&self, _t: f64, _x: &Vector, _w: &Vector) -> Option<Matrix> {
        Some(self.stiffness.clone())
    }
}

type OperatorFn = dyn Fn(f64, &Vector, &Vector) -> Vector + Send + Sync;

/// Operator given by a closure.
#[derive(Clone)]
pub struct ClosureOperator {
    f: Arc<OperatorFn>,
    dims: (usize, usize),
}

impl ClosureOperator {
    pub fn new(
        x_dim: usize,
        w_dim: usize,
        f: impl Fn(f64, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            dims: (x_dim, w_dim),
        }
    }
}

impl Debug for ClosureOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClosureOperator")
            .field("dims", &self.dims)
            .finish_non_exhaustive()
    }
}

impl EvolutionOperator for ClosureOperator {
    fn dims(&self) -> (usize, usize) {
        self.dims
    }
    fn eval(&self, t: f64, x: &Vector, w: &Vector) -> Vector {
        (self.f)(t, x, w)
    }
}

type LoadFn = dyn Fn(f64, &Vector) -> Vector + Send + Sync;

/// Right-hand side `f(t, x)` with values in `V*`.
#[derive(Clone)]
pub struct Load {
    f: Arc<LoadFn>,
    dim: usize,
    lipschitz: f64,
}

impl Debug for Load {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Load")
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl Load {
    pub fn new(dim: usize, lipschitz: f64, f: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            dim,
            lipschitz,
        }
    }

    pub fn fixed(value: Vector) -> Self {
        Self::new(value.len(), 0.0, move |_, _| value.clone())
    }

    /// State-independent load given at grid nodes, linear in between.
    pub fn from_samples(samples: GridFunction) -> Self {
        let grid: TimeGrid = *samples.grid();
        let values = samples.into_values();
        let dim = values[0].len();
        Self::new(dim, 0.0, move |t, _| {
            let s = ((t - grid.node(0)) / grid.tau()).clamp(0.0, grid.steps() as f64);
            let k = (s.floor() as usize).min(grid.steps().saturating_sub(1));
            let theta = s - k as f64;
            if grid.steps() == 0 {
                return values[0].clone();
            }
            &values[k] * (1.0 - theta) + &values[k + 1] * theta
        })
    }

    /// `f + delta g` with a time-independent `g`.
    pub fn perturbed(&self, direction: Vector, delta: f64) -> Self {
        let base = self.f.clone();
        Self {
            f: Arc::new(move |t, x| base(t, x) + &direction * delta),
            dim: self.dim,
            lipschitz: self.lipschitz,
        }
    }

    pub fn eval(&self, t: f64, x: &Vector) -> Vector {
        (self.f)(t, x)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Components of a problem instance before validation.
#[derive(Debug, Clone)]
pub struct SystemParts {
    /// State space `E`.
    pub e: Arc<GalerkinSpace>,
    /// Velocity space `V` with its H Gram matrix.
    pub v: Arc<GalerkinSpace>,
    /// Space `X` on which `j` and `phi` act.
    pub x_space: Arc<GalerkinSpace>,
    pub ode: Arc<dyn OdeRightHandSide>,
    pub a: Arc<dyn EvolutionOperator>,
    pub j: Arc<dyn NonsmoothPotential>,
    pub phi: Arc<dyn ConvexPotential>,
    pub load: Load,
    pub m: AffineMap,
    pub s: HistoryOperator,
    pub r1: HistoryOperator,
    pub r2: HistoryOperator,
    pub r3: HistoryOperator,
    pub k: ConstraintSet,
    pub x0: Vector,
    pub w0: Vector,
    /// Displacement at `t = 0`; when set, reports include `u = u0 + int w`.
    pub u0: Option<Vector>,
    pub constants: HypothesisConstants,
}

/// Validated problem instance.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    parts: SystemParts,
}

impl Deref for SystemSpec {
    type Target = SystemParts;
    fn deref(&self) -> &SystemParts {
        &self.parts
    }
}

fn mismatch(what: &str, expected: usize, found: usize) -> Error {
    Error::SpaceMismatch {
        expected: format!("{what} of dimension {expected}"),
        found: format!("dimension {found}"),
    }
}

impl SystemSpec {
    /// Checks dimensions and the smallness condition. Constants known exactly from the
    /// components (`|M1|`, the history and ODE constants) replace the declared ones; others are
    /// raised to the values the built-in components report.
    pub fn new(mut parts: SystemParts) -> Result<Self> {
        let (ne, nv, nx) = (parts.e.dim(), parts.v.dim(), parts.x_space.dim());
        let od = parts.ode.dims();
        if od.x != ne || od.w != nv || od.s != parts.s.target().dim() {
            return Err(mismatch("ODE right-hand side", ne, od.x));
        }
        if parts.a.dims() != (ne, nv) {
            return Err(mismatch("operator A", nv, parts.a.dims().1));
        }
        if parts.load.dim() != nv {
            return Err(mismatch("load", nv, parts.load.dim()));
        }
        if parts.m.source_dim() != nv || parts.m.target_dim() != nx {
            return Err(mismatch("map M", nx, parts.m.target_dim()));
        }
        for (name, op, target) in [
            ("S", &parts.s, None),
            ("R1", &parts.r1, Some(nv)),
            ("R2", &parts.r2, None),
            ("R3", &parts.r3, None),
        ] {
            if op.source().dim() != nv {
                return Err(mismatch(name, nv, op.source().dim()));
            }
            if let Some(t) = target {
                if op.target().dim() != t {
                    return Err(mismatch(name, t, op.target().dim()));
                }
            }
        }
        let jd = parts.j.dims();
        let pd = parts.phi.dims();
        if jd.v != nx || pd.v != nx {
            return Err(mismatch("potential argument", nx, jd.v.min(pd.v)));
        }
        for (dim, expected) in [
            (jd.x, ne),
            (pd.x, ne),
            (jd.history, parts.r2.target().dim()),
            (pd.history, parts.r3.target().dim()),
        ] {
            if let Some(d) = dim {
                if d != expected {
                    return Err(mismatch("potential parameter", expected, d));
                }
            }
        }
        parts.k.check_dim(nv)?;
        check_dim("initial state", ne, &parts.x0)?;
        check_dim("initial velocity", nv, &parts.w0)?;
        if let Some(u0) = &parts.u0 {
            check_dim("initial displacement", nv, u0)?;
        }
        if parts.w0.iter().chain(parts.x0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("initial data must be finite".into()));
        }

        let c = &mut parts.constants;
        c.norm_m1 = parts.m.norm_linear();
        c.c_s = parts.s.volterra_constant();
        c.c_r1 = parts.r1.volterra_constant();
        c.c_r2 = parts.r2.volterra_constant();
        c.c_r3 = parts.r3.volterra_constant();
        c.l_ode = parts.ode.lipschitz();
        c.l_f = c.l_f.max(parts.load.lipschitz());
        let jc = parts.j.constants();
        c.m_j = c.m_j.max(jc.m);
        c.m_bar_j = c.m_bar_j.max(jc.m_bar);
        c.c0j = c.c0j.max(jc.c0);
        c.c1j = c.c1j.max(jc.c1);
        c.c2j = c.c2j.max(jc.c2);
        c.c3j = c.c3j.max(jc.c3);
        let pc = parts.phi.constants();
        c.m_phi = c.m_phi.max(pc.m);
        c.c0phi = c.c0phi.max(pc.c0);
        c.c1phi = c.c1phi.max(pc.c1);
        c.c2phi = c.c2phi.max(pc.c2);
        c.c3phi = c.c3phi.max(pc.c3);
        c.validate()?;
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &SystemParts {
        &self.parts
    }

    pub fn into_parts(self) -> SystemParts {
        self.parts
    }

    pub fn smallness_margin(&self) -> f64 {
        self.parts.constants.smallness_margin()
    }

    /// Copy with changed initial data and load, revalidated.
    pub fn with_data(&self, x0: Vector, w0: Vector, load: Load) -> Result<Self> {
        let mut parts = self.parts.clone();
        parts.x0 = x0;
        parts.w0 = w0;
        parts.load = load;
        Self::new(parts)
    }
}
