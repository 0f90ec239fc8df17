//! Causal history-dependent operators on grid functions.
//!
//! Every form is evaluated through a [`HistoryCursor`] that holds the state needed to produce
//! the value at the next node from the next input value. Running integrals keep a partial sum
//! (O(1) per node), convolutions keep the past inputs (O(n) per node), and the solution operator
//! of the state equation keeps the current state.

use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Norm, TimeGrid};
use crate::linalg::{check_dim, uniform_vector, Matrix, Vector};
use crate::spaces::{operator_norm, Metric};
use crate::stepper::ode::{ode_step, OdeRightHandSide};

type KernelFn = dyn Fn(f64) -> Matrix + Send + Sync;

/// Matrix-valued kernel `C(r)` of elapsed time `r >= 0`.
#[derive(Clone)]
pub enum Kernel {
    /// `coeff exp(-r / relax_time) matrix`.
    Exponential {
        coeff: f64,
        relax_time: f64,
        matrix: Matrix,
    },
    /// Arbitrary kernel with a declared bound on `sup_r |C(r)|` between the operator's norms.
    General {
        f: Arc<KernelFn>,
        rows: usize,
        cols: usize,
        sup_norm: f64,
    },
}

impl Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::Exponential { coeff, relax_time, .. } => f
                .debug_struct("Exponential")
                .field("coeff", coeff)
                .field("relax_time", relax_time)
                .finish_non_exhaustive(),
            Kernel::General {
                rows, cols, sup_norm, ..
            } => f
                .debug_struct("General")
                .field("rows", rows)
                .field("cols", cols)
                .field("sup_norm", sup_norm)
                .finish_non_exhaustive(),
        }
    }
}

impl Kernel {
    pub fn general(rows: usize, cols: usize, sup_norm: f64, f: impl Fn(f64) -> Matrix + Send + Sync + 'static) -> Self {
        Kernel::General {
            f: Arc::new(f),
            rows,
            cols,
            sup_norm,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Kernel::Exponential { matrix, .. } => matrix.shape(),
            Kernel::General { rows, cols, .. } => (*rows, *cols),
        }
    }

    pub fn eval(&self, r: f64) -> Matrix {
        match self {
            Kernel::Exponential {
                coeff,
                relax_time,
                matrix,
            } => matrix * (coeff * (-r / relax_time).exp()),
            Kernel::General { f, .. } => f(r),
        }
    }
}

type PointwiseFn = dyn Fn(f64, &Vector) -> Vector + Send + Sync;

/// Pointwise-in-time map `y -> g(t, y)` with a Lipschitz constant in `y`.
#[derive(Clone)]
pub struct PointwiseMap {
    f: Arc<PointwiseFn>,
    out_dim: usize,
    lipschitz: f64,
}

impl Debug for PointwiseMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointwiseMap")
            .field("out_dim", &self.out_dim)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl PointwiseMap {
    pub fn new(out_dim: usize, lipschitz: f64, f: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            out_dim,
            lipschitz,
        }
    }

    /// `y -> m y`, with the constant measured between the given norms.
    pub fn linear(m: Matrix, source: &Metric, target: &Metric) -> Result<Self> {
        let lipschitz = operator_norm(&m, source, target)?;
        let out_dim = m.nrows();
        Ok(Self::new(out_dim, lipschitz, move |_, y| &m * y))
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn apply(&self, t: f64, y: &Vector) -> Vector {
        (self.f)(t, y)
    }
}

#[derive(Debug, Clone)]
pub enum HistoryForm {
    Zero,
    /// `b + int_0^t W w`.
    RunningIntegral {
        weight: Matrix,
        offset: Vector,
    },
    /// `int_0^t C(t - s) w(s) ds`.
    Convolution {
        kernel: Kernel,
    },
    /// Solution of `x' = F(t, x, w, S w)`, `x(0) = x0`.
    OdeSolution {
        rhs: Arc<dyn OdeRightHandSide>,
        inner: Box<HistoryOperator>,
        x0: Vector,
    },
    Composed {
        outer: PointwiseMap,
        inner: Box<HistoryOperator>,
    },
    Sum(Vec<HistoryOperator>),
}

/// Causal operator between trajectories with a declared Volterra constant.
#[derive(Debug, Clone)]
pub struct HistoryOperator {
    form: HistoryForm,
    source: Metric,
    target: Metric,
    volterra_constant: f64,
}

impl HistoryOperator {
    pub fn zero(source: Metric, target: Metric) -> Self {
        Self {
            form: HistoryForm::Zero,
            source,
            target,
            volterra_constant: 0.0,
        }
    }

    pub fn running_integral(weight: Matrix, offset: Vector, source: Metric, target: Metric) -> Result<Self> {
        check_dim("running-integral offset", target.dim(), &offset)?;
        let volterra_constant = operator_norm(&weight, &source, &target)?;
        Ok(Self {
            form: HistoryForm::RunningIntegral { weight, offset },
            source,
            target,
            volterra_constant,
        })
    }

    pub fn convolution(kernel: Kernel, source: Metric, target: Metric) -> Result<Self> {
        let (rows, cols) = kernel.shape();
        if rows != target.dim() || cols != source.dim() {
            return Err(Error::SpaceMismatch {
                expected: format!("{}x{} kernel", target.dim(), source.dim()),
                found: format!("{rows}x{cols}"),
            });
        }
        let volterra_constant = match &kernel {
            Kernel::Exponential { coeff, matrix, .. } => coeff.abs() * operator_norm(matrix, &source, &target)?,
            Kernel::General { sup_norm, .. } => *sup_norm,
        };
        Ok(Self {
            form: HistoryForm::Convolution { kernel },
            source,
            target,
            volterra_constant,
        })
    }

    pub fn composed(outer: PointwiseMap, inner: HistoryOperator, target: Metric) -> Result<Self> {
        if outer.out_dim != target.dim() {
            return Err(Error::SpaceMismatch {
                expected: target.id(),
                found: format!("pointwise map with {} outputs", outer.out_dim),
            });
        }
        Ok(Self {
            volterra_constant: outer.lipschitz * inner.volterra_constant,
            source: inner.source.clone(),
            form: HistoryForm::Composed {
                outer,
                inner: Box::new(inner),
            },
            target,
        })
    }

    pub fn sum(terms: Vec<HistoryOperator>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidInput("empty operator sum".into()))?;
        let (source, target) = (first.source.clone(), first.target.clone());
        for t in &terms {
            if t.source.id() != source.id() || t.target.id() != target.id() {
                return Err(Error::SpaceMismatch {
                    expected: format!("{} -> {}", source.id(), target.id()),
                    found: format!("{} -> {}", t.source.id(), t.target.id()),
                });
            }
        }
        Ok(Self {
            volterra_constant: terms.iter().map(|t| t.volterra_constant).sum(),
            form: HistoryForm::Sum(terms),
            source,
            target,
        })
    }

    /// Override the declared constant (for general kernels or user knowledge).
    pub fn with_volterra_constant(mut self, c: f64) -> Self {
        self.volterra_constant = c;
        self
    }

    pub fn form(&self) -> &HistoryForm {
        &self.form
    }

    pub fn source(&self) -> &Metric {
        &self.source
    }

    pub fn target(&self) -> &Metric {
        &self.target
    }

    pub fn volterra_constant(&self) -> f64 {
        self.volterra_constant
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.form, HistoryForm::Zero)
    }

    /// Cursor positioned at node 0 with input `w0`.
    pub fn start(&self, grid: TimeGrid, w0: &Vector) -> Result<HistoryCursor> {
        check_dim("history input", self.source.dim(), w0)?;
        let state = match &self.form {
            HistoryForm::Zero => CursorState::Stateless,
            HistoryForm::RunningIntegral { .. } => CursorState::Running {
                left: w0 * (0.5 * grid.tau()),
            },
            HistoryForm::Convolution { .. } => CursorState::Past(vec![w0.clone()]),
            HistoryForm::OdeSolution { inner, x0, .. } => CursorState::Ode {
                x: x0.clone(),
                inner: Box::new(inner.start(grid, w0)?),
            },
            HistoryForm::Composed { inner, .. } => CursorState::Inner(Box::new(inner.start(grid, w0)?)),
            HistoryForm::Sum(terms) => {
                CursorState::Terms(terms.iter().map(|t| t.start(grid, w0)).collect::<Result<_>>()?)
            }
        };
        let mut cursor = HistoryCursor {
            op: self.clone(),
            grid,
            node: 0,
            state,
            current: Vector::zeros(0),
        };
        cursor.current = cursor.value_at_start();
        Ok(cursor)
    }
}

#[derive(Debug, Clone)]
enum CursorState {
    Stateless,
    /// `tau/2 w_0 + tau (w_1 + ... + w_n)`.
    Running {
        left: Vector,
    },
    Past(Vec<Vector>),
    Ode {
        x: Vector,
        inner: Box<HistoryCursor>,
    },
    Inner(Box<HistoryCursor>),
    Terms(Vec<HistoryCursor>),
}

/// Incremental evaluator of one operator along one trajectory.
#[derive(Debug, Clone)]
pub struct HistoryCursor {
    op: HistoryOperator,
    grid: TimeGrid,
    node: usize,
    state: CursorState,
    current: Vector,
}

impl HistoryCursor {
    pub fn node(&self) -> usize {
        self.node
    }

    /// Value at the current node.
    pub fn current(&self) -> &Vector {
        &self.current
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn value_at_start(&self) -> Vector {
        let t0 = self.grid.node(0);
        match (&self.op.form, &self.state) {
            (HistoryForm::RunningIntegral { offset, .. }, _) => offset.clone(),
            (HistoryForm::Composed { outer, .. }, CursorState::Inner(c)) => outer.apply(t0, c.current()),
            (HistoryForm::Sum(_), CursorState::Terms(cs)) => cs
                .iter()
                .fold(Vector::zeros(self.op.target.dim()), |acc, c| acc + c.current()),
            (HistoryForm::OdeSolution { x0, .. }, _) => x0.clone(),
            _ => Vector::zeros(self.op.target.dim()),
        }
    }

    /// Value at the next node if the input there is `w_next`; the cursor is unchanged.
    pub fn peek(&self, w_next: &Vector) -> Result<Vector> {
        Ok(self.step(w_next)?.1)
    }

    /// Move to the next node with input `w_next` and return the value there.
    pub fn advance(&mut self, w_next: &Vector) -> Result<Vector> {
        let (state, value) = self.step(w_next)?;
        self.state = state;
        self.node += 1;
        self.current = value.clone();
        Ok(value)
    }

    fn step(&self, w_next: &Vector) -> Result<(CursorState, Vector)> {
        check_dim("history input", self.op.source.dim(), w_next)?;
        let next = self.node + 1;
        if next > self.grid.steps() {
            return Err(Error::IndexOutOfRange {
                index: next,
                steps: self.grid.steps(),
            });
        }
        let tau = self.grid.tau();
        let t = self.grid.node(next);
        Ok(match (&self.op.form, &self.state) {
            (HistoryForm::Zero, _) => (CursorState::Stateless, Vector::zeros(self.op.target.dim())),
            (HistoryForm::RunningIntegral { weight, offset }, CursorState::Running { left }) => {
                let integral = left + w_next * (0.5 * tau);
                let value = offset + weight * integral;
                (
                    CursorState::Running {
                        left: left + w_next * tau,
                    },
                    value,
                )
            }
            (HistoryForm::Convolution { kernel }, CursorState::Past(past)) => {
                let mut past = past.clone();
                past.push(w_next.clone());
                let value = convolve(kernel, &self.grid, &past, self.op.target.dim());
                (CursorState::Past(past), value)
            }
            (HistoryForm::OdeSolution { rhs, .. }, CursorState::Ode { x, inner }) => {
                let mut inner = inner.clone();
                let s = inner.advance(w_next)?;
                let x_next = ode_step(rhs.as_ref(), t, x, w_next, &s, tau)?;
                (
                    CursorState::Ode {
                        x: x_next.clone(),
                        inner,
                    },
                    x_next,
                )
            }
            (HistoryForm::Composed { outer, .. }, CursorState::Inner(inner)) => {
                let mut inner = inner.clone();
                let y = inner.advance(w_next)?;
                (CursorState::Inner(inner), outer.apply(t, &y))
            }
            (HistoryForm::Sum(_), CursorState::Terms(cs)) => {
                let mut cs = cs.clone();
                let mut value = Vector::zeros(self.op.target.dim());
                for c in cs.iter_mut() {
                    value += c.advance(w_next)?;
                }
                (CursorState::Terms(cs), value)
            }
            _ => unreachable!("cursor state always matches its operator form"),
        })
    }
}

fn convolve(kernel: &Kernel, grid: &TimeGrid, past: &[Vector], out_dim: usize) -> Vector {
    let n = past.len() - 1;
    let t = grid.node(n);
    match kernel {
        Kernel::Exponential {
            coeff,
            relax_time,
            matrix,
        } => {
            let mut acc = Vector::zeros(past[0].len());
            for (k, w) in past.iter().enumerate() {
                let s = grid.trapezoid_weight(k, n) * coeff * (-(t - grid.node(k)) / relax_time).exp();
                acc.axpy(s, w, 1.0);
            }
            matrix * acc
        }
        Kernel::General { f, .. } => {
            let mut acc = Vector::zeros(out_dim);
            for (k, w) in past.iter().enumerate() {
                let wk = grid.trapezoid_weight(k, n);
                if wk != 0.0 {
                    acc += f(t - grid.node(k)) * w * wk;
                }
            }
            acc
        }
    }
}

/// `(H w)(t_n)`.
pub fn evaluate(op: &HistoryOperator, w: &GridFunction, n: usize) -> Result<Vector> {
    w.grid().check_index(n)?;
    let mut cursor = op.start(*w.grid(), w.value(0))?;
    for k in 1..=n {
        cursor.advance(w.value(k))?;
    }
    Ok(cursor.current().clone())
}

/// `H w` at every node.
pub fn evaluate_all(op: &HistoryOperator, w: &GridFunction) -> Result<GridFunction> {
    let mut cursor = op.start(*w.grid(), w.value(0))?;
    let mut out = Vec::with_capacity(w.values().len());
    out.push(cursor.current().clone());
    for k in 1..w.values().len() {
        out.push(cursor.advance(w.value(k))?);
    }
    GridFunction::new(*w.grid(), op.target.id(), out)
}

/// Solution operator `w -> x` of `x' = F(t, x, w, S w)`, `x(0) = x0`, stepped by implicit Euler.
/// The declared constant is the sampled ratio on `grid` with a 25% allowance, capped by the
/// Gronwall bound.
pub fn make_r0(
    rhs: Arc<dyn OdeRightHandSide>,
    s: HistoryOperator,
    x0: Vector,
    target: Metric,
    grid: &TimeGrid,
    trials: usize,
    seed: u64,
) -> Result<HistoryOperator> {
    let dims = rhs.dims();
    check_dim("initial state", dims.x, &x0)?;
    if target.dim() != dims.x || s.source.dim() != dims.w || s.target.dim() != dims.s {
        return Err(Error::SpaceMismatch {
            expected: format!("F: ({}, {}, {})", dims.x, dims.w, dims.s),
            found: format!("({}, {}, {})", target.dim(), s.source.dim(), s.target.dim()),
        });
    }
    let l = rhs.lipschitz();
    let horizon = grid.horizon();
    let gronwall = l * (1.0 + s.volterra_constant * horizon) * (l * horizon).exp();
    let mut op = HistoryOperator {
        source: s.source.clone(),
        form: HistoryForm::OdeSolution {
            rhs,
            inner: Box::new(s),
            x0,
        },
        target,
        volterra_constant: gronwall,
    };
    if l > 0.0 && trials > 0 {
        let est = estimate_volterra_constant(&op, grid, trials, seed)?;
        op.volterra_constant = (1.25 * est).min(gronwall);
    } else if l == 0.0 {
        op.volterra_constant = 0.0;
    }
    Ok(op)
}

/// Largest sampled ratio `|H w1 - H w2|(t_n) / int_0^{t_n} |w1 - w2|` over random pairs and nodes.
pub fn estimate_volterra_constant(op: &HistoryOperator, grid: &TimeGrid, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidInput("at least one trial is needed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = op.source.dim();
    let mut best: f64 = 0.0;
    let mut done = 0;
    while done < trials {
        let base: Vec<Vector> = (0..=grid.steps()).map(|_| uniform_vector(&mut rng, dim, 1.0)).collect();
        let scale = 10f64.powf(rng.random_range(-3.0..0.0));
        let diff: Vec<Vector> = match done % 3 {
            // aligned differences make integral bounds sharp for linear forms
            0 => {
                let dir = uniform_vector(&mut rng, dim, scale);
                (0..=grid.steps()).map(|_| &dir * rng.random_range(0.0..1.0)).collect()
            }
            // a single-node spike attains the step-response ratio
            1 => {
                let k = rng.random_range(1..=grid.steps());
                let dir = uniform_vector(&mut rng, dim, scale);
                (0..=grid.steps())
                    .map(|n| if n == k { dir.clone() } else { Vector::zeros(dim) })
                    .collect()
            }
            _ => (0..=grid.steps())
                .map(|_| uniform_vector(&mut rng, dim, scale))
                .collect(),
        };
        let diff_norms: Vec<f64> = diff.iter().map(|d| op.source.norm(d)).collect();
        if diff_norms.iter().all(|&d| d == 0.0) {
            continue;
        }
        done += 1;
        let mut c1 = op.start(*grid, &base[0])?;
        let mut c2 = op.start(*grid, &(&base[0] + &diff[0]))?;
        let mut integral = 0.0;
        for n in 1..=grid.steps() {
            let a = c1.advance(&base[n])?;
            let b = c2.advance(&(&base[n] + &diff[n]))?;
            integral += 0.5 * grid.tau() * (diff_norms[n - 1] + diff_norms[n]);
            if integral > 0.0 {
                best = best.max(op.target.norm(&(a - b)) / integral);
            }
        }
    }
    Ok(best)
}
