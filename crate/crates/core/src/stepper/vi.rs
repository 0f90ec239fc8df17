//! One implicit Euler step of the inequality: find `w+` in `K` with
//!
//! ```text
//! <G_H (w+ - w_n) / tau + A(t, x, w+) + xi - f, v - w+>
//!     + j0(zeta, M w+; M v - M w+) + phi(eta, M v) - phi(eta, M w+) >= 0   for all v in K.
//! ```
//!
//! Solved by forward-backward splitting in the metric `P = G_H / tau + sym(dA/dw)`: the
//! smooth parts go into the forward step, the convex ramps of `j` and `phi` together with
//! the constraints go into an exact backward step.

use nalgebra::{Cholesky, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{uniform_vector, Matrix, Vector};
use crate::prox::{self, Block, ScalarTerm};
use crate::spaces::{PROJECTION_MAX_SWEEPS, PROJECTION_TOL};
use crate::stepper::system::SystemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Relative stopping tolerance on successive iterates in the V norm.
    pub tol: f64,
    /// Allowed violation of the discrete inequality on the probe set.
    pub tol_ineq: f64,
    pub max_iter: usize,
    /// Initial step of the splitting; `None` selects 1.
    pub rho: Option<f64>,
    pub corrector: bool,
    /// Evaluate the inequality on probe directions after every step.
    pub check_inequality: bool,
    pub probe_seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            tol_ineq: 1e-6,
            max_iter: 500,
            rho: None,
            corrector: true,
            check_inequality: true,
            probe_seed: 0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol_ineq > 0.0 && self.max_iter > 0) {
            return Err(Error::InvalidInput(
                "tol, tol_ineq and max_iter must be positive".into(),
            ));
        }
        if let Some(r) = self.rho {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidInput(format!("rho must lie in (0, 1], got {r}")));
            }
        }
        Ok(())
    }
}

/// History values entering one step.
#[derive(Debug, Clone)]
pub struct HistoryValues {
    /// `(R1 w)(t)` in `V*`.
    pub xi: Vector,
    /// `(R2 w)(t)`, parameter of `j`.
    pub zeta: Vector,
    /// `(R3 w)(t)`, parameter of `phi`.
    pub eta: Vector,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub w: Vector,
    pub iterations: usize,
    pub rho: f64,
}

/// Frozen data of one step.
#[derive(Debug, Clone, Copy)]
pub struct StepData<'a> {
    pub t: f64,
    pub tau: f64,
    pub w_n: &'a Vector,
    pub x_lag: &'a Vector,
    pub history: &'a HistoryValues,
    pub f: &'a Vector,
}

const MIN_RHO: f64 = 1e-4;

fn fd_jacobian(spec: &SystemSpec, t: f64, x: &Vector, w: &Vector) -> Matrix {
    let n = w.len();
    let base = spec.a.eval(t, x, w);
    let mut jac = Matrix::zeros(n, n);
    let mut wp = w.clone();
    for i in 0..n {
        let h = 1e-7 * w[i].abs().max(1.0);
        wp[i] = w[i] + h;
        let col = (spec.a.eval(t, x, &wp) - &base) / h;
        jac.set_column(i, &col);
        wp[i] = w[i];
    }
    jac
}

/// `G_H / tau + sym(dA/dw)` at `w_n`, or `G_H / tau + m_A G_V` if that is not SPD.
pub(crate) fn step_metric(spec: &SystemSpec, d: &StepData) -> Cholesky<f64, Dyn> {
    let jac = spec
        .a
        .jacobian(d.t, d.x_lag, d.w_n)
        .unwrap_or_else(|| fd_jacobian(spec, d.t, d.x_lag, d.w_n));
    let mass = spec.v.gram_h() / d.tau;
    let p = &mass + (&jac + jac.transpose()) * 0.5;
    Cholesky::new(p).unwrap_or_else(|| {
        let fallback = mass + spec.v.gram_v() * spec.constants.m_a;
        Cholesky::new(fallback).expect("G_H / tau + m_A G_V is SPD")
    })
}

/// The single-valued part of the step operator in `V*`:
/// `G_H (w - w_n) / tau + A + xi - f + M1^T (smooth j' + smooth phi')`.
fn forward_operator(spec: &SystemSpec, d: &StepData, w: &Vector) -> Vector {
    let mw = spec.m.apply(w);
    let m1 = spec.m.linear_part();
    let mut g = spec.v.gram_h() * (w - d.w_n) / d.tau + spec.a.eval(d.t, d.x_lag, w) + &d.history.xi - d.f;
    if !spec.j.is_zero() {
        g += m1.transpose() * spec.j.smooth_gradient(d.t, d.x_lag, &d.history.zeta, &mw);
    }
    if !spec.phi.is_zero() {
        g += m1.transpose() * spec.phi.smooth_gradient(d.t, d.x_lag, &d.history.eta, &mw);
    }
    g
}

/// The full single-valued operator without potentials: `G_H (w - w_n) / tau + A + xi - f`.
fn residual_operator(spec: &SystemSpec, d: &StepData, w: &Vector) -> Vector {
    spec.v.gram_h() * (w - d.w_n) / d.tau + spec.a.eval(d.t, d.x_lag, w) + &d.history.xi - d.f
}

/// Backward-step blocks: ramps of `j` and `phi` on rows of `M1` (scaled by `rho`) and the
/// constraints; constraints sharing a row with ramps are merged into one block.
fn backward_blocks(spec: &SystemSpec, d: &StepData, rho: f64) -> Vec<Block> {
    let m1 = spec.m.linear_part();
    let m0 = spec.m.offset();
    let nx = m1.nrows();
    let mut ramps: Vec<Vec<(f64, f64)>> = vec![Vec::new(); nx];
    if !spec.j.is_zero() {
        for (i, r) in spec.j.ramps(d.t, d.x_lag, &d.history.zeta).into_iter().enumerate() {
            ramps[i].extend(r);
        }
    }
    if !spec.phi.is_zero() {
        for (i, r) in spec.phi.ramps(d.t, d.x_lag, &d.history.eta).into_iter().enumerate() {
            ramps[i].extend(r);
        }
    }
    let mut blocks: Vec<Block> = Vec::new();
    for (i, r) in ramps.into_iter().enumerate() {
        let r: Vec<(f64, f64)> = r
            .into_iter()
            .filter(|&(_, c)| c > 0.0)
            .map(|(s, c)| (s, rho * c))
            .collect();
        if !r.is_empty() {
            blocks.push(Block {
                row: m1.row(i).transpose(),
                offset: m0[i],
                term: ScalarTerm::Ramps(r),
            });
        }
    }
    for (l, g) in spec.k.constraints() {
        let shared = blocks
            .iter_mut()
            .find(|b| matches!(b.term, ScalarTerm::Ramps(_)) && &b.row == l);
        match shared {
            Some(b) => {
                let ScalarTerm::Ramps(r) = &b.term else { unreachable!() };
                b.term = ScalarTerm::BoundedRamps(r.clone(), g + b.offset);
            }
            None => blocks.push(Block {
                row: l.clone(),
                offset: 0.0,
                term: ScalarTerm::UpperBound(*g),
            }),
        }
    }
    blocks
}

fn backward(z: &Vector, metric: &Cholesky<f64, Dyn>, blocks: &[Block]) -> Result<Vector> {
    Ok(prox::solve(z, metric, blocks, PROJECTION_TOL, PROJECTION_MAX_SWEEPS)?.point)
}

/// Solves one step starting from `start` (typically `w_n`).
pub fn vi_step(spec: &SystemSpec, d: &StepData, start: &Vector, params: &SolverParams) -> Result<StepOutcome> {
    let metric = step_metric(spec, d);
    let v = &spec.v;
    let mut rho = params.rho.unwrap_or(1.0);
    let mut blocks = backward_blocks(spec, d, rho);
    let mut w = spec.k.project_in(start, v.chol_v())?;
    let mut prev = f64::INFINITY;
    let mut last = f64::INFINITY;
    for it in 1..=params.max_iter {
        let g = forward_operator(spec, d, &w);
        let z = &w - metric.solve(&g) * rho;
        let next = backward(&z, &metric, &blocks)?;
        let change = v.norm_v(&(&next - &w));
        last = change;
        if !change.is_finite() {
            break;
        }
        let scale = v.norm_v(&next).max(1.0);
        w = next;
        if change <= params.tol * scale {
            let w = spec.k.project_in(&w, v.chol_v())?;
            return Ok(StepOutcome { w, iterations: it, rho });
        }
        let normalized = change / rho;
        if normalized >= prev && rho > MIN_RHO {
            rho = (rho * 0.5).max(MIN_RHO);
            blocks = backward_blocks(spec, d, rho);
        }
        prev = normalized;
    }
    Err(Error::InnerNonConvergence {
        iterations: params.max_iter,
        residual: last,
    })
}

/// Worst normalised violation `max(0, -R(v) / |v - w+|_V)` of the discrete inequality over
/// probes `v = P_K(w+ + h d)` for coordinate and random directions `d`.
pub fn inequality_residual(spec: &SystemSpec, d: &StepData, w_plus: &Vector, seed: u64) -> Result<f64> {
    let v = &spec.v;
    let n = v.dim();
    let b = residual_operator(spec, d, w_plus);
    let mw = spec.m.apply(w_plus);
    let m1 = spec.m.linear_part();
    let phi_w = spec.phi.eval(d.t, d.x_lag, &d.history.eta, &mw);
    let scale = v.norm_v(w_plus).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs: Vec<Vector> = Vec::with_capacity(4 * n);
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = 1.0;
        dirs.push(-&e);
        dirs.push(e);
    }
    for _ in 0..2 * n {
        let r = uniform_vector(&mut rng, n, 1.0);
        if r.norm() > 0.0 {
            dirs.push(r);
        }
    }
    let mut worst: f64 = 0.0;
    for dir in dirs {
        let dir = &dir / v.norm_v(&dir);
        for h in [1e-3 * scale, scale] {
            let probe = spec.k.project_in(&(w_plus + &dir * h), v.chol_v())?;
            let diff = &probe - w_plus;
            let dist = v.norm_v(&diff);
            if dist <= 1e-12 * scale {
                continue;
            }
            let mdiff = m1 * &diff;
            let mut r = b.dot(&diff);
            if !spec.j.is_zero() {
                r += spec.j.dir_deriv(d.t, d.x_lag, &d.history.zeta, &mw, &mdiff);
            }
            if !spec.phi.is_zero() {
                r += spec.phi.eval(d.t, d.x_lag, &d.history.eta, &(&mw + &mdiff)) - phi_w;
            }
            worst = worst.max(-r / dist);
        }
    }
    Ok(worst)
}
