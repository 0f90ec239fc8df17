//! Fully implicit solver: Banach iteration of the map
//! `(lambda, xi, zeta, eta) -> (R0 w, R1 w, R2 w, R3 w)`, where `w` solves the inequality with
//! the quadruple frozen.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{trapezoid_scalar, GridFunction, Norm, TimeGrid};
use crate::history::{evaluate_all, make_r0, HistoryOperator};
use crate::linalg::{uniform_vector, Vector};
use crate::spaces::Metric;
use crate::stepper::onepass::{SolveReport, FEASIBILITY_TOL};
use crate::stepper::vi::{inequality_residual, vi_step, HistoryValues, SolverParams, StepData};
use crate::stepper::SystemSpec;

/// Trajectories `(lambda, xi, zeta, eta)` on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrupleTrajectory {
    pub lambda: GridFunction,
    pub xi: GridFunction,
    pub zeta: GridFunction,
    pub eta: GridFunction,
}

impl QuadrupleTrajectory {
    pub fn zeros(spec: &SystemSpec, grid: TimeGrid) -> Self {
        Self {
            lambda: GridFunction::zeros(grid, spec.e.id(), spec.e.dim()),
            xi: GridFunction::zeros(grid, spec.r1.target().id(), spec.r1.target().dim()),
            zeta: GridFunction::zeros(grid, spec.r2.target().id(), spec.r2.target().dim()),
            eta: GridFunction::zeros(grid, spec.r3.target().id(), spec.r3.target().dim()),
        }
    }

    /// Uniform random node values in `[-scale, scale]`.
    pub fn random(spec: &SystemSpec, grid: TimeGrid, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut comp = |id: String, dim: usize| {
            let values = (0..=grid.steps())
                .map(|_| uniform_vector(&mut rng, dim, scale))
                .collect();
            GridFunction::new(grid, id, values).expect("node count matches the grid")
        };
        Self {
            lambda: comp(spec.e.id().to_string(), spec.e.dim()),
            xi: comp(spec.r1.target().id(), spec.r1.target().dim()),
            zeta: comp(spec.r2.target().id(), spec.r2.target().dim()),
            eta: comp(spec.r3.target().id(), spec.r3.target().dim()),
        }
    }

    /// Random combination `sum_k a_k cos(k pi t / T)` of the first three cosine modes with
    /// coefficient vectors in `[-scale, scale] / 3`; unlike [`Self::random`] it has a limit
    /// under grid refinement.
    pub fn smooth_random(spec: &SystemSpec, grid: TimeGrid, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut comp = |id: String, dim: usize| {
            let modes: Vec<Vector> = (0..3).map(|_| uniform_vector(&mut rng, dim, scale / 3.0)).collect();
            GridFunction::from_fn(grid, id, |t| {
                modes.iter().enumerate().fold(Vector::zeros(dim), |acc, (k, a)| {
                    acc + a * (k as f64 * std::f64::consts::PI * t / grid.horizon()).cos()
                })
            })
            .expect("node count matches the grid")
        };
        Self {
            lambda: comp(spec.e.id().to_string(), spec.e.dim()),
            xi: comp(spec.r1.target().id(), spec.r1.target().dim()),
            zeta: comp(spec.r2.target().id(), spec.r2.target().dim()),
            eta: comp(spec.r3.target().id(), spec.r3.target().dim()),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        self.lambda.grid()
    }
}

/// Metrics of the four components.
struct ProductNorm {
    e: Metric,
    xi: Metric,
    zeta: Metric,
    eta: Metric,
}

impl ProductNorm {
    fn new(spec: &SystemSpec) -> Self {
        Self {
            e: spec.e.primal(),
            xi: spec.r1.target().clone(),
            zeta: spec.r2.target().clone(),
            eta: spec.r3.target().clone(),
        }
    }

    /// Squared node-wise distance.
    fn node_sq(&self, a: &QuadrupleTrajectory, b: &QuadrupleTrajectory, n: usize) -> f64 {
        let d = |m: &Metric, x: &GridFunction, y: &GridFunction| m.norm(&(x.value(n) - y.value(n))).powi(2);
        d(&self.e, &a.lambda, &b.lambda)
            + d(&self.xi, &a.xi, &b.xi)
            + d(&self.zeta, &a.zeta, &b.zeta)
            + d(&self.eta, &a.eta, &b.eta)
    }

    fn node_norm_sq(&self, a: &QuadrupleTrajectory, n: usize) -> f64 {
        self.e.norm(a.lambda.value(n)).powi(2)
            + self.xi.norm(a.xi.value(n)).powi(2)
            + self.zeta.norm(a.zeta.value(n)).powi(2)
            + self.eta.norm(a.eta.value(n)).powi(2)
    }

    /// `(int |a - b|^2)^(1/2)` and `(int e^{-beta t} |a - b|^2)^(1/2)`.
    fn distances(&self, a: &QuadrupleTrajectory, b: &QuadrupleTrajectory, beta: f64) -> (f64, f64) {
        let grid = a.grid();
        let sq: Vec<f64> = (0..=grid.steps()).map(|n| self.node_sq(a, b, n)).collect();
        let weighted: Vec<f64> = sq
            .iter()
            .enumerate()
            .map(|(n, s)| s * (-beta * (grid.node(n) - grid.node(0))).exp())
            .collect();
        (
            trapezoid_scalar(grid, &sq, grid.steps()).sqrt(),
            trapezoid_scalar(grid, &weighted, grid.steps()).sqrt(),
        )
    }

    fn norm(&self, a: &QuadrupleTrajectory) -> f64 {
        let grid = a.grid();
        let sq: Vec<f64> = (0..=grid.steps()).map(|n| self.node_norm_sq(a, n)).collect();
        trapezoid_scalar(grid, &sq, grid.steps()).sqrt()
    }
}

/// Result of one application of the map.
#[derive(Debug, Clone)]
pub struct LambdaImage {
    pub q: QuadrupleTrajectory,
    pub w: GridFunction,
    pub x: GridFunction,
    pub inner_iters: Vec<usize>,
    pub inequality_residuals: Vec<f64>,
    pub constraint_residuals: Vec<f64>,
}

fn r0_operator(spec: &SystemSpec, grid: &TimeGrid) -> Result<HistoryOperator> {
    make_r0(
        Arc::clone(&spec.ode),
        spec.s.clone(),
        spec.x0.clone(),
        spec.e.primal(),
        grid,
        0,
        0,
    )
}

/// Solve the inequality with `q` frozen and map the solution through `R0, ..., R3`.
pub fn apply_lambda(spec: &SystemSpec, q: &QuadrupleTrajectory, params: &SolverParams) -> Result<LambdaImage> {
    params.validate()?;
    let grid = *q.grid();
    let tau = grid.tau();
    let w0 = spec.k.project_in(&spec.w0, spec.v.chol_v())?;
    let mut ws = vec![w0.clone()];
    let mut iters = vec![0];
    let mut ineq = vec![0.0];
    let mut feas = vec![spec.k.residual(&w0)];
    for next in 1..=grid.steps() {
        let t = grid.node(next);
        let lam = q.lambda.value(next);
        let f = spec.load.eval(t, lam);
        let history = HistoryValues {
            xi: q.xi.value(next).clone(),
            zeta: q.zeta.value(next).clone(),
            eta: q.eta.value(next).clone(),
        };
        let w_n = &ws[next - 1];
        let data = StepData {
            t,
            tau,
            w_n,
            x_lag: lam,
            history: &history,
            f: &f,
        };
        let out = vi_step(spec, &data, w_n, params)?;
        let r = spec.k.residual(&out.w);
        if r > FEASIBILITY_TOL {
            return Err(Error::Infeasible {
                node: next,
                residual: r,
            });
        }
        let res = if params.check_inequality {
            inequality_residual(spec, &data, &out.w, params.probe_seed ^ next as u64)?
        } else {
            0.0
        };
        iters.push(out.iterations);
        ineq.push(res);
        feas.push(r);
        ws.push(out.w);
    }
    let w = GridFunction::new(grid, spec.v.id(), ws)?;
    let x = evaluate_all(&r0_operator(spec, &grid)?, &w)?;
    let q = QuadrupleTrajectory {
        lambda: x.clone(),
        xi: evaluate_all(&spec.r1, &w)?,
        zeta: evaluate_all(&spec.r2, &w)?,
        eta: evaluate_all(&spec.r3, &w)?,
    };
    Ok(LambdaImage {
        q,
        w,
        x,
        inner_iters: iters,
        inequality_residuals: ineq,
        constraint_residuals: feas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BanachParams {
    /// Stop when the plain distance falls below `tol_fp max(1, |q|)`.
    pub tol_fp: f64,
    pub max_outer: usize,
    /// Weight of the Bielecki norm; `None` uses twice the sampled contraction constant.
    pub beta: Option<f64>,
    /// Random pairs used to sample the contraction constant.
    pub trials: usize,
    pub seed: u64,
}

impl Default for BanachParams {
    fn default() -> Self {
        Self {
            tol_fp: 1e-8,
            max_outer: 50,
            beta: None,
            trials: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub plain: f64,
    pub weighted: f64,
    /// `weighted_k / weighted_{k-1}`; `NaN` for the first row.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionTrace {
    pub beta: f64,
    pub c_est: f64,
    pub rows: Vec<TraceRow>,
}

impl ContractionTrace {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,plain,weighted,ratio")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e}",
                r.iteration, r.plain, r.weighted, r.ratio
            )?;
        }
        Ok(())
    }

    /// Largest weighted ratio from iteration `from` on.
    pub fn max_ratio_from(&self, from: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.iteration >= from && r.ratio.is_finite())
            .map(|r| r.ratio)
            .fold(0.0, f64::max)
    }

    pub fn iterations(&self) -> usize {
        self.rows.len()
    }
}

/// Largest sampled ratio `|L q - L q'|^2(t_n) / int_0^{t_n} |q - q'|^2` over smooth random pairs.
pub fn estimate_contraction_constant(
    spec: &SystemSpec,
    grid: TimeGrid,
    params: &SolverParams,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let norms = ProductNorm::new(spec);
    let quiet = SolverParams {
        check_inequality: false,
        ..*params
    };
    let mut best: f64 = 0.0;
    for k in 0..trials.max(1) {
        let a = QuadrupleTrajectory::smooth_random(spec, grid, 1.0, seed.wrapping_add(2 * k as u64));
        let b = QuadrupleTrajectory::smooth_random(spec, grid, 1.0, seed.wrapping_add(2 * k as u64 + 1));
        let la = apply_lambda(spec, &a, &quiet)?.q;
        let lb = apply_lambda(spec, &b, &quiet)?.q;
        let input: Vec<f64> = (0..=grid.steps()).map(|n| norms.node_sq(&a, &b, n)).collect();
        for n in 1..=grid.steps() {
            let integral = trapezoid_scalar(&grid, &input, n);
            if integral > 0.0 {
                best = best.max(norms.node_sq(&la, &lb, n) / integral);
            }
        }
    }
    Ok(best)
}

/// Iterate `q <- L(q)` from `q0` (zeros when `None`).
pub fn solve_banach(
    spec: &SystemSpec,
    grid: TimeGrid,
    params: &SolverParams,
    banach: &BanachParams,
    q0: Option<QuadrupleTrajectory>,
) -> Result<(SolveReport, ContractionTrace)> {
    let clock = Instant::now();
    let norms = ProductNorm::new(spec);
    let (beta, c_est) = match banach.beta {
        Some(b) => (b, f64::NAN),
        None => {
            let c = estimate_contraction_constant(spec, grid, params, banach.trials, banach.seed)?;
            (2.0 * c, c)
        }
    };
    let quiet = SolverParams {
        check_inequality: false,
        ..*params
    };
    let mut q = q0.unwrap_or_else(|| QuadrupleTrajectory::zeros(spec, grid));
    if q.grid() != &grid {
        return Err(Error::InvalidInput("initial quadruple lives on another grid".into()));
    }
    let mut rows: Vec<TraceRow> = Vec::new();
    for k in 1..=banach.max_outer {
        let image = apply_lambda(spec, &q, &quiet)?;
        let (plain, weighted) = norms.distances(&image.q, &q, beta);
        let ratio = rows.last().map_or(f64::NAN, |r| weighted / r.weighted);
        rows.push(TraceRow {
            iteration: k,
            plain,
            weighted,
            ratio,
        });
        let scale = norms.norm(&image.q).max(1.0);
        q = image.q.clone();
        if plain < banach.tol_fp * scale {
            let final_image = if params.check_inequality {
                apply_lambda(spec, &q, params)?
            } else {
                image
            };
            let u = spec.u0.as_ref().map(|u0| primitive(u0, &final_image.w));
            let report = SolveReport {
                x: final_image.x,
                w: final_image.w,
                u,
                per_step_inner_iters: final_image.inner_iters,
                inequality_residuals: final_image.inequality_residuals,
                constraint_residuals: final_image.constraint_residuals,
                wall_time: clock.elapsed().as_secs_f64(),
            };
            let trace = ContractionTrace { beta, c_est, rows };
            return Ok((report, trace));
        }
    }
    Err(Error::ContractionFailure {
        iterations: banach.max_outer,
        distance: rows.last().map_or(f64::NAN, |r| r.plain),
    })
}

fn primitive(u0: &Vector, w: &GridFunction) -> GridFunction {
    let grid = *w.grid();
    let mut u = vec![u0.clone()];
    for n in 1..=grid.steps() {
        let next = &u[n - 1] + (w.value(n - 1) + w.value(n)) * (0.5 * grid.tau());
        u.push(next);
    }
    GridFunction::new(grid, format!("{}_u", w.space_id()), u).expect("node count matches the grid")
}
