//! Causal node-by-node solver with predictor/corrector history treatment.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TimeGrid};
use crate::history::HistoryCursor;
use crate::linalg::Vector;
use crate::stepper::ode::ode_step;
use crate::stepper::system::SystemSpec;
use crate::stepper::vi::{inequality_residual, vi_step, HistoryValues, SolverParams, StepData};

/// Largest constraint violation tolerated in a reported trajectory.
pub const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: GridFunction,
    pub w: GridFunction,
    pub u: Option<GridFunction>,
    /// Inner iterations per node (predictor plus corrector); entry 0 is the initial projection.
    pub per_step_inner_iters: Vec<usize>,
    pub inequality_residuals: Vec<f64>,
    pub constraint_residuals: Vec<f64>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub steps: usize,
    pub horizon: f64,
    pub max_inner_iters: usize,
    pub mean_inner_iters: f64,
    pub max_inequality_residual: f64,
    pub max_constraint_residual: f64,
    pub wall_time: f64,
}

impl SolveReport {
    pub fn grid(&self) -> &TimeGrid {
        self.w.grid()
    }

    pub fn summary(&self) -> ReportSummary {
        let iters = &self.per_step_inner_iters;
        ReportSummary {
            steps: self.grid().steps(),
            horizon: self.grid().horizon(),
            max_inner_iters: iters.iter().copied().max().unwrap_or(0),
            mean_inner_iters: iters.iter().sum::<usize>() as f64 / iters.len().max(1) as f64,
            max_inequality_residual: self.inequality_residuals.iter().copied().fold(0.0, f64::max),
            max_constraint_residual: self.constraint_residuals.iter().copied().fold(0.0, f64::max),
            wall_time: self.wall_time,
        }
    }

    /// Columns `t, w_*, x_*` and `u_*` when present.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.write_csv_labeled(out, "x")
    }

    /// As [`Self::write_csv`] with the `x` columns named `{x_label}_*`.
    pub fn write_csv_labeled<W: std::io::Write>(&self, mut out: W, x_label: &str) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.w.dim()).map(|i| format!("w_{i}")));
        header.extend((1..=self.x.dim()).map(|i| format!("{x_label}_{i}")));
        if let Some(u) = &self.u {
            header.extend((1..=u.dim()).map(|i| format!("u_{i}")));
        }
        writeln!(out, "{}", header.join(","))?;
        for (n, t) in self.grid().nodes().enumerate() {
            let mut row = vec![format!("{t:.17e}")];
            row.extend(self.w.value(n).iter().map(|v| format!("{v:.17e}")));
            row.extend(self.x.value(n).iter().map(|v| format!("{v:.17e}")));
            if let Some(u) = &self.u {
                row.extend(u.value(n).iter().map(|v| format!("{v:.17e}")));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Solver state after some node; cloning it gives a restart point carrying all history.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    node: usize,
    x: Vec<Vector>,
    w: Vec<Vector>,
    u: Option<Vec<Vector>>,
    iters: Vec<usize>,
    ineq: Vec<f64>,
    feas: Vec<f64>,
    s: HistoryCursor,
    r1: HistoryCursor,
    r2: HistoryCursor,
    r3: HistoryCursor,
    elapsed: f64,
}

impl Checkpoint {
    pub fn node(&self) -> usize {
        self.node
    }

    pub fn w(&self) -> &Vector {
        &self.w[self.node]
    }

    pub fn x(&self) -> &Vector {
        &self.x[self.node]
    }
}

/// Incremental driver; [`solve_onepass`] runs it to the end of the grid.
#[derive(Debug, Clone)]
pub struct OnePass<'a> {
    spec: &'a SystemSpec,
    grid: TimeGrid,
    params: SolverParams,
    state: Checkpoint,
}

impl<'a> OnePass<'a> {
    pub fn start(spec: &'a SystemSpec, grid: TimeGrid, params: SolverParams) -> Result<Self> {
        params.validate()?;
        let w0 = spec.k.project_in(&spec.w0, spec.v.chol_v())?;
        let feas = spec.k.residual(&w0);
        let state = Checkpoint {
            node: 0,
            x: vec![spec.x0.clone()],
            u: spec.u0.as_ref().map(|u0| vec![u0.clone()]),
            iters: vec![0],
            ineq: vec![0.0],
            feas: vec![feas],
            s: spec.s.start(grid, &w0)?,
            r1: spec.r1.start(grid, &w0)?,
            r2: spec.r2.start(grid, &w0)?,
            r3: spec.r3.start(grid, &w0)?,
            w: vec![w0],
            elapsed: 0.0,
        };
        Ok(Self {
            spec,
            grid,
            params,
            state,
        })
    }

    /// Continue from a checkpoint taken on the same grid.
    pub fn resume(spec: &'a SystemSpec, checkpoint: Checkpoint, params: SolverParams) -> Result<Self> {
        params.validate()?;
        let grid = *checkpoint.s.grid();
        Ok(Self {
            spec,
            grid,
            params,
            state: checkpoint,
        })
    }

    pub fn node(&self) -> usize {
        self.state.node
    }

    pub fn checkpoint(&self) -> Checkpoint {
        self.state.clone()
    }

    fn peek_history(&self, w: &Vector) -> Result<HistoryValues> {
        Ok(HistoryValues {
            xi: self.state.r1.peek(w)?,
            zeta: self.state.r2.peek(w)?,
            eta: self.state.r3.peek(w)?,
        })
    }

    /// Advance one node.
    pub fn step(&mut self) -> Result<()> {
        let clock = Instant::now();
        let spec = self.spec;
        let n = self.state.node;
        let next = n + 1;
        self.grid.check_index(next)?;
        let t = self.grid.node(next);
        let tau = self.grid.tau();
        let w_n = self.state.w[n].clone();
        let x_n = self.state.x[n].clone();
        let f = spec.load.eval(t, &x_n);

        let predicted = self.peek_history(&w_n)?;
        let data = StepData {
            t,
            tau,
            w_n: &w_n,
            x_lag: &x_n,
            history: &predicted,
            f: &f,
        };
        let mut out = vi_step(spec, &data, &w_n, &self.params)?;
        let mut iters = out.iterations;
        let history = if self.params.corrector {
            let corrected = self.peek_history(&out.w)?;
            let data = StepData {
                history: &corrected,
                ..data
            };
            out = vi_step(spec, &data, &out.w, &self.params)?;
            iters += out.iterations;
            corrected
        } else {
            predicted
        };
        let w = out.w;
        let feas = spec.k.residual(&w);
        if feas > FEASIBILITY_TOL {
            return Err(Error::Infeasible {
                node: next,
                residual: feas,
            });
        }
        let ineq = if self.params.check_inequality {
            let data = StepData {
                t,
                tau,
                w_n: &w_n,
                x_lag: &x_n,
                history: &history,
                f: &f,
            };
            let r = inequality_residual(spec, &data, &w, self.params.probe_seed ^ next as u64)?;
            if r > self.params.tol_ineq {
                return Err(Error::InequalityResidual {
                    node: next,
                    residual: r,
                    tol: self.params.tol_ineq,
                });
            }
            r
        } else {
            0.0
        };

        let s_val = self.state.s.peek(&w)?;
        let x = ode_step(spec.ode.as_ref(), t, &x_n, &w, &s_val, tau)?;
        self.state.s.advance(&w)?;
        self.state.r1.advance(&w)?;
        self.state.r2.advance(&w)?;
        self.state.r3.advance(&w)?;
        if let Some(u) = &mut self.state.u {
            let u_next = &u[n] + (&w_n + &w) * (0.5 * tau);
            u.push(u_next);
        }
        self.state.x.push(x);
        self.state.w.push(w);
        self.state.iters.push(iters);
        self.state.ineq.push(ineq);
        self.state.feas.push(feas);
        self.state.node = next;
        self.state.elapsed += clock.elapsed().as_secs_f64();
        Ok(())
    }

    pub fn advance_to(&mut self, node: usize) -> Result<()> {
        self.grid.check_index(node)?;
        while self.state.node < node {
            self.step()?;
        }
        Ok(())
    }

    /// Run to the last node and assemble the report.
    pub fn finish(mut self) -> Result<SolveReport> {
        self.advance_to(self.grid.steps())?;
        self.report()
    }

    /// Report on the nodes computed so far, over the truncated grid `[0, t_node]`; `None`
    /// before the first step.
    pub fn partial(&self) -> Option<SolveReport> {
        if self.state.node == 0 {
            return None;
        }
        let grid = TimeGrid::new(self.grid.node(self.state.node), self.state.node).ok()?;
        let mut head = self.clone();
        head.grid = grid;
        head.report().ok()
    }

    fn report(self) -> Result<SolveReport> {
        let s = self.state;
        let spec = self.spec;
        Ok(SolveReport {
            x: GridFunction::new(self.grid, spec.e.id(), s.x)?,
            w: GridFunction::new(self.grid, spec.v.id(), s.w)?,
            u: match s.u {
                Some(u) => Some(GridFunction::new(self.grid, format!("{}_u", spec.v.id()), u)?),
                None => None,
            },
            per_step_inner_iters: s.iters,
            inequality_residuals: s.ineq,
            constraint_residuals: s.feas,
            wall_time: s.elapsed,
        })
    }
}

pub fn solve_onepass(spec: &SystemSpec, grid: TimeGrid, params: &SolverParams) -> Result<SolveReport> {
    OnePass::start(spec, grid, *params)?.finish()
}
