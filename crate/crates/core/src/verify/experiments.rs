//! Well-posedness experiments: data dependence, uniqueness, regularity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixpoint::{solve_banach, BanachParams, QuadrupleTrajectory};
use crate::grid::{h1_norm, l2_norm_upto, GridFunction, TimeGrid};
use crate::linalg::uniform_vector;
use crate::stepper::{solve_onepass, SolveReport, SolverParams, SystemSpec};
use crate::verify::checks::h_norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    X0,
    W0,
    F,
}

impl Perturbation {
    pub const ALL: [Perturbation; 3] = [Perturbation::X0, Perturbation::W0, Perturbation::F];

    pub fn name(&self) -> &'static str {
        match self {
            Perturbation::X0 => "x0",
            Perturbation::W0 => "w0",
            Perturbation::F => "f",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzRow {
    pub delta: f64,
    pub data_distance: f64,
    pub solution_distance: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzTable {
    pub perturbation: Perturbation,
    pub seed: u64,
    /// Unit perturbation direction in the norm of the perturbed datum.
    pub direction: Vec<f64>,
    pub rows: Vec<LipschitzRow>,
    /// `max ratio / min ratio` over rows with a positive data distance.
    pub spread: f64,
    pub stable: bool,
}

impl LipschitzTable {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "perturbation,delta,data_distance,solution_distance,ratio")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{:.17e},{:.17e},{:.17e}",
                self.perturbation.name(),
                r.delta,
                r.data_distance,
                r.solution_distance,
                r.ratio
            )?;
        }
        Ok(())
    }
}

/// `|x - x'|_{H^1(E)} + |w - w'|_{L^2(V)}`.
pub fn solution_distance(spec: &SystemSpec, a: &SolveReport, b: &SolveReport) -> Result<f64> {
    let dx = a.x.difference(&b.x)?;
    let dw = a.w.difference(&b.w)?;
    Ok(h1_norm(&dx, spec.e.as_ref())? + l2_norm_upto(&dw, spec.v.as_ref(), dw.grid().steps())?)
}

/// Discrete `L^2(V)` distance of two velocity trajectories.
pub fn velocity_distance(spec: &SystemSpec, a: &GridFunction, b: &GridFunction) -> Result<f64> {
    let d = a.difference(b)?;
    l2_norm_upto(&d, spec.v.as_ref(), d.grid().steps())
}

/// Base and perturbed runs along a fixed random unit direction scaled by each `delta`.
pub fn lipschitz_dependence_experiment(
    spec: &SystemSpec,
    grid: TimeGrid,
    params: &SolverParams,
    deltas: &[f64],
    which: Perturbation,
    seed: u64,
) -> Result<LipschitzTable> {
    let base = solve_onepass(spec, grid, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = match which {
        Perturbation::X0 => {
            let d = uniform_vector(&mut rng, spec.e.dim(), 1.0);
            &d / spec.e.norm_v(&d)
        }
        Perturbation::W0 => {
            let d = uniform_vector(&mut rng, spec.v.dim(), 1.0);
            &d / spec.v.norm_v(&d)
        }
        Perturbation::F => {
            let d = uniform_vector(&mut rng, spec.v.dim(), 1.0);
            &d / spec.v.dual_norm(&d)
        }
    };
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let (x0, w0, load) = match which {
            Perturbation::X0 => (&spec.x0 + &dir * delta, spec.w0.clone(), spec.load.clone()),
            Perturbation::W0 => (spec.x0.clone(), &spec.w0 + &dir * delta, spec.load.clone()),
            Perturbation::F => (
                spec.x0.clone(),
                spec.w0.clone(),
                spec.load.perturbed(dir.clone(), delta),
            ),
        };
        let perturbed = spec.with_data(x0, w0, load)?;
        let run = solve_onepass(&perturbed, grid, params)?;
        let data_distance = match which {
            Perturbation::F => delta.abs() * grid.horizon().sqrt(),
            _ => delta.abs(),
        };
        let solution_distance = solution_distance(spec, &base, &run)?;
        rows.push(LipschitzRow {
            delta,
            data_distance,
            solution_distance,
            ratio: if data_distance > 0.0 {
                solution_distance / data_distance
            } else {
                f64::NAN
            },
        });
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).filter(|r| r.is_finite()).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if ratios.is_empty() || min <= 0.0 {
        f64::NAN
    } else {
        max / min
    };
    Ok(LipschitzTable {
        perturbation: which,
        seed,
        direction: dir.iter().copied().collect(),
        rows,
        spread,
        stable: spread.is_finite() && spread <= 2.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    /// Distance between the two fixed-point chains.
    pub chains: f64,
    /// Largest distance between either chain and the one-pass solver.
    pub cross: f64,
    pub tol_chains: f64,
    pub tol_cross: f64,
    pub iterations: (usize, usize),
    pub pass: bool,
}

/// Cross-solver tolerance `5 tau max(1, |w|_{L^2(V)})`.
pub fn cross_solver_tolerance(spec: &SystemSpec, w: &GridFunction) -> Result<f64> {
    let grid = w.grid();
    Ok(5.0 * grid.tau() * l2_norm_upto(w, spec.v.as_ref(), grid.steps())?.max(1.0))
}

/// Banach chains from zero and from a random start, plus the one-pass solver.
pub fn uniqueness_experiment(
    spec: &SystemSpec,
    grid: TimeGrid,
    params: &SolverParams,
    banach: &BanachParams,
    seed: u64,
) -> Result<UniquenessReport> {
    let random = QuadrupleTrajectory::random(spec, grid, 1.0, seed);
    let (a, b) = rayon::join(
        || solve_banach(spec, grid, params, banach, None),
        || solve_banach(spec, grid, params, banach, Some(random)),
    );
    let ((ra, ta), (rb, tb)) = (a?, b?);
    let one = solve_onepass(spec, grid, params)?;
    let chains = velocity_distance(spec, &ra.w, &rb.w)?.max(h1_norm(&ra.x.difference(&rb.x)?, spec.e.as_ref())?);
    let cross = velocity_distance(spec, &ra.w, &one.w)?.max(velocity_distance(spec, &rb.w, &one.w)?);
    let tol_chains = 10.0 * banach.tol_fp * l2_norm_upto(&ra.w, spec.v.as_ref(), grid.steps())?.max(1.0);
    let tol_cross = cross_solver_tolerance(spec, &one.w)?.max(10.0 * banach.tol_fp);
    Ok(UniquenessReport {
        chains,
        cross,
        tol_chains,
        tol_cross,
        iterations: (ta.iterations(), tb.iterations()),
        pass: chains <= tol_chains && cross <= tol_cross,
    })
}

/// Largest node-to-node increments `(|dx|_E, |dw|_H, |dw|_V)`.
pub fn max_increments(spec: &SystemSpec, report: &SolveReport) -> (f64, f64, f64) {
    let hn = h_norm(spec);
    let mut out = (0.0f64, 0.0f64, 0.0f64);
    for pair in report.x.values().windows(2) {
        out.0 = out.0.max(spec.e.norm_v(&(&pair[1] - &pair[0])));
    }
    for pair in report.w.values().windows(2) {
        let d = &pair[1] - &pair[0];
        out.1 = out.1.max(crate::grid::Norm::norm(&hn, &d));
        out.2 = out.2.max(spec.v.norm_v(&d));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityReport {
    pub coarse: (f64, f64, f64),
    pub fine: (f64, f64, f64),
    /// Coarse over fine increment of `x` in `E`.
    pub ratio_x: f64,
    /// Coarse over fine increment of `w` in `H`.
    pub ratio_w_h: f64,
    pub ratio_w_v: f64,
    pub x_continuous: bool,
    pub w_continuous: bool,
}

/// Continuity surrogate: increments must shrink by at least 1.5 from `coarse` to `fine`
/// (a grid with half the step); zero increments count as continuous.
pub fn regularity_check(spec: &SystemSpec, coarse: &SolveReport, fine: &SolveReport) -> Result<RegularityReport> {
    let (gc, gf) = (coarse.grid(), fine.grid());
    if (gc.tau() / gf.tau() - 2.0).abs() > 1e-9 {
        return Err(Error::InvalidInput("the fine report must use half the step".into()));
    }
    let c = max_increments(spec, coarse);
    let f = max_increments(spec, fine);
    let ratio = |a: f64, b: f64| if b == 0.0 { f64::INFINITY } else { a / b };
    let ok = |a: f64, b: f64| (a == 0.0 && b == 0.0) || ratio(a, b) >= 1.5 || a.max(b) < 1e-13;
    Ok(RegularityReport {
        coarse: c,
        fine: f,
        ratio_x: ratio(c.0, f.0),
        ratio_w_h: ratio(c.1, f.1),
        ratio_w_v: ratio(c.2, f.2),
        x_continuous: ok(c.0, f.0),
        w_continuous: ok(c.1, f.1),
    })
}
