//! Sampling checks of the structural hypotheses on a problem instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::grid::{Norm, TimeGrid};
use crate::history::{estimate_volterra_constant, HistoryOperator};
use crate::linalg::{pencil_eigenvalues, uniform_vector, Matrix, Vector};
use crate::potentials::{check_nonsmooth, verify_convex, ConvexReport, NonsmoothReport};
use crate::stepper::SystemSpec;

/// Tolerance on sampled margins.
pub const MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorReport {
    /// `min (<dA, dv> - m_A |dv|^2 + m_bar_A |dx| |dv|) / |dv|^2` over the samples.
    pub monotonicity_margin: f64,
    /// `min (a0 + a1 |x| + a2 |v| - |A(t, x, v)|_*)`.
    pub growth_margin: f64,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
}

fn fd_sym_jacobian(spec: &SystemSpec, t: f64, x: &Vector, w: &Vector) -> Matrix {
    let n = w.len();
    let base = spec.a.eval(t, x, w);
    let jac = spec.a.jacobian(t, x, w).unwrap_or_else(|| {
        let mut jac = Matrix::zeros(n, n);
        let mut wp = w.clone();
        for i in 0..n {
            let h = 1e-6 * w[i].abs().max(1.0);
            wp[i] = w[i] + h;
            jac.set_column(i, &((spec.a.eval(t, x, &wp) - &base) / h));
            wp[i] = w[i];
        }
        jac
    });
    (&jac + jac.transpose()) * 0.5
}

/// Direction of least monotonicity of `A` at `(x, w)`, relative to the V inner product.
fn weakest_direction(spec: &SystemSpec, t: f64, x: &Vector, w: &Vector) -> Vector {
    let sym = fd_sym_jacobian(spec, t, x, w);
    let chol = spec.v.chol_v();
    let l = chol.l();
    let mut c = sym.clone();
    l.solve_lower_triangular_mut(&mut c);
    let mut c = c.transpose();
    l.solve_lower_triangular_mut(&mut c);
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let k = eig.eigenvalues.imin();
    let mut y = eig.eigenvectors.column(k).into_owned();
    // back to coordinates: v = L^{-T} y
    l.tr_solve_lower_triangular_mut(&mut y);
    y
}

/// Mixed strong monotonicity and growth of `A` with the declared constants.
pub fn check_h_a(spec: &SystemSpec, samples: usize, seed: u64, horizon: f64) -> OperatorReport {
    let c = &spec.constants;
    let (ne, nv) = (spec.e.dim(), spec.v.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mono = f64::INFINITY;
    let mut growth = f64::INFINITY;
    for k in 0..samples {
        let t = rng.random_range(0.0..=horizon);
        let x1 = uniform_vector(&mut rng, ne, 2.0);
        let v1 = uniform_vector(&mut rng, nv, 2.0);
        let same_x = k % 2 == 0;
        let x2 = if same_x {
            x1.clone()
        } else {
            uniform_vector(&mut rng, ne, 2.0)
        };
        let dir = if k % 4 == 0 {
            weakest_direction(spec, t, &x1, &v1)
        } else {
            uniform_vector(&mut rng, nv, 1.0)
        };
        let dir_norm = spec.v.norm_v(&dir);
        if dir_norm == 0.0 {
            continue;
        }
        let h = 10f64.powf(rng.random_range(-3.0..0.3));
        let v2 = &v1 + &dir * (h / dir_norm);
        let dv = &v1 - &v2;
        let dv_norm = spec.v.norm_v(&dv);
        let dx_norm = spec.e.norm_v(&(&x1 - &x2));
        let da = spec.a.eval(t, &x1, &v1) - spec.a.eval(t, &x2, &v2);
        let lhs = da.dot(&dv);
        let margin = (lhs - c.m_a * dv_norm * dv_norm + c.m_bar_a * dx_norm * dv_norm) / (dv_norm * dv_norm);
        mono = mono.min(margin);
        let bound = c.a0 + c.a1 * spec.e.norm_v(&x1) + c.a2 * spec.v.norm_v(&v1);
        growth = growth.min(bound - spec.v.dual_norm(&spec.a.eval(t, &x1, &v1)));
    }
    OperatorReport {
        monotonicity_margin: mono,
        growth_margin: growth,
        samples,
        seed,
        pass: mono >= -MARGIN_TOL && growth >= -MARGIN_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryReport {
    pub name: String,
    pub declared: f64,
    pub estimate: f64,
    pub pass: bool,
}

pub fn check_history(
    name: &str,
    op: &HistoryOperator,
    grid: &TimeGrid,
    trials: usize,
    seed: u64,
) -> Result<HistoryReport> {
    let estimate = estimate_volterra_constant(op, grid, trials, seed)?;
    Ok(HistoryReport {
        name: name.to_string(),
        declared: op.volterra_constant(),
        estimate,
        pass: op.volterra_constant() >= estimate - MARGIN_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecReport {
    pub smallness_margin: f64,
    /// Smallest eigenvalue of `G_H` relative to `G_V`.
    pub embedding_min: f64,
    pub operator: OperatorReport,
    pub j: NonsmoothReport,
    pub j_pass: bool,
    pub phi: ConvexReport,
    pub phi_pass: bool,
    pub histories: Vec<HistoryReport>,
    pub pass: bool,
}

/// All sampling checks on one instance.
pub fn check_spec(spec: &SystemSpec, grid: &TimeGrid, samples: usize, seed: u64) -> Result<SpecReport> {
    let c = &spec.constants;
    let operator = check_h_a(spec, samples, seed, grid.horizon());
    let j = check_nonsmooth(spec.j.as_ref(), samples, seed.wrapping_add(1));
    let jc = spec.j.constants();
    let j_pass = j.selection_gap <= MARGIN_TOL
        && j.homogeneity_gap <= 1e-8
        && j.subadditivity_gap <= MARGIN_TOL
        && j.growth_gap <= MARGIN_TOL
        && j.m_emp <= c.m_j.max(jc.m) + 1e-6
        && j.m_bar_emp <= c.m_bar_j.max(jc.m_bar) + 1e-6;
    let phi = verify_convex(spec.phi.as_ref(), samples, seed.wrapping_add(2));
    let phi_pass = phi.convexity_gap <= MARGIN_TOL
        && phi.subgradient_gap <= MARGIN_TOL
        && phi.growth_gap <= MARGIN_TOL
        && phi.m_emp <= c.m_phi + 1e-6;
    let trials = (samples / 10).max(4);
    let histories = vec![
        check_history("S", &spec.s, grid, trials, seed.wrapping_add(3))?,
        check_history("R1", &spec.r1, grid, trials, seed.wrapping_add(4))?,
        check_history("R2", &spec.r2, grid, trials, seed.wrapping_add(5))?,
        check_history("R3", &spec.r3, grid, trials, seed.wrapping_add(6))?,
    ];
    let eig = pencil_eigenvalues(spec.v.gram_h(), spec.v.chol_v());
    let pass = operator.pass && j_pass && phi_pass && histories.iter().all(|h| h.pass) && spec.smallness_margin() > 0.0;
    Ok(SpecReport {
        smallness_margin: spec.smallness_margin(),
        embedding_min: eig[0],
        operator,
        j,
        j_pass,
        phi,
        phi_pass,
        histories,
        pass,
    })
}

/// `|v|` in the H inner product of the velocity space, as a [`Norm`].
pub(crate) fn h_norm(spec: &SystemSpec) -> impl Norm + '_ {
    move |v: &Vector| spec.v.norm_h(v)
}
