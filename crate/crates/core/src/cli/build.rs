//! Problem instances from a parsed configuration.

use std::sync::Arc;

use crate::cli::config::{AbstractSection, Config, Problem};
use crate::error::{Error, Result};
use crate::history::{HistoryOperator, Kernel};
use crate::linalg::{Matrix, Vector};
use crate::models::{build_viscoelastic_adhesive, build_viscoplastic, Rod1D};
use crate::potentials::{
    builtin_jnu, ConvexPotential, CoulombPotential, Knot, NonsmoothPotential, PiecewiseLinearSlope, ZeroPotential,
};
use crate::spaces::{operator_norm, AffineMap, ConstraintSet, GalerkinSpace};
use crate::stepper::{AffineOperator, LinearRhs, Load, OdeDims, OdeRightHandSide, SystemParts, SystemSpec, ZeroRhs};
use crate::verify::suite::{abstract_instance, monotonicity_constant};

/// The instance and the column label of its ODE state.
pub struct BuiltProblem {
    pub spec: SystemSpec,
    pub x_label: &'static str,
}

pub fn build_problem(config: &Config) -> Result<BuiltProblem> {
    let run = &config.run;
    Ok(match run.problem {
        Problem::Viscoplastic => BuiltProblem {
            spec: build_viscoplastic(&Rod1D::new(run.length, run.elements, 1)?, &config.model.viscoplastic)?,
            x_label: "eta",
        },
        Problem::ViscoelasticAdhesive => BuiltProblem {
            spec: build_viscoelastic_adhesive(
                &Rod1D::new(run.length, run.elements, 2)?,
                &config.model.viscoelastic_adhesive,
            )?,
            x_label: "beta",
        },
        Problem::Abstract => BuiltProblem {
            spec: build_abstract(config.abstract_problem.as_ref().expect("validated"))?,
            x_label: "x",
        },
        Problem::Seeded => BuiltProblem {
            spec: abstract_instance(run.seed)?,
            x_label: "x",
        },
    })
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!(
            "{what}: expected a non-empty rectangular matrix"
        )));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn shaped(rows: &[Vec<f64>], what: &str, r: usize, c: usize) -> Result<Matrix> {
    let m = matrix(rows, what)?;
    if m.shape() != (r, c) {
        return Err(Error::Config(format!(
            "{what}: expected {r}x{c}, found {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}

fn vector(v: &[f64], what: &str, n: usize) -> Result<Vector> {
    if v.len() != n {
        return Err(Error::Config(format!(
            "{what}: expected {n} entries, found {}",
            v.len()
        )));
    }
    Ok(Vector::from_column_slice(v))
}

pub fn build_abstract(a: &AbstractSection) -> Result<SystemSpec> {
    let gv = matrix(&a.gram_v, "gram_v")?;
    let nv = gv.nrows();
    let v = Arc::new(GalerkinSpace::new("V", gv, shaped(&a.gram_h, "gram_h", nv, nv)?)?);
    let e = Arc::new(match &a.gram_e {
        Some(g) => GalerkinSpace::with_gram("E", matrix(g, "gram_e")?)?,
        None => GalerkinSpace::euclidean("E", a.x0.len())?,
    });
    let ne = e.dim();
    let m1 = matrix(&a.m1, "m1")?;
    if m1.ncols() != nv {
        return Err(Error::Config(format!("m1 must have {nv} columns")));
    }
    let nx = m1.nrows();
    let x_space = Arc::new(GalerkinSpace::euclidean("X", nx)?);
    let m = match &a.m0 {
        Some(m0) => AffineMap::new(m1.clone(), vector(m0, "m0", nx)?, &v, &x_space)?,
        None => AffineMap::linear(m1.clone(), &v, &x_space)?,
    };

    let stiffness = shaped(&a.stiffness, "stiffness", nv, nv)?;
    let coupling = match &a.coupling {
        Some(c) => shaped(c, "coupling", nv, ne)?,
        None => Matrix::zeros(nv, ne),
    };
    let offset = match &a.offset {
        Some(o) => vector(o, "offset", nv)?,
        None => Vector::zeros(nv),
    };
    let mut constants = a.constants;
    if constants.m_a == 0.0 {
        constants.m_a = monotonicity_constant(&stiffness, &v);
    }
    if constants.m_bar_a == 0.0 {
        constants.m_bar_a = operator_norm(&coupling, &e.primal(), &v.dual())?;
    }
    if constants.a2 == 0.0 {
        constants.a2 = operator_norm(&stiffness, &v.primal(), &v.dual())?;
        constants.a1 = constants.a1.max(constants.m_bar_a);
        constants.a0 = constants.a0.max(v.dual_norm(&offset));
    }
    let op = AffineOperator::new(stiffness, coupling, offset)?;

    let ode: Arc<dyn OdeRightHandSide> = match &a.ode {
        Some(o) => {
            let fa = shaped(&o.a, "ode.a", ne, ne)?;
            let fb = shaped(&o.b, "ode.b", ne, nv)?;
            let fc = shaped(&o.c, "ode.c", ne, nv)?;
            let l = operator_norm(&fa, &e.primal(), &e.primal())?
                .max(operator_norm(&fb, &v.primal(), &e.primal())?)
                .max(operator_norm(&fc, &v.primal(), &e.primal())?);
            let off = match &o.offset {
                Some(off) => vector(off, "ode.offset", ne)?,
                None => Vector::zeros(ne),
            };
            Arc::new(LinearRhs::new(fa, fb, fc, off)?.with_lipschitz(l))
        }
        None => Arc::new(ZeroRhs {
            dims: OdeDims { x: ne, w: nv, s: nv },
        }),
    };

    let j: Arc<dyn NonsmoothPotential> = match &a.j {
        Some(js) => {
            let knots = js
                .knots
                .iter()
                .map(|&[at, left, right]| Knot { at, left, right })
                .collect();
            let slope = PiecewiseLinearSlope::new(knots)?;
            let alpha = js.alpha.unwrap_or(slope.max_decrease());
            let c0 = js.c0.unwrap_or(slope.bound());
            let pot = builtin_jnu(slope, alpha, c0)?.with_weights(js.weights.clone().unwrap_or(vec![1.0; nx]))?;
            Arc::new(pot)
        }
        None => Arc::new(ZeroPotential { dim: nx }),
    };
    let phi: Arc<dyn ConvexPotential> = match &a.phi {
        Some(p) => Arc::new(CoulombPotential::new(
            p.weights.clone().unwrap_or(vec![1.0; nx]),
            p.mu,
            p.h1,
        )?),
        None => Arc::new(ZeroPotential { dim: nx }),
    };

    let weight = |w: &Option<Vec<Vec<f64>>>, what: &str, rows: usize| -> Result<Option<Matrix>> {
        w.as_ref().map(|w| shaped(w, what, rows, nv)).transpose()
    };
    let s = match weight(&a.s_weight, "s_weight", nv)? {
        Some(w) => HistoryOperator::running_integral(w, Vector::zeros(nv), v.primal(), v.primal())?,
        None => HistoryOperator::zero(v.primal(), v.primal()),
    };
    let mut r1_parts = Vec::new();
    if let Some(w) = weight(&a.r1_weight, "r1_weight", nv)? {
        r1_parts.push(HistoryOperator::running_integral(
            w,
            Vector::zeros(nv),
            v.primal(),
            v.dual(),
        )?);
    }
    if let Some(k) = &a.r1_kernel {
        r1_parts.push(HistoryOperator::convolution(
            Kernel::Exponential {
                coeff: k.coeff,
                relax_time: k.relax_time,
                matrix: v.gram_v().clone(),
            },
            v.primal(),
            v.dual(),
        )?);
    }
    let r1 = match r1_parts.len() {
        0 => HistoryOperator::zero(v.primal(), v.dual()),
        1 => r1_parts.pop().expect("one part"),
        _ => HistoryOperator::sum(r1_parts)?,
    };
    let zeta_dim = j.dims().history.unwrap_or(nx);
    let r2 = match weight(&a.r2_weight, "r2_weight", zeta_dim)? {
        Some(w) => {
            let target = Arc::new(GalerkinSpace::euclidean("Z", zeta_dim)?);
            HistoryOperator::running_integral(w, Vector::zeros(zeta_dim), v.primal(), target.primal())?
        }
        None => HistoryOperator::zero(v.primal(), x_space.primal()),
    };
    let eta_dim = phi.dims().history.unwrap_or(nx);
    let r3 = match weight(&a.r3_weight, "r3_weight", eta_dim)? {
        Some(w) => {
            let target = Arc::new(GalerkinSpace::euclidean("Y", eta_dim)?);
            HistoryOperator::running_integral(w, Vector::zeros(eta_dim), v.primal(), target.primal())?
        }
        None => HistoryOperator::zero(v.primal(), x_space.primal()),
    };

    let k = if a.constraints.is_empty() {
        ConstraintSet::WholeSpace
    } else {
        ConstraintSet::from_halfspaces(&a.constraints)?
    };
    let f0 = vector(&a.load, "load", nv)?;
    let load = match &a.load_sine {
        Some(amp) => {
            let f1 = vector(amp, "load_sine", nv)?;
            let omega = 2.0 * std::f64::consts::PI * a.load_frequency;
            Load::new(nv, 0.0, move |t, _| &f0 + &f1 * (omega * t).sin())
        }
        None => Load::fixed(f0),
    };
    SystemSpec::new(SystemParts {
        ode,
        a: Arc::new(op),
        j,
        phi,
        load,
        m,
        s,
        r1,
        r2,
        r3,
        k,
        x0: vector(&a.x0, "x0", ne)?,
        w0: vector(&a.w0, "w0", nv)?,
        u0: None,
        constants,
        e,
        v,
        x_space,
    })
}
