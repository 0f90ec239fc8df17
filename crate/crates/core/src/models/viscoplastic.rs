//! Viscoplastic rod with damped normal response and a unilateral velocity constraint at the
//! contact end.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{HistoryOperator, PointwiseMap};
use crate::linalg::{row_matrix, Matrix, Vector};
use crate::models::{BodyLoad, LinearField, Rod1D};
use crate::potentials::{builtin_jnu, Damper, Knot, PiecewiseLinearSlope, ZeroPotential};
use crate::spaces::{AffineMap, ConstraintSet, GalerkinSpace, HypothesisConstants};
use crate::stepper::{AffineOperator, ClosureRhs, LinearRhs, OdeDims, OdeRightHandSide, SystemParts, SystemSpec};

/// Rate `G(sigma, eps)` of the internal stress `eta`, `sigma` being `eta + b eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateLaw {
    /// `c1 sigma + c2 eps`.
    Linear { c1: f64, c2: f64 },
    /// `-(sigma - clamp(sigma, -yield_stress, yield_stress)) / relax_time`.
    Perzyna { yield_stress: f64, relax_time: f64 },
}

impl RateLaw {
    pub fn eval(&self, sigma: f64, eps: f64) -> f64 {
        match *self {
            RateLaw::Linear { c1, c2 } => c1 * sigma + c2 * eps,
            RateLaw::Perzyna {
                yield_stress,
                relax_time,
            } => -(sigma - sigma.clamp(-yield_stress, yield_stress)) / relax_time,
        }
    }
}

/// Slope function of the contact potential; `alpha` and `c0` default to the smallest valid
/// values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlopeSpec {
    pub knots: Vec<Knot>,
    pub alpha: Option<f64>,
    pub c0: Option<f64>,
}

impl Default for SlopeSpec {
    fn default() -> Self {
        let pts = [(-1.0, -0.2), (0.0, 0.0), (0.2, 0.3), (0.6, 0.1), (1.0, 0.4)];
        Self {
            knots: pts.iter().map(|&(at, p)| Knot { at, left: p, right: p }).collect(),
            alpha: None,
            c0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViscoplasticModel {
    /// Viscosity `a` in `a eps(w)`.
    pub viscosity: f64,
    /// Elasticity `b` in `b eps(u)`.
    pub elasticity: f64,
    pub rate: RateLaw,
    pub damper: Damper,
    pub slope: SlopeSpec,
    pub gap: f64,
    pub load: BodyLoad,
    pub u0: LinearField,
    pub w0: LinearField,
}

impl Default for ViscoplasticModel {
    fn default() -> Self {
        Self {
            viscosity: 1.0,
            elasticity: 1.0,
            rate: RateLaw::Linear { c1: -0.5, c2: 0.2 },
            damper: Damper::Clamped {
                k1: 0.5,
                k2: 1.0,
                slope: 0.5,
            },
            slope: SlopeSpec::default(),
            gap: 0.05,
            load: BodyLoad::default(),
            u0: LinearField::default(),
            w0: LinearField::default(),
        }
    }
}

fn rate_rhs(model: &ViscoplasticModel, eps: Matrix) -> Result<Arc<dyn OdeRightHandSide>> {
    let (ne, nv) = (eps.nrows(), eps.ncols());
    let b = model.elasticity;
    Ok(match model.rate {
        RateLaw::Linear { c1, c2 } => Arc::new(
            LinearRhs::new(
                Matrix::identity(ne, ne) * c1,
                Matrix::zeros(ne, nv),
                eps * (c1 * b + c2),
                Vector::zeros(ne),
            )?
            .with_lipschitz(c1.abs().max((c1 * b + c2).abs())),
        ),
        RateLaw::Perzyna {
            yield_stress,
            relax_time,
        } => {
            if !(yield_stress >= 0.0 && relax_time > 0.0) {
                return Err(Error::InvalidInput(
                    "Perzyna law needs yield_stress >= 0 and relax_time > 0".into(),
                ));
            }
            let law = model.rate;
            Arc::new(ClosureRhs::new(
                OdeDims { x: ne, w: nv, s: nv },
                b.abs().max(1.0) / relax_time,
                move |_, eta, _, u| {
                    let e = &eps * u;
                    Vector::from_fn(ne, |i, _| law.eval(eta[i] + b * e[i], e[i]))
                },
            ))
        }
    })
}

pub fn build_viscoplastic(rod: &Rod1D, model: &ViscoplasticModel) -> Result<SystemSpec> {
    if rod.components() != 1 {
        return Err(Error::InvalidInput(
            "the viscoplastic model uses a rod with one displacement component".into(),
        ));
    }
    if !(model.viscosity > 0.0) || !(model.elasticity >= 0.0) || !(model.gap > 0.0) {
        return Err(Error::InvalidInput(
            "viscosity and gap must be positive, elasticity nonnegative".into(),
        ));
    }
    let v = rod.space("V")?;
    let e = rod.strain_space("E")?;
    let x_space = Arc::new(GalerkinSpace::euclidean("X", 1)?);
    let y_space = Arc::new(GalerkinSpace::euclidean("Y", 1)?);
    let eps = rod.strain_matrix();
    let weights = Matrix::from_diagonal(&rod.strain_weights());
    let gram = v.gram_v().clone();
    let gamma = rod.trace_row(0);
    let u0 = model.u0.coordinates(rod);
    let w0 = model.w0.coordinates(rod);
    let (a, b) = (model.viscosity, model.elasticity);

    let op = AffineOperator::new(&gram * a, eps.transpose() * &weights, Vector::zeros(rod.dim()))?;
    let s = HistoryOperator::running_integral(
        Matrix::identity(rod.dim(), rod.dim()),
        u0.clone(),
        v.primal(),
        v.primal(),
    )?;
    let r1 = HistoryOperator::running_integral(&gram * b, &gram * &u0 * b, v.primal(), v.dual())?;
    let trace = PointwiseMap::linear(row_matrix(&gamma), &v.primal(), &x_space.primal())?;
    let r2 = HistoryOperator::composed(trace, s.clone(), x_space.primal())?;
    let r3 = HistoryOperator::zero(v.primal(), y_space.primal());

    let p = PiecewiseLinearSlope::new(model.slope.knots.clone())?;
    let alpha = model.slope.alpha.unwrap_or_else(|| p.max_decrease());
    let c0 = model.slope.c0.unwrap_or_else(|| p.bound());
    let j = builtin_jnu(p, alpha, c0)?.with_damper(model.damper)?;

    let constants = HypothesisConstants {
        m_a: a,
        m_bar_a: 1.0,
        a1: 1.0,
        a2: a,
        ..Default::default()
    };
    SystemSpec::new(SystemParts {
        ode: rate_rhs(model, eps)?,
        a: Arc::new(op),
        j: Arc::new(j),
        phi: Arc::new(ZeroPotential { dim: 1 }),
        load: model.load.to_load(rod, v.gram_h())?,
        m: AffineMap::linear(row_matrix(&gamma), &v, &x_space)?,
        s,
        r1,
        r2,
        r3,
        k: ConstraintSet::halfspaces(vec![(gamma, model.gap)])?,
        x0: Vector::zeros(e.dim()),
        w0,
        u0: Some(u0),
        constants,
        e,
        v,
        x_space,
    })
}

/// Stress `sigma_n = a eps(w_n) + b eps(u_n) + eta_n` per element.
pub fn stress(rod: &Rod1D, model: &ViscoplasticModel, w: &Vector, u: &Vector, eta: &Vector) -> Vector {
    let eps = rod.strain_matrix();
    &eps * w * model.viscosity + &eps * u * model.elasticity + eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::stepper::{solve_onepass, SolverParams};

    #[test]
    fn rest_state_stays_at_rest() {
        let rod = Rod1D::new(1.0, 6, 1).unwrap();
        let model = ViscoplasticModel {
            load: BodyLoad {
                normal: 0.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let spec = build_viscoplastic(&rod, &model).unwrap();
        let rep = solve_onepass(&spec, TimeGrid::new(0.5, 20).unwrap(), &SolverParams::default()).unwrap();
        assert!(rep.w.values().iter().all(|w| w.amax() < 1e-14));
        assert!(rep.x.values().iter().all(|x| x.amax() < 1e-14));
    }

    #[test]
    fn smallness_is_enforced() {
        let rod = Rod1D::new(1.0, 4, 1).unwrap();
        let model = ViscoplasticModel {
            viscosity: 0.2,
            ..Default::default()
        };
        assert!(matches!(build_viscoplastic(&rod, &model), Err(Error::Smallness { .. })));
    }

    #[test]
    fn contact_velocity_respects_the_gap() {
        let rod = Rod1D::new(1.0, 8, 1).unwrap();
        let model = ViscoplasticModel {
            load: BodyLoad {
                normal: 5.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let spec = build_viscoplastic(&rod, &model).unwrap();
        let rep = solve_onepass(&spec, TimeGrid::new(1.0, 40).unwrap(), &SolverParams::default()).unwrap();
        let gamma = rod.trace_row(0);
        let peak = rep.w.values().iter().map(|w| gamma.dot(w)).fold(f64::MIN, f64::max);
        assert!(peak <= model.gap + 1e-10);
        assert!(peak > model.gap - 1e-6, "constraint should be active, peak {peak}");
    }
}
