//! Viscoelastic rod with long memory, bonding field and bonding-weighted friction on a
//! tangential displacement component at the contact end.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{HistoryOperator, Kernel, PointwiseMap};
use crate::linalg::{row_matrix, Matrix, Vector};
use crate::models::{BodyLoad, LinearField, Rod1D};
use crate::potentials::{BondingFactor, CoulombPotential, FrictionCoefficient, ZeroPotential};
use crate::spaces::{AffineMap, ConstraintSet, GalerkinSpace, HypothesisConstants};
use crate::stepper::{AffineOperator, ClosureRhs, OdeDims, SystemParts, SystemSpec};

/// Bonding rate `G(beta, u_tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdhesionRate {
    /// Debonding rate `kappa` in `-kappa clamp(beta, 0, 1) min(|u_tau|, u_cap)`.
    pub kappa: f64,
    pub u_cap: f64,
    /// Rebonding rate `kappa_r` in `kappa_r (1 - clamp(beta, 0, 1)) max(0, 1 - |u_tau| / u_cap)`.
    pub rebonding: f64,
}

impl Default for AdhesionRate {
    fn default() -> Self {
        Self {
            kappa: 2.0,
            u_cap: 0.5,
            rebonding: 0.0,
        }
    }
}

impl AdhesionRate {
    pub fn eval(&self, beta: f64, slip: f64) -> f64 {
        let b = beta.clamp(0.0, 1.0);
        let mut g = -self.kappa * b * slip.abs().min(self.u_cap);
        if self.rebonding != 0.0 {
            g += self.rebonding * (1.0 - b) * (1.0 - slip.abs() / self.u_cap).max(0.0);
        }
        g
    }

    pub fn lipschitz(&self) -> f64 {
        self.kappa * self.u_cap.max(1.0) + self.rebonding * (1.0f64).max(1.0 / self.u_cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViscoelasticAdhesiveModel {
    pub viscosity: f64,
    pub elasticity: f64,
    /// Relaxation kernel `c_r exp(-r / t_r)`.
    pub relax_coeff: f64,
    pub relax_time: f64,
    pub mu: FrictionCoefficient,
    pub h1: BondingFactor,
    pub adhesion: AdhesionRate,
    pub beta0: f64,
    pub gap: f64,
    pub load: BodyLoad,
    pub u0: LinearField,
    pub w0: LinearField,
}

impl Default for ViscoelasticAdhesiveModel {
    fn default() -> Self {
        Self {
            viscosity: 1.0,
            elasticity: 1.0,
            relax_coeff: 0.5,
            relax_time: 1.0,
            mu: FrictionCoefficient::Constant { mu0: 0.3 },
            h1: BondingFactor::Clamped { h0: 1.0 },
            adhesion: AdhesionRate::default(),
            beta0: 1.0,
            gap: 0.05,
            load: BodyLoad {
                normal: 1.0,
                tangential: 2.0,
                ..Default::default()
            },
            u0: LinearField::default(),
            w0: LinearField::default(),
        }
    }
}

pub fn build_viscoelastic_adhesive(rod: &Rod1D, model: &ViscoelasticAdhesiveModel) -> Result<SystemSpec> {
    if rod.components() != 2 {
        return Err(Error::InvalidInput(
            "the adhesive model uses a rod with normal and tangential components".into(),
        ));
    }
    if !(0.0..=1.0).contains(&model.beta0) {
        return Err(Error::InvalidInput(format!(
            "initial bonding must lie in [0, 1], got {}",
            model.beta0
        )));
    }
    if !(model.viscosity > 0.0) || !(model.elasticity >= 0.0) || !(model.gap > 0.0) {
        return Err(Error::InvalidInput(
            "viscosity and gap must be positive, elasticity nonnegative".into(),
        ));
    }
    if !(model.relax_time > 0.0) {
        return Err(Error::InvalidInput("relaxation time must be positive".into()));
    }
    let g = model.adhesion;
    if !(g.kappa >= 0.0 && g.u_cap > 0.0 && g.rebonding >= 0.0) {
        return Err(Error::InvalidInput(
            "adhesion needs kappa >= 0, u_cap > 0, rebonding >= 0".into(),
        ));
    }
    let v = rod.space("V")?;
    let e = Arc::new(GalerkinSpace::euclidean("E", 1)?);
    let scalar = |id: &str| -> Result<Arc<GalerkinSpace>> { Ok(Arc::new(GalerkinSpace::euclidean(id, 1)?)) };
    let (u_space, x_space, y_space, z_space) = (scalar("U")?, scalar("X")?, scalar("Y")?, scalar("Z")?);
    let n = rod.dim();
    let gram = v.gram_v().clone();
    let normal = rod.trace_row(0);
    let tangential = rod.trace_row(1);
    let u0 = model.u0.coordinates(rod);
    let w0 = model.w0.coordinates(rod);
    let (a, b) = (model.viscosity, model.elasticity);

    let displacement = HistoryOperator::running_integral(Matrix::identity(n, n), u0.clone(), v.primal(), v.primal())?;
    let elastic = HistoryOperator::running_integral(&gram * b, &gram * &u0 * b, v.primal(), v.dual())?;
    let memory = HistoryOperator::convolution(
        Kernel::Exponential {
            coeff: model.relax_coeff,
            relax_time: model.relax_time,
            matrix: gram.clone(),
        },
        v.primal(),
        v.dual(),
    )?;
    let r1 = HistoryOperator::sum(vec![elastic, memory])?;
    let s = HistoryOperator::composed(
        PointwiseMap::linear(row_matrix(&tangential), &v.primal(), &u_space.primal())?,
        displacement.clone(),
        u_space.primal(),
    )?;
    let r3 = HistoryOperator::composed(
        PointwiseMap::linear(row_matrix(&normal), &v.primal(), &y_space.primal())?,
        displacement,
        y_space.primal(),
    )?;
    let r2 = HistoryOperator::zero(v.primal(), z_space.primal());

    let rhs = ClosureRhs::new(OdeDims { x: 1, w: n, s: 1 }, g.lipschitz(), move |_, beta, _, slip| {
        Vector::from_element(1, g.eval(beta[0], slip[0]))
    });
    let phi = CoulombPotential::new(vec![1.0], model.mu, model.h1)?;

    let constants = HypothesisConstants {
        m_a: a,
        a2: a,
        ..Default::default()
    };
    SystemSpec::new(SystemParts {
        ode: Arc::new(rhs),
        a: Arc::new(AffineOperator::stiffness_only(&gram * a, 1)?),
        j: Arc::new(ZeroPotential { dim: 1 }),
        phi: Arc::new(phi),
        load: model.load.to_load(rod, v.gram_h())?,
        m: AffineMap::linear(row_matrix(&tangential), &v, &x_space)?,
        s,
        r1,
        r2,
        r3,
        k: ConstraintSet::halfspaces(vec![(normal, model.gap)])?,
        x0: Vector::from_element(1, model.beta0),
        w0,
        u0: Some(u0),
        constants,
        e,
        v,
        x_space,
    })
}
