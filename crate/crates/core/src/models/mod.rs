//! Builders for the two rod contact models.

pub mod adhesive;
pub mod rod;
pub mod viscoplastic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::stepper::Load;

pub use adhesive::{build_viscoelastic_adhesive, AdhesionRate, ViscoelasticAdhesiveModel};
pub use rod::Rod1D;
pub use viscoplastic::{build_viscoplastic, RateLaw, SlopeSpec, ViscoplasticModel};

/// Time profile of a load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadProfile {
    Constant,
    /// `min(t / rise_time, 1)`.
    Ramp {
        rise_time: f64,
    },
    /// `sin(2 pi frequency t + phase)`.
    Sine {
        frequency: f64,
        phase: f64,
    },
}

impl LoadProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            LoadProfile::Constant => 1.0,
            LoadProfile::Ramp { rise_time } => (t / rise_time).min(1.0),
            LoadProfile::Sine { frequency, phase } => (2.0 * std::f64::consts::PI * frequency * t + phase).sin(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LoadProfile::Ramp { rise_time } if !(rise_time > 0.0) => Err(Error::InvalidInput(format!(
                "ramp rise time must be positive, got {rise_time}"
            ))),
            LoadProfile::Sine { frequency, phase } if !(frequency.is_finite() && phase.is_finite()) => {
                Err(Error::InvalidInput("sine parameters must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Spatially uniform body force `(normal, tangential) * profile(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BodyLoad {
    pub normal: f64,
    pub tangential: f64,
    pub profile: LoadProfile,
}

impl Default for BodyLoad {
    fn default() -> Self {
        Self {
            normal: 1.0,
            tangential: 0.0,
            profile: LoadProfile::Constant,
        }
    }
}

impl BodyLoad {
    /// `<f(t), v> = int f0(t) . v dx` through the mass matrix.
    pub(crate) fn to_load(self, rod: &Rod1D, mass: &Matrix) -> Result<Load> {
        self.profile.validate()?;
        let nodal = rod.interpolate(|_| [self.normal, self.tangential]);
        let base = mass * nodal;
        let profile = self.profile;
        Ok(Load::new(base.len(), 0.0, move |t, _| &base * profile.eval(t)))
    }
}

/// Initial field on the rod, `value * x / L` for each component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearField {
    pub normal_at_end: f64,
    pub tangential_at_end: f64,
}

impl LinearField {
    pub(crate) fn coordinates(&self, rod: &Rod1D) -> Vector {
        let l = rod.length();
        rod.interpolate(|x| [self.normal_at_end * x / l, self.tangential_at_end * x / l])
    }
}
