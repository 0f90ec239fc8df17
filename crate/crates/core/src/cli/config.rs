//! Run configuration: one TOML file with an explicit schema version.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixpoint::BanachParams;
use crate::models::{ViscoelasticAdhesiveModel, ViscoplasticModel};
use crate::potentials::{BondingFactor, FrictionCoefficient};
use crate::spaces::{Halfspace, HypothesisConstants};
use crate::stepper::SolverParams;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    SolveBanach,
    Verify,
    Experiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Viscoplastic,
    ViscoelasticAdhesive,
    /// Dense matrices from the `[abstract]` section.
    Abstract,
    /// A seeded abstract instance; the seed comes from `[run]`.
    Seeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub command: Command,
    pub problem: Problem,
    pub horizon: f64,
    pub steps: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    /// Rod discretisation for the contact models.
    pub length: f64,
    pub elements: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            command: Command::Solve,
            problem: Problem::Viscoplastic,
            horizon: 1.0,
            steps: 128,
            seed: 0,
            out: PathBuf::from("out"),
            workers: 1,
            length: 1.0,
            elements: 16,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub viscoplastic: ViscoplasticModel,
    pub viscoelastic_adhesive: ViscoelasticAdhesiveModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Lipschitz,
    Uniqueness,
    Regularity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationName {
    X0,
    W0,
    F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub deltas: Vec<f64>,
    pub perturbations: Vec<PerturbationName>,
    /// Seeds of the perturbation directions and random starts; empty means `[run.seed]`.
    pub seeds: Vec<u64>,
    /// Samples of the hypothesis checks run by `verify`.
    pub samples: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Lipschitz,
            deltas: vec![1e-2, 1e-3, 1e-4],
            perturbations: vec![PerturbationName::X0, PerturbationName::W0, PerturbationName::F],
            seeds: Vec::new(),
            samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JSection {
    /// `[at, left, right]` triples of the slope.
    pub knots: Vec<[f64; 3]>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub c0: Option<f64>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSection {
    pub mu: FrictionCoefficient,
    pub h1: BondingFactor,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSection {
    pub coeff: f64,
    pub relax_time: f64,
}

/// Dense instance: `A(t, x, w) = stiffness w + coupling x + offset`, running-integral
/// histories with the given weights, and a load `load + load_sine sin(2 pi load_frequency t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractSection {
    pub gram_v: Vec<Vec<f64>>,
    pub gram_h: Vec<Vec<f64>>,
    #[serde(default)]
    pub gram_e: Option<Vec<Vec<f64>>>,
    pub stiffness: Vec<Vec<f64>>,
    #[serde(default)]
    pub coupling: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
    pub m1: Vec<Vec<f64>>,
    #[serde(default)]
    pub m0: Option<Vec<f64>>,
    pub x0: Vec<f64>,
    pub w0: Vec<f64>,
    pub load: Vec<f64>,
    #[serde(default)]
    pub load_sine: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub load_frequency: f64,
    #[serde(default)]
    pub ode: Option<OdeSection>,
    #[serde(default)]
    pub j: Option<JSection>,
    #[serde(default)]
    pub phi: Option<PhiSection>,
    #[serde(default)]
    pub constraints: Vec<Halfspace>,
    /// Weight of `S w = int w`, `nv x nv`; omitted means no `S`.
    #[serde(default)]
    pub s_weight: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub r1_weight: Option<Vec<Vec<f64>>>,
    /// Exponential memory added to `R1`, with matrix `G_V`.
    #[serde(default)]
    pub r1_kernel: Option<KernelSection>,
    #[serde(default)]
    pub r2_weight: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub r3_weight: Option<Vec<Vec<f64>>>,
    /// Declared constants; `m_a` and `m_bar_a` are computed when left at zero.
    #[serde(default)]
    pub constants: HypothesisConstants,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub banach: BanachParams,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default, rename = "abstract")]
    pub abstract_problem: Option<AbstractSection>,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

impl Config {
    /// Parses and validates; unknown keys are reported all at once.
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut unknown = Vec::new();
        let config: Config = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| Error::Parse(e.to_string()))?;
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let r = &self.run;
        if !(r.horizon.is_finite() && r.horizon > 0.0) || r.steps == 0 || r.workers == 0 {
            return Err(Error::Config(
                "run.horizon, run.steps and run.workers must be positive".into(),
            ));
        }
        if self.run.problem == Problem::Abstract && self.abstract_problem.is_none() {
            return Err(Error::Config(
                "problem = \"abstract\" needs an [abstract] section".into(),
            ));
        }
        if self.experiment.deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Config("experiment.deltas must be positive".into()));
        }
        self.solver.validate()
    }
}
