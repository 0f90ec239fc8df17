//! One-pass implicit Euler time stepping for the coupled system.

pub mod ode;
pub mod onepass;
pub mod system;
pub mod vi;

pub use ode::{ode_step, ClosureRhs, LinearRhs, OdeDims, OdeRightHandSide, ZeroRhs};
pub use onepass::{solve_onepass, Checkpoint, OnePass, ReportSummary, SolveReport, FEASIBILITY_TOL};
pub use system::{AffineOperator, ClosureOperator, EvolutionOperator, Load, SystemParts, SystemSpec};
pub use vi::{inequality_residual, vi_step, HistoryValues, SolverParams, StepData, StepOutcome};
