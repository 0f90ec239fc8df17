//! Hypothesis checkers, well-posedness experiments and a seeded instance suite.

pub mod checks;
pub mod experiments;
pub mod suite;

pub use checks::{check_h_a, check_history, check_spec, HistoryReport, OperatorReport, SpecReport};
pub use experiments::{
    cross_solver_tolerance, lipschitz_dependence_experiment, max_increments, regularity_check, solution_distance,
    uniqueness_experiment, velocity_distance, LipschitzRow, LipschitzTable, Perturbation, RegularityReport,
    UniquenessReport,
};
pub use suite::{abstract_instance, abstract_suite, linear_parabolic_instance, two_dof_instance};
