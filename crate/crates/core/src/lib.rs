// NaN must fail the positivity and range checks, so they are written as negations
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fixpoint;
pub mod grid;
pub mod history;
pub(crate) mod linalg;
pub mod models;
pub mod potentials;
pub(crate) mod prox;
pub mod spaces;
pub mod stepper;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
