//! Two fixed-point chains from different starts and the one-pass solver land on the same
//! solution.
//!
//! cargo run --release --example uniqueness -- [instances]

use dvhi::fixpoint::BanachParams;
use dvhi::grid::TimeGrid;
use dvhi::stepper::SolverParams;
use dvhi::verify::{abstract_instance, uniqueness_experiment};

fn main() -> dvhi::Result<()> {
    let count: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let grid = TimeGrid::new(1.0, 64)?;
    println!(
        "{:>4} {:>11} {:>11} {:>11} {:>11} {:>7}",
        "seed", "chains", "tol", "cross", "tol", "iters"
    );
    for seed in 0..count {
        let spec = abstract_instance(seed)?;
        let r = uniqueness_experiment(&spec, grid, &SolverParams::default(), &BanachParams::default(), 42)?;
        println!(
            "{seed:>4} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>3}/{:<3} {}",
            r.chains,
            r.tol_chains,
            r.cross,
            r.tol_cross,
            r.iterations.0,
            r.iterations.1,
            if r.pass { "" } else { "FAIL" }
        );
    }
    Ok(())
}
