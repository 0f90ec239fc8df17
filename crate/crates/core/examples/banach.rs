//! Fixed-point iteration on the history quadruple, compared with the one-pass solver.
//!
//! cargo run --release --example banach

use dvhi::fixpoint::{solve_banach, BanachParams};
use dvhi::grid::TimeGrid;
use dvhi::models::{build_viscoplastic, Rod1D, ViscoplasticModel};
use dvhi::stepper::{solve_onepass, SolverParams};
use dvhi::verify::{cross_solver_tolerance, velocity_distance};

fn main() -> dvhi::Result<()> {
    let spec = build_viscoplastic(&Rod1D::new(1.0, 16, 1)?, &ViscoplasticModel::default())?;
    let grid = TimeGrid::new(1.0, 64)?;
    let params = SolverParams::default();

    let (fixed, trace) = solve_banach(&spec, grid, &params, &BanachParams::default(), None)?;
    println!("beta {:.3}  sampled constant {:.3}", trace.beta, trace.c_est);
    println!("{:>4} {:>12} {:>12} {:>8}", "k", "plain", "weighted", "ratio");
    for r in &trace.rows {
        println!(
            "{:>4} {:>12.3e} {:>12.3e} {:>8.4}",
            r.iteration, r.plain, r.weighted, r.ratio
        );
    }

    let direct = solve_onepass(&spec, grid, &params)?;
    println!(
        "|w_banach - w_onepass| = {:.3e} (tolerance {:.3e})",
        velocity_distance(&spec, &fixed.w, &direct.w)?,
        cross_solver_tolerance(&spec, &direct.w)?
    );
    Ok(())
}
