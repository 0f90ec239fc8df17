//! Sensitivity of the solution to the initial data and the load.
//!
//! cargo run --release --example lipschitz

use dvhi::grid::TimeGrid;
use dvhi::models::{build_viscoplastic, Rod1D, ViscoplasticModel};
use dvhi::stepper::SolverParams;
use dvhi::verify::{lipschitz_dependence_experiment, Perturbation};

fn main() -> dvhi::Result<()> {
    let spec = build_viscoplastic(&Rod1D::new(1.0, 16, 1)?, &ViscoplasticModel::default())?;
    let grid = TimeGrid::new(1.0, 128)?;
    let deltas = [1e-1, 1e-2, 1e-3, 1e-4];
    for which in Perturbation::ALL {
        let table = lipschitz_dependence_experiment(&spec, grid, &SolverParams::default(), &deltas, which, 1)?;
        println!("perturbing {} (max/min ratio {:.4})", which.name(), table.spread);
        for r in &table.rows {
            println!(
                "  delta {:>8.1e}  data {:>10.3e}  solution {:>10.3e}  ratio {:.4}",
                r.delta, r.data_distance, r.solution_distance, r.ratio
            );
        }
    }
    Ok(())
}
