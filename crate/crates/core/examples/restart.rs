//! Stop a run halfway, keep the checkpoint, and resume it later.
//!
//! cargo run --release --example restart

use dvhi::grid::TimeGrid;
use dvhi::models::{build_viscoelastic_adhesive, Rod1D};
use dvhi::stepper::{solve_onepass, OnePass, SolverParams};

fn main() -> dvhi::Result<()> {
    let spec = build_viscoelastic_adhesive(&Rod1D::new(1.0, 16, 2)?, &Default::default())?;
    let grid = TimeGrid::new(2.0, 200)?;
    let params = SolverParams::default();

    let mut run = OnePass::start(&spec, grid, params)?;
    run.advance_to(80)?;
    let checkpoint = run.checkpoint();
    drop(run);
    println!(
        "checkpoint at node {} (t = {:.2})",
        checkpoint.node(),
        grid.node(checkpoint.node())
    );

    let resumed = OnePass::resume(&spec, checkpoint, params)?.finish()?;
    let full = solve_onepass(&spec, grid, &params)?;
    let worst = (0..=grid.steps())
        .map(|n| (full.w.value(n) - resumed.w.value(n)).amax())
        .fold(0.0, f64::max);
    println!("largest difference to an uninterrupted run: {worst:.2e}");
    Ok(())
}
