//! Node-to-node increments should shrink as the step is halved.
//!
//! cargo run --release --example regularity

use dvhi::grid::TimeGrid;
use dvhi::models::{build_viscoelastic_adhesive, build_viscoplastic, Rod1D};
use dvhi::stepper::{solve_onepass, SolverParams};
use dvhi::verify::regularity_check;

fn main() -> dvhi::Result<()> {
    let params = SolverParams::default();
    let specs = [
        (
            "viscoplastic",
            build_viscoplastic(&Rod1D::new(1.0, 16, 1)?, &Default::default())?,
        ),
        (
            "adhesive",
            build_viscoelastic_adhesive(&Rod1D::new(1.0, 16, 2)?, &Default::default())?,
        ),
    ];
    for (name, spec) in &specs {
        let mut grid = TimeGrid::new(1.0, 32)?;
        let mut coarse = solve_onepass(spec, grid, &params)?;
        println!("{name}");
        for _ in 0..3 {
            grid = grid.refined();
            let fine = solve_onepass(spec, grid, &params)?;
            let r = regularity_check(spec, &coarse, &fine)?;
            println!(
                "  N = {:>4}: ratios x {:.3}  w(H) {:.3}  w(V) {:.3}  continuous x {} w {}",
                grid.steps(),
                r.ratio_x,
                r.ratio_w_h,
                r.ratio_w_v,
                r.x_continuous,
                r.w_continuous
            );
            coarse = fine;
        }
    }
    Ok(())
}
