//! Viscoelastic rod glued to a foundation: the bond weakens under tangential slip.
//!
//! cargo run --release --example solve_adhesive

use dvhi::grid::TimeGrid;
use dvhi::models::{build_viscoelastic_adhesive, BodyLoad, LoadProfile, Rod1D, ViscoelasticAdhesiveModel};
use dvhi::stepper::{solve_onepass, SolverParams};

fn main() -> dvhi::Result<()> {
    let rod = Rod1D::new(1.0, 16, 2)?;
    let model = ViscoelasticAdhesiveModel {
        load: BodyLoad {
            normal: 0.5,
            tangential: 12.0,
            profile: LoadProfile::Ramp { rise_time: 0.5 },
        },
        ..Default::default()
    };
    let spec = build_viscoelastic_adhesive(&rod, &model)?;
    let grid = TimeGrid::new(4.0, 256)?;
    let report = solve_onepass(&spec, grid, &SolverParams::default())?;

    // x holds the bonding field on the contact node
    println!("{:>6} {:>10} {:>12}", "t", "beta", "tip slip");
    let tip = rod.index(rod.elements(), 1);
    for n in (0..=grid.steps()).step_by(16) {
        let u = report.u.as_ref().unwrap().value(n);
        println!("{:>6.2} {:>10.5} {:>12.5}", grid.node(n), report.x.value(n)[0], u[tip]);
    }
    let lo = report.x.values().iter().map(|b| b.min()).fold(f64::INFINITY, f64::min);
    println!("bond stays in [{lo:.5}, 1]");
    Ok(())
}
