//! Viscoplastic rod pushed against an obstacle by a periodic normal load.
//!
//! cargo run --release --example solve_viscoplastic -- [steps]

use dvhi::grid::TimeGrid;
use dvhi::models::{build_viscoplastic, BodyLoad, LoadProfile, Rod1D, ViscoplasticModel};
use dvhi::stepper::{solve_onepass, SolverParams};

fn main() -> dvhi::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(256);
    let rod = Rod1D::new(1.0, 16, 1)?;
    let model = ViscoplasticModel {
        load: BodyLoad {
            normal: 2.0,
            tangential: 0.0,
            profile: LoadProfile::Sine {
                frequency: 1.0,
                phase: 0.0,
            },
        },
        ..Default::default()
    };
    let spec = build_viscoplastic(&rod, &model)?;
    println!("smallness margin {:.4}", spec.smallness_margin());

    let report = solve_onepass(&spec, TimeGrid::new(2.0, steps)?, &SolverParams::default())?;
    let tip = rod.elements() - 1;
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "tip w", "tip u", "max |eta|");
    for n in (0..=steps).step_by((steps / 16).max(1)) {
        let u = report.u.as_ref().unwrap().value(n);
        println!(
            "{:>6.3} {:>12.5} {:>12.5} {:>12.5}",
            report.grid().node(n),
            report.w.value(n)[tip],
            u[tip],
            report.x.value(n).amax()
        );
    }
    let s = report.summary();
    println!(
        "gap {} | max tip velocity {:.5} | inner iterations max {} mean {:.1} | {:.3}s",
        model.gap,
        report.w.values().iter().map(|w| w[tip]).fold(f64::MIN, f64::max),
        s.max_inner_iters,
        s.mean_inner_iters,
        s.wall_time
    );
    Ok(())
}
