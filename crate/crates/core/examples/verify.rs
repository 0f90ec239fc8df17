//! Sampled hypothesis checks on a seeded abstract instance.
//!
//! cargo run --release --example verify -- [seed]

use dvhi::grid::TimeGrid;
use dvhi::verify::{abstract_instance, check_spec};

fn main() -> dvhi::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = abstract_instance(seed)?;
    let r = check_spec(&spec, &TimeGrid::new(1.0, 64)?, 500, 7)?;

    let flag = |ok: bool| if ok { "ok" } else { "FAIL" };
    println!("instance {seed}: dim V = {}, dim E = {}", spec.v.dim(), spec.e.dim());
    println!("smallness margin      {:>11.4e}", r.smallness_margin);
    println!("smallest embedding    {:>11.4e}", r.embedding_min);
    println!(
        "operator A            mono {:.3e} growth {:.3e} {}",
        r.operator.monotonicity_margin,
        r.operator.growth_margin,
        flag(r.operator.pass)
    );
    println!("nonsmooth j           {}", flag(r.j_pass));
    println!("convex phi            {}", flag(r.phi_pass));
    for h in &r.histories {
        println!(
            "history {:<4}          declared {:.4} sampled {:.4} {}",
            h.name,
            h.declared,
            h.estimate,
            flag(h.pass)
        );
    }
    println!("overall {}", flag(r.pass));
    Ok(())
}
