//! Assemble a problem directly from its parts: a three-unknown system with a nonmonotone
//! contact law on `w_0 + w_1`, fading memory in the operator and a cap on `w_2`.
//!
//! cargo run --release --example custom_instance

use std::sync::Arc;

use dvhi::grid::TimeGrid;
use dvhi::history::{HistoryOperator, Kernel};
use dvhi::potentials::{builtin_jnu, Knot, PiecewiseLinearSlope, ZeroPotential};
use dvhi::spaces::{AffineMap, ConstraintSet, GalerkinSpace, HypothesisConstants};
use dvhi::stepper::{solve_onepass, AffineOperator, Load, OdeDims, SolverParams, SystemParts, SystemSpec, ZeroRhs};
use dvhi::{Matrix, Vector};

fn main() -> dvhi::Result<()> {
    let n = 3;
    let v = Arc::new(GalerkinSpace::new(
        "V",
        Matrix::identity(n, n),
        Matrix::identity(n, n) * 0.5,
    )?);
    let e = Arc::new(GalerkinSpace::euclidean("E", 1)?);
    let x_space = Arc::new(GalerkinSpace::euclidean("X", 1)?);

    // slope jumps at 0 and softens between 1 and 1.5
    let p = PiecewiseLinearSlope::new(vec![
        Knot {
            at: 0.0,
            left: -1.0,
            right: 1.0,
        },
        Knot {
            at: 1.0,
            left: 1.0,
            right: 1.0,
        },
        Knot {
            at: 1.5,
            left: 0.6,
            right: 0.6,
        },
    ])?;
    let j = builtin_jnu(p.clone(), p.max_decrease(), p.bound())?;

    let stiffness = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 2.0, 2.5]));
    let memory = HistoryOperator::convolution(
        Kernel::Exponential {
            coeff: 0.3,
            relax_time: 0.5,
            matrix: Matrix::identity(n, n),
        },
        v.primal(),
        v.dual(),
    )?;
    let zero = |target| HistoryOperator::zero(v.primal(), target);
    let mut cap = Vector::zeros(n);
    cap[2] = 1.0;
    let force = Vector::from_vec(vec![4.0, 1.0, 3.0]);

    let spec = SystemSpec::new(SystemParts {
        ode: Arc::new(ZeroRhs {
            dims: OdeDims { x: 1, w: n, s: n },
        }),
        a: Arc::new(AffineOperator::stiffness_only(stiffness.clone(), 1)?),
        j: Arc::new(j),
        phi: Arc::new(ZeroPotential { dim: 1 }),
        load: Load::new(n, 0.0, move |t, _| &force * (3.0 * t).sin()),
        m: AffineMap::linear(Matrix::from_row_slice(1, n, &[1.0, 1.0, 0.0]), &v, &x_space)?,
        s: zero(v.primal()),
        r1: memory,
        r2: zero(x_space.primal()),
        r3: zero(x_space.primal()),
        k: ConstraintSet::halfspaces(vec![(cap, 0.3)])?,
        x0: Vector::zeros(1),
        w0: Vector::zeros(n),
        u0: None,
        // the smallest eigenvalue of K against the V Gram matrix, and |K|
        constants: HypothesisConstants {
            m_a: 2.0,
            a2: 3.0,
            ..Default::default()
        },
        e,
        v,
        x_space,
    })?;
    println!(
        "m_j = {:.2}, |M1| = {:.4}, margin {:.4}",
        spec.constants.m_j,
        spec.constants.norm_m1,
        spec.smallness_margin()
    );

    let grid = TimeGrid::new(2.0, 100)?;
    let report = solve_onepass(&spec, grid, &SolverParams::default())?;
    for k in (0..=100).step_by(10) {
        let w = report.w.value(k);
        println!(
            "t {:.2}  w = [{:>8.4} {:>8.4} {:>8.4}]  w0+w1 = {:.4}",
            grid.node(k),
            w[0],
            w[1],
            w[2],
            w[0] + w[1]
        );
    }
    Ok(())
}
