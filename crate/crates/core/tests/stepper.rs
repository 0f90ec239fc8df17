mod common;

use std::sync::Arc;

use common::*;
use dvhi::grid::TimeGrid;
use dvhi::history::HistoryOperator;
use dvhi::spaces::{ConstraintSet, GalerkinSpace};
use dvhi::stepper::{
    inequality_residual, ode_step, solve_onepass, vi_step, ClosureRhs, HistoryValues, Load, OdeDims, OnePass,
    SolverParams, StepData, SystemSpec, ZeroRhs, FEASIBILITY_TOL,
};
use dvhi::verify::{abstract_instance, linear_parabolic_instance};
use dvhi::{Matrix, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

fn stiffness(spec: &SystemSpec) -> Matrix {
    let n = spec.v.dim();
    let x = Vector::zeros(spec.e.dim());
    let base = spec.a.eval(0.0, &x, &Vector::zeros(n));
    Matrix::from_fn(n, n, |i, j| {
        let mut e = Vector::zeros(n);
        e[j] = 1.0;
        (spec.a.eval(0.0, &x, &e) - &base)[i]
    })
}

fn with_constraints(spec: &SystemSpec, k: ConstraintSet, w0: Vector, load: Load) -> SystemSpec {
    let mut parts = spec.clone().into_parts();
    parts.k = k;
    parts.w0 = w0;
    parts.load = load;
    SystemSpec::new(parts).unwrap()
}

#[test]
fn linear_step_matches_dense_solve() {
    let params = SolverParams {
        tol: 1e-14,
        ..Default::default()
    };
    for seed in 0..10 {
        let spec = linear_parabolic_instance(seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = spec.v.dim();
        let tau = rng.random_range(0.01..0.5);
        let w_n = random_vec(&mut rng, n, 2.0);
        let f = random_vec(&mut rng, n, 2.0);
        let history = HistoryValues {
            xi: random_vec(&mut rng, n, 1.0),
            zeta: Vector::zeros(1),
            eta: Vector::zeros(1),
        };
        let x = Vector::zeros(1);
        let d = StepData {
            t: tau,
            tau,
            w_n: &w_n,
            x_lag: &x,
            history: &history,
            f: &f,
        };
        let out = vi_step(&spec, &d, &w_n, &params).unwrap();
        let gh = spec.v.gram_h();
        let lhs = gh / tau + stiffness(&spec);
        let rhs = gh * &w_n / tau + &f - &history.xi;
        let exact = lhs.lu().solve(&rhs).unwrap();
        assert!(
            (&out.w - &exact).amax() < 1e-8,
            "seed {seed}: {:e}",
            (&out.w - &exact).amax()
        );
        assert!(inequality_residual(&spec, &d, &out.w, 0).unwrap() <= 1e-9);
    }
}

#[test]
fn zero_data_gives_zero_step() {
    let base = linear_parabolic_instance(4).unwrap();
    let k = ConstraintSet::halfspaces(vec![
        (Vector::from_vec(vec![1.0, 0.5, 0.0]), 0.3),
        (Vector::from_vec(vec![0.0, -1.0, 1.0]), 0.0),
    ])
    .unwrap();
    let spec = with_constraints(&base, k, Vector::zeros(3), Load::fixed(Vector::zeros(3)));
    let zero = Vector::zeros(3);
    let history = HistoryValues {
        xi: zero.clone(),
        zeta: Vector::zeros(1),
        eta: Vector::zeros(1),
    };
    let x = Vector::zeros(1);
    let d = StepData {
        t: 0.1,
        tau: 0.1,
        w_n: &zero,
        x_lag: &x,
        history: &history,
        f: &zero,
    };
    let out = vi_step(&spec, &d, &zero, &SolverParams::default()).unwrap();
    assert!(out.w.amax() < 1e-14);
}

#[test]
fn ode_step_examples() {
    let dims = OdeDims { x: 1, w: 1, s: 1 };
    let one = Vector::from_element(1, 1.0);
    let x = ode_step(&ZeroRhs { dims }, 0.1, &one, &one, &one, 0.1).unwrap();
    assert_eq!(x, one);
    let decay = ClosureRhs::new(dims, 1.0, |_, x, _, _| -x);
    let x = ode_step(&decay, 0.01, &one, &one, &one, 0.01).unwrap();
    assert!((x[0] - 1.0 / 1.01).abs() < 1e-12);
    // x' = S w with S the running integral and w = 1
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let metric = Arc::new(GalerkinSpace::euclidean("R", 1).unwrap()).primal();
    let s_op =
        HistoryOperator::running_integral(Matrix::identity(1, 1), Vector::zeros(1), metric.clone(), metric).unwrap();
    let mut cursor = s_op.start(grid, &one).unwrap();
    let double = ClosureRhs::new(dims, 1.0, |_, _, _, s| s.clone());
    let mut x = Vector::zeros(1);
    for n in 1..=100 {
        let s = cursor.advance(&one).unwrap();
        x = ode_step(&double, grid.node(n), &x, &one, &s, grid.tau()).unwrap();
    }
    assert!((x[0] - 0.5).abs() <= 2.0 * grid.tau());
    let stiff = ClosureRhs::new(dims, 20.0, |_, x, _, _| -x * 20.0);
    assert!(ode_step(&stiff, 0.1, &one, &one, &one, 0.1).is_err());
}

#[test]
fn linear_run_converges_at_first_order() {
    let spec = linear_parabolic_instance(1).unwrap();
    let f = spec.load.eval(0.0, &spec.x0);
    let flow = LinearFlow::new(spec.v.gram_h(), &stiffness(&spec), &f, &spec.w0);
    let params = SolverParams {
        tol: 1e-13,
        ..Default::default()
    };
    let errors: Vec<f64> = [16, 32, 64, 128]
        .iter()
        .map(|&n| {
            let grid = TimeGrid::new(1.0, n).unwrap();
            let r = solve_onepass(&spec, grid, &params).unwrap();
            (0..=n)
                .map(|k| spec.v.norm_h(&(r.w.value(k) - flow.at(grid.node(k)))))
                .fold(0.0, f64::max)
        })
        .collect();
    for pair in errors.windows(2) {
        let factor = pair[0] / pair[1];
        assert!((1.7..=2.3).contains(&factor), "{errors:?}");
    }
}

#[test]
fn inactive_constraints_change_nothing() {
    let base = linear_parabolic_instance(2).unwrap();
    let k = ConstraintSet::halfspaces(vec![
        (Vector::from_vec(vec![1.0, 0.0, 0.0]), 50.0),
        (Vector::from_vec(vec![-1.0, 1.0, 0.0]), 50.0),
        (Vector::from_vec(vec![0.0, 0.0, -1.0]), 50.0),
    ])
    .unwrap();
    let constrained = with_constraints(&base, k, base.w0.clone(), base.load.clone());
    let grid = TimeGrid::new(2.0, 40).unwrap();
    let params = SolverParams::default();
    let a = solve_onepass(&base, grid, &params).unwrap();
    let b = solve_onepass(&constrained, grid, &params).unwrap();
    for n in 0..=40 {
        assert!((a.w.value(n) - b.w.value(n)).amax() <= 1e-9);
    }
}

#[test]
fn rest_state_stays_at_rest() {
    let base = linear_parabolic_instance(3).unwrap();
    let mut parts = base.into_parts();
    parts.load = Load::fixed(Vector::zeros(3));
    parts.w0 = Vector::zeros(3);
    parts.x0 = Vector::from_element(1, 2.5);
    let spec = SystemSpec::new(parts).unwrap();
    let r = solve_onepass(&spec, TimeGrid::new(1.0, 20).unwrap(), &SolverParams::default()).unwrap();
    assert!(r.w.values().iter().all(|w| w.amax() == 0.0));
    assert!(r.x.values().iter().all(|x| x[0] == 2.5));
}

#[test]
fn unforced_symmetric_flow_decays_in_h() {
    for seed in 0..5 {
        let base = linear_parabolic_instance(seed).unwrap();
        let w0 = base.w0.clone();
        let spec = with_constraints(&base, ConstraintSet::WholeSpace, w0, Load::fixed(Vector::zeros(3)));
        let r = solve_onepass(&spec, TimeGrid::new(3.0, 60).unwrap(), &SolverParams::default()).unwrap();
        let norms: Vec<f64> = r.w.values().iter().map(|w| spec.v.norm_h(w)).collect();
        assert!(norms.windows(2).all(|p| p[1] <= p[0] + 1e-12), "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn runs_are_feasible_and_satisfy_the_inequality(seed in 0u64..1000) {
        let spec = abstract_instance(seed).unwrap();
        let params = SolverParams::default();
        let r = solve_onepass(&spec, TimeGrid::new(1.0, 24).unwrap(), &params).unwrap();
        for w in r.w.values() {
            prop_assert!(spec.k.residual(w) <= FEASIBILITY_TOL);
        }
        prop_assert!(r.inequality_residuals.iter().all(|&v| v <= params.tol_ineq));
        prop_assert!(r.constraint_residuals.iter().all(|&v| v <= FEASIBILITY_TOL));
    }
}

#[test]
fn restart_reproduces_the_full_run() {
    for seed in [0, 7, 13] {
        let spec = abstract_instance(seed).unwrap();
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let params = SolverParams::default();
        let full = solve_onepass(&spec, grid, &params).unwrap();
        let mut first = OnePass::start(&spec, grid, params).unwrap();
        first.advance_to(16).unwrap();
        let checkpoint = first.checkpoint();
        assert_eq!(checkpoint.node(), 16);
        let resumed = OnePass::resume(&spec, checkpoint, params).unwrap().finish().unwrap();
        for n in 0..=32 {
            assert!((full.w.value(n) - resumed.w.value(n)).amax() <= 1e-8);
            assert!((full.x.value(n) - resumed.x.value(n)).amax() <= 1e-8);
        }
    }
}

#[test]
fn partial_report_covers_completed_nodes() {
    let spec = abstract_instance(2).unwrap();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let mut run = OnePass::start(&spec, grid, SolverParams::default()).unwrap();
    assert!(run.partial().is_none());
    run.advance_to(4).unwrap();
    let partial = run.partial().unwrap();
    assert_eq!(partial.w.values().len(), 5);
    assert_eq!(partial.grid().steps(), 4);
}
