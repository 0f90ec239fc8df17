use std::sync::Arc;

use dvhi::grid::{GridFunction, TimeGrid};
use dvhi::history::{
    estimate_volterra_constant, evaluate, evaluate_all, make_r0, HistoryOperator, Kernel, PointwiseMap,
};
use dvhi::spaces::{GalerkinSpace, Metric};
use dvhi::stepper::{ClosureRhs, LinearRhs, OdeDims, OdeRightHandSide, ZeroRhs};
use dvhi::{Matrix, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn metric(dim: usize) -> Metric {
    Arc::new(GalerkinSpace::euclidean("R", dim).unwrap()).primal()
}

fn weighted(dim: usize) -> Metric {
    let g = Matrix::from_fn(dim, dim, |i, j| if i == j { 2.0 + i as f64 } else { 0.3 });
    Arc::new(GalerkinSpace::with_gram("V", g).unwrap()).primal()
}

fn running(w: Matrix, src: Metric, dst: Metric) -> HistoryOperator {
    let b = Vector::from_fn(dst.dim(), |i, _| 0.1 * i as f64);
    HistoryOperator::running_integral(w, b, src, dst).unwrap()
}

fn linear_r0(src: Metric, grid: &TimeGrid) -> HistoryOperator {
    let d = src.dim();
    let s = running(Matrix::identity(d, d), src.clone(), metric(d));
    let a = Matrix::from_fn(2, 2, |i, j| if i == j { -1.0 } else { 0.4 });
    let b = Matrix::from_fn(2, d, |i, j| 0.5 / (1.0 + (i + j) as f64));
    let c = Matrix::from_fn(2, d, |i, j| if i == j { 0.3 } else { 0.0 });
    let rhs = LinearRhs::new(a, b, c, Vector::zeros(2)).unwrap();
    make_r0(
        Arc::new(rhs),
        s,
        Vector::from_vec(vec![1.0, 0.0]),
        metric(2),
        grid,
        40,
        5,
    )
    .unwrap()
}

fn nonlinear_r0(src: Metric, grid: &TimeGrid) -> HistoryOperator {
    let d = src.dim();
    let s = running(Matrix::identity(d, d), src.clone(), metric(d));
    let rhs = ClosureRhs::new(OdeDims { x: 1, w: d, s: d }, 1.0, move |_, x, w, s| {
        Vector::from_element(1, -x[0].sin() * 0.5 + 0.5 * w[0].tanh() + 0.2 * s[d - 1].cos())
    });
    make_r0(Arc::new(rhs), s, Vector::from_element(1, 0.2), metric(1), grid, 40, 9).unwrap()
}

/// One operator of every form from a `dim`-dimensional weighted source.
fn all_forms(dim: usize, grid: &TimeGrid) -> Vec<(&'static str, HistoryOperator)> {
    let src = weighted(dim);
    let w = Matrix::from_fn(2, dim, |i, j| ((i + 2 * j) as f64 * 0.7).sin());
    let kernel = Kernel::Exponential {
        coeff: 0.8,
        relax_time: 0.5,
        matrix: Matrix::from_fn(2, dim, |i, j| if i == j { 1.0 } else { -0.2 }),
    };
    let general = Kernel::general(1, dim, 0.0, move |r| {
        Matrix::from_fn(1, dim, |_, j| (r + j as f64).cos() * 0.5)
    });
    // |C(r) v| <= |C(r)|_2 |v|_2 and |v|_2^2 <= |v|_V^2 / 1.4 by Gershgorin on the Gram matrix
    let sup = 0.5 * (dim as f64).sqrt() / 1.4f64.sqrt();
    let general_op = HistoryOperator::convolution(general, src.clone(), metric(1))
        .unwrap()
        .with_volterra_constant(sup);
    let inner = running(Matrix::identity(dim, dim), src.clone(), metric(dim));
    let outer = PointwiseMap::new(1, 2.0, |_, y| Vector::from_element(1, 2.0 * y[0].sin()));
    let composed = HistoryOperator::composed(outer, inner, metric(1)).unwrap();
    let sum = HistoryOperator::sum(vec![
        running(w.clone(), src.clone(), metric(2)),
        HistoryOperator::convolution(kernel.clone(), src.clone(), metric(2)).unwrap(),
    ])
    .unwrap();
    vec![
        ("zero", HistoryOperator::zero(src.clone(), metric(3))),
        ("running", running(w, src.clone(), metric(2))),
        (
            "exponential",
            HistoryOperator::convolution(kernel, src.clone(), metric(2)).unwrap(),
        ),
        ("general", general_op),
        ("linear ode", linear_r0(src.clone(), grid)),
        ("nonlinear ode", nonlinear_r0(src.clone(), grid)),
        ("composed", composed),
        ("sum", sum),
    ]
}

fn random_trajectory(rng: &mut ChaCha8Rng, grid: TimeGrid, dim: usize) -> GridFunction {
    let values = (0..=grid.steps())
        .map(|_| Vector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0)))
        .collect();
    GridFunction::new(grid, "V", values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_form_is_causal(seed in 0u64..10_000, n in 0usize..=20, dim in 1usize..=3) {
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_trajectory(&mut rng, grid, dim);
        let mut altered = w.clone().into_values();
        for v in altered.iter_mut().skip(n + 1) {
            *v = v.map(|x| x * -3.0 + 1.0);
        }
        let altered = GridFunction::new(grid, "V", altered).unwrap();
        for (name, op) in all_forms(dim, &grid) {
            let a = evaluate(&op, &w, n).unwrap();
            let b = evaluate(&op, &altered, n).unwrap();
            prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()), "{name}");
            // incremental evaluation agrees with the one-shot one
            let all = evaluate_all(&op, &w).unwrap();
            prop_assert!(all.value(n).iter().zip(a.iter()).all(|(x, y)| x.to_bits() == y.to_bits()), "{name}");
        }
    }
}

/// Largest ratio of output distance to the integrated input distance over all nodes.
fn empirical_ratio(op: &HistoryOperator, a: &GridFunction, b: &GridFunction) -> f64 {
    let (ha, hb) = (evaluate_all(op, a).unwrap(), evaluate_all(op, b).unwrap());
    let grid = a.grid();
    let src = op.source();
    let d: Vec<f64> = (0..=grid.steps())
        .map(|k| dvhi::grid::Norm::norm(src, &(a.value(k) - b.value(k))))
        .collect();
    let mut integral = 0.0;
    let mut best: f64 = 0.0;
    for n in 1..=grid.steps() {
        integral += 0.5 * grid.tau() * (d[n - 1] + d[n]);
        let out = dvhi::grid::Norm::norm(op.target(), &(ha.value(n) - hb.value(n)));
        best = best.max(out / integral);
    }
    best
}

#[test]
fn declared_constants_bound_two_hundred_pairs() {
    let grid = TimeGrid::new(1.0, 24).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let forms = all_forms(2, &grid);
    for (name, op) in &forms {
        let mut worst: f64 = 0.0;
        for pair in 0..200 {
            let a = random_trajectory(&mut rng, grid, 2);
            let b = if pair % 2 == 0 {
                let dir = Vector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
                let vals = a
                    .values()
                    .iter()
                    .map(|v| v + &dir * rng.random_range(0.0..1.0))
                    .collect();
                GridFunction::new(grid, "V", vals).unwrap()
            } else {
                random_trajectory(&mut rng, grid, 2)
            };
            worst = worst.max(empirical_ratio(op, &a, &b));
        }
        assert!(
            op.volterra_constant() >= worst - 1e-9,
            "{name}: declared {} < {worst}",
            op.volterra_constant()
        );
        let sampled = estimate_volterra_constant(op, &grid, 50, 1).unwrap();
        assert!(op.volterra_constant() >= sampled - 1e-9, "{name}");
    }
}

#[test]
fn composition_constant_is_the_product_and_holds() {
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let inner = running(Matrix::from_element(1, 1, 1.5), metric(1), metric(1));
    let c_inner = inner.volterra_constant();
    let outer = PointwiseMap::new(1, 0.7, |_, y| Vector::from_element(1, 0.7 * y[0].atan()));
    let op = HistoryOperator::composed(outer, inner, metric(1)).unwrap();
    assert!(op.volterra_constant() <= 0.7 * c_inner + 1e-15);
    let est = estimate_volterra_constant(&op, &grid, 200, 3).unwrap();
    assert!(est <= op.volterra_constant() + 1e-9);
    assert!(est > 0.5 * op.volterra_constant());
}

#[test]
fn running_integral_examples() {
    let grid = TimeGrid::new(2.0, 10).unwrap();
    let u0 = Vector::from_vec(vec![1.0, -0.5]);
    let c = Vector::from_vec(vec![0.25, 2.0]);
    let op = HistoryOperator::running_integral(Matrix::identity(2, 2), u0.clone(), metric(2), metric(2)).unwrap();
    let w = GridFunction::constant(grid, "V", c.clone());
    for n in 0..=10 {
        let expect = &u0 + &c * grid.node(n);
        assert!((evaluate(&op, &w, n).unwrap() - expect).amax() < 1e-14);
    }
    assert_eq!(evaluate(&op, &w, 0).unwrap(), u0);
}

#[test]
fn exponential_convolution_of_one() {
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let kernel = Kernel::general(1, 1, 1.0, |r| Matrix::from_element(1, 1, (-r).exp()));
    let op = HistoryOperator::convolution(kernel, metric(1), metric(1)).unwrap();
    let w = GridFunction::constant(grid, "V", Vector::from_element(1, 1.0));
    let v = evaluate(&op, &w, 1000).unwrap()[0];
    assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-5);
}

#[test]
fn volterra_estimate_examples() {
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let id = running(Matrix::identity(2, 2), metric(2), metric(2));
    let e1 = estimate_volterra_constant(&id, &grid, 100, 0).unwrap();
    assert!(e1 <= 1.0 + 1e-9 && e1 > 0.95, "{e1}");
    let two = running(Matrix::identity(2, 2) * 2.0, metric(2), metric(2));
    let e2 = estimate_volterra_constant(&two, &grid, 100, 0).unwrap();
    assert!((e2 - 2.0).abs() < 0.1, "{e2}");
    let conv = HistoryOperator::convolution(
        Kernel::Exponential {
            coeff: 1.0,
            relax_time: 1.0,
            matrix: Matrix::identity(1, 1),
        },
        metric(1),
        metric(1),
    )
    .unwrap();
    let e3 = estimate_volterra_constant(&conv, &grid, 100, 0).unwrap();
    assert!(e3 <= 1.0 + 1e-9, "{e3}");
}

#[test]
fn r0_examples() {
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = random_trajectory(&mut rng, grid, 1);
    let dims = OdeDims { x: 1, w: 1, s: 1 };
    let zero_s = || HistoryOperator::zero(metric(1), metric(1));

    let frozen = make_r0(
        Arc::new(ZeroRhs { dims }),
        zero_s(),
        Vector::from_element(1, 3.0),
        metric(1),
        &grid,
        10,
        0,
    )
    .unwrap();
    let x = evaluate_all(&frozen, &w).unwrap();
    assert!(x.values().iter().all(|v| v[0] == 3.0));
    assert_eq!(frozen.volterra_constant(), 0.0);

    let integrator = ClosureRhs::new(dims, 1.0, |_, _, w, _| w.clone());
    let r0 = make_r0(
        Arc::new(integrator),
        zero_s(),
        Vector::zeros(1),
        metric(1),
        &grid,
        10,
        0,
    )
    .unwrap();
    let x = evaluate_all(&r0, &w).unwrap();
    let mut trap = 0.0;
    for n in 1..=200 {
        trap += 0.5 * grid.tau() * (w.value(n - 1)[0] + w.value(n)[0]);
        assert!((x.value(n)[0] - trap).abs() <= 2.0 * grid.tau() + 1e-12);
    }

    let decay = ClosureRhs::new(dims, 1.0, |_, x, _, _| -x);
    let r0 = make_r0(
        Arc::new(decay),
        zero_s(),
        Vector::from_element(1, 1.0),
        metric(1),
        &grid,
        10,
        0,
    )
    .unwrap();
    let x_end = evaluate(&r0, &w, 200).unwrap()[0];
    assert!((x_end - (-1.0f64).exp()).abs() <= 2.0 * grid.tau());
}

const TRIALS: usize = 3000;

#[test]
fn r0_constant_is_stable_under_refinement() {
    for build in [linear_r0 as fn(Metric, &TimeGrid) -> HistoryOperator, nonlinear_r0] {
        let coarse = TimeGrid::new(1.0, 64).unwrap();
        let fine = coarse.refined();
        let mc = estimate_volterra_constant(&build(weighted(2), &coarse), &coarse, TRIALS, 17).unwrap();
        let mf = estimate_volterra_constant(&build(weighted(2), &fine), &fine, TRIALS, 17).unwrap();
        assert!((mf / mc - 1.0).abs() < 0.1, "{mc} vs {mf}");
    }
}

#[test]
fn mismatched_spaces_are_rejected() {
    let w = Matrix::identity(2, 2);
    assert!(HistoryOperator::running_integral(w, Vector::zeros(3), metric(2), metric(2)).is_err());
    let k = Kernel::general(2, 3, 1.0, |_| Matrix::zeros(2, 3));
    assert!(HistoryOperator::convolution(k, metric(2), metric(2)).is_err());
    let lipschitz = ZeroRhs {
        dims: OdeDims { x: 1, w: 1, s: 1 },
    }
    .lipschitz();
    assert_eq!(lipschitz, 0.0);
}
