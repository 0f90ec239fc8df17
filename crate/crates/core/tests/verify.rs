mod common;

use common::*;
use dvhi::fixpoint::BanachParams;
use dvhi::grid::TimeGrid;
use dvhi::models::{build_viscoplastic, BodyLoad, LoadProfile, Rod1D, ViscoplasticModel};
use dvhi::stepper::{solve_onepass, Load, SolverParams, SystemSpec};
use dvhi::verify::{
    abstract_instance, check_h_a, check_spec, linear_parabolic_instance, lipschitz_dependence_experiment,
    regularity_check, uniqueness_experiment, Perturbation,
};
use dvhi::{Matrix, Vector};

fn stiffness(spec: &SystemSpec) -> Matrix {
    let n = spec.v.dim();
    let x = spec.x0.clone();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = 1.0;
        k.set_column(i, &spec.a.eval(0.0, &x, &e));
    }
    k
}

fn viscoplastic() -> SystemSpec {
    let model = ViscoplasticModel {
        load: BodyLoad {
            normal: 1.0,
            tangential: 0.0,
            profile: LoadProfile::Sine {
                frequency: 1.0,
                phase: 0.0,
            },
        },
        ..Default::default()
    };
    build_viscoplastic(&Rod1D::new(1.0, 16, 1).unwrap(), &model).unwrap()
}

/// Trapezoid `L^2(0, T; V)` norm of a flow on a fine grid.
fn flow_l2(flow: &LinearFlow, gram_v: &Matrix, horizon: f64) -> f64 {
    let n = 4000;
    let h = horizon / n as f64;
    let sq: f64 = (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * h * gram_norm(gram_v, &flow.at(k as f64 * h)).powi(2)
        })
        .sum();
    sq.sqrt()
}

#[test]
fn operator_check_passes_on_exact_constants() {
    let linear = linear_parabolic_instance(3).unwrap();
    assert_eq!(linear.constants.m_bar_a, 0.0);
    let r = check_h_a(&linear, 400, 1, 1.0);
    assert!(r.pass, "{r:?}");
    let r = check_h_a(&viscoplastic(), 400, 1, 1.0);
    assert!(r.pass, "{r:?}");
}

#[test]
fn overstated_monotonicity_is_caught() {
    let spec = linear_parabolic_instance(3).unwrap();
    let m_a = spec.constants.m_a;
    let mut parts = spec.into_parts();
    parts.constants.m_a = 1.1 * m_a;
    let spec = SystemSpec::new(parts).unwrap();
    let r = check_h_a(&spec, 400, 1, 1.0);
    assert!(!r.pass);
    // the weakest direction attains m_A exactly, so the margin sits near -0.1 m_A
    assert!(r.monotonicity_margin < -0.05 * m_a, "{r:?}");
}

#[test]
fn checks_are_deterministic() {
    let spec = abstract_instance(4).unwrap();
    let grid = TimeGrid::new(1.0, 32).unwrap();
    assert_eq!(check_h_a(&spec, 200, 9, 1.0), check_h_a(&spec, 200, 9, 1.0));
    assert_eq!(
        check_spec(&spec, &grid, 100, 9).unwrap(),
        check_spec(&spec, &grid, 100, 9).unwrap()
    );
}

#[test]
fn spec_check_passes_on_fifty_seeded_runs() {
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let mut runs = 0;
    for instance in 0..10 {
        let spec = abstract_instance(instance).unwrap();
        for seed in 0..5 {
            let r = check_spec(&spec, &grid, 100, 1000 + seed).unwrap();
            assert!(r.pass, "instance {instance} seed {seed}: {r:?}");
            runs += 1;
        }
    }
    assert_eq!(runs, 50);
}

#[test]
fn zero_perturbation_gives_zero_distance() {
    let spec = abstract_instance(2).unwrap();
    let grid = TimeGrid::new(1.0, 32).unwrap();
    for which in Perturbation::ALL {
        let t = lipschitz_dependence_experiment(&spec, grid, &SolverParams::default(), &[0.0], which, 1).unwrap();
        assert_eq!(t.rows[0].solution_distance, 0.0);
        assert!(t.rows[0].ratio.is_nan());
    }
}

#[test]
fn linear_lipschitz_ratios_match_the_exact_flow() {
    let spec = linear_parabolic_instance(7).unwrap();
    let grid = TimeGrid::new(1.0, 128).unwrap();
    let k = stiffness(&spec);
    let (gh, gv) = (spec.v.gram_h().clone(), spec.v.gram_v().clone());
    let n = spec.v.dim();
    // operator norm of w0 -> w in L^2(0, T; V), from the Gram matrix of the basis responses
    let responses: Vec<LinearFlow> = (0..n)
        .map(|i| {
            let mut e = Vector::zeros(n);
            e[i] = 1.0;
            LinearFlow::new(&gh, &k, &Vector::zeros(n), &e)
        })
        .collect();
    let steps = 4000;
    let h = 1.0 / steps as f64;
    let mut gram = Matrix::zeros(n, n);
    for s in 0..=steps {
        let w = if s == 0 || s == steps { 0.5 } else { 1.0 };
        let phi = Matrix::from_columns(&responses.iter().map(|r| r.at(s as f64 * h)).collect::<Vec<_>>());
        gram += phi.transpose() * &gv * phi * (w * h);
    }
    let s = inv_sqrt(&gv);
    let op_norm = (&s * gram * &s).symmetric_eigen().eigenvalues.max().sqrt();

    for which in Perturbation::ALL {
        let t =
            lipschitz_dependence_experiment(&spec, grid, &SolverParams::default(), &[1e-2, 1e-3], which, 3).unwrap();
        let d = Vector::from_vec(t.direction.clone());
        let expected = match which {
            // x does not move and A ignores it: the H^1 norm of a constant over (0, 1)
            Perturbation::X0 => 1.0,
            Perturbation::W0 => flow_l2(&LinearFlow::new(&gh, &k, &Vector::zeros(n), &d), &gv, 1.0),
            Perturbation::F => flow_l2(&LinearFlow::new(&gh, &k, &d, &Vector::zeros(n)), &gv, 1.0),
        };
        for row in &t.rows {
            let rel = (row.ratio - expected).abs() / expected;
            assert!(rel < 0.2, "{}: ratio {} vs {expected}", which.name(), row.ratio);
            if which == Perturbation::W0 {
                assert!(row.ratio <= 1.2 * op_norm, "ratio {} above bound {op_norm}", row.ratio);
            }
        }
    }
}

#[test]
fn rest_state_is_continuous_with_zero_increments() {
    let spec = linear_parabolic_instance(1).unwrap();
    let n = spec.v.dim();
    let rest = spec
        .with_data(spec.x0.clone(), Vector::zeros(n), Load::fixed(Vector::zeros(n)))
        .unwrap();
    let params = SolverParams::default();
    let coarse = solve_onepass(&rest, TimeGrid::new(1.0, 32).unwrap(), &params).unwrap();
    let fine = solve_onepass(&rest, TimeGrid::new(1.0, 64).unwrap(), &params).unwrap();
    let r = regularity_check(&rest, &coarse, &fine).unwrap();
    assert_eq!(r.coarse, (0.0, 0.0, 0.0));
    assert!(r.x_continuous && r.w_continuous);
}

#[test]
fn smooth_solutions_have_shrinking_increments() {
    let params = SolverParams::default();
    for spec in [linear_parabolic_instance(5).unwrap(), viscoplastic()] {
        let coarse = solve_onepass(&spec, TimeGrid::new(1.0, 64).unwrap(), &params).unwrap();
        let fine = solve_onepass(&spec, TimeGrid::new(1.0, 128).unwrap(), &params).unwrap();
        let r = regularity_check(&spec, &coarse, &fine).unwrap();
        assert!(r.w_continuous && r.ratio_w_h >= 1.5, "{r:?}");
        assert!(r.x_continuous, "{r:?}");
    }
}

#[test]
fn regularity_needs_a_halved_step() {
    let spec = linear_parabolic_instance(5).unwrap();
    let params = SolverParams::default();
    let a = solve_onepass(&spec, TimeGrid::new(1.0, 32).unwrap(), &params).unwrap();
    let b = solve_onepass(&spec, TimeGrid::new(1.0, 96).unwrap(), &params).unwrap();
    assert!(regularity_check(&spec, &a, &b).is_err());
}

#[test]
fn uniqueness_holds_on_the_models() {
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let params = SolverParams::default();
    for spec in [viscoplastic(), abstract_instance(6).unwrap()] {
        let r = uniqueness_experiment(&spec, grid, &params, &BanachParams::default(), 4).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.chains <= r.tol_chains && r.cross <= r.tol_cross);
    }
}
