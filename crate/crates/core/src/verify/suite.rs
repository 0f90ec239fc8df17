//! Seeded abstract instances satisfying the hypotheses by construction.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::history::{HistoryOperator, Kernel};
use crate::linalg::{pencil_eigenvalues, uniform_vector, Matrix, Vector};
use crate::potentials::{
    builtin_jnu, BondingFactor, CoulombPotential, Damper, FrictionCoefficient, Knot, PiecewiseLinearSlope,
    ZeroPotential,
};
use crate::spaces::{operator_norm, AffineMap, ConstraintSet, GalerkinSpace, HypothesisConstants};
use crate::stepper::{AffineOperator, LinearRhs, Load, OdeDims, SystemParts, SystemSpec, ZeroRhs};

fn random_spd<R: Rng>(rng: &mut R, n: usize, shift: f64) -> Matrix {
    let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&b * b.transpose()) / n as f64 + Matrix::identity(n, n) * shift
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.random_range(-1.0..1.0))
}

/// Smallest eigenvalue of `sym(k)` relative to `g`.
pub(crate) fn monotonicity_constant(k: &Matrix, space: &GalerkinSpace) -> f64 {
    let sym = (k + k.transpose()) * 0.5;
    pencil_eigenvalues(&sym, space.chol_v())[0]
}

/// Nonmonotone continuous slope on `[-1, 1]` with one upward jump.
fn random_slope<R: Rng>(rng: &mut R) -> Result<PiecewiseLinearSlope> {
    let at = [-1.0, -0.4, 0.0, 0.3, 0.9];
    let mut knots: Vec<Knot> = at
        .iter()
        .map(|&s| {
            let p = rng.random_range(-1.0..1.0);
            Knot {
                at: s,
                left: p,
                right: p,
            }
        })
        .collect();
    let jump = rng.random_range(0.0..0.8);
    knots[2].right = knots[2].left + jump;
    PiecewiseLinearSlope::new(knots)
}

/// Instance with `2..=4` velocity unknowns, nonsmooth `j` and `phi`, all four history
/// operators, constraints through the origin's neighbourhood and a time-dependent load.
pub fn abstract_instance(seed: u64) -> Result<SystemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = rng.random_range(2..=4);
    let ne = rng.random_range(1..=2);
    let nx = rng.random_range(1..=2);
    let v = Arc::new(GalerkinSpace::new(
        "V",
        random_spd(&mut rng, nv, 0.5),
        random_spd(&mut rng, nv, 0.2),
    )?);
    let e = Arc::new(GalerkinSpace::euclidean("E", ne)?);
    let x_space = Arc::new(GalerkinSpace::euclidean("X", nx)?);
    let y_space = Arc::new(GalerkinSpace::euclidean("Y", nx)?);

    let stiffness = v.gram_v() * rng.random_range(0.5..2.0) + random_spd(&mut rng, nv, 0.0) * 0.3;
    let m_a = monotonicity_constant(&stiffness, &v);
    let coupling = random_matrix(&mut rng, nv, ne, 0.3);
    let m_bar_a = operator_norm(&coupling, &e.primal(), &v.dual())?;
    let a = AffineOperator::new(stiffness.clone(), coupling, Vector::zeros(nv))?;

    let m1 = random_matrix(&mut rng, nx, nv, 1.0);
    let m = AffineMap::new(m1.clone(), uniform_vector(&mut rng, nx, 0.2), &v, &x_space)?;
    let norm_m1 = m.norm_linear();

    let damper = Damper::Clamped {
        k1: 0.5,
        k2: 1.0,
        slope: 0.3,
    };
    let slope = random_slope(&mut rng)?;
    // scale the slope so that the smallness margin is half of m_A
    let sigma = slope.max_decrease();
    let lambda = if sigma > 0.0 && norm_m1 > 0.0 {
        0.5 * m_a / (sigma * damper.upper() * norm_m1 * norm_m1)
    } else {
        1.0
    }
    .min(2.0);
    let slope = slope.scaled(lambda);
    let j = builtin_jnu(slope.clone(), slope.max_decrease(), slope.bound())?
        .with_weights(vec![1.0; nx])?
        .with_damper(damper)?;
    let h1 = if ne == nx {
        BondingFactor::Clamped { h0: 0.5 }
    } else {
        BondingFactor::Constant { h0: 0.5 }
    };
    let phi = CoulombPotential::new(
        vec![1.0; nx],
        FrictionCoefficient::Saturating { mu0: 0.4, scale: 1.0 },
        h1,
    )?;

    let s = HistoryOperator::running_integral(Matrix::identity(nv, nv), Vector::zeros(nv), v.primal(), v.primal())?;
    let elastic = HistoryOperator::running_integral(
        v.gram_v() * rng.random_range(0.0..0.5),
        Vector::zeros(nv),
        v.primal(),
        v.dual(),
    )?;
    let r1 = if rng.random_bool(0.5) {
        let memory = HistoryOperator::convolution(
            Kernel::Exponential {
                coeff: rng.random_range(0.0..0.5),
                relax_time: rng.random_range(0.2..2.0),
                matrix: v.gram_v().clone(),
            },
            v.primal(),
            v.dual(),
        )?;
        HistoryOperator::sum(vec![elastic, memory])?
    } else {
        elastic
    };
    let r2 = HistoryOperator::running_integral(m1.clone() * 0.5, Vector::zeros(nx), v.primal(), x_space.primal())?;
    let r3 = HistoryOperator::running_integral(
        random_matrix(&mut rng, nx, nv, 0.5),
        Vector::zeros(nx),
        v.primal(),
        y_space.primal(),
    )?;

    let fa = Matrix::identity(ne, ne) * -rng.random_range(0.0..1.0) + random_matrix(&mut rng, ne, ne, 0.2);
    let fb = random_matrix(&mut rng, ne, nv, 0.3);
    let fc = random_matrix(&mut rng, ne, nv, 0.3);
    let l_f = operator_norm(&fa, &e.primal(), &e.primal())?
        .max(operator_norm(&fb, &v.primal(), &e.primal())?)
        .max(operator_norm(&fc, &v.primal(), &e.primal())?);
    let ode = LinearRhs::new(fa, fb, fc, Vector::zeros(ne))?.with_lipschitz(l_f);

    let k = if rng.random_bool(0.3) {
        ConstraintSet::WholeSpace
    } else {
        let count = rng.random_range(1..=2);
        let mut list = Vec::new();
        for _ in 0..count {
            list.push((uniform_vector(&mut rng, nv, 1.0), rng.random_range(0.05..0.5)));
        }
        ConstraintSet::halfspaces(list)?
    };
    let f0 = uniform_vector(&mut rng, nv, 2.0);
    let f1 = uniform_vector(&mut rng, nv, 2.0);
    let omega = 2.0 * std::f64::consts::PI * rng.random_range(0.5..2.0);
    let load = Load::new(nv, 0.0, move |t, _| &f0 + &f1 * (omega * t).sin());

    let constants = HypothesisConstants {
        m_a,
        m_bar_a,
        a1: m_bar_a,
        a2: stiffness.norm() * 2.0,
        ..Default::default()
    };
    SystemSpec::new(SystemParts {
        ode: Arc::new(ode),
        a: Arc::new(a),
        j: Arc::new(j),
        phi: Arc::new(phi),
        load,
        m,
        s,
        r1,
        r2,
        r3,
        k,
        x0: uniform_vector(&mut rng, ne, 1.0),
        w0: uniform_vector(&mut rng, nv, 1.0),
        u0: None,
        constants,
        e,
        v,
        x_space,
    })
}

/// The default seeded suite.
pub fn abstract_suite(count: usize, base_seed: u64) -> Result<Vec<SystemSpec>> {
    (0..count as u64).map(|k| abstract_instance(base_seed + k)).collect()
}

/// Linear parabolic system `G_H w' + K w = f` on three unknowns: no potentials, no
/// constraints, no history, `F = 0`.
pub fn linear_parabolic_instance(seed: u64) -> Result<SystemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3;
    let v = Arc::new(GalerkinSpace::new(
        "V",
        random_spd(&mut rng, n, 0.5),
        random_spd(&mut rng, n, 0.5),
    )?);
    let e = Arc::new(GalerkinSpace::euclidean("E", 1)?);
    let x_space = Arc::new(GalerkinSpace::euclidean("X", 1)?);
    let stiffness = random_spd(&mut rng, n, 1.0);
    let m_a = monotonicity_constant(&stiffness, &v);
    let f = uniform_vector(&mut rng, n, 1.0);
    let zero = |target| HistoryOperator::zero(v.primal(), target);
    SystemSpec::new(SystemParts {
        ode: Arc::new(ZeroRhs {
            dims: OdeDims { x: 1, w: n, s: n },
        }),
        a: Arc::new(AffineOperator::stiffness_only(stiffness.clone(), 1)?),
        j: Arc::new(ZeroPotential { dim: 1 }),
        phi: Arc::new(ZeroPotential { dim: 1 }),
        load: Load::fixed(f),
        m: AffineMap::linear(Matrix::zeros(1, n), &v, &x_space)?,
        s: zero(v.primal()),
        r1: zero(v.dual()),
        r2: zero(x_space.primal()),
        r3: zero(x_space.primal()),
        k: ConstraintSet::WholeSpace,
        x0: Vector::zeros(1),
        w0: uniform_vector(&mut rng, n, 1.0),
        u0: None,
        constants: HypothesisConstants {
            m_a,
            a2: stiffness.norm(),
            ..Default::default()
        },
        e,
        v,
        x_space,
    })
}

/// Two unknowns with symmetric linear `A`, `j` and `phi` on one scalar `M`, and the box
/// `|w_i| <= half_width`; returns the instance and the half width.
pub fn two_dof_instance(seed: u64) -> Result<(SystemSpec, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2;
    let v = Arc::new(GalerkinSpace::new(
        "V",
        random_spd(&mut rng, n, 0.5),
        random_spd(&mut rng, n, 0.5),
    )?);
    let e = Arc::new(GalerkinSpace::euclidean("E", 1)?);
    let x_space = Arc::new(GalerkinSpace::euclidean("X", 1)?);
    let stiffness = random_spd(&mut rng, n, 0.5);
    let m_a = monotonicity_constant(&stiffness, &v);
    let m = AffineMap::new(
        random_matrix(&mut rng, 1, n, 1.0),
        uniform_vector(&mut rng, 1, 0.3),
        &v,
        &x_space,
    )?;
    let norm_m1 = m.norm_linear();
    let slope = random_slope(&mut rng)?;
    let sigma = slope.max_decrease();
    let lambda = if sigma > 0.0 {
        (0.5 * m_a / (sigma * norm_m1 * norm_m1)).min(2.0)
    } else {
        1.0
    };
    let slope = slope.scaled(lambda);
    let j = builtin_jnu(slope.clone(), slope.max_decrease(), slope.bound())?;
    let phi = CoulombPotential::new(
        vec![1.0],
        FrictionCoefficient::Constant {
            mu0: rng.random_range(0.0..1.0),
        },
        BondingFactor::Constant { h0: 1.0 },
    )?;
    let half = rng.random_range(0.3..1.5);
    let mut box_k = Vec::new();
    for i in 0..n {
        let mut e_i = Vector::zeros(n);
        e_i[i] = 1.0;
        box_k.push((e_i.clone(), half));
        box_k.push((-e_i, half));
    }
    let zero = |target| HistoryOperator::zero(v.primal(), target);
    let spec = SystemSpec::new(SystemParts {
        ode: Arc::new(ZeroRhs {
            dims: OdeDims { x: 1, w: n, s: n },
        }),
        a: Arc::new(AffineOperator::stiffness_only(stiffness.clone(), 1)?),
        j: Arc::new(j),
        phi: Arc::new(phi),
        load: Load::fixed(uniform_vector(&mut rng, n, 4.0)),
        m,
        s: zero(v.primal()),
        r1: zero(v.dual()),
        r2: zero(x_space.primal()),
        r3: zero(x_space.primal()),
        k: ConstraintSet::halfspaces(box_k)?,
        x0: Vector::zeros(1),
        w0: uniform_vector(&mut rng, n, half),
        u0: None,
        constants: HypothesisConstants {
            m_a,
            a2: stiffness.norm(),
            ..Default::default()
        },
        e,
        v,
        x_space,
    })?;
    Ok((spec, half))
}
