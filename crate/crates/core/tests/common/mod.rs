//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use dvhi::cli::{build_problem, Config};
use dvhi::stepper::SystemSpec;
use dvhi::{Matrix, Vector};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn bundled(name: &str) -> (Config, SystemSpec) {
    let config = Config::load(&config_path(name)).expect("bundled config parses");
    let spec = build_problem(&config).expect("bundled config builds").spec;
    (config, spec)
}

pub const BUNDLED: [&str; 3] = ["viscoplastic.toml", "viscoelastic_adhesive.toml", "abstract.toml"];

/// `v^T G v` square root.
pub fn gram_norm(g: &Matrix, v: &Vector) -> f64 {
    v.dot(&(g * v)).max(0.0).sqrt()
}

/// Symmetric `G^{-1/2}` from an eigendecomposition.
pub fn inv_sqrt(g: &Matrix) -> Matrix {
    let eig = g.clone().symmetric_eigen();
    let d = Matrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Smallest eigenvalue of `sym(k)` relative to `g`.
pub fn relative_min_eig(k: &Matrix, g: &Matrix) -> f64 {
    let s = inv_sqrt(g);
    let sym = (k + k.transpose()) * 0.5;
    (&s * sym * &s).symmetric_eigen().eigenvalues.min()
}

/// Norm of the row map `m: (V, g) -> Euclidean`.
pub fn row_map_norm(m: &Matrix, g: &Matrix) -> f64 {
    let s = inv_sqrt(g);
    let b = m * s;
    (&b * b.transpose()).symmetric_eigen().eigenvalues.max().sqrt()
}

/// Exact solution of `G_H w' + K w = f`, `w(0) = w0`, with `K` symmetric positive definite:
/// in `y = G_H^{1/2} w` the system is `y' = -C y + G_H^{-1/2} f` with `C` symmetric.
pub struct LinearFlow {
    q: Matrix,
    lambda: Vector,
    y0: Vector,
    y_inf: Vector,
    back: Matrix,
}

impl LinearFlow {
    pub fn new(gram_h: &Matrix, k: &Matrix, f: &Vector, w0: &Vector) -> Self {
        let s = inv_sqrt(gram_h);
        let c = &s * k * &s;
        let eig = c.clone().symmetric_eigen();
        let sqrt_h = s.clone().try_inverse().expect("invertible");
        let b = &s * f;
        let y_inf = c.lu().solve(&b).expect("C invertible");
        Self {
            q: eig.eigenvectors,
            lambda: eig.eigenvalues,
            y0: &sqrt_h * w0,
            y_inf,
            back: s,
        }
    }

    pub fn at(&self, t: f64) -> Vector {
        let coeff = self.q.transpose() * (&self.y0 - &self.y_inf);
        let decayed = Vector::from_fn(coeff.len(), |i, _| coeff[i] * (-self.lambda[i] * t).exp());
        &self.back * (&self.y_inf + &self.q * decayed)
    }
}

/// Minimiser of `energy` over the box `[-half, half]^2`: a `400 x 400` grid search followed
/// by three zoomed grid searches around the incumbent.
pub fn grid_search_2d(half: f64, energy: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let n = 400;
    let mut h = 2.0 * half / n as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=n {
        for j in 0..=n {
            let (a, b) = (-half + i as f64 * h, -half + j as f64 * h);
            let e = energy(a, b);
            if e < best.0 {
                best = (e, a, b);
            }
        }
    }
    for _ in 0..3 {
        let (ca, cb) = (best.1, best.2);
        let fine = h / 10.0;
        for i in -40..=40 {
            for j in -40..=40 {
                let a = (ca + i as f64 * fine).clamp(-half, half);
                let b = (cb + j as f64 * fine).clamp(-half, half);
                let e = energy(a, b);
                if e < best.0 {
                    best = (e, a, b);
                }
            }
        }
        h = fine;
    }
    (best.1, best.2)
}
