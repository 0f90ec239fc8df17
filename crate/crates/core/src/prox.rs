//! Exact dual block-coordinate ascent for
//!
//! ```text
//! min_w  1/2 |w - z|_P^2 + sum_i h_i(a_i . w + o_i)
//! ```
//!
//! where every `h_i` is a scalar convex function: either the indicator of `y <= g` or a
//! convex piecewise-linear sum of ramps `sum_k c_k (y - s_k)_+`. With only half-space blocks
//! this is Hildreth's method, i.e. Dykstra's alternating projection specialised to
//! half-spaces.

use nalgebra::{Cholesky, Dyn};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Scalar convex term acting on `a . w + o`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarTerm {
    /// Indicator of `y <= bound`.
    UpperBound(f64),
    /// `sum_k weight_k * (y - location_k)_+`, all weights nonnegative.
    Ramps(Vec<(f64, f64)>),
    /// Ramps plus the indicator of `y <= bound`.
    BoundedRamps(Vec<(f64, f64)>, f64),
}

#[derive(Debug, Clone)]
pub struct Block {
    pub row: Vector,
    pub offset: f64,
    pub term: ScalarTerm,
}

#[derive(Debug, Clone)]
pub struct ProxSolution {
    pub point: Vector,
    /// Dual multiplier of every block, in block order.
    pub multipliers: Vec<f64>,
}

/// `argmin_y 1/2 (y - y_hat)^2 / q + h(y)`.
pub fn scalar_prox(term: &ScalarTerm, y_hat: f64, q: f64) -> f64 {
    match term {
        ScalarTerm::UpperBound(g) => y_hat.min(*g),
        // in one dimension the constrained minimiser is the clipped unconstrained one
        ScalarTerm::BoundedRamps(ramps, g) => ramp_prox(ramps, y_hat, q).min(*g),
        ScalarTerm::Ramps(ramps) => ramp_prox(ramps, y_hat, q),
    }
}

fn ramp_prox(ramps: &[(f64, f64)], y_hat: f64, q: f64) -> f64 {
    let mut kinks: Vec<(f64, f64)> = ramps.iter().copied().filter(|&(_, c)| c > 0.0).collect();
    kinks.sort_by(|a, b| a.0.total_cmp(&b.0));
    // slope of h left of the current kink
    let mut slope = 0.0;
    for (s, c) in kinks {
        let y = y_hat - q * slope;
        if y < s {
            return y;
        }
        if y_hat <= s + q * (slope + c) {
            return s;
        }
        slope += c;
    }
    y_hat - q * slope
}

pub fn solve(
    z: &Vector,
    metric: &Cholesky<f64, Dyn>,
    blocks: &[Block],
    tol: f64,
    max_sweeps: usize,
) -> Result<ProxSolution> {
    let mut w = z.clone();
    if blocks.is_empty() {
        return Ok(ProxSolution {
            point: w,
            multipliers: Vec::new(),
        });
    }
    let dirs: Vec<Vector> = blocks.iter().map(|b| metric.solve(&b.row)).collect();
    let q: Vec<f64> = blocks.iter().zip(&dirs).map(|(b, d)| b.row.dot(d)).collect();
    if let Some(i) = q.iter().position(|&qi| !(qi > 0.0)) {
        return Err(Error::InvalidInput(format!("block {i} has a zero functional")));
    }
    let scale = (metric.l().transpose() * z).norm().max(1.0);
    let mut u = vec![0.0; blocks.len()];
    let mut last = f64::INFINITY;
    for _ in 0..max_sweeps {
        let mut change: f64 = 0.0;
        for (i, b) in blocks.iter().enumerate() {
            let y_hat = b.row.dot(&w) + b.offset + q[i] * u[i];
            let y = scalar_prox(&b.term, y_hat, q[i]);
            let u_new = (y_hat - y) / q[i];
            let du = u[i] - u_new;
            if du != 0.0 {
                w.axpy(du, &dirs[i], 1.0);
                change = change.max(du.abs() * q[i].sqrt());
            }
            u[i] = u_new;
        }
        last = change;
        if change <= tol * scale {
            return Ok(ProxSolution {
                point: w,
                multipliers: u,
            });
        }
    }
    Err(Error::Projection {
        iterations: max_sweeps,
        residual: last,
    })
}
