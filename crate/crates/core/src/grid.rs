//! Uniform time grids, trajectories on them, and the trapezoid quadrature used by every
//! history operator.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Uniform grid `t_n = n T / N`, `n = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "time horizon must be positive, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("time grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node `t_n`; the last node is exactly `T`.
    pub fn node(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.tau()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |n| self.node(n))
    }

    /// Same spacing, `steps` nodes further out. Used to continue a run past its horizon.
    pub fn extended(&self, steps: usize) -> Result<Self> {
        TimeGrid::new(self.tau() * steps as f64, steps)
    }

    /// Grid with half the step size on the same horizon.
    pub fn refined(&self) -> Self {
        Self {
            horizon: self.horizon,
            steps: 2 * self.steps,
        }
    }

    pub(crate) fn check_index(&self, n: usize) -> Result<()> {
        if n > self.steps {
            return Err(Error::IndexOutOfRange {
                index: n,
                steps: self.steps,
            });
        }
        Ok(())
    }

    /// Trapezoid weight of node `k` in an integral over `[0, t_n]`.
    pub fn trapezoid_weight(&self, k: usize, n: usize) -> f64 {
        if n == 0 || k > n {
            0.0
        } else if k == 0 || k == n {
            0.5 * self.tau()
        } else {
            self.tau()
        }
    }
}

/// Anything that can measure a coordinate vector.
pub trait Norm {
    fn norm(&self, v: &Vector) -> f64;
}

impl<F: Fn(&Vector) -> f64> Norm for F {
    fn norm(&self, v: &Vector) -> f64 {
        self(v)
    }
}

/// Values of a vector-valued trajectory at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TimeGrid,
    space_id: String,
    values: Vec<Vector>,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, space_id: impl Into<String>, values: Vec<Vector>) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(Error::Dimension {
                what: "grid function node count",
                expected: grid.steps() + 1,
                found: values.len(),
            });
        }
        let dim = values[0].len();
        if let Some(bad) = values.iter().find(|v| v.len() != dim) {
            return Err(Error::Dimension {
                what: "grid function value",
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(Self {
            grid,
            space_id: space_id.into(),
            values,
        })
    }

    pub fn constant(grid: TimeGrid, space_id: impl Into<String>, value: Vector) -> Self {
        Self {
            grid,
            space_id: space_id.into(),
            values: vec![value; grid.steps() + 1],
        }
    }

    pub fn zeros(grid: TimeGrid, space_id: impl Into<String>, dim: usize) -> Self {
        Self::constant(grid, space_id, Vector::zeros(dim))
    }

    pub fn from_fn(grid: TimeGrid, space_id: impl Into<String>, mut f: impl FnMut(f64) -> Vector) -> Result<Self> {
        let values = grid.nodes().map(&mut f).collect();
        Self::new(grid, space_id, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn space_id(&self) -> &str {
        &self.space_id
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn value(&self, n: usize) -> &Vector {
        &self.values[n]
    }

    pub fn into_values(self) -> Vec<Vector> {
        self.values
    }

    pub fn map(&self, space_id: impl Into<String>, f: impl Fn(&Vector) -> Vector) -> Result<Self> {
        Self::new(self.grid, space_id, self.values.iter().map(f).collect())
    }

    /// Node-wise difference `self - other`.
    pub fn difference(&self, other: &GridFunction) -> Result<GridFunction> {
        if self.values.len() != other.values.len() || self.dim() != other.dim() {
            return Err(Error::Dimension {
                what: "trajectory difference",
                expected: self.values.len() * self.dim(),
                found: other.values.len() * other.dim(),
            });
        }
        Ok(Self {
            grid: self.grid,
            space_id: self.space_id.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Writes one row per node: `t, <space>_1, ..., <space>_m`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.dim()).map(|i| format!("{}_{i}", self.space_id)))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (t, v) in self.grid.nodes().zip(&self.values) {
            write!(out, "{t}")?;
            for x in v.iter() {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads the format written by [`GridFunction::write_csv`]; the grid is recovered from the
    /// time column.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))??;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(Error::Parse(format!("unexpected CSV header `{header}`")));
        }
        let space_id = cols[1]
            .rsplit_once('_')
            .map(|(s, _)| s.to_string())
            .ok_or_else(|| Error::Parse(format!("column `{}` does not name a space", cols[1])))?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let nums = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if nums.len() != cols.len() {
                return Err(Error::Parse(format!(
                    "row has {} fields, header has {}",
                    nums.len(),
                    cols.len()
                )));
            }
            times.push(nums[0]);
            values.push(Vector::from_column_slice(&nums[1..]));
        }
        if times.len() < 2 {
            return Err(Error::Parse("need at least two rows".into()));
        }
        let grid = TimeGrid::new(*times.last().unwrap(), times.len() - 1)?;
        Self::new(grid, space_id, values)
    }
}

/// `tau (f_0/2 + f_1 + ... + f_{n-1} + f_n/2)`; the zero vector when `n = 0`.
pub fn trapezoid_integral(f: &GridFunction, upto: usize) -> Result<Vector> {
    f.grid.check_index(upto)?;
    let mut acc = Vector::zeros(f.dim());
    if upto == 0 {
        return Ok(acc);
    }
    let tau = f.grid.tau();
    acc.axpy(0.5 * tau, &f.values[0], 1.0);
    for v in &f.values[1..upto] {
        acc.axpy(tau, v, 1.0);
    }
    acc.axpy(0.5 * tau, &f.values[upto], 1.0);
    Ok(acc)
}

/// Trapezoid integral of a scalar sequence sampled on `grid`.
pub fn trapezoid_scalar(grid: &TimeGrid, samples: &[f64], upto: usize) -> f64 {
    (0..=upto).map(|k| grid.trapezoid_weight(k, upto) * samples[k]).sum()
}

/// Discrete `L^2(0, t_n)` norm: square root of the trapezoid integral of `|f(s)|^2`.
pub fn l2_norm_upto<N: Norm + ?Sized>(f: &GridFunction, space: &N, upto: usize) -> Result<f64> {
    f.grid.check_index(upto)?;
    let sq: Vec<f64> = f.values[..=upto].iter().map(|v| space.norm(v).powi(2)).collect();
    Ok(trapezoid_scalar(&f.grid, &sq, upto).max(0.0).sqrt())
}

/// Discrete `H^1(0, T)` norm: trapezoid `L^2` part plus the `L^2` norm of the piecewise-constant
/// difference quotients.
pub fn h1_norm<N: Norm + ?Sized>(f: &GridFunction, space: &N) -> Result<f64> {
    let n = f.grid.steps();
    let l2 = l2_norm_upto(f, space, n)?;
    let tau = f.grid.tau();
    let deriv: f64 = f
        .values
        .windows(2)
        .map(|w| space.norm(&((&w[1] - &w[0]) / tau)).powi(2) * tau)
        .sum();
    Ok((l2 * l2 + deriv).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(v: &Vector) -> f64 {
        v.norm()
    }

    #[test]
    fn grid_nodes_are_uniform_and_end_at_horizon() {
        let g = TimeGrid::new(1.3, 7).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes[0], 0.0);
        assert_eq!(nodes[7], 1.3);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn trapezoid_of_constant_is_exact() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let c = Vector::from_vec(vec![1.5, -2.0]);
        let f = GridFunction::constant(g, "V", c.clone());
        let int = trapezoid_integral(&f, 8).unwrap();
        assert!((int - c * 2.0).norm() < 1e-14);
        assert_eq!(trapezoid_integral(&f, 0).unwrap().norm(), 0.0);
    }

    #[test]
    fn trapezoid_of_linear_function() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let f = GridFunction::from_fn(g, "V", |t| Vector::from_element(1, t)).unwrap();
        assert_eq!(trapezoid_integral(&f, 4).unwrap()[0], 0.5);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let f = GridFunction::zeros(g, "V", 2);
        assert!(matches!(
            trapezoid_integral(&f, 5),
            Err(Error::IndexOutOfRange { index: 5, .. })
        ));
    }

    #[test]
    fn l2_norm_of_ramp_matches_closed_form() {
        let g = TimeGrid::new(1.0, 1000).unwrap();
        let f = GridFunction::from_fn(g, "V", |t| Vector::from_vec(vec![t, 0.0])).unwrap();
        let l2 = l2_norm_upto(&f, &euclid, 1000).unwrap();
        assert!((l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-5);
        let z = GridFunction::zeros(g, "V", 2);
        assert_eq!(l2_norm_upto(&z, &euclid, 1000).unwrap(), 0.0);
        let c = GridFunction::constant(g, "V", Vector::from_vec(vec![3.0, 4.0]));
        assert!((l2_norm_upto(&c, &euclid, 1000).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_error_is_second_order() {
        // int_0^1 e^t dt = e - 1
        let exact = std::f64::consts::E - 1.0;
        let err = |n: usize| {
            let g = TimeGrid::new(1.0, n).unwrap();
            let f = GridFunction::from_fn(g, "V", |t| Vector::from_element(1, t.exp())).unwrap();
            (trapezoid_integral(&f, n).unwrap()[0] - exact).abs()
        };
        for n in [16, 32, 64] {
            let ratio = err(n) / err(2 * n);
            assert!(ratio > 4.0 / 1.5 && ratio < 4.0 * 1.5, "ratio {ratio}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = TimeGrid::new(0.5, 3).unwrap();
        let f = GridFunction::from_fn(g, "w", |t| Vector::from_vec(vec![t, t * t - 0.1])).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,w_1,w_2\n"));
        assert_eq!(text.lines().count(), 5);
        let back = GridFunction::read_csv(&buf[..]).unwrap();
        assert_eq!(back.space_id(), "w");
        assert_eq!(back.values(), f.values());
    }
}
