//! Piecewise-linear finite elements on a rod `(0, L)` clamped at `x = 0`, in contact at
//! `x = L`. With two components the second one is a tangential displacement.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{row_matrix, Matrix, Vector};
use crate::spaces::{AffineMap, GalerkinSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct Rod1D {
    length: f64,
    elements: usize,
    components: usize,
}

impl Rod1D {
    pub fn new(length: f64, elements: usize, components: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) || elements == 0 {
            return Err(Error::InvalidInput(format!(
                "rod needs a positive length and at least one element, got L = {length}, m = {elements}"
            )));
        }
        if !(1..=2).contains(&components) {
            return Err(Error::InvalidInput(format!(
                "rod supports 1 or 2 displacement components, got {components}"
            )));
        }
        Ok(Self {
            length,
            elements,
            components,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn h(&self) -> f64 {
        self.length / self.elements as f64
    }

    /// Number of unknowns; node 0 is clamped.
    pub fn dim(&self) -> usize {
        self.elements * self.components
    }

    /// Coordinate of component `c` at node `k` in `1..=m`.
    pub fn index(&self, node: usize, component: usize) -> usize {
        (node - 1) * self.components + component
    }

    /// Positions of the free nodes.
    pub fn positions(&self) -> Vec<f64> {
        (1..=self.elements).map(|k| k as f64 * self.h()).collect()
    }

    /// Strain per element and component: `u1'` and `u2' / 2`.
    pub fn strain_matrix(&self) -> Matrix {
        let (m, d, h) = (self.elements, self.components, self.h());
        let mut eps = Matrix::zeros(m * d, m * d);
        for e in 0..m {
            for c in 0..d {
                let scale = if c == 0 { 1.0 / h } else { 0.5 / h };
                let row = e * d + c;
                eps[(row, self.index(e + 1, c))] += scale;
                if e > 0 {
                    eps[(row, self.index(e, c))] -= scale;
                }
            }
        }
        eps
    }

    /// Weights of the strain inner product: `h` for normal and `2h` for shear components.
    pub fn strain_weights(&self) -> Vector {
        let h = self.h();
        Vector::from_fn(self.dim(), |i, _| if i % self.components == 0 { h } else { 2.0 * h })
    }

    /// `Eps^T W Eps`.
    pub fn gram_v(&self) -> Matrix {
        let eps = self.strain_matrix();
        let w = Matrix::from_diagonal(&self.strain_weights());
        eps.transpose() * w * eps
    }

    /// Consistent mass matrix.
    pub fn mass(&self) -> Matrix {
        let (m, d, h) = (self.elements, self.components, self.h());
        let mut mass = Matrix::zeros(m * d, m * d);
        for e in 0..m {
            for c in 0..d {
                let right = self.index(e + 1, c);
                mass[(right, right)] += h / 3.0;
                if e > 0 {
                    let left = self.index(e, c);
                    mass[(left, left)] += h / 3.0;
                    mass[(left, right)] += h / 6.0;
                    mass[(right, left)] += h / 6.0;
                }
            }
        }
        mass
    }

    pub fn space(&self, id: &str) -> Result<Arc<GalerkinSpace>> {
        Ok(Arc::new(GalerkinSpace::new(id, self.gram_v(), self.mass())?))
    }

    /// Tensor space of strains with the weighted inner product.
    pub fn strain_space(&self, id: &str) -> Result<Arc<GalerkinSpace>> {
        Ok(Arc::new(GalerkinSpace::with_gram(
            id,
            Matrix::from_diagonal(&self.strain_weights()),
        )?))
    }

    /// Trace of component `c` at the contact end.
    pub fn trace_row(&self, component: usize) -> Vector {
        let mut row = Vector::zeros(self.dim());
        row[self.index(self.elements, component)] = 1.0;
        row
    }

    /// Norm of the trace of component `c` with respect to the V norm.
    pub fn trace_norm(&self, component: usize) -> Result<f64> {
        let v = GalerkinSpace::new("V", self.gram_v(), self.mass())?;
        let x = GalerkinSpace::euclidean("X", 1)?;
        let map = AffineMap::linear(row_matrix(&self.trace_row(component)), &v, &x)?;
        Ok(map.norm_linear())
    }

    /// Coordinates of the interpolant of `f(x)[c]`.
    pub fn interpolate(&self, f: impl Fn(f64) -> [f64; 2]) -> Vector {
        let mut v = Vector::zeros(self.dim());
        for (k, x) in self.positions().into_iter().enumerate() {
            let val = f(x);
            for c in 0..self.components {
                v[self.index(k + 1, c)] = val[c];
            }
        }
        v
    }
}
