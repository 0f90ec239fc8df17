//! Finite-dimensional Galerkin spaces with explicit Gram matrices, affine maps between them,
//! polyhedral constraint sets and the scalar hypothesis constants.
//!
//! Dual vectors are stored as coordinate pairings: `<f, v> = f . v` whatever the Gram matrices
//! are. Gram matrices enter only where norms are taken, e.g. `|f|_{V*}^2 = f . G_V^{-1} f`.

use std::sync::Arc;

use nalgebra::{Cholesky, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Norm;
use crate::linalg::{self, Matrix, Vector};
use crate::prox::{self, Block, ScalarTerm};

/// Coordinate space with a V inner product (SPD Gram) and an H inner product (PSD Gram).
#[derive(Debug, Clone)]
pub struct GalerkinSpace {
    id: String,
    gram_v: Matrix,
    gram_h: Matrix,
    chol_v: Cholesky<f64, Dyn>,
    embedding: (f64, f64),
}

impl GalerkinSpace {
    pub fn new(id: impl Into<String>, gram_v: Matrix, gram_h: Matrix) -> Result<Self> {
        let id = id.into();
        if gram_v.nrows() == 0 {
            return Err(Error::InvalidInput(format!("space `{id}` has dimension 0")));
        }
        if gram_h.shape() != gram_v.shape() {
            return Err(Error::Dimension {
                what: "H Gram matrix",
                expected: gram_v.nrows(),
                found: gram_h.nrows(),
            });
        }
        let chol_v = linalg::cholesky(&gram_v, &format!("V Gram of `{id}`"))?;
        if !linalg::is_symmetric(&gram_h, 1e-10) {
            return Err(Error::NotPositiveDefinite(format!("H Gram of `{id}` is not symmetric")));
        }
        let eig = linalg::pencil_eigenvalues(&gram_h, &chol_v);
        let lo = eig[0];
        let hi = eig[eig.len() - 1];
        if lo < -1e-10 * hi.abs().max(1.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "H Gram of `{id}` has a negative eigenvalue {lo:.3e}"
            )));
        }
        Ok(Self {
            id,
            gram_v,
            gram_h,
            chol_v,
            embedding: (lo.max(0.0), hi.max(0.0)),
        })
    }

    /// Both inner products equal to the Euclidean one.
    pub fn euclidean(id: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new(id, Matrix::identity(dim, dim), Matrix::identity(dim, dim))
    }

    /// A space whose H and V inner products coincide.
    pub fn with_gram(id: impl Into<String>, gram: Matrix) -> Result<Self> {
        Self::new(id, gram.clone(), gram)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.gram_v.nrows()
    }

    pub fn gram_v(&self) -> &Matrix {
        &self.gram_v
    }

    pub fn gram_h(&self) -> &Matrix {
        &self.gram_h
    }

    pub(crate) fn chol_v(&self) -> &Cholesky<f64, Dyn> {
        &self.chol_v
    }

    pub fn inner_v(&self, u: &Vector, v: &Vector) -> f64 {
        u.dot(&(&self.gram_v * v))
    }

    pub fn norm_v(&self, v: &Vector) -> f64 {
        self.inner_v(v, v).max(0.0).sqrt()
    }

    pub fn norm_h(&self, v: &Vector) -> f64 {
        linalg::quad_form(&self.gram_h, v).max(0.0).sqrt()
    }

    /// Riesz representative `G_V^{-1} f` of a dual vector.
    pub fn riesz(&self, f: &Vector) -> Vector {
        self.chol_v.solve(f)
    }

    pub fn dual_norm(&self, f: &Vector) -> f64 {
        f.dot(&self.riesz(f)).max(0.0).sqrt()
    }

    /// Smallest constant with `|v|_H <= c_emb |v|_V`.
    pub fn c_emb(&self) -> f64 {
        self.embedding.1.sqrt()
    }

    /// Extreme eigenvalues of `G_H x = lambda G_V x`.
    pub fn embedding_spectrum(&self) -> (f64, f64) {
        self.embedding
    }

    pub fn primal(self: &Arc<Self>) -> Metric {
        Metric::Primal(Arc::clone(self))
    }

    pub fn dual(self: &Arc<Self>) -> Metric {
        Metric::Dual(Arc::clone(self))
    }
}

impl Norm for GalerkinSpace {
    fn norm(&self, v: &Vector) -> f64 {
        self.norm_v(v)
    }
}

/// Which norm of a space a trajectory is measured in.
#[derive(Debug, Clone)]
pub enum Metric {
    Primal(Arc<GalerkinSpace>),
    Dual(Arc<GalerkinSpace>),
}

impl Metric {
    pub fn space(&self) -> &Arc<GalerkinSpace> {
        match self {
            Metric::Primal(s) | Metric::Dual(s) => s,
        }
    }

    pub fn dim(&self) -> usize {
        self.space().dim()
    }

    pub fn id(&self) -> String {
        match self {
            Metric::Primal(s) => s.id().to_string(),
            Metric::Dual(s) => format!("{}*", s.id()),
        }
    }
}

impl Norm for Metric {
    fn norm(&self, v: &Vector) -> f64 {
        match self {
            Metric::Primal(s) => s.norm_v(v),
            Metric::Dual(s) => s.dual_norm(v),
        }
    }
}

impl Metric {
    /// Matrix `N` with `|v|^2 = v . N v`.
    pub fn norm_matrix(&self) -> Matrix {
        match self {
            Metric::Primal(s) => s.gram_v().clone(),
            Metric::Dual(s) => s.chol_v().inverse(),
        }
    }
}

/// Operator norm of `w` from `source` to `target`.
pub fn operator_norm(w: &Matrix, source: &Metric, target: &Metric) -> Result<f64> {
    if w.ncols() != source.dim() || w.nrows() != target.dim() {
        return Err(Error::Dimension {
            what: "operator matrix",
            expected: target.dim() * source.dim(),
            found: w.nrows() * w.ncols(),
        });
    }
    let pulled = w.transpose() * target.norm_matrix() * w;
    let pulled = (&pulled + pulled.transpose()) * 0.5;
    let n = source.norm_matrix();
    let src = linalg::cholesky(&((&n + n.transpose()) * 0.5), "source norm matrix")?;
    let eig = linalg::pencil_eigenvalues(&pulled, &src);
    Ok(eig[eig.len() - 1].max(0.0).sqrt())
}

/// `<f, v>` for a dual vector stored in pairing coordinates.
pub fn dual_pair(space: &GalerkinSpace, f_dual: &Vector, v: &Vector) -> Result<f64> {
    linalg::check_dim("dual vector", space.dim(), f_dual)?;
    linalg::check_dim("primal vector", space.dim(), v)?;
    Ok(f_dual.dot(v))
}

/// `M v = M1 v + M0`, with the operator norm of `M1` between the two V inner products cached.
#[derive(Debug, Clone)]
pub struct AffineMap {
    linear: Matrix,
    offset: Vector,
    norm_linear: f64,
}

impl AffineMap {
    pub fn new(linear: Matrix, offset: Vector, source: &GalerkinSpace, target: &GalerkinSpace) -> Result<Self> {
        if linear.ncols() != source.dim() || linear.nrows() != target.dim() {
            return Err(Error::Dimension {
                what: "affine map linear part",
                expected: target.dim() * source.dim(),
                found: linear.nrows() * linear.ncols(),
            });
        }
        linalg::check_dim("affine map offset", target.dim(), &offset)?;
        let pulled = linear.transpose() * target.gram_v() * &linear;
        let eig = linalg::pencil_eigenvalues(&pulled, source.chol_v());
        Ok(Self {
            norm_linear: eig[eig.len() - 1].max(0.0).sqrt(),
            linear,
            offset,
        })
    }

    pub fn linear(linear: Matrix, source: &GalerkinSpace, target: &GalerkinSpace) -> Result<Self> {
        let offset = Vector::zeros(linear.nrows());
        Self::new(linear, offset, source, target)
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.linear * v + &self.offset
    }

    pub fn linear_part(&self) -> &Matrix {
        &self.linear
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    pub fn norm_linear(&self) -> f64 {
        self.norm_linear
    }

    pub fn source_dim(&self) -> usize {
        self.linear.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.linear.nrows()
    }
}

/// One constraint `functional . v <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub functional: Vec<f64>,
    pub bound: f64,
}

/// Closed convex set containing the origin: the whole space or an intersection of half-spaces
/// `{v : l_i . v <= g_i}` with every `g_i >= 0`.
#[derive(Debug, Clone)]
pub enum ConstraintSet {
    WholeSpace,
    Halfspaces(Vec<(Vector, f64)>),
}

/// Sweep cap of the alternating projection.
pub const PROJECTION_MAX_SWEEPS: usize = 20_000;
pub const PROJECTION_TOL: f64 = 1e-12;

impl ConstraintSet {
    pub fn halfspaces(constraints: Vec<(Vector, f64)>) -> Result<Self> {
        for (i, (l, g)) in constraints.iter().enumerate() {
            if !(g.is_finite() && *g >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "constraint {i}: bound {g} must be >= 0 so that 0 lies in K"
                )));
            }
            if l.iter().all(|x| *x == 0.0) {
                return Err(Error::InvalidInput(format!("constraint {i}: zero functional")));
            }
        }
        if constraints.is_empty() {
            return Ok(ConstraintSet::WholeSpace);
        }
        Ok(ConstraintSet::Halfspaces(constraints))
    }

    pub fn from_halfspaces(list: &[Halfspace]) -> Result<Self> {
        Self::halfspaces(
            list.iter()
                .map(|h| (Vector::from_column_slice(&h.functional), h.bound))
                .collect(),
        )
    }

    pub fn constraints(&self) -> &[(Vector, f64)] {
        match self {
            ConstraintSet::WholeSpace => &[],
            ConstraintSet::Halfspaces(c) => c,
        }
    }

    /// Largest constraint violation `max_i (l_i . v - g_i)_+`.
    pub fn residual(&self, v: &Vector) -> f64 {
        self.constraints()
            .iter()
            .map(|(l, g)| (l.dot(v) - g).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        for (l, _) in self.constraints() {
            linalg::check_dim("constraint functional", dim, l)?;
        }
        Ok(())
    }

    pub(crate) fn blocks(&self) -> Vec<Block> {
        self.constraints()
            .iter()
            .map(|(l, g)| Block {
                row: l.clone(),
                offset: 0.0,
                term: ScalarTerm::UpperBound(*g),
            })
            .collect()
    }

    /// Projection in the metric with the given Cholesky factor.
    pub(crate) fn project_in(&self, v: &Vector, metric: &Cholesky<f64, Dyn>) -> Result<Vector> {
        match self {
            ConstraintSet::WholeSpace => Ok(v.clone()),
            ConstraintSet::Halfspaces(list) => {
                let sol = prox::solve(v, metric, &self.blocks(), PROJECTION_TOL, PROJECTION_MAX_SWEEPS)?;
                Ok(polish(list, v, metric, &sol.multipliers).unwrap_or(sol.point))
            }
        }
    }
}

/// Re-solves the KKT system on the active set found by the iteration, which removes the
/// residual infeasibility of order `PROJECTION_TOL`. Returns `None` when the active set is not
/// confirmed by the exact solve.
fn polish(list: &[(Vector, f64)], v: &Vector, metric: &Cholesky<f64, Dyn>, multipliers: &[f64]) -> Option<Vector> {
    let active: Vec<usize> = (0..list.len()).filter(|&i| multipliers[i] > 0.0).collect();
    if active.is_empty() {
        return (list.iter().all(|(l, g)| l.dot(v) <= *g)).then(|| v.clone());
    }
    let dirs: Vec<Vector> = active.iter().map(|&i| metric.solve(&list[i].0)).collect();
    let m = active.len();
    let gram = Matrix::from_fn(m, m, |a, b| list[active[a]].0.dot(&dirs[b]));
    let rhs = Vector::from_fn(m, |a, _| list[active[a]].0.dot(v) - list[active[a]].1);
    let lambda = gram.cholesky()?.solve(&rhs);
    if lambda.iter().any(|&x| x < 0.0) {
        return None;
    }
    let mut w = v.clone();
    for (lam, d) in lambda.iter().zip(&dirs) {
        w.axpy(-lam, d, 1.0);
    }
    let slack = PROJECTION_TOL * (1.0 + w.amax());
    list.iter().all(|(l, g)| l.dot(&w) <= g + slack).then_some(w)
}

/// Projection onto `k` in the V inner product of `space`.
pub fn project(k: &ConstraintSet, v: &Vector, space: &GalerkinSpace) -> Result<Vector> {
    linalg::check_dim("projected vector", space.dim(), v)?;
    k.check_dim(space.dim())?;
    k.project_in(v, space.chol_v())
}

/// Scalar constants of the structural hypotheses on `A`, `j`, `phi`, `F`, `f` and the history
/// operators.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct HypothesisConstants {
    pub m_a: f64,
    pub m_bar_a: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub m_j: f64,
    pub m_bar_j: f64,
    pub c0j: f64,
    pub c1j: f64,
    pub c2j: f64,
    pub c3j: f64,
    pub m_phi: f64,
    pub c0phi: f64,
    pub c1phi: f64,
    pub c2phi: f64,
    pub c3phi: f64,
    /// Lipschitz constant of the ODE right-hand side.
    pub l_ode: f64,
    /// Lipschitz constant of `f` in its state argument.
    pub l_f: f64,
    pub c_s: f64,
    pub c_r1: f64,
    pub c_r2: f64,
    pub c_r3: f64,
    pub norm_m1: f64,
}

impl HypothesisConstants {
    pub fn smallness_margin(&self) -> f64 {
        check_smallness(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_a > 0.0) {
            return Err(Error::InvalidInput(format!("m_A must be positive, got {}", self.m_a)));
        }
        let named = [
            ("m_bar_a", self.m_bar_a),
            ("a0", self.a0),
            ("a1", self.a1),
            ("a2", self.a2),
            ("m_j", self.m_j),
            ("m_bar_j", self.m_bar_j),
            ("c0j", self.c0j),
            ("c1j", self.c1j),
            ("c2j", self.c2j),
            ("c3j", self.c3j),
            ("m_phi", self.m_phi),
            ("c0phi", self.c0phi),
            ("c1phi", self.c1phi),
            ("c2phi", self.c2phi),
            ("c3phi", self.c3phi),
            ("l_ode", self.l_ode),
            ("l_f", self.l_f),
            ("c_s", self.c_s),
            ("c_r1", self.c_r1),
            ("c_r2", self.c_r2),
            ("c_r3", self.c_r3),
            ("norm_m1", self.norm_m1),
        ];
        if let Some((name, v)) = named.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "constant {name} must be finite and >= 0, got {v}"
            )));
        }
        let margin = self.smallness_margin();
        if !(margin > 0.0) {
            return Err(Error::Smallness { margin });
        }
        Ok(())
    }
}

/// `m_A - m_j |M1|^2`; nonpositive values must be rejected by the caller.
pub fn check_smallness(h: &HypothesisConstants) -> f64 {
    h.m_a - h.m_j * h.norm_m1 * h.norm_m1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spd(seed: u64, n: usize) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Matrix::from_fn(n, n, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        &b * b.transpose() + Matrix::identity(n, n) * 0.5
    }

    #[test]
    fn embedding_constant_of_scaled_gram() {
        let s = GalerkinSpace::new("V", Matrix::identity(3, 3) * 4.0, Matrix::identity(3, 3)).unwrap();
        assert!((s.c_emb() - 0.5).abs() < 1e-12);
        let bad = GalerkinSpace::new("V", -Matrix::identity(2, 2), Matrix::identity(2, 2));
        assert!(matches!(bad, Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn dual_pairing_is_riesz_inner_product() {
        let s = GalerkinSpace::new("V", spd(1, 3), Matrix::identity(3, 3)).unwrap();
        let u = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let v = Vector::from_vec(vec![0.3, 0.1, -1.0]);
        let f = s.gram_v() * &u;
        assert!((dual_pair(&s, &f, &v).unwrap() - s.inner_v(&u, &v)).abs() < 1e-12);
        assert_eq!(dual_pair(&s, &Vector::zeros(3), &v).unwrap(), 0.0);
        let explicit: f64 = (0..3).map(|i| f[i] * v[i]).sum();
        assert!((dual_pair(&s, &f, &v).unwrap() - explicit).abs() < 1e-14);
        assert!(dual_pair(&s, &Vector::zeros(2), &v).is_err());
        // |G u|_{V*} = |u|_V
        assert!((s.dual_norm(&f) - s.norm_v(&u)).abs() < 1e-12);
    }

    #[test]
    fn affine_map_norm_and_evaluation() {
        let v = GalerkinSpace::euclidean("V", 2).unwrap();
        let x = GalerkinSpace::euclidean("X", 1).unwrap();
        let m = AffineMap::new(
            Matrix::from_row_slice(1, 2, &[3.0, 4.0]),
            Vector::from_element(1, 1.0),
            &v,
            &x,
        )
        .unwrap();
        assert!((m.norm_linear() - 5.0).abs() < 1e-12);
        assert_eq!(m.apply(&Vector::from_vec(vec![1.0, 1.0]))[0], 8.0);
    }

    #[test]
    fn whole_space_projection_is_identity() {
        let s = GalerkinSpace::euclidean("V", 3).unwrap();
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(project(&ConstraintSet::WholeSpace, &v, &s).unwrap(), v);
    }

    #[test]
    fn single_coordinate_bound_is_a_clamp() {
        let s = GalerkinSpace::euclidean("V", 3).unwrap();
        let g = 0.7;
        let k = ConstraintSet::halfspaces(vec![(Vector::from_vec(vec![0.0, 0.0, 1.0]), g)]).unwrap();
        let v = Vector::from_vec(vec![0.2, -1.0, g + 1.0]);
        let p = project(&k, &v, &s).unwrap();
        assert!((p - Vector::from_vec(vec![0.2, -1.0, g])).norm() < 1e-15);
    }

    #[test]
    fn negative_bound_is_rejected() {
        let r = ConstraintSet::halfspaces(vec![(Vector::from_vec(vec![1.0]), -0.1)]);
        assert!(r.is_err());
    }

    #[test]
    fn smallness_margin_arithmetic() {
        let mut h = HypothesisConstants {
            m_a: 1.0,
            ..Default::default()
        };
        assert_eq!(check_smallness(&h), 1.0);
        h.m_j = 0.5;
        h.norm_m1 = 1.0;
        assert_eq!(check_smallness(&h), 0.5);
        h.m_j = 2.0;
        assert!(matches!(h.validate(), Err(Error::Smallness { margin }) if margin == -1.0));
    }
}
