//! Polyhedra in outer description `{ z : G z >= h }`, exact vertex
//! enumeration, and the recession-cone triviality test.
//!
//! Vertex enumeration is deliberately the naive exhaustive scheme: every
//! subset of `dim` rows is solved as a square linear system and feasible
//! solutions are collected. That is exponential in the row count and exactly
//! right for desk-scale certification work, where auditability beats speed.

use crate::linalg::{lex_cmp, solve_linear, LinearSolve, RatMatrix, RatVector, Rational};
use crate::lp::{solve_lp, LpProblem, LpStatus, Sense};
use itertools::Itertools;
use num_traits::Zero;
use thiserror::Error;

/// `{ z : G z >= h }`. The dimension is `G.ncols()`; zero-dimensional
/// polyhedra are permitted (they arise as degenerate lower levels), though
/// model-level leader sets are validated to have dimension >= 1.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Polyhedron {
    mat: RatMatrix,
    rhs: RatVector,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyhedronError {
    #[error("constraint matrix has {rows} rows but rhs has {rhs_len} entries")]
    RowMismatch { rows: usize, rhs_len: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VertexEnumError {
    #[error("polyhedron is unbounded; vertex enumeration refused")]
    Unbounded,
    #[error("vertex enumeration needs dimension >= 1")]
    ZeroDimensional,
}

impl Polyhedron {
    pub fn new(mat: RatMatrix, rhs: RatVector) -> Result<Self, PolyhedronError> {
        if mat.nrows() != rhs.len() {
            return Err(PolyhedronError::RowMismatch { rows: mat.nrows(), rhs_len: rhs.len() });
        }
        Ok(Polyhedron { mat, rhs })
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.mat.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &RatMatrix {
        &self.mat
    }

    pub fn rhs(&self) -> &RatVector {
        &self.rhs
    }

    /// Exact membership test.
    pub fn contains(&self, z: &[Rational]) -> bool {
        z.len() == self.dim()
            && self
                .mat
                .rows_iter()
                .zip(&self.rhs)
                .all(|(row, h)| crate::linalg::dot(row, z) >= *h)
    }

    /// Indices of rows satisfied with equality at `z`.
    pub fn tight_rows(&self, z: &[Rational]) -> Vec<usize> {
        self.mat
            .rows_iter()
            .zip(&self.rhs)
            .enumerate()
            .filter(|(_, (row, h))| crate::linalg::dot(row, z) == **h)
            .map(|(i, _)| i)
            .collect()
    }

    /// Feasibility via a zero-objective LP.
    pub fn is_empty(&self) -> bool {
        let lp = LpProblem::minimize(crate::linalg::zeros(self.dim()), self.clone());
        solve_lp(&lp).status == LpStatus::Infeasible
    }
}

/// True iff `{ y : D y >= 0 } = {0}`.
///
/// Decided by 2·n bounded LPs: for each coordinate, maximize and minimize
/// `y_j` over the cone intersected with the unit box. The cone is trivial
/// exactly when all 2·n optima are zero.
pub fn recession_cone_is_trivial(d: &RatMatrix) -> bool {
    let n = d.ncols();
    if n == 0 {
        return true;
    }
    // Cone rows D y >= 0 plus box rows  y_j >= -1 and -y_j >= -1.
    let mut mat = d.clone();
    let mut rhs = crate::linalg::zeros(d.nrows());
    let one = crate::linalg::int(1);
    for j in 0..n {
        let mut lo = crate::linalg::zeros(n);
        lo[j] = one.clone();
        mat.push_row(lo);
        rhs.push(-one.clone());
        let mut hi = crate::linalg::zeros(n);
        hi[j] = -one.clone();
        mat.push_row(hi);
        rhs.push(-one.clone());
    }
    let boxed = Polyhedron::new(mat, rhs).expect("consistent by construction");
    for j in 0..n {
        let mut obj = crate::linalg::zeros(n);
        obj[j] = one.clone();
        for sense in [Sense::Maximize, Sense::Minimize] {
            let mut lp = LpProblem::minimize(obj.clone(), boxed.clone());
            lp.sense = sense;
            let sol = solve_lp(&lp);
            debug_assert_eq!(sol.status, LpStatus::Optimal, "cone probe LP is always solvable");
            if !sol.value.expect("optimal").is_zero() {
                return false;
            }
        }
    }
    true
}

/// All vertices of a bounded polyhedron, sorted lexicographically.
///
/// Every `dim`-subset of rows is solved as a square system; solutions that
/// are feasible are vertices (they have `dim` linearly independent tight
/// rows by construction). The empty polyhedron yields an empty list;
/// an unbounded one is refused.
pub fn enumerate_vertices(p: &Polyhedron) -> Result<Vec<RatVector>, VertexEnumError> {
    let dim = p.dim();
    if dim == 0 {
        return Err(VertexEnumError::ZeroDimensional);
    }
    if p.is_empty() {
        return Ok(Vec::new());
    }
    if !recession_cone_is_trivial(p.mat()) {
        return Err(VertexEnumError::Unbounded);
    }
    let mut found: Vec<RatVector> = Vec::new();
    for subset in (0..p.num_rows()).combinations(dim) {
        let sub = p.mat().select_rows(&subset);
        let rhs: RatVector = subset.iter().map(|&i| p.rhs()[i].clone()).collect();
        if let LinearSolve::Unique(z) = solve_linear(&sub, &rhs) {
            if p.contains(&z) {
                found.push(z);
            }
        }
    }
    found.sort_by(|a, b| lex_cmp(a, b));
    found.dedup();
    Ok(found)
}
