//! Exact two-phase primal simplex over arbitrary-precision rationals.
//!
//! Problems are `min/max cᵀz` over `{ z : G z >= h }` with optional
//! first-class equality rows `E z = g`; variables are free (unrestricted in
//! sign). Internally the problem is rewritten in standard computational form
//! with a variable split `z = u - v`, surplus variables on inequality rows,
//! and one artificial variable per row. Pivoting uses Bland's rule (lowest
//! eligible index enters; lowest basic variable index leaves among minimal
//! ratios), which makes the solver deterministic and cycle-free.
//!
//! Every `Optimal` answer carries an exact certificate: the point itself,
//! nonnegative duals on inequality rows, free duals on equality rows, and
//! strong duality as an identity of rationals. The duals always certify the
//! *minimization* form: for a `Maximize` problem they satisfy
//! `Gᵀλ + Eᵀμ = -c` and `hᵀλ + gᵀμ = -value`. Certificates are re-checked
//! internally on every solve in debug builds and exposed through
//! [`LpSolution::verify_certificate`] for callers that want the audit.

use crate::linalg::{dot, zeros, RatMatrix, RatVector, Rational};
use crate::polyhedron::Polyhedron;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Optimization direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A linear program over free variables.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: RatVector,
    pub feasible_set: Polyhedron,
    /// Optional equality block `E z = g`.
    pub equalities: Option<(RatMatrix, RatVector)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`]. Point/value/duals are present exactly when the
/// status is `Optimal`.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub point: Option<RatVector>,
    pub value: Option<Rational>,
    /// One multiplier per inequality row, `>= 0`, certifying the minimized form.
    pub ineq_duals: Option<RatVector>,
    /// One free multiplier per equality row.
    pub eq_duals: Option<RatVector>,
    /// Inequality rows tight at the returned point.
    pub active_set: Vec<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl LpProblem {
    pub fn minimize(objective: RatVector, feasible_set: Polyhedron) -> Self {
        LpProblem { sense: Sense::Minimize, objective, feasible_set, equalities: None }
    }

    pub fn maximize(objective: RatVector, feasible_set: Polyhedron) -> Self {
        LpProblem { sense: Sense::Maximize, objective, feasible_set, equalities: None }
    }

    pub fn with_equalities(mut self, e: RatMatrix, g: RatVector) -> Self {
        self.equalities = Some((e, g));
        self
    }

    fn check_dims(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.feasible_set.dim() != n {
            return Err(LpError::Dimension(format!(
                "objective has {n} entries but constraints act on {} variables",
                self.feasible_set.dim()
            )));
        }
        if let Some((e, g)) = &self.equalities {
            if e.ncols() != n {
                return Err(LpError::Dimension(format!(
                    "equality block acts on {} variables, expected {n}",
                    e.ncols()
                )));
            }
            if e.nrows() != g.len() {
                return Err(LpError::Dimension(format!(
                    "equality block has {} rows but rhs has {} entries",
                    e.nrows(),
                    g.len()
                )));
            }
        }
        Ok(())
    }
}

impl LpSolution {
    fn infeasible() -> Self {
        LpSolution {
            status: LpStatus::Infeasible,
            point: None,
            value: None,
            ineq_duals: None,
            eq_duals: None,
            active_set: Vec::new(),
        }
    }

    fn unbounded() -> Self {
        LpSolution { status: LpStatus::Unbounded, ..LpSolution::infeasible() }
    }

    /// Audit an `Optimal` answer against its problem. Checks primal
    /// feasibility, the objective identity, dual feasibility (sign and the
    /// dual equation), and exact strong duality. Non-optimal statuses
    /// trivially pass (they make no claim that carries a certificate).
    pub fn verify_certificate(&self, p: &LpProblem) -> bool {
        if self.status != LpStatus::Optimal {
            return true;
        }
        let (Some(z), Some(value), Some(lam), Some(mu)) =
            (&self.point, &self.value, &self.ineq_duals, &self.eq_duals)
        else {
            return false;
        };
        let g = p.feasible_set.mat();
        let h = p.feasible_set.rhs();
        if z.len() != p.objective.len() || lam.len() != g.nrows() {
            return false;
        }
        // Primal feasibility.
        if !p.feasible_set.contains(z) {
            return false;
        }
        if let Some((e, gg)) = &p.equalities {
            if mu.len() != e.nrows() || &e.mul_vec(z) != gg {
                return false;
            }
        } else if !mu.is_empty() {
            return false;
        }
        // Objective value identity.
        if &dot(&p.objective, z) != value {
            return false;
        }
        // Dual certificate for the minimized form.
        let (cmin, vmin) = match p.sense {
            Sense::Minimize => (p.objective.clone(), value.clone()),
            Sense::Maximize => (p.objective.iter().map(|x| -x).collect(), -value),
        };
        if lam.iter().any(|l| l.is_negative()) {
            return false;
        }
        // Gᵀλ + Eᵀμ = cmin
        let mut lhs = g.transpose().mul_vec(lam);
        if let Some((e, _)) = &p.equalities {
            let add = e.transpose().mul_vec(mu);
            for (a, b) in lhs.iter_mut().zip(add) {
                *a += b;
            }
        }
        if lhs != cmin {
            return false;
        }
        // Strong duality: hᵀλ + gᵀμ = vmin
        let mut dual_val = dot(h, lam);
        if let Some((_, gg)) = &p.equalities {
            dual_val += dot(gg, mu);
        }
        dual_val == vmin
    }
}

/// Solve an LP exactly. Deterministic: identical inputs produce identical
/// outputs, including the returned vertex and duals.
pub fn solve_lp(p: &LpProblem) -> LpSolution {
    p.check_dims().expect("LpProblem dimensions must be consistent");
    let n = p.objective.len();
    let g = p.feasible_set.mat();
    let h = p.feasible_set.rhs();
    let empty = empty_eq();
    let (e_mat, e_rhs): (&RatMatrix, &[Rational]) = match &p.equalities {
        Some((e, g2)) => (e, g2.as_slice()),
        None => (&empty.0, &empty.1),
    };
    let m_ineq = g.nrows();
    let m_eq = e_mat.nrows();

    // Zero-variable problems: feasibility is a direct scan.
    if n == 0 {
        let feasible =
            h.iter().all(|hi| !hi.is_positive()) && e_rhs.iter().all(|gi| gi.is_zero());
        if !feasible {
            return LpSolution::infeasible();
        }
        let active = (0..m_ineq).filter(|&i| h[i].is_zero()).collect();
        let sol = LpSolution {
            status: LpStatus::Optimal,
            point: Some(Vec::new()),
            value: Some(Rational::zero()),
            ineq_duals: Some(zeros(m_ineq)),
            eq_duals: Some(zeros(m_eq)),
            active_set: active,
        };
        debug_assert!(sol.verify_certificate(p));
        return sol;
    }

    let cmin: RatVector = match p.sense {
        Sense::Minimize => p.objective.clone(),
        Sense::Maximize => p.objective.iter().map(|x| -x).collect(),
    };

    let mut tab = Tableau::build(&cmin, g, h, e_mat, e_rhs);
    if !tab.phase_one() {
        return LpSolution::infeasible();
    }
    if !tab.phase_two() {
        return LpSolution::unbounded();
    }

    let z = tab.extract_point(n);
    let value = dot(&p.objective, &z);
    let (lam, mu) = tab.extract_duals(m_ineq, m_eq);
    let active_set = p.feasible_set.tight_rows(&z);
    let sol = LpSolution {
        status: LpStatus::Optimal,
        point: Some(z),
        value: Some(value),
        ineq_duals: Some(lam),
        eq_duals: Some(mu),
        active_set,
    };
    debug_assert!(sol.verify_certificate(p), "internal certificate check failed");
    sol
}

/// Shared empty equality block, for borrowing when a problem has none.
fn empty_eq() -> &'static (RatMatrix, RatVector) {
    static EMPTY: std::sync::OnceLock<(RatMatrix, RatVector)> = std::sync::OnceLock::new();
    EMPTY.get_or_init(|| (RatMatrix::zeros(0, 0), Vec::new()))
}

/// Dense simplex tableau in standard computational form.
///
/// Column layout: `u_0..u_{n-1} | v_0..v_{n-1} | s_0..s_{mI-1} | a_0..a_{m-1}`
/// where `z = u - v`, `s` are surplus variables on inequality rows, and `a`
/// are artificials (one per row, also serving as dual probes: at optimality
/// the reduced cost under `a_i` equals `-y_i`).
struct Tableau {
    m_rows: usize,
    ncols: usize,
    art0: usize,
    /// Row-major body; each row has `ncols` coefficients followed by the rhs.
    rows: Vec<RatVector>,
    /// Reduced-cost row (length `ncols`).
    red: RatVector,
    /// Basic column per row.
    basis: Vec<usize>,
    /// Sign applied to each original row to make its rhs nonnegative.
    sigma: Vec<Rational>,
    /// Phase-2 cost per column (artificials excluded, cost 0).
    cost: RatVector,
}

impl Tableau {
    fn build(
        cmin: &[Rational],
        g: &RatMatrix,
        h: &[Rational],
        e_mat: &RatMatrix,
        e_rhs: &[Rational],
    ) -> Tableau {
        let n = cmin.len();
        let m_ineq = g.nrows();
        let m_rows = m_ineq + e_mat.nrows();
        let art0 = 2 * n + m_ineq;
        let ncols = art0 + m_rows;

        let mut rows = Vec::with_capacity(m_rows);
        let mut sigma = Vec::with_capacity(m_rows);
        for i in 0..m_rows {
            let (src, rhs_i): (&[Rational], &Rational) = if i < m_ineq {
                (g.row(i), &h[i])
            } else {
                (e_mat.row(i - m_ineq), &e_rhs[i - m_ineq])
            };
            let s = if rhs_i.is_negative() { -Rational::one() } else { Rational::one() };
            let mut row = zeros(ncols + 1);
            for (j, a) in src.iter().enumerate() {
                if !a.is_zero() {
                    row[j] = &s * a;
                    row[n + j] = -&row[j];
                }
            }
            if i < m_ineq {
                row[2 * n + i] = -&s;
            }
            row[art0 + i] = Rational::one();
            row[ncols] = &s * rhs_i;
            rows.push(row);
            sigma.push(s);
        }

        let mut cost = zeros(ncols);
        for j in 0..n {
            cost[j] = cmin[j].clone();
            cost[n + j] = -&cmin[j];
        }

        let basis: Vec<usize> = (0..m_rows).map(|i| art0 + i).collect();
        Tableau {
            m_rows,
            ncols,
            art0,
            rows,
            red: Vec::new(),
            basis,
            sigma,
            cost,
        }
    }

    /// Reduce `raw_cost` against the current basis to produce the
    /// reduced-cost row.
    fn reduce_costs(&mut self, raw_cost: &[Rational]) {
        let mut red = raw_cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            if !red[b].is_zero() {
                let factor = red[b].clone();
                for j in 0..self.ncols {
                    let t = &self.rows[i][j];
                    if !t.is_zero() {
                        red[j] -= &factor * t;
                    }
                }
            }
        }
        self.red = red;
    }

    fn pivot(&mut self, prow: usize, pcol: usize) {
        let piv = self.rows[prow][pcol].clone();
        debug_assert!(!piv.is_zero());
        if !piv.is_one() {
            for x in self.rows[prow].iter_mut() {
                if !x.is_zero() {
                    *x = &*x / &piv;
                }
            }
        }
        let pivot_row = self.rows[prow].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == prow {
                continue;
            }
            let factor = row[pcol].clone();
            if factor.is_zero() {
                continue;
            }
            for (x, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *x -= &factor * pv;
                }
            }
        }
        let factor = self.red[pcol].clone();
        if !factor.is_zero() {
            for (x, pv) in self.red.iter_mut().zip(&pivot_row[..self.ncols]) {
                if !pv.is_zero() {
                    *x -= &factor * pv;
                }
            }
        }
        self.basis[prow] = pcol;
    }

    /// Bland step: lowest-index eligible column with negative reduced cost
    /// enters; among minimal-ratio rows the one with the lowest basic
    /// variable index leaves. Returns false when no entering column exists
    /// (current basis optimal) — `Err(())`-style via Option for unbounded.
    fn bland_iterate(&mut self, eligible_end: usize) -> Result<(), Unbounded> {
        loop {
            let Some(pcol) = (0..eligible_end).find(|&j| self.red[j].is_negative()) else {
                return Ok(());
            };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.m_rows {
                let a = &self.rows[i][pcol];
                if a.is_positive() {
                    let ratio = &self.rows[i][self.ncols] / a;
                    match &best {
                        None => best = Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]) {
                                best = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            match best {
                None => return Err(Unbounded),
                Some((prow, _)) => self.pivot(prow, pcol),
            }
        }
    }

    /// Phase 1: minimize the sum of artificials. Returns false on
    /// infeasibility. On success, drives basic artificials off live rows.
    fn phase_one(&mut self) -> bool {
        let mut art_cost = zeros(self.ncols);
        for j in self.art0..self.ncols {
            art_cost[j] = Rational::one();
        }
        self.reduce_costs(&art_cost);
        self.bland_iterate(self.art0)
            .expect("phase-1 objective is bounded below by zero");
        // Phase-1 optimum: sum of artificial basic values.
        let mut total = Rational::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            if b >= self.art0 {
                total += &self.rows[i][self.ncols];
            }
        }
        if !total.is_zero() {
            return false;
        }
        // Degenerate basic artificials: pivot them out on any live column.
        // Rows with no nonzero real coefficient are structurally redundant;
        // they keep their artificial basic at level zero and, having only
        // zeros in real columns, are never touched by later pivots.
        for i in 0..self.m_rows {
            if self.basis[i] >= self.art0 {
                if let Some(j) = (0..self.art0).find(|&j| !self.rows[i][j].is_zero()) {
                    self.pivot(i, j);
                }
            }
        }
        true
    }

    /// Phase 2: minimize the true objective; artificials are barred from
    /// entering. Returns false when unbounded.
    fn phase_two(&mut self) -> bool {
        let raw = self.cost.clone();
        self.reduce_costs(&raw);
        self.bland_iterate(self.art0).is_ok()
    }

    fn extract_point(&self, n: usize) -> RatVector {
        let mut w = zeros(2 * n);
        for (i, &b) in self.basis.iter().enumerate() {
            if b < 2 * n {
                w[b] = self.rows[i][self.ncols].clone();
            }
        }
        (0..n).map(|j| &w[j] - &w[n + j]).collect()
    }

    /// Duals from the artificial probe columns: at optimality the reduced
    /// cost under `a_i` is `-y_i`; mapping back through the row sign gives
    /// the dual of the original row.
    fn extract_duals(&self, m_ineq: usize, m_eq: usize) -> (RatVector, RatVector) {
        let y: Vec<Rational> =
            (0..self.m_rows).map(|i| -&self.red[self.art0 + i]).collect();
        let lam: RatVector = (0..m_ineq).map(|i| &self.sigma[i] * &y[i]).collect();
        let mu: RatVector = (0..m_eq).map(|k| &self.sigma[m_ineq + k] * &y[m_ineq + k]).collect();
        (lam, mu)
    }
}

#[derive(Debug)]
struct Unbounded;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{int, rat, RatMatrix};
    use crate::polyhedron::Polyhedron;

    fn poly(rows: Vec<RatVector>, rhs: RatVector) -> Polyhedron {
        let cols = rows.first().map(|r| r.len()).unwrap_or(0);
        Polyhedron::new(RatMatrix::from_rows(cols, rows), rhs).unwrap()
    }

    #[test]
    fn one_variable_lower_bound() {
        // min x s.t. x >= 1/3
        let p = LpProblem::minimize(vec![int(1)], poly(vec![vec![int(1)]], vec![rat(1, 3)]));
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.value, Some(rat(1, 3)));
        assert_eq!(s.point, Some(vec![rat(1, 3)]));
        assert_eq!(s.active_set, vec![0]);
        assert!(s.verify_certificate(&p));
    }

    #[test]
    fn unbounded_direction_detected() {
        // min -x s.t. x >= 0
        let p = LpProblem::minimize(vec![int(-1)], poly(vec![vec![int(1)]], vec![int(0)]));
        assert_eq!(solve_lp(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn parametric_interval_value() {
        // min y s.t. y >= 2/5, y <= 1  (fixed leader value 2/5)
        let p = LpProblem::minimize(
            vec![int(1)],
            poly(vec![vec![int(1)], vec![int(-1)]], vec![rat(2, 5), int(-1)]),
        );
        let s = solve_lp(&p);
        assert_eq!(s.value, Some(rat(2, 5)));
        assert!(s.verify_certificate(&p));
    }

    #[test]
    fn infeasible_detected() {
        // x >= 1, -x >= 0
        let p = LpProblem::minimize(
            vec![int(1)],
            poly(vec![vec![int(1)], vec![int(-1)]], vec![int(1), int(0)]),
        );
        assert_eq!(solve_lp(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn maximize_maps_duals_to_min_form() {
        // max x s.t. x <= 3/2, x >= 0
        let p = LpProblem::maximize(
            vec![int(1)],
            poly(vec![vec![int(-1)], vec![int(1)]], vec![rat(-3, 2), int(0)]),
        );
        let s = solve_lp(&p);
        assert_eq!(s.value, Some(rat(3, 2)));
        assert_eq!(s.point, Some(vec![rat(3, 2)]));
        assert!(s.verify_certificate(&p));
        // Dual on the binding row is 1 (certifying min -x).
        assert_eq!(s.ineq_duals, Some(vec![int(1), int(0)]));
    }

    #[test]
    fn equality_rows_are_first_class() {
        // min x + y s.t. x + y = 2, x >= 0, y >= 0  — whole segment optimal.
        let p = LpProblem::minimize(
            vec![int(1), int(1)],
            poly(vec![vec![int(1), int(0)], vec![int(0), int(1)]], vec![int(0), int(0)]),
        )
        .with_equalities(RatMatrix::from_rows(2, vec![vec![int(1), int(1)]]), vec![int(2)]);
        let s = solve_lp(&p);
        assert_eq!(s.value, Some(int(2)));
        assert!(s.verify_certificate(&p));
    }

    #[test]
    fn equality_infeasible_with_ineq() {
        // x = 2 but x <= 1
        let p = LpProblem::minimize(vec![int(1)], poly(vec![vec![int(-1)]], vec![int(-1)]))
            .with_equalities(RatMatrix::from_rows(1, vec![vec![int(1)]]), vec![int(2)]);
        assert_eq!(solve_lp(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn redundant_rows_are_harmless() {
        // x + y = 1 stated twice, plus 2x + 2y = 2; minimize x.
        let p = LpProblem::minimize(
            vec![int(1), int(0)],
            poly(vec![vec![int(1), int(0)], vec![int(0), int(1)]], vec![int(0), int(0)]),
        )
        .with_equalities(
            RatMatrix::from_rows(
                2,
                vec![vec![int(1), int(1)], vec![int(1), int(1)], vec![int(2), int(2)]],
            ),
            vec![int(1), int(1), int(2)],
        );
        let s = solve_lp(&p);
        assert_eq!(s.value, Some(int(0)));
        assert_eq!(s.point, Some(vec![int(0), int(1)]));
        assert!(s.verify_certificate(&p));
    }

    #[test]
    fn zero_variable_problems() {
        let empty_ok = LpProblem::minimize(
            vec![],
            Polyhedron::new(RatMatrix::zeros(2, 0), vec![int(0), int(-1)]).unwrap(),
        );
        let s = solve_lp(&empty_ok);
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.value, Some(int(0)));
        assert_eq!(s.active_set, vec![0]);
        assert!(s.verify_certificate(&empty_ok));

        let empty_bad = LpProblem::minimize(
            vec![],
            Polyhedron::new(RatMatrix::zeros(1, 0), vec![int(1)]).unwrap(),
        );
        assert_eq!(solve_lp(&empty_bad).status, LpStatus::Infeasible);
    }

    #[test]
    fn degenerate_cycling_instance_terminates() {
        // Beale's classic cycling example (converted to >= rows): Bland's
        // rule must terminate on it. min -3/4 x4 + 150 x5 - 1/50 x6 + 6 x7
        // s.t. x1..x7 >= 0 and three equality rows.
        let rows: Vec<RatVector> = (0..7)
            .map(|j| {
                let mut r = zeros(7);
                r[j] = int(1);
                r
            })
            .collect();
        let p = LpProblem::minimize(
            vec![int(0), int(0), int(0), rat(-3, 4), int(150), rat(-1, 50), int(6)],
            poly(rows, zeros(7)),
        )
        .with_equalities(
            RatMatrix::from_rows(
                7,
                vec![
                    vec![int(1), int(0), int(0), rat(1, 4), int(-60), rat(-1, 25), int(9)],
                    vec![int(0), int(1), int(0), rat(1, 2), int(-90), rat(-1, 50), int(3)],
                    vec![int(0), int(0), int(1), int(0), int(0), int(1), int(0)],
                ],
            ),
            vec![int(0), int(0), int(1)],
        );
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.value, Some(rat(-1, 20)));
        assert!(s.verify_certificate(&p));
    }

    #[test]
    fn deterministic_resolve() {
        let p = LpProblem::minimize(
            vec![int(1), int(-1)],
            poly(
                vec![
                    vec![int(1), int(0)],
                    vec![int(-1), int(0)],
                    vec![int(0), int(1)],
                    vec![int(0), int(-1)],
                    vec![int(1), int(1)],
                ],
                vec![int(0), int(-1), int(0), int(-1), rat(1, 2)],
            ),
        );
        let a = solve_lp(&p);
        let b = solve_lp(&p);
        assert_eq!(a.point, b.point);
        assert_eq!(a.ineq_duals, b.ineq_duals);
        assert_eq!(a.value, Some(int(-1)));
    }

    #[test]
    fn strong_duality_on_fractional_data() {
        // min 2/3 x + 5/7 y s.t. x + y >= 13/11, x - y >= -3, y >= 1/9
        let p = LpProblem::minimize(
            vec![rat(2, 3), rat(5, 7)],
            poly(
                vec![vec![int(1), int(1)], vec![int(1), int(-1)], vec![int(0), int(1)]],
                vec![rat(13, 11), int(-3), rat(1, 9)],
            ),
        );
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.verify_certificate(&p));
        // Optimum pushes y to its lower bound? 2/3 < 5/7 so load x.
        let z = s.point.unwrap();
        assert_eq!(&z[1], &rat(1, 9));
        assert_eq!(&z[0] + &z[1], rat(13, 11));
    }
}
