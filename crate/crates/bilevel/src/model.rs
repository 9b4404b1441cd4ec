//! The four linear bilevel problem classes and their pointwise semantics.
//!
//! A problem has a leader choosing `x` from a polyhedron `X` and a follower
//! who, given `x`, solves the parametric LP
//!
//! ```text
//!     min  fᵀy   s.t.  C x + D y >= b   (optionally  C₌ x + D₌ y = b₌)
//! ```
//!
//! whose optimal set is `S(x)`. The classes differ in how the leader's
//! objective treats the follower's choice within `S(x)` and in whether
//! joint (coupling) constraints `A x + B y >= a` are present:
//!
//! * `OptNoCoupling`  —  `min cᵀx + min{dᵀy : y ∈ S(x)}`
//! * `OptCoupling`    —  `min cᵀx + min{dᵀy : y ∈ S(x), Ax + By >= a}`
//! * `PessNoCoupling` —  `min cᵀx + max{dᵀy : y ∈ S(x)}`
//! * `PessCoupling`   —  `min cᵀx  s.t.  Ax + By >= a  for every y ∈ S(x)`
//!
//! In the pessimistic-with-coupling class the leader pays for `x` only (no
//! `d`), and the universal quantifier is decided row-wise: row `i` holds for
//! all of `S(x)` iff `min{B_i·y : y ∈ S(x)} >= a_i - A_i·x`. All evaluators
//! here are exact; "the follower is indifferent" is represented faithfully
//! as a set, never approximated by a particular optimum.
//!
//! The toolkit's standing assumption: the lower-level feasible set is
//! nonempty and compact for every `x ∈ X`, `X` itself is nonempty (and, for
//! the decision procedures here, bounded), and the leader objectives are
//! bounded below. [`check_standing_assumption`] decides these flags for a
//! concrete instance and reports per-vertex witnesses.

use crate::linalg::{dot, vec_sub, zeros, RatMatrix, RatVector, Rational};
use crate::lp::{solve_lp, LpProblem, LpStatus, Sense};
use crate::polyhedron::{enumerate_vertices, recession_cone_is_trivial, Polyhedron};
use num_traits::Zero;
use thiserror::Error;

/// Which of the four problem shapes an instance is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemClass {
    OptNoCoupling,
    OptCoupling,
    PessNoCoupling,
    PessCoupling,
}

impl ProblemClass {
    pub fn is_pessimistic(self) -> bool {
        matches!(self, ProblemClass::PessNoCoupling | ProblemClass::PessCoupling)
    }

    pub fn has_coupling(self) -> bool {
        matches!(self, ProblemClass::OptCoupling | ProblemClass::PessCoupling)
    }

    /// Stable textual tag used by instance files and the CLI.
    pub fn tag(self) -> &'static str {
        match self {
            ProblemClass::OptNoCoupling => "opt_nc",
            ProblemClass::OptCoupling => "opt_cc",
            ProblemClass::PessNoCoupling => "pess_nc",
            ProblemClass::PessCoupling => "pess_cc",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "opt_nc" => ProblemClass::OptNoCoupling,
            "opt_cc" => ProblemClass::OptCoupling,
            "pess_nc" => ProblemClass::PessNoCoupling,
            "pess_cc" => ProblemClass::PessCoupling,
            _ => return None,
        })
    }
}

/// Optional equality rows of the lower level: `C₌ x + D₌ y = b₌`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LowerEqualities {
    pub x_coeffs: RatMatrix,
    pub y_coeffs: RatMatrix,
    pub rhs: RatVector,
}

/// The follower's parametric LP data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LowerLevel {
    /// Follower objective `f` (minimized).
    pub cost: RatVector,
    /// `C`: how the leader's decision shifts the follower's constraints.
    pub x_coeffs: RatMatrix,
    /// `D`: the follower's own constraint matrix.
    pub y_coeffs: RatMatrix,
    /// Right-hand side `b`.
    pub rhs: RatVector,
    /// Optional equality rows (used by the ε-stage rewrites).
    pub eq: Option<LowerEqualities>,
}

/// Joint constraints `A x + B y >= a` tying leader and follower variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingBlock {
    pub x_coeffs: RatMatrix,
    pub y_coeffs: RatMatrix,
    pub rhs: RatVector,
}

/// A complete instance of one of the four classes.
///
/// Construction is validated: `cost_y` is present exactly when the class
/// pays for the follower's choice (everything except `PessCoupling`), the
/// coupling block is present exactly for the coupling classes, and all
/// dimensions must agree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BilevelProblem {
    pub class: ProblemClass,
    /// Leader cost on its own variables, `c`.
    pub cost_x: RatVector,
    /// Leader cost on the follower's variables, `d` (absent for `PessCoupling`).
    pub cost_y: Option<RatVector>,
    /// Leader's own feasible set `X`.
    pub leader_set: Polyhedron,
    pub lower: LowerLevel,
    pub coupling: Option<CouplingBlock>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed instance: {0}")]
    Shape(String),
}

/// Outcome of a pointwise evaluation: a finite exact value, or infeasible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Eval {
    Value(Rational),
    Infeasible,
}

impl Eval {
    pub fn value(&self) -> Option<&Rational> {
        match self {
            Eval::Value(v) => Some(v),
            Eval::Infeasible => None,
        }
    }

    pub fn expect_value(self, what: &str) -> Rational {
        match self {
            Eval::Value(v) => v,
            Eval::Infeasible => panic!("expected a finite value for {what}, got Infeasible"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("standing assumption violated: {0} is unbounded")]
    Unbounded(&'static str),
    #[error("coupling row {row} out of range ({rows} rows present)")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("lower level has no optimal point at this leader decision")]
    EmptyLowerLevel,
}

impl BilevelProblem {
    pub fn new(
        class: ProblemClass,
        cost_x: RatVector,
        cost_y: Option<RatVector>,
        leader_set: Polyhedron,
        lower: LowerLevel,
        coupling: Option<CouplingBlock>,
    ) -> Result<Self, ModelError> {
        let nx = cost_x.len();
        let ny = lower.cost.len();
        let shape = |msg: String| Err(ModelError::Shape(msg));
        if nx == 0 || leader_set.dim() != nx {
            return shape(format!(
                "leader set has dimension {} but cost_x has {nx} entries (need >= 1, equal)",
                leader_set.dim()
            ));
        }
        if lower.x_coeffs.ncols() != nx
            || lower.y_coeffs.ncols() != ny
            || lower.x_coeffs.nrows() != lower.y_coeffs.nrows()
            || lower.rhs.len() != lower.x_coeffs.nrows()
        {
            return shape("lower-level block dimensions disagree".into());
        }
        if let Some(eq) = &lower.eq {
            if eq.x_coeffs.ncols() != nx
                || eq.y_coeffs.ncols() != ny
                || eq.x_coeffs.nrows() != eq.y_coeffs.nrows()
                || eq.rhs.len() != eq.x_coeffs.nrows()
            {
                return shape("lower-level equality block dimensions disagree".into());
            }
        }
        match (&cost_y, class == ProblemClass::PessCoupling) {
            (None, true) => {}
            (Some(d), false) => {
                if d.len() != ny {
                    return shape(format!(
                        "cost_y has {} entries but the follower has {ny} variables",
                        d.len()
                    ));
                }
            }
            (Some(_), true) => {
                return shape("pess_cc instances must not carry cost_y".into());
            }
            (None, false) => {
                return shape(format!("{} instances require cost_y", class.tag()));
            }
        }
        match (&coupling, class.has_coupling()) {
            (Some(cb), true) => {
                if cb.x_coeffs.ncols() != nx
                    || cb.y_coeffs.ncols() != ny
                    || cb.x_coeffs.nrows() != cb.y_coeffs.nrows()
                    || cb.rhs.len() != cb.x_coeffs.nrows()
                {
                    return shape("coupling block dimensions disagree".into());
                }
            }
            (None, false) => {}
            (Some(_), false) => {
                return shape(format!("{} instances must not carry coupling rows", class.tag()));
            }
            (None, true) => {
                return shape(format!("{} instances require a coupling block", class.tag()));
            }
        }
        Ok(BilevelProblem { class, cost_x, cost_y, leader_set, lower, coupling })
    }

    pub fn n_x(&self) -> usize {
        self.cost_x.len()
    }

    pub fn n_y(&self) -> usize {
        self.lower.cost.len()
    }

    pub fn n_lower_rows(&self) -> usize {
        self.lower.rhs.len()
    }

    pub fn n_lower_eq_rows(&self) -> usize {
        self.lower.eq.as_ref().map_or(0, |e| e.rhs.len())
    }

    pub fn n_coupling_rows(&self) -> usize {
        self.coupling.as_ref().map_or(0, |c| c.rhs.len())
    }

    fn check_x(&self, x: &[Rational]) -> Result<(), EvalError> {
        if x.len() != self.n_x() {
            return Err(EvalError::Dimension(format!(
                "leader point has {} entries, expected {}",
                x.len(),
                self.n_x()
            )));
        }
        Ok(())
    }

    /// Follower feasible set at `x` as an LP block: inequality rows
    /// `D y >= b - C x` plus optional equality rows.
    fn lower_blocks_at(&self, x: &[Rational]) -> (Polyhedron, Option<(RatMatrix, RatVector)>) {
        let rhs = vec_sub(&self.lower.rhs, &self.lower.x_coeffs.mul_vec(x));
        let ineq = Polyhedron::new(self.lower.y_coeffs.clone(), rhs).expect("validated dims");
        let eq = self.lower.eq.as_ref().map(|e| {
            (e.y_coeffs.clone(), vec_sub(&e.rhs, &e.x_coeffs.mul_vec(x)))
        });
        (ineq, eq)
    }
}

/// Follower's optimal value `φ(x) = min{fᵀy : y feasible at x}`.
pub fn phi(p: &BilevelProblem, x: &[Rational]) -> Result<Eval, EvalError> {
    p.check_x(x)?;
    let (ineq, eq) = p.lower_blocks_at(x);
    let mut lp = LpProblem::minimize(p.lower.cost.clone(), ineq);
    if let Some((e, g)) = eq {
        lp = lp.with_equalities(e, g);
    }
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => Ok(Eval::Value(sol.value.expect("optimal"))),
        LpStatus::Infeasible => Ok(Eval::Infeasible),
        LpStatus::Unbounded => Err(EvalError::Unbounded("lower level")),
    }
}

/// One optimal follower point at `x`, if any (deterministic: the simplex
/// vertex). Used as the shared `ȳ` in the row-wise coupling checks.
pub fn lower_argmin(p: &BilevelProblem, x: &[Rational]) -> Result<Option<RatVector>, EvalError> {
    p.check_x(x)?;
    let (ineq, eq) = p.lower_blocks_at(x);
    let mut lp = LpProblem::minimize(p.lower.cost.clone(), ineq);
    if let Some((e, g)) = eq {
        lp = lp.with_equalities(e, g);
    }
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => Ok(Some(sol.point.expect("optimal"))),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(EvalError::Unbounded("lower level")),
    }
}

/// Exact membership `y ∈ S(x)`: feasible for the follower at `x` and
/// achieving the optimal value.
pub fn in_s(p: &BilevelProblem, x: &[Rational], y: &[Rational]) -> Result<bool, EvalError> {
    p.check_x(x)?;
    if y.len() != p.n_y() {
        return Err(EvalError::Dimension(format!(
            "follower point has {} entries, expected {}",
            y.len(),
            p.n_y()
        )));
    }
    let (ineq, eq) = p.lower_blocks_at(x);
    if !ineq.contains(y) {
        return Ok(false);
    }
    if let Some((e, g)) = &eq {
        if &e.mul_vec(y) != g {
            return Ok(false);
        }
    }
    match phi(p, x)? {
        Eval::Infeasible => Ok(false),
        Eval::Value(v) => Ok(dot(&p.lower.cost, y) == v),
    }
}

/// Optimize `wᵀy` over the follower's optimal set `S(x)`, in the given
/// sense; optionally intersect with the instance's coupling rows at `x`
/// (used by the optimistic-with-coupling leader value).
fn over_lower_optima(
    p: &BilevelProblem,
    x: &[Rational],
    w: &[Rational],
    sense: Sense,
    with_coupling: bool,
) -> Result<Eval, EvalError> {
    p.check_x(x)?;
    if w.len() != p.n_y() {
        return Err(EvalError::Dimension(format!(
            "inner objective has {} entries, expected {}",
            w.len(),
            p.n_y()
        )));
    }
    let level = match phi(p, x)? {
        Eval::Infeasible => return Ok(Eval::Infeasible),
        Eval::Value(v) => v,
    };
    let (mut ineq_mat, mut ineq_rhs) = {
        let (ineq, _) = p.lower_blocks_at(x);
        (ineq.mat().clone(), ineq.rhs().clone())
    };
    if with_coupling {
        let cb = p.coupling.as_ref().expect("caller ensured coupling present");
        ineq_mat = ineq_mat.vstack(&cb.y_coeffs);
        ineq_rhs.extend(vec_sub(&cb.rhs, &cb.x_coeffs.mul_vec(x)));
    }
    // Equality rows: the follower's own, plus the value-level row fᵀy = φ(x).
    let (_, eq) = p.lower_blocks_at(x);
    let (mut e_mat, mut e_rhs) = match eq {
        Some((e, g)) => (e, g),
        None => (RatMatrix::zeros(0, p.n_y()), Vec::new()),
    };
    e_mat.push_row(p.lower.cost.clone());
    e_rhs.push(level);

    let mut lp = LpProblem {
        sense,
        objective: w.to_vec(),
        feasible_set: Polyhedron::new(ineq_mat, ineq_rhs).expect("validated dims"),
        equalities: None,
    };
    lp = lp.with_equalities(e_mat, e_rhs);
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => Ok(Eval::Value(sol.value.expect("optimal"))),
        LpStatus::Infeasible => Ok(Eval::Infeasible),
        LpStatus::Unbounded => Err(EvalError::Unbounded("inner optimization over S(x)")),
    }
}

/// Worst-case inner value `max{wᵀy : y ∈ S(x)}` (`Infeasible` iff `S(x) = ∅`).
pub fn pessimistic_inner(
    p: &BilevelProblem,
    x: &[Rational],
    w: &[Rational],
) -> Result<Eval, EvalError> {
    over_lower_optima(p, x, w, Sense::Maximize, false)
}

/// Best-case inner value `min{wᵀy : y ∈ S(x)}` (`Infeasible` iff `S(x) = ∅`).
pub fn optimistic_inner(
    p: &BilevelProblem,
    x: &[Rational],
    w: &[Rational],
) -> Result<Eval, EvalError> {
    over_lower_optima(p, x, w, Sense::Minimize, false)
}

/// Decide whether `x` survives the universal coupling constraint of a
/// `pess_cc` instance: `S(x) ≠ ∅` and, for every coupling row `i`,
/// `min{B_i·y : y ∈ S(x)} >= a_i - A_i·x` (the row-wise characterization of
/// "the row holds for every optimal follower response").
///
/// Precondition: `x ∈ X` (not re-checked here) and the instance has a
/// coupling block.
pub fn check_pc_feasible(p: &BilevelProblem, x: &[Rational]) -> Result<bool, EvalError> {
    p.check_x(x)?;
    let cb = p.coupling.as_ref().ok_or(EvalError::RowOutOfRange { row: 0, rows: 0 })?;
    for i in 0..cb.rhs.len() {
        let worst = over_lower_optima(p, x, cb.y_coeffs.row(i), Sense::Minimize, false)?;
        match worst {
            Eval::Infeasible => return Ok(false),
            Eval::Value(v) => {
                let need = &cb.rhs[i] - dot(cb.x_coeffs.row(i), x);
                if v < need {
                    return Ok(false);
                }
            }
        }
    }
    if cb.rhs.is_empty() {
        // No rows to check, but x must still admit follower responses.
        return Ok(!matches!(phi(p, x)?, Eval::Infeasible));
    }
    Ok(true)
}

/// Leader objective value at `x`, by class semantics. `Infeasible` when `x`
/// admits no follower response (or, with coupling, no acceptable one).
pub fn evaluate_leader(p: &BilevelProblem, x: &[Rational]) -> Result<Eval, EvalError> {
    p.check_x(x)?;
    let base = dot(&p.cost_x, x);
    let inner = match p.class {
        ProblemClass::OptNoCoupling => {
            over_lower_optima(p, x, p.cost_y.as_ref().expect("validated"), Sense::Minimize, false)?
        }
        ProblemClass::OptCoupling => {
            over_lower_optima(p, x, p.cost_y.as_ref().expect("validated"), Sense::Minimize, true)?
        }
        ProblemClass::PessNoCoupling => {
            over_lower_optima(p, x, p.cost_y.as_ref().expect("validated"), Sense::Maximize, false)?
        }
        ProblemClass::PessCoupling => {
            return if check_pc_feasible(p, x)? {
                Ok(Eval::Value(base))
            } else {
                Ok(Eval::Infeasible)
            };
        }
    };
    Ok(match inner {
        Eval::Infeasible => Eval::Infeasible,
        Eval::Value(v) => Eval::Value(base + v),
    })
}

/// Decidable flags for the standing assumption, with per-vertex witnesses.
#[derive(Clone, Debug)]
pub struct AssumptionReport {
    /// Follower feasible set compact for every `x` (recession cone of the
    /// `y`-blocks is trivial — an `x`-independent property).
    pub compact_for_all_x: bool,
    /// Follower feasible set nonempty for every `x ∈ X`. `None` when `X` is
    /// unbounded: the vertex-based decision procedure does not apply.
    pub nonempty_for_all_x: Option<bool>,
    pub x_nonempty: bool,
    pub x_bounded: bool,
    /// `(vertex of X, infeasibility measure)`: the measure is the minimal
    /// uniform slack `s >= 0` making the follower set reachable; zero means
    /// nonempty.
    pub witnesses: Vec<(RatVector, Rational)>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.compact_for_all_x
            && self.nonempty_for_all_x == Some(true)
            && self.x_nonempty
            && self.x_bounded
    }
}

/// Decide the standing assumption for an instance.
pub fn check_standing_assumption(p: &BilevelProblem) -> AssumptionReport {
    // Recession cone of the follower set: D y >= 0 (+ equality rows as pairs).
    let mut cone = p.lower.y_coeffs.clone();
    if let Some(eq) = &p.lower.eq {
        cone = cone.vstack(&eq.y_coeffs).vstack(&eq.y_coeffs.neg());
    }
    let compact_for_all_x = recession_cone_is_trivial(&cone);
    let x_nonempty = !p.leader_set.is_empty();
    let x_bounded = recession_cone_is_trivial(p.leader_set.mat());

    let (nonempty_for_all_x, witnesses) = if !x_bounded {
        (None, Vec::new())
    } else if !x_nonempty {
        (Some(true), Vec::new()) // vacuous
    } else {
        let vertices = enumerate_vertices(&p.leader_set).expect("bounded and nonempty");
        let mut all_ok = true;
        let mut witnesses = Vec::with_capacity(vertices.len());
        for v in vertices {
            let measure = lower_infeasibility_measure(p, &v);
            if !measure.is_zero() {
                all_ok = false;
            }
            witnesses.push((v, measure));
        }
        (Some(all_ok), witnesses)
    };

    AssumptionReport { compact_for_all_x, nonempty_for_all_x, x_nonempty, x_bounded, witnesses }
}

/// Minimal uniform slack making the follower set at `x` nonempty:
/// `min{ s : D y + s·e >= b - C x, |D₌ y - (b₌ - C₌ x)| <= s, s >= 0 }`.
fn lower_infeasibility_measure(p: &BilevelProblem, x: &[Rational]) -> Rational {
    let ny = p.n_y();
    let rhs_shift = vec_sub(&p.lower.rhs, &p.lower.x_coeffs.mul_vec(x));
    let mut rows: Vec<RatVector> = Vec::new();
    let mut rhs: RatVector = Vec::new();
    let one = crate::linalg::int(1);
    for (row, r) in p.lower.y_coeffs.rows_iter().zip(&rhs_shift) {
        let mut v = row.to_vec();
        v.push(one.clone());
        rows.push(v);
        rhs.push(r.clone());
    }
    if let Some(eq) = &p.lower.eq {
        let eq_shift = vec_sub(&eq.rhs, &eq.x_coeffs.mul_vec(x));
        for (row, r) in eq.y_coeffs.rows_iter().zip(&eq_shift) {
            let mut up = row.to_vec();
            up.push(one.clone());
            rows.push(up);
            rhs.push(r.clone());
            let mut down: RatVector = row.iter().map(|v| -v).collect();
            down.push(one.clone());
            rows.push(down);
            rhs.push(-r);
        }
    }
    // s >= 0
    let mut srow = zeros(ny);
    srow.push(one.clone());
    rows.push(srow);
    rhs.push(Rational::zero());

    let mut obj = zeros(ny);
    obj.push(one);
    let lp = LpProblem::minimize(
        obj,
        Polyhedron::new(RatMatrix::from_rows(ny + 1, rows), rhs).expect("consistent"),
    );
    let sol = solve_lp(&lp);
    debug_assert_eq!(sol.status, LpStatus::Optimal, "slack relaxation is always solvable");
    sol.value.expect("optimal")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::linalg::{int, rat};

    #[test]
    fn phi_matches_hand_lp() {
        // Lower level min y s.t. x <= y (<= 2): phi(x) = x.
        let p = corpus::tracking_follower_optimistic();
        assert_eq!(phi(&p, &[rat(2, 5)]).unwrap(), Eval::Value(rat(2, 5)));
        // Indifferent follower (f = 0): phi = 0.
        assert_eq!(phi(&corpus::forced_right_endpoint(), &[int(0)]).unwrap(), Eval::Value(int(0)));
    }

    #[test]
    fn in_s_distinguishes_feasible_from_optimal() {
        let p = corpus::tracking_follower_optimistic();
        // Feasible but suboptimal.
        assert!(!in_s(&p, &[rat(2, 5)], &[rat(1, 2)]).unwrap());
        // The unique optimum.
        assert!(in_s(&p, &[rat(2, 5)], &[rat(2, 5)]).unwrap());
        // Infeasible point.
        assert!(!in_s(&p, &[rat(2, 5)], &[rat(1, 5)]).unwrap());
        // Indifferent follower: everything feasible is optimal.
        assert!(in_s(&corpus::forced_right_endpoint(), &[int(0)], &[rat(1, 2)]).unwrap());
    }

    #[test]
    fn pessimistic_inner_is_worst_case() {
        // E1's follower is indifferent on [0,1]; worst case of w=(1) is 1.
        assert_eq!(
            pessimistic_inner(&corpus::forced_right_endpoint(), &[rat(1, 2)], &[int(1)]).unwrap(),
            Eval::Value(int(1))
        );
        // E3's S(x) is the singleton {x}.
        assert_eq!(
            pessimistic_inner(&corpus::tracking_follower_optimistic(), &[rat(2, 5)], &[int(1)]).unwrap(),
            Eval::Value(rat(2, 5))
        );
    }

    #[test]
    fn optimistic_never_exceeds_pessimistic() {
        let p = corpus::forced_right_endpoint();
        for x in [int(0), rat(1, 3), int(1)] {
            for w in [vec![int(1)], vec![int(-2)], vec![rat(1, 2)]] {
                let lo = optimistic_inner(&p, &[x.clone()], &w).unwrap();
                let hi = pessimistic_inner(&p, &[x.clone()], &w).unwrap();
                assert!(lo.value().unwrap() <= hi.value().unwrap());
            }
        }
    }

    #[test]
    fn pc_feasibility_is_the_row_wise_universal_check() {
        let p = corpus::forced_right_endpoint();
        assert!(check_pc_feasible(&p, &[int(1)]).unwrap());
        assert!(!check_pc_feasible(&p, &[rat(1, 2)]).unwrap());
        assert!(!check_pc_feasible(&p, &[int(0)]).unwrap());
    }

    #[test]
    fn evaluate_leader_per_class() {
        // pess_cc: only x = 1 survives the universal constraint.
        assert_eq!(evaluate_leader(&corpus::forced_right_endpoint(), &[int(1)]).unwrap(), Eval::Value(int(1)));
        assert_eq!(evaluate_leader(&corpus::forced_right_endpoint(), &[int(0)]).unwrap(), Eval::Infeasible);
        // opt_nc on E3: c = 0, d = -1, follower tracks x: value -x.
        assert_eq!(
            evaluate_leader(&corpus::tracking_follower_optimistic(), &[int(1)]).unwrap(),
            Eval::Value(int(-1))
        );
        // opt_cc on E2: at x = 0 the follower's y = 1 meets the coupling row.
        assert_eq!(evaluate_leader(&corpus::greedy_follower_blocked(), &[int(0)]).unwrap(), Eval::Value(int(0)));
        // At x = 1/2 the follower still plays y = 1, violating x + y <= 1.
        assert_eq!(evaluate_leader(&corpus::greedy_follower_blocked(), &[rat(1, 2)]).unwrap(), Eval::Infeasible);
        // pess_nc: worst case over the indifferent follower.
        assert_eq!(
            evaluate_leader(&corpus::indifferent_follower_pessimistic(), &[rat(1, 2)]).unwrap(),
            Eval::Value(int(1))
        );
    }

    #[test]
    fn standing_assumption_flags_on_corpus() {
        for p in [corpus::forced_right_endpoint(), corpus::greedy_follower_blocked(), corpus::tracking_follower_optimistic(), corpus::duplicated_coupling_row()] {
            let rep = check_standing_assumption(&p);
            assert!(rep.all_pass(), "corpus instance should satisfy the assumption");
            assert!(rep.witnesses.iter().all(|(_, m)| m.is_zero()));
        }
    }

    #[test]
    fn noncompact_lower_level_is_flagged() {
        // Lower rows only y >= x: recession ray upward.
        let p = BilevelProblem::new(
            ProblemClass::OptNoCoupling,
            vec![int(0)],
            Some(vec![int(-1)]),
            corpus::unit_interval(),
            LowerLevel {
                cost: vec![int(1)],
                x_coeffs: RatMatrix::from_rows(1, vec![vec![int(-1)]]),
                y_coeffs: RatMatrix::from_rows(1, vec![vec![int(1)]]),
                rhs: vec![int(0)],
                eq: None,
            },
            None,
        )
        .unwrap();
        let rep = check_standing_assumption(&p);
        assert!(!rep.compact_for_all_x);
        assert_eq!(rep.nonempty_for_all_x, Some(true));
        assert!(!rep.all_pass());
    }

    #[test]
    fn unbounded_leader_set_leaves_nonemptiness_undecided() {
        // X = {x >= 0}.
        let half_line = Polyhedron::new(
            RatMatrix::from_rows(1, vec![vec![int(1)]]),
            vec![int(0)],
        )
        .unwrap();
        let mut p = corpus::indifferent_follower_optimistic();
        p.leader_set = half_line;
        let rep = check_standing_assumption(&p);
        assert!(!rep.x_bounded);
        assert_eq!(rep.nonempty_for_all_x, None);
        assert!(!rep.all_pass());
    }

    #[test]
    fn nonempty_witnesses_report_the_violating_vertex() {
        // Follower box [0,1] shifted out of reach when x = 1: y >= 2x keeps
        // y <= 1 empty at the right end of X.
        let p = BilevelProblem::new(
            ProblemClass::OptNoCoupling,
            vec![int(0)],
            Some(vec![int(1)]),
            corpus::unit_interval(),
            LowerLevel {
                cost: vec![int(1)],
                x_coeffs: RatMatrix::from_rows(1, vec![vec![int(-2)], vec![int(0)]]),
                y_coeffs: RatMatrix::from_rows(1, vec![vec![int(1)], vec![int(-1)]]),
                rhs: vec![int(0), int(-1)],
                eq: None,
            },
            None,
        )
        .unwrap();
        let rep = check_standing_assumption(&p);
        assert_eq!(rep.nonempty_for_all_x, Some(false));
        let bad: Vec<_> = rep.witnesses.iter().filter(|(_, m)| !m.is_zero()).collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].0, vec![int(1)]);
        assert_eq!(bad[0].1, rat(1, 2)); // y + s >= 2, -y + s >= -1  =>  s = 1/2
    }

    #[test]
    fn constructor_rejects_class_field_mismatches() {
        // pess_cc with cost_y.
        let e1 = corpus::forced_right_endpoint();
        assert!(BilevelProblem::new(
            ProblemClass::PessCoupling,
            e1.cost_x.clone(),
            Some(vec![int(1)]),
            e1.leader_set.clone(),
            e1.lower.clone(),
            e1.coupling.clone(),
        )
        .is_err());
        // opt_nc with coupling.
        assert!(BilevelProblem::new(
            ProblemClass::OptNoCoupling,
            e1.cost_x.clone(),
            Some(vec![int(1)]),
            e1.leader_set.clone(),
            e1.lower.clone(),
            e1.coupling.clone(),
        )
        .is_err());
        // opt_cc without coupling.
        assert!(BilevelProblem::new(
            ProblemClass::OptCoupling,
            e1.cost_x.clone(),
            Some(vec![int(1)]),
            e1.leader_set.clone(),
            e1.lower.clone(),
            None,
        )
        .is_err());
    }

    #[test]
    fn dimension_errors_are_reported() {
        let p = corpus::forced_right_endpoint();
        assert!(matches!(phi(&p, &[int(0), int(0)]), Err(EvalError::Dimension(_))));
        assert!(matches!(
            in_s(&p, &[int(0)], &[int(0), int(0)]),
            Err(EvalError::Dimension(_))
        ));
    }
}
