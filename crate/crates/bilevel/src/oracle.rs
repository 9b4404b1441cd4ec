//! Independent exact global solvers for all four problem classes, plus
//! randomized falsifiers and pointwise equivalence checks.
//!
//! These are deliberately brute-force: they certify the rewrite chain, so
//! they must not share its machinery. The engine is enumeration of
//! *tight-row patterns*. For the parametric follower LP
//! `min fᵀy  s.t.  D y >= b - C x` (plus optional equality rows), a set `J`
//! of inequality rows is **valid** when `f` lies in the cone of the rows
//! `D_J` plus the span of the equality rows — i.e. some dual multipliers
//! `λ >= 0` supported on `J` certify optimality. Validity is a property of
//! `(D, f)` alone, independent of `x`. Weak duality gives soundness: any
//! follower-feasible point with `J` tight is optimal. Complementary
//! slackness gives completeness: the support of any optimal dual is tight
//! at *every* optimal point, so every `(x, y)` with `y ∈ S(x)` lies in some
//! valid-pattern region. Enumerating only inclusion-minimal valid patterns
//! with linearly independent rows loses nothing (conic Carathéodory, and a
//! superset's region is contained in its subset's region).
//!
//! Optimistic problems are then one LP per region. Pessimistic problems
//! nest a second pattern `K` for the inner optimization over the optimal
//! set `S(x)` (the level constraint `fᵀy = φ(x)` joins the equality rows,
//! with its own free multiplier), and pessimistic-with-coupling problems
//! take one inner pattern per coupling row, with inner objective `B_i`
//! (row `i` holds for all of `S(x)` iff it holds at a minimizer of
//! `B_i·y` over `S(x)`). Every candidate is re-certified through the
//! model's pointwise evaluators before it is returned.

use crate::linalg::{dot, lex_cmp, rank, solve_linear, vec_concat, zeros, LinearSolve, RatMatrix,
    RatVector, Rational};
use crate::lp::{solve_lp, LpProblem, LpStatus, Sense};
use crate::model::{
    check_pc_feasible, evaluate_leader, lower_argmin, optimistic_inner, BilevelProblem, Eval,
    EvalError, ProblemClass,
};
use crate::polyhedron::Polyhedron;
use itertools::Itertools;
use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A certified global solution. Solutions live in the leader's `x`-space;
/// `witness_y` is a follower response certifying feasibility, not part of
/// the solution proper.
#[derive(Clone, Debug)]
pub struct BilevelSolution {
    pub status: SolveStatus,
    pub x: Option<RatVector>,
    pub witness_y: Option<RatVector>,
    pub value: Option<Rational>,
    /// Tight-row index sets certifying lower-level optimality: the
    /// follower's pattern first, then any inner patterns (worst-case
    /// response, or one per coupling row).
    pub patterns: Vec<Vec<usize>>,
}

impl BilevelSolution {
    fn infeasible() -> Self {
        BilevelSolution {
            status: SolveStatus::Infeasible,
            x: None,
            witness_y: None,
            value: None,
            patterns: Vec::new(),
        }
    }

    fn unbounded(patterns: Vec<Vec<usize>>) -> Self {
        BilevelSolution {
            status: SolveStatus::Unbounded,
            x: None,
            witness_y: None,
            value: None,
            patterns,
        }
    }

    pub fn expect_value(&self, what: &str) -> &Rational {
        match &self.value {
            Some(v) => v,
            None => panic!("expected an optimal value for {what}, got {:?}", self.status),
        }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("solver expects a {expected} instance, got {got}")]
    WrongClass { expected: &'static str, got: &'static str },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// All inclusion-minimal valid patterns for minimizing `cost` subject to
/// inequality rows `ineq` (multipliers `>= 0`) and free rows `free`
/// (multipliers unrestricted): subsets `J` with `|J| <= dim`, rows of
/// `ineq_J` linearly independent, and
/// `cost ∈ cone(ineq_J rows) + span(free rows)`.
pub(crate) fn minimal_valid_patterns(
    ineq: &RatMatrix,
    free: &RatMatrix,
    cost: &RatVector,
) -> Vec<Vec<usize>> {
    let n = cost.len();
    if n == 0 {
        return vec![Vec::<usize>::new()];
    }
    let m = ineq.nrows();
    let mut found: Vec<Vec<usize>> = Vec::new();
    for size in 0..=n.min(m) {
        'candidates: for team in (0..m).combinations(size) {
            for prev in &found {
                if prev.iter().all(|j| team.contains(j)) {
                    continue 'candidates;
                }
            }
            let rows = ineq.select_rows(&team);
            if rank(&rows) < team.len() {
                continue;
            }
            if pattern_is_valid(&rows, free, cost) {
                found.push(team);
            }
        }
    }
    found
}

/// Does `cost = ineq_rowsᵀ λ + freeᵀ μ` admit a solution with `λ >= 0`?
fn pattern_is_valid(ineq_rows: &RatMatrix, free: &RatMatrix, cost: &RatVector) -> bool {
    let k = ineq_rows.nrows();
    let kf = free.nrows();
    // Column j of the system is row j of the stacked multiplier matrix.
    let system = ineq_rows.clone().vstack(free).transpose();
    match solve_linear(&system, cost) {
        LinearSolve::Inconsistent => false,
        LinearSolve::Unique(z) => z[..k].iter().all(|v| v >= &Rational::zero()),
        LinearSolve::Underdetermined(z) => {
            if z[..k].iter().all(|v| v >= &Rational::zero()) {
                return true;
            }
            // Feasibility LP over (λ, μ): λ >= 0, system·(λ, μ) = cost.
            let mut sign_rows = Vec::with_capacity(k);
            for j in 0..k {
                let mut r = zeros(k + kf);
                r[j] = crate::linalg::int(1);
                sign_rows.push(r);
            }
            let lp = LpProblem::minimize(
                zeros(k + kf),
                Polyhedron::new(RatMatrix::from_rows(k + kf, sign_rows), zeros(k))
                    .expect("consistent dims"),
            )
            .with_equalities(system, cost.clone());
            solve_lp(&lp).status == LpStatus::Optimal
        }
    }
}

/// Write `part` into a fresh length-`total` row at `offset` (one call per
/// block keeps region-LP assembly readable).
fn place(total: usize, pieces: &[(usize, &[Rational])]) -> RatVector {
    let mut row = zeros(total);
    for (offset, part) in pieces {
        for (j, v) in part.iter().enumerate() {
            row[offset + j] = v.clone();
        }
    }
    row
}

struct RegionLp {
    n: usize,
    rows: Vec<RatVector>,
    rhs: RatVector,
    eq_rows: Vec<RatVector>,
    eq_rhs: RatVector,
}

impl RegionLp {
    fn new(n: usize) -> Self {
        RegionLp { n, rows: Vec::new(), rhs: Vec::new(), eq_rows: Vec::new(), eq_rhs: Vec::new() }
    }

    fn ineq(&mut self, pieces: &[(usize, &[Rational])], rhs: Rational) {
        self.rows.push(place(self.n, pieces));
        self.rhs.push(rhs);
    }

    fn eq(&mut self, pieces: &[(usize, &[Rational])], rhs: Rational) {
        self.eq_rows.push(place(self.n, pieces));
        self.eq_rhs.push(rhs);
    }

    fn solve(self, sense: Sense, objective: RatVector) -> crate::lp::LpSolution {
        let set = Polyhedron::new(RatMatrix::from_rows(self.n, self.rows), self.rhs)
            .expect("consistent dims");
        let mut lp = LpProblem { sense, objective, feasible_set: set, equalities: None };
        if !self.eq_rows.is_empty() {
            lp = lp.with_equalities(
                RatMatrix::from_rows(self.n, self.eq_rows),
                self.eq_rhs,
            );
        }
        solve_lp(&lp)
    }
}

/// Add the blocks shared by every region LP: `x ∈ X` and, at variable
/// offset `off`, a full copy of the follower system at `x` with pattern
/// `tight` converted to equalities.
fn add_follower_copy(lp: &mut RegionLp, p: &BilevelProblem, off: usize, tight: &[usize]) {
    let ml = p.n_lower_rows();
    for r in 0..ml {
        lp.ineq(
            &[(0, p.lower.x_coeffs.row(r)), (off, p.lower.y_coeffs.row(r))],
            p.lower.rhs[r].clone(),
        );
    }
    for &r in tight {
        lp.eq(
            &[(0, p.lower.x_coeffs.row(r)), (off, p.lower.y_coeffs.row(r))],
            p.lower.rhs[r].clone(),
        );
    }
    if let Some(eq) = &p.lower.eq {
        for r in 0..eq.rhs.len() {
            lp.eq(&[(0, eq.x_coeffs.row(r)), (off, eq.y_coeffs.row(r))], eq.rhs[r].clone());
        }
    }
}

fn add_leader_set(lp: &mut RegionLp, p: &BilevelProblem) {
    for r in 0..p.leader_set.num_rows() {
        lp.ineq(&[(0, p.leader_set.mat().row(r))], p.leader_set.rhs()[r].clone());
    }
}

/// Free rows of the follower's own system (equality rows, or none).
fn follower_free_rows(p: &BilevelProblem) -> RatMatrix {
    match &p.lower.eq {
        Some(eq) => eq.y_coeffs.clone(),
        None => RatMatrix::zeros(0, p.n_y()),
    }
}

/// Free rows of the *level* system `{y : D y >= ·, eq rows, fᵀy = φ}`,
/// whose inner optimizations get an extra unrestricted multiplier on `f`.
fn level_free_rows(p: &BilevelProblem) -> RatMatrix {
    follower_free_rows(p).vstack(&RatMatrix::from_rows(p.n_y(), vec![p.lower.cost.clone()]))
}

fn better(value: &Rational, point: &[Rational], best: &Option<(Rational, RatVector)>) -> bool {
    match best {
        None => true,
        Some((bv, bp)) => match value.cmp(bv) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => lex_cmp(point, bp) == Ordering::Less,
        },
    }
}

/// Dispatch to the solver matching the instance's class.
pub fn solve(p: &BilevelProblem) -> Result<BilevelSolution, OracleError> {
    match p.class {
        ProblemClass::OptNoCoupling | ProblemClass::OptCoupling => solve_optimistic(p),
        ProblemClass::PessNoCoupling => solve_pessimistic_nc(p),
        ProblemClass::PessCoupling => solve_pessimistic_cc(p),
    }
}

/// Exact global solution of an optimistic instance (with or without
/// coupling rows) by one LP per minimal valid follower pattern. Ties
/// across patterns break to the lexicographically smallest `(x, y)`.
pub fn solve_optimistic(p: &BilevelProblem) -> Result<BilevelSolution, OracleError> {
    if p.class != ProblemClass::OptNoCoupling && p.class != ProblemClass::OptCoupling {
        return Err(OracleError::WrongClass { expected: "opt_nc or opt_cc", got: p.class.tag() });
    }
    let (nx, ny) = (p.n_x(), p.n_y());
    let d = p.cost_y.as_ref().expect("optimistic classes carry cost_y");
    let patterns = minimal_valid_patterns(&p.lower.y_coeffs, &follower_free_rows(p), &p.lower.cost);

    let mut best: Option<(Rational, RatVector)> = None;
    let mut best_pattern: Vec<usize> = Vec::new();
    for pattern in &patterns {
        let mut lp = RegionLp::new(nx + ny);
        add_leader_set(&mut lp, p);
        add_follower_copy(&mut lp, p, nx, pattern);
        if let Some(cb) = &p.coupling {
            for r in 0..cb.rhs.len() {
                lp.ineq(&[(0, cb.x_coeffs.row(r)), (nx, cb.y_coeffs.row(r))], cb.rhs[r].clone());
            }
        }
        let sol = lp.solve(Sense::Minimize, vec_concat(&[&p.cost_x, d]));
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return Ok(BilevelSolution::unbounded(vec![pattern.clone()])),
            LpStatus::Optimal => {
                let value = sol.value.expect("optimal");
                let point = sol.point.expect("optimal");
                if better(&value, &point, &best) {
                    best = Some((value, point));
                    best_pattern = pattern.clone();
                }
            }
        }
    }
    Ok(match best {
        None => BilevelSolution::infeasible(),
        Some((value, point)) => {
            let x = point[..nx].to_vec();
            let y = point[nx..].to_vec();
            debug_assert_eq!(
                evaluate_leader(p, &x).expect("dims fit"),
                Eval::Value(value.clone()),
                "optimistic winner must re-certify pointwise"
            );
            BilevelSolution {
                status: SolveStatus::Optimal,
                x: Some(x),
                witness_y: Some(y),
                value: Some(value),
                patterns: vec![best_pattern],
            }
        }
    })
}

/// Exact global solution of a pessimistic instance without coupling rows:
/// enumerate pairs `(J, K)` — `J` certifying a follower optimum `u`, `K`
/// certifying a worst-case response `v` (inner objective `-d` over the
/// level system) — solve one LP in `(x, u, v)` per pair, and re-certify
/// every candidate through `evaluate_leader` in increasing value order.
pub fn solve_pessimistic_nc(p: &BilevelProblem) -> Result<BilevelSolution, OracleError> {
    if p.class != ProblemClass::PessNoCoupling {
        return Err(OracleError::WrongClass { expected: "pess_nc", got: p.class.tag() });
    }
    let (nx, ny) = (p.n_x(), p.n_y());
    let d = p.cost_y.as_ref().expect("pess_nc carries cost_y");
    let outer = minimal_valid_patterns(&p.lower.y_coeffs, &follower_free_rows(p), &p.lower.cost);
    let neg_d: RatVector = d.iter().map(|v| -v).collect();
    let inner = minimal_valid_patterns(&p.lower.y_coeffs, &level_free_rows(p), &neg_d);

    let mut candidates: Vec<(Rational, RatVector, RatVector, Vec<Vec<usize>>)> = Vec::new();
    for j_pat in &outer {
        for k_pat in &inner {
            let mut lp = RegionLp::new(nx + 2 * ny);
            add_leader_set(&mut lp, p);
            add_follower_copy(&mut lp, p, nx, j_pat);
            add_follower_copy(&mut lp, p, nx + ny, k_pat);
            // Level row: fᵀu = fᵀv ties v to the follower's optimal value.
            let neg_f: RatVector = p.lower.cost.iter().map(|v| -v).collect();
            lp.eq(&[(nx, &p.lower.cost), (nx + ny, &neg_f)], Rational::zero());
            let objective = place(nx + 2 * ny, &[(0, &p.cost_x), (nx + ny, d)]);
            let sol = lp.solve(Sense::Minimize, objective);
            match sol.status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    return Ok(BilevelSolution::unbounded(vec![j_pat.clone(), k_pat.clone()]))
                }
                LpStatus::Optimal => {
                    let point = sol.point.expect("optimal");
                    candidates.push((
                        sol.value.expect("optimal"),
                        point[..nx].to_vec(),
                        point[nx + ny..].to_vec(),
                        vec![j_pat.clone(), k_pat.clone()],
                    ));
                }
            }
        }
    }
    Ok(pick_certified(p, candidates))
}

/// Exact global solution of a pessimistic instance with coupling rows:
/// enumerate a follower pattern `J` plus one inner pattern `K_i` per
/// coupling row (inner objective `B_i` over the level system), solve one
/// LP in `(x, u, v¹, …, v^m)` per tuple with the coupling rows imposed at
/// each `v^i`, and re-certify candidates via the universal row-wise check.
pub fn solve_pessimistic_cc(p: &BilevelProblem) -> Result<BilevelSolution, OracleError> {
    if p.class != ProblemClass::PessCoupling {
        return Err(OracleError::WrongClass { expected: "pess_cc", got: p.class.tag() });
    }
    let (nx, ny) = (p.n_x(), p.n_y());
    let cb = p.coupling.as_ref().expect("pess_cc carries coupling");
    let m = cb.rhs.len();
    let outer = minimal_valid_patterns(&p.lower.y_coeffs, &follower_free_rows(p), &p.lower.cost);
    let level_free = level_free_rows(p);
    let per_row: Vec<Vec<Vec<usize>>> = (0..m)
        .map(|i| minimal_valid_patterns(&p.lower.y_coeffs, &level_free, &cb.y_coeffs.row(i).to_vec()))
        .collect();

    let tuples: Vec<Vec<&Vec<usize>>> = if m == 0 {
        vec![Vec::new()]
    } else {
        per_row.iter().map(|pats| pats.iter()).multi_cartesian_product().collect()
    };

    let mut candidates: Vec<(Rational, RatVector, RatVector, Vec<Vec<usize>>)> = Vec::new();
    for j_pat in &outer {
        for tuple in &tuples {
            let n = nx + (1 + m) * ny;
            let mut lp = RegionLp::new(n);
            add_leader_set(&mut lp, p);
            add_follower_copy(&mut lp, p, nx, j_pat);
            let neg_f: RatVector = p.lower.cost.iter().map(|v| -v).collect();
            for (i, k_pat) in tuple.iter().enumerate() {
                let off = nx + (1 + i) * ny;
                add_follower_copy(&mut lp, p, off, k_pat);
                // v^i sits on the follower's optimal level…
                lp.eq(&[(nx, &p.lower.cost), (off, &neg_f)], Rational::zero());
                // …and the coupling row must hold at this adversarial point.
                lp.ineq(&[(0, cb.x_coeffs.row(i)), (off, cb.y_coeffs.row(i))], cb.rhs[i].clone());
            }
            let objective = place(n, &[(0, &p.cost_x)]);
            let sol = lp.solve(Sense::Minimize, objective);
            match sol.status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    let mut pats = vec![j_pat.clone()];
                    pats.extend(tuple.iter().map(|k| (*k).clone()));
                    return Ok(BilevelSolution::unbounded(pats));
                }
                LpStatus::Optimal => {
                    let point = sol.point.expect("optimal");
                    let mut pats = vec![j_pat.clone()];
                    pats.extend(tuple.iter().map(|k| (*k).clone()));
                    candidates.push((
                        sol.value.expect("optimal"),
                        point[..nx].to_vec(),
                        point[nx..nx + ny].to_vec(),
                        pats,
                    ));
                }
            }
        }
    }
    Ok(pick_certified(p, candidates))
}

/// Sort candidates by `(value, x)` and return the first whose leader
/// decision re-certifies pointwise at exactly the candidate value.
fn pick_certified(
    p: &BilevelProblem,
    mut candidates: Vec<(Rational, RatVector, RatVector, Vec<Vec<usize>>)>,
) -> BilevelSolution {
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| lex_cmp(&a.1, &b.1)));
    for (value, x, witness, patterns) in candidates {
        match evaluate_leader(p, &x) {
            Ok(Eval::Value(v)) if v == value => {
                return BilevelSolution {
                    status: SolveStatus::Optimal,
                    x: Some(x),
                    witness_y: Some(witness),
                    value: Some(value),
                    patterns,
                };
            }
            other => {
                debug_assert!(
                    false,
                    "pattern candidates carry their own certificates; re-certification \
                     disagreed: candidate value {value}, pointwise {other:?}"
                );
            }
        }
    }
    BilevelSolution::infeasible()
}

/// Largest value of the last follower coordinate over the instance's
/// *optimal face* — all bilevel-feasible points whose leader objective
/// equals `opt_value`. Used by the penalty-weight search: the rewrite is
/// exact only when every optimal point has zero slack. Returns `None` when
/// the face is empty (wrong `opt_value`) or the slack is unbounded on it.
pub fn max_slack_on_optimal_face(
    p: &BilevelProblem,
    opt_value: &Rational,
) -> Result<Option<Rational>, OracleError> {
    if p.class != ProblemClass::OptNoCoupling {
        return Err(OracleError::WrongClass { expected: "opt_nc", got: p.class.tag() });
    }
    let (nx, ny) = (p.n_x(), p.n_y());
    assert!(ny > 0, "slack queries need at least one follower coordinate");
    let d = p.cost_y.as_ref().expect("opt_nc carries cost_y");
    let patterns = minimal_valid_patterns(&p.lower.y_coeffs, &follower_free_rows(p), &p.lower.cost);
    let mut best: Option<Rational> = None;
    for pattern in &patterns {
        let mut lp = RegionLp::new(nx + ny);
        add_leader_set(&mut lp, p);
        add_follower_copy(&mut lp, p, nx, pattern);
        // Pin the leader objective to the optimal value.
        lp.eq(&[(0, &p.cost_x), (nx, d)], opt_value.clone());
        let mut objective = zeros(nx + ny);
        objective[nx + ny - 1] = crate::linalg::int(1);
        let sol = lp.solve(Sense::Maximize, objective);
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return Ok(None),
            LpStatus::Optimal => {
                let v = sol.value.expect("optimal");
                if best.as_ref().map_or(true, |b| &v > b) {
                    best = Some(v);
                }
            }
        }
    }
    Ok(best.map(Some).unwrap_or(None))
}

/// Both sides of the row-wise universal-constraint equivalence at a leader
/// decision `x` and coupling row `i`:
///
/// * direct: `min{B_i·y : y ∈ S(x)} >= a_i - A_i·x`, computed over the
///   optimal set;
/// * existence form: pick any follower optimum `ȳ` (so `fᵀȳ = φ(x)`),
///   solve `yⁱ ∈ argmin{B_i·y : D y >= b - C x, fᵀy <= fᵀȳ}`, and test the
///   row at `yⁱ`.
///
/// The two booleans must agree; both are returned so callers can check.
pub fn check_universal_row_equivalence(
    p: &BilevelProblem,
    x: &[Rational],
    i: usize,
) -> Result<(bool, bool), OracleError> {
    if p.class != ProblemClass::PessCoupling {
        return Err(OracleError::WrongClass { expected: "pess_cc", got: p.class.tag() });
    }
    let cb = p.coupling.as_ref().expect("pess_cc carries coupling");
    let m = cb.rhs.len();
    if i >= m {
        return Err(OracleError::Eval(EvalError::RowOutOfRange { row: i, rows: m }));
    }
    let ybar = lower_argmin(p, x)?.ok_or(OracleError::Eval(EvalError::EmptyLowerLevel))?;
    let need = &cb.rhs[i] - dot(cb.x_coeffs.row(i), x);

    // Direct side, over the optimal set S(x).
    let direct = match optimistic_inner(p, x, cb.y_coeffs.row(i))? {
        Eval::Infeasible => unreachable!("S(x) nonempty: ȳ exists"),
        Eval::Value(v) => v >= need,
    };

    // Existence side: minimize B_i·y over the level relaxation at ȳ.
    let ny = p.n_y();
    let mut lp = RegionLp::new(ny);
    for r in 0..p.n_lower_rows() {
        lp.ineq(
            &[(0, p.lower.y_coeffs.row(r))],
            &p.lower.rhs[r] - dot(p.lower.x_coeffs.row(r), x),
        );
    }
    if let Some(eq) = &p.lower.eq {
        for r in 0..eq.rhs.len() {
            lp.eq(&[(0, eq.y_coeffs.row(r))], &eq.rhs[r] - dot(eq.x_coeffs.row(r), x));
        }
    }
    // fᵀy <= fᵀȳ.
    let neg_f: RatVector = p.lower.cost.iter().map(|v| -v).collect();
    lp.ineq(&[(0, &neg_f)], -dot(&p.lower.cost, &ybar));
    let sol = lp.solve(Sense::Minimize, cb.y_coeffs.row(i).to_vec());
    let existence = match sol.status {
        LpStatus::Optimal => sol.value.expect("optimal") >= need,
        LpStatus::Infeasible => unreachable!("ȳ itself is feasible for the level relaxation"),
        LpStatus::Unbounded => {
            return Err(OracleError::Eval(EvalError::Unbounded("level relaxation")))
        }
    };
    Ok((direct, existence))
}

/// Both sides of the all-rows equivalence at `x`: the direct universal
/// check versus the conjunction of per-row existence tests sharing one
/// `ȳ`. `S(x) = ∅` makes both sides false rather than an error.
pub fn check_universal_all_rows(
    p: &BilevelProblem,
    x: &[Rational],
) -> Result<(bool, bool), OracleError> {
    if p.class != ProblemClass::PessCoupling {
        return Err(OracleError::WrongClass { expected: "pess_cc", got: p.class.tag() });
    }
    let direct = check_pc_feasible(p, x)?;
    if lower_argmin(p, x)?.is_none() {
        return Ok((direct, false));
    }
    let m = p.n_coupling_rows();
    let mut conjunction = true;
    for i in 0..m {
        let (_, existence) = check_universal_row_equivalence(p, x, i)?;
        if !existence {
            conjunction = false;
            break;
        }
    }
    Ok((direct, conjunction))
}

/// Exactly representable random points of a polyhedron: vertices harvested
/// by minimizing random small-integer objectives, then random rational
/// convex combinations (including all-mass-on-one-vertex draws).
/// Deterministic per seed. Returns an empty vector when no vertex can be
/// found (empty or non-pointed sets).
pub fn sample_points(set: &Polyhedron, count: usize, seed: u64) -> Vec<RatVector> {
    let n = set.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices: Vec<RatVector> = Vec::new();
    let try_objective = |obj: RatVector, vertices: &mut Vec<RatVector>| {
        let lp = LpProblem::minimize(obj, set.clone());
        let sol = solve_lp(&lp);
        if sol.status == LpStatus::Optimal {
            let v = sol.point.expect("optimal");
            if !vertices.contains(&v) {
                vertices.push(v);
            }
        }
    };
    for j in 0..n {
        let mut up = zeros(n);
        up[j] = crate::linalg::int(1);
        try_objective(up, &mut vertices);
        let mut down = zeros(n);
        down[j] = crate::linalg::int(-1);
        try_objective(down, &mut vertices);
    }
    let extra_probes = 2 * n + 4;
    for _ in 0..extra_probes {
        let obj: RatVector =
            (0..n).map(|_| crate::linalg::int(rng.gen_range(-3_i64..=3))).collect();
        try_objective(obj, &mut vertices);
    }
    if vertices.is_empty() {
        return Vec::new();
    }
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let weights: Vec<i64> = (0..vertices.len()).map(|_| rng.gen_range(0_i64..=4)).collect();
        let total: i64 = weights.iter().sum();
        if total == 0 {
            let pick = rng.gen_range(0..vertices.len());
            samples.push(vertices[pick].clone());
            continue;
        }
        let mut point = zeros(n);
        for (w, v) in weights.iter().zip(&vertices) {
            if *w == 0 {
                continue;
            }
            let coef = crate::linalg::rat(*w, total);
            for (acc, vj) in point.iter_mut().zip(v) {
                *acc += &coef * vj;
            }
        }
        samples.push(point);
    }
    samples
}

/// Randomized refutation: sample leader decisions from `X` and look for a
/// feasible one whose pointwise value beats the claimed optimum (or any
/// feasible one, when the claim is infeasibility). `true` means the claim
/// was falsified.
pub fn falsify(
    p: &BilevelProblem,
    claimed: &BilevelSolution,
    samples: usize,
    seed: u64,
) -> bool {
    let points = sample_points(&p.leader_set, samples, seed);
    for x in points {
        let outcome = match evaluate_leader(p, &x) {
            Ok(o) => o,
            Err(_) => continue,
        };
        match (&claimed.status, outcome) {
            (SolveStatus::Optimal, Eval::Value(v)) => {
                if &v < claimed.value.as_ref().expect("optimal claims carry values") {
                    return true;
                }
            }
            (SolveStatus::Infeasible, Eval::Value(_)) => return true,
            _ => {}
        }
    }
    false
}
