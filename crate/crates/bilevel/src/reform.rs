//! Equivalence-preserving rewrites between the four problem classes.
//!
//! Each transform consumes an instance of one class and produces an
//! instance of another whose globally optimal value equals the source's,
//! together with a [`ReformTrace`] recording how target leader decisions
//! map back to source leader decisions. Two of the rewrites are exact only
//! for a sufficiently large penalty weight `κ`; they take `κ` as an input,
//! and the companion search in [`crate::kappa`] certifies a valid weight.
//!
//! The six rewrites:
//!
//! * [`stacked_followers`] (`pess_cc → opt_cc`): the universal constraint
//!   "row `i` holds for every `y ∈ S(x)`" is equivalent to "row `i` holds at
//!   an adversarial minimizer of `B_i·y` over `S(x)`". One follower copy
//!   `y^i` per coupling row minimizes `B_i·y^i` inside the level set
//!   `fᵀy^i <= fᵀȳ`, where `ȳ` is a leader-chosen feasible response; the
//!   joint lower objective is the separable sum `Σ_i B_i·y^i`.
//! * [`penalty_lift`] (`opt_cc → opt_nc`, weight `κ`): coupling rows are
//!   relaxed by a shared slack `ε >= 0` priced at `κ` in the leader's inner
//!   objective. For `κ` past a finite threshold the optimal slack is zero
//!   and the rewrite is exact.
//! * [`level_auxiliary`] (`opt_nc → opt_cc`): makes the follower's level
//!   slack explicit. The leader additionally picks a feasible response `ȳ`
//!   and pays `dᵀȳ`; an equality row pins `ε = fᵀȳ - fᵀy`, and the coupling
//!   pair `ε >= 0`, `-ε >= 0` forces `ȳ` onto the optimal level.
//! * [`level_penalty`] (`opt_cc → opt_nc`, weight `κ`): drops that coupling
//!   pair and prices `ε` at `κ` instead — the specialization of the penalty
//!   idea to the level-slack structure, needing no extra variable.
//! * [`sense_swap`] (`opt_nc → pess_nc`): when the inner objective is a
//!   multiple of the pinned slack `ε`, it is constant on each optimal set,
//!   so best case equals worst case pointwise and the class label can flip.
//! * [`epigraph`] (`pess_nc → pess_cc`): introduces a free epigraph
//!   variable `t` with the single coupling row `t >= dᵀy` for all
//!   `y ∈ S(x)` and leader cost `cᵀx + t`.
//!
//! Composing all of the above yields [`full_chain`]
//! (`pess_cc → opt_cc → opt_nc → opt_cc → opt_nc → pess_nc`), which turns a
//! pessimistic problem with coupling constraints into a pessimistic problem
//! without them while preserving the optimal value exactly.

use crate::kappa::{search_kappa, KappaCertificate, KappaError};
use crate::linalg::{vec_concat, zeros, RatMatrix, RatVector, Rational};
use crate::model::{
    BilevelProblem, CouplingBlock, LowerEqualities, LowerLevel, ProblemClass,
};
use crate::polyhedron::Polyhedron;
use num_traits::Zero;
use thiserror::Error;

/// Which rewrite produced a stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformKind {
    StackedFollowers,
    PenaltyLift,
    LevelAuxiliary,
    LevelPenalty,
    SenseSwap,
    Epigraph,
}

impl TransformKind {
    pub fn tag(self) -> &'static str {
        match self {
            TransformKind::StackedFollowers => "stacked_followers",
            TransformKind::PenaltyLift => "penalty_lift",
            TransformKind::LevelAuxiliary => "level_auxiliary",
            TransformKind::LevelPenalty => "level_penalty",
            TransformKind::SenseSwap => "sense_swap",
            TransformKind::Epigraph => "epigraph",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "stacked_followers" => TransformKind::StackedFollowers,
            "penalty_lift" => TransformKind::PenaltyLift,
            "level_auxiliary" => TransformKind::LevelAuxiliary,
            "level_penalty" => TransformKind::LevelPenalty,
            "sense_swap" => TransformKind::SenseSwap,
            "epigraph" => TransformKind::Epigraph,
            _ => return None,
        })
    }
}

/// How a single rewrite's target relates to its source.
#[derive(Clone, Debug)]
pub struct ReformTrace {
    pub transform: TransformKind,
    pub source_class: ProblemClass,
    pub target_class: ProblemClass,
    /// Indices into the *target* leader vector whose entries are the
    /// *source* leader vector, in order.
    pub x_projection: Vec<usize>,
    /// Penalty weight, for the two weighted rewrites.
    pub kappa: Option<Rational>,
    /// Human-readable remarks (degeneracies, constructions worth flagging).
    pub notes: Vec<String>,
}

impl ReformTrace {
    /// Recover the source leader decision from a target leader decision.
    pub fn project_x(&self, target_x: &[Rational]) -> RatVector {
        self.x_projection.iter().map(|&j| target_x[j].clone()).collect()
    }
}

#[derive(Debug, Error)]
pub enum ReformError {
    #[error("rewrite expects a {expected} instance, got {got}")]
    WrongClass { expected: &'static str, got: &'static str },
    #[error("rewrite does not support lower-level equality rows in its source")]
    UnsupportedEqualities,
    #[error("penalty weight must be nonnegative, got {0}")]
    NegativeWeight(String),
    #[error("source lacks the structure this rewrite relies on: {0}")]
    UnsupportedShape(String),
}

fn expect_class(p: &BilevelProblem, expected: ProblemClass) -> Result<(), ReformError> {
    if p.class != expected {
        return Err(ReformError::WrongClass { expected: expected.tag(), got: p.class.tag() });
    }
    Ok(())
}

fn expect_no_equalities(p: &BilevelProblem) -> Result<(), ReformError> {
    if p.lower.eq.is_some() {
        return Err(ReformError::UnsupportedEqualities);
    }
    Ok(())
}

fn expect_nonnegative(kappa: &Rational) -> Result<(), ReformError> {
    if kappa < &Rational::zero() {
        return Err(ReformError::NegativeWeight(crate::linalg::format_rational(kappa)));
    }
    Ok(())
}

/// Append `extra` zero columns to the right of `m`.
fn widen(m: &RatMatrix, extra: usize) -> RatMatrix {
    m.hstack(&RatMatrix::zeros(m.nrows(), extra))
}

fn unit_row(n: usize, j: usize) -> RatVector {
    let mut r = zeros(n);
    r[j] = crate::linalg::int(1);
    r
}

/// `pess_cc → opt_cc`: one adversarial follower copy per coupling row.
///
/// Target leader: `(x, ȳ)` over `X̃ = {x ∈ X, D ȳ >= b - C x}`; target
/// follower: `(y¹, …, y^m)` minimizing `Σ_i B_i·y^i` subject to, per copy,
/// the source lower rows and the level row `fᵀy^i <= fᵀȳ`; target coupling:
/// `A_i x + B_i y^i >= a_i`. Leader cost `(c, 0)` with zero inner cost:
/// the target value is the source value, attained with `ȳ ∈ S(x)`.
pub fn stacked_followers(
    p: &BilevelProblem,
) -> Result<(BilevelProblem, ReformTrace), ReformError> {
    expect_class(p, ProblemClass::PessCoupling)?;
    expect_no_equalities(p)?;
    let (nx, ny) = (p.n_x(), p.n_y());
    let ml = p.n_lower_rows();
    let cb = p.coupling.as_ref().expect("pess_cc carries coupling");
    let m = cb.rhs.len();

    // Leader set over (x, ȳ): X rows widened, plus lower feasibility of ȳ.
    let leader_mat = widen(p.leader_set.mat(), ny)
        .vstack(&p.lower.x_coeffs.hstack(&p.lower.y_coeffs));
    let leader_rhs = vec_concat(&[p.leader_set.rhs(), &p.lower.rhs]);
    let leader_set = Polyhedron::new(leader_mat, leader_rhs).expect("consistent dims");

    // Stacked follower objective: Σ_i B_i·y^i.
    let mut cost = Vec::with_capacity(m * ny);
    for i in 0..m {
        cost.extend_from_slice(cb.y_coeffs.row(i));
    }

    // Per-copy constraint blocks.
    let mut x_rows: Vec<RatVector> = Vec::with_capacity(m * (ml + 1));
    let mut y_rows: Vec<RatVector> = Vec::with_capacity(m * (ml + 1));
    let mut rhs: RatVector = Vec::with_capacity(m * (ml + 1));
    for i in 0..m {
        for r in 0..ml {
            // C x + D y^i >= b, stated on (x, ȳ) × (y¹..y^m).
            let mut xr = p.lower.x_coeffs.row(r).to_vec();
            xr.extend(zeros(ny));
            x_rows.push(xr);
            let mut yr = zeros(m * ny);
            yr[i * ny..(i + 1) * ny].clone_from_slice(p.lower.y_coeffs.row(r));
            y_rows.push(yr);
            rhs.push(p.lower.rhs[r].clone());
        }
        // Level row: fᵀȳ - fᵀy^i >= 0.
        let mut xr = zeros(nx);
        xr.extend(p.lower.cost.iter().cloned());
        x_rows.push(xr);
        let mut yr = zeros(m * ny);
        for (slot, fj) in yr[i * ny..(i + 1) * ny].iter_mut().zip(&p.lower.cost) {
            *slot = -fj;
        }
        y_rows.push(yr);
        rhs.push(Rational::zero());
    }

    // Coupling: A_i x + B_i y^i >= a_i, one row per copy.
    let mut cx_rows: Vec<RatVector> = Vec::with_capacity(m);
    let mut cy_rows: Vec<RatVector> = Vec::with_capacity(m);
    for i in 0..m {
        let mut xr = cb.x_coeffs.row(i).to_vec();
        xr.extend(zeros(ny));
        cx_rows.push(xr);
        let mut yr = zeros(m * ny);
        yr[i * ny..(i + 1) * ny].clone_from_slice(cb.y_coeffs.row(i));
        cy_rows.push(yr);
    }

    let mut notes = Vec::new();
    if m == 0 {
        notes.push(
            "source has no coupling rows; the stacked lower level is empty and the \
             target reduces to minimizing the leader cost over viable decisions"
                .into(),
        );
    }

    let target = BilevelProblem::new(
        ProblemClass::OptCoupling,
        vec_concat(&[&p.cost_x, &zeros(ny)]),
        Some(zeros(m * ny)),
        leader_set,
        LowerLevel {
            cost,
            x_coeffs: RatMatrix::from_rows(nx + ny, x_rows),
            y_coeffs: RatMatrix::from_rows(m * ny, y_rows),
            rhs,
            eq: None,
        },
        Some(CouplingBlock {
            x_coeffs: RatMatrix::from_rows(nx + ny, cx_rows),
            y_coeffs: RatMatrix::from_rows(m * ny, cy_rows),
            rhs: cb.rhs.clone(),
        }),
    )
    .expect("construction yields a well-formed opt_cc instance");

    let trace = ReformTrace {
        transform: TransformKind::StackedFollowers,
        source_class: ProblemClass::PessCoupling,
        target_class: ProblemClass::OptCoupling,
        x_projection: (0..nx).collect(),
        kappa: None,
        notes,
    };
    Ok((target, trace))
}

/// `opt_cc → opt_nc` with weight `κ`: relax every coupling row by a shared
/// slack `ε >= 0` priced at `κ` in the leader's inner cost.
///
/// Target follower: `(y, ε)` minimizing the source `f` (indifferent to
/// `ε`), subject to `A x + B y + ε·e >= a`, the source lower rows, and
/// `ε >= 0` (last row). Target inner cost `(d, κ)`. For `κ` large enough
/// the inner optimum drives `ε` to the least coupling violation — zero
/// when the source admits one — and the values agree.
pub fn penalty_lift(
    p: &BilevelProblem,
    kappa: &Rational,
) -> Result<(BilevelProblem, ReformTrace), ReformError> {
    expect_class(p, ProblemClass::OptCoupling)?;
    expect_no_equalities(p)?;
    expect_nonnegative(kappa)?;
    let (nx, ny) = (p.n_x(), p.n_y());
    let ml = p.n_lower_rows();
    let cb = p.coupling.as_ref().expect("opt_cc carries coupling");
    let m = cb.rhs.len();
    let one = crate::linalg::int(1);

    let mut x_rows: Vec<RatVector> = Vec::with_capacity(m + ml + 1);
    let mut y_rows: Vec<RatVector> = Vec::with_capacity(m + ml + 1);
    let mut rhs: RatVector = Vec::with_capacity(m + ml + 1);
    for i in 0..m {
        x_rows.push(cb.x_coeffs.row(i).to_vec());
        let mut yr = cb.y_coeffs.row(i).to_vec();
        yr.push(one.clone());
        y_rows.push(yr);
        rhs.push(cb.rhs[i].clone());
    }
    for r in 0..ml {
        x_rows.push(p.lower.x_coeffs.row(r).to_vec());
        let mut yr = p.lower.y_coeffs.row(r).to_vec();
        yr.push(Rational::zero());
        y_rows.push(yr);
        rhs.push(p.lower.rhs[r].clone());
    }
    x_rows.push(zeros(nx));
    y_rows.push(unit_row(ny + 1, ny));
    rhs.push(Rational::zero());

    let mut cost = p.lower.cost.clone();
    cost.push(Rational::zero());
    let mut inner_cost = p.cost_y.clone().expect("opt_cc carries cost_y");
    inner_cost.push(kappa.clone());

    let target = BilevelProblem::new(
        ProblemClass::OptNoCoupling,
        p.cost_x.clone(),
        Some(inner_cost),
        p.leader_set.clone(),
        LowerLevel {
            cost,
            x_coeffs: RatMatrix::from_rows(nx, x_rows),
            y_coeffs: RatMatrix::from_rows(ny + 1, y_rows),
            rhs,
            eq: None,
        },
        None,
    )
    .expect("construction yields a well-formed opt_nc instance");

    let trace = ReformTrace {
        transform: TransformKind::PenaltyLift,
        source_class: ProblemClass::OptCoupling,
        target_class: ProblemClass::OptNoCoupling,
        x_projection: (0..nx).collect(),
        kappa: Some(kappa.clone()),
        notes: Vec::new(),
    };
    Ok((target, trace))
}

/// `opt_nc → opt_cc`: make the follower's level slack explicit.
///
/// Target leader: `(x, ȳ)` over `X̃ = {x ∈ X, C x + D ȳ >= b}` paying the
/// full source cost `cᵀx + dᵀȳ` itself (zero inner cost). Target follower:
/// `(y, ε)` minimizing `f`, subject to the source lower rows, `ε >= 0`
/// (last row), and the equality `fᵀȳ - fᵀy - ε = 0` pinning
/// `ε = fᵀȳ - fᵀy`. Coupling pair `ε >= 0`, `-ε >= 0` forces `fᵀȳ` onto
/// the follower's optimal level, i.e. `ȳ ∈ S(x)`.
pub fn level_auxiliary(
    p: &BilevelProblem,
) -> Result<(BilevelProblem, ReformTrace), ReformError> {
    expect_class(p, ProblemClass::OptNoCoupling)?;
    expect_no_equalities(p)?;
    let (nx, ny) = (p.n_x(), p.n_y());
    let ml = p.n_lower_rows();

    let leader_mat = widen(p.leader_set.mat(), ny)
        .vstack(&p.lower.x_coeffs.hstack(&p.lower.y_coeffs));
    let leader_rhs = vec_concat(&[p.leader_set.rhs(), &p.lower.rhs]);
    let leader_set = Polyhedron::new(leader_mat, leader_rhs).expect("consistent dims");

    let mut x_rows: Vec<RatVector> = Vec::with_capacity(ml + 1);
    let mut y_rows: Vec<RatVector> = Vec::with_capacity(ml + 1);
    let mut rhs: RatVector = Vec::with_capacity(ml + 1);
    for r in 0..ml {
        let mut xr = p.lower.x_coeffs.row(r).to_vec();
        xr.extend(zeros(ny));
        x_rows.push(xr);
        let mut yr = p.lower.y_coeffs.row(r).to_vec();
        yr.push(Rational::zero());
        y_rows.push(yr);
        rhs.push(p.lower.rhs[r].clone());
    }
    x_rows.push(zeros(nx + ny));
    y_rows.push(unit_row(ny + 1, ny));
    rhs.push(Rational::zero());

    // fᵀȳ - fᵀy - ε = 0.
    let mut eq_x = zeros(nx);
    eq_x.extend(p.lower.cost.iter().cloned());
    let mut eq_y: RatVector = p.lower.cost.iter().map(|v| -v).collect();
    eq_y.push(-crate::linalg::int(1));

    let mut cost = p.lower.cost.clone();
    cost.push(Rational::zero());

    let coupling = CouplingBlock {
        x_coeffs: RatMatrix::zeros(2, nx + ny),
        y_coeffs: RatMatrix::from_rows(
            ny + 1,
            vec![unit_row(ny + 1, ny), {
                let mut r = zeros(ny + 1);
                r[ny] = crate::linalg::int(-1);
                r
            }],
        ),
        rhs: vec![Rational::zero(), Rational::zero()],
    };

    let target = BilevelProblem::new(
        ProblemClass::OptCoupling,
        vec_concat(&[&p.cost_x, p.cost_y.as_ref().expect("opt_nc carries cost_y")]),
        Some(zeros(ny + 1)),
        leader_set,
        LowerLevel {
            cost,
            x_coeffs: RatMatrix::from_rows(nx + ny, x_rows),
            y_coeffs: RatMatrix::from_rows(ny + 1, y_rows),
            rhs,
            eq: Some(LowerEqualities {
                x_coeffs: RatMatrix::from_rows(nx + ny, vec![eq_x]),
                y_coeffs: RatMatrix::from_rows(ny + 1, vec![eq_y]),
                rhs: vec![Rational::zero()],
            }),
        },
        Some(coupling),
    )
    .expect("construction yields a well-formed opt_cc instance");

    let trace = ReformTrace {
        transform: TransformKind::LevelAuxiliary,
        source_class: ProblemClass::OptNoCoupling,
        target_class: ProblemClass::OptCoupling,
        x_projection: (0..nx).collect(),
        kappa: None,
        notes: Vec::new(),
    };
    Ok((target, trace))
}

/// Check that the last follower coordinate is a level slack pinned by a
/// single equality row, as produced by [`level_auxiliary`]: one equality
/// row proportional to `(-f, -1)` on the follower side, and a follower
/// cost with zero weight on the slack.
fn validate_level_slack_shape(p: &BilevelProblem) -> Result<(), ReformError> {
    let ny = p.n_y();
    if ny == 0 {
        return Err(ReformError::UnsupportedShape("follower has no variables".into()));
    }
    let last = ny - 1;
    if !p.lower.cost[last].is_zero() {
        return Err(ReformError::UnsupportedShape(
            "follower cost must not price the slack coordinate".into(),
        ));
    }
    let eq = p.lower.eq.as_ref().ok_or_else(|| {
        ReformError::UnsupportedShape("no equality row pins the slack coordinate".into())
    })?;
    if eq.rhs.len() != 1 {
        return Err(ReformError::UnsupportedShape(format!(
            "expected exactly one equality row, found {}",
            eq.rhs.len()
        )));
    }
    let row = eq.y_coeffs.row(0);
    let alpha = &row[last];
    if alpha.is_zero() {
        return Err(ReformError::UnsupportedShape(
            "the equality row does not involve the slack coordinate".into(),
        ));
    }
    for j in 0..last {
        if row[j] != alpha * &p.lower.cost[j] {
            return Err(ReformError::UnsupportedShape(
                "the equality row is not a level row: follower-side coefficients must be \
                 proportional to the follower cost"
                    .into(),
            ));
        }
    }
    Ok(())
}

/// `opt_cc → opt_nc` with weight `κ`, specialized to the level-slack
/// structure of [`level_auxiliary`] outputs: drop the coupling pair
/// `ε >= 0`, `-ε >= 0` and price `ε` at `κ` in the inner cost instead.
/// No new variable is needed because the slack already exists.
pub fn level_penalty(
    p: &BilevelProblem,
    kappa: &Rational,
) -> Result<(BilevelProblem, ReformTrace), ReformError> {
    expect_class(p, ProblemClass::OptCoupling)?;
    expect_nonnegative(kappa)?;
    validate_level_slack_shape(p)?;
    let ny = p.n_y();
    let last = ny - 1;
    let cb = p.coupling.as_ref().expect("opt_cc carries coupling");
    // The coupling block must be exactly the pair ε >= 0, -ε >= 0.
    let pair_ok = cb.rhs.len() == 2
        && cb.rhs.iter().all(Rational::is_zero)
        && cb.x_coeffs.to_rows().iter().all(|r| r.iter().all(Rational::is_zero))
        && {
            let r0 = cb.y_coeffs.row(0);
            let r1 = cb.y_coeffs.row(1);
            let unit = unit_row(ny, last);
            let neg: RatVector = unit.iter().map(|v| -v).collect();
            (r0 == unit.as_slice() && r1 == neg.as_slice())
                || (r0 == neg.as_slice() && r1 == unit.as_slice())
        };
    if !pair_ok {
        return Err(ReformError::UnsupportedShape(
            "coupling block is not the slack pair ε >= 0, -ε >= 0".into(),
        ));
    }

    let mut inner_cost = p.cost_y.clone().expect("opt_cc carries cost_y");
    inner_cost[last] = &inner_cost[last] + kappa;

    let target = BilevelProblem::new(
        ProblemClass::OptNoCoupling,
        p.cost_x.clone(),
        Some(inner_cost),
        p.leader_set.clone(),
        p.lower.clone(),
        None,
    )
    .expect("construction yields a well-formed opt_nc instance");

    let trace = ReformTrace {
        transform: TransformKind::LevelPenalty,
        source_class: ProblemClass::OptCoupling,
        target_class: ProblemClass::OptNoCoupling,
        x_projection: (0..p.n_x()).collect(),
        kappa: Some(kappa.clone()),
        notes: Vec::new(),
    };
    Ok((target, trace))
}

/// `opt_nc → pess_nc` for level-slack instances: the inner cost weights
/// only the slack `ε`, and `ε` is pinned by the equality row to
/// `fᵀȳ - fᵀy` with `fᵀy` constant on the follower's optimal set — so the
/// inner cost is constant on every `S(x)`, best case equals worst case at
/// every leader decision, and the class label can flip with no other
/// change.
pub fn sense_swap(p: &BilevelProblem) -> Result<(BilevelProblem, ReformTrace), ReformError> {
    expect_class(p, ProblemClass::OptNoCoupling)?;
    validate_level_slack_shape(p)?;
    let ny = p.n_y();
    let d = p.cost_y.as_ref().expect("opt_nc carries cost_y");
    if d[..ny - 1].iter().any(|v| !v.is_zero()) {
        return Err(ReformError::UnsupportedShape(
            "inner cost must weight only the pinned slack coordinate".into(),
        ));
    }

    let target = BilevelProblem::new(
        ProblemClass::PessNoCoupling,
        p.cost_x.clone(),
        p.cost_y.clone(),
        p.leader_set.clone(),
        p.lower.clone(),
        None,
    )
    .expect("class flip preserves well-formedness");

    let trace = ReformTrace {
        transform: TransformKind::SenseSwap,
        source_class: ProblemClass::OptNoCoupling,
        target_class: ProblemClass::PessNoCoupling,
        x_projection: (0..p.n_x()).collect(),
        kappa: None,
        notes: Vec::new(),
    };
    Ok((target, trace))
}

/// `pess_nc → pess_cc`: epigraph form. Target leader `(x, t)` with `t`
/// free, cost `cᵀx + t`, and the single coupling row `t - dᵀy >= 0`
/// required for every `y ∈ S(x)`; the follower keeps its data (widened by
/// a zero column for `t`). At the optimum `t` settles on the worst-case
/// inner value, so the values agree.
///
/// The target's leader set is unbounded in `t` by construction; decision
/// procedures that enumerate leader vertices do not apply to it, but the
/// universal-constraint semantics and the solvers do.
pub fn epigraph(p: &BilevelProblem) -> Result<(BilevelProblem, ReformTrace), ReformError> {
    expect_class(p, ProblemClass::PessNoCoupling)?;
    let (nx, ny) = (p.n_x(), p.n_y());
    let d = p.cost_y.as_ref().expect("pess_nc carries cost_y");

    let leader_set = Polyhedron::new(
        widen(p.leader_set.mat(), 1),
        p.leader_set.rhs().clone(),
    )
    .expect("consistent dims");

    let mut cost_x = p.cost_x.clone();
    cost_x.push(crate::linalg::int(1));

    let lower = LowerLevel {
        cost: p.lower.cost.clone(),
        x_coeffs: widen(&p.lower.x_coeffs, 1),
        y_coeffs: p.lower.y_coeffs.clone(),
        rhs: p.lower.rhs.clone(),
        eq: p.lower.eq.as_ref().map(|eq| LowerEqualities {
            x_coeffs: widen(&eq.x_coeffs, 1),
            y_coeffs: eq.y_coeffs.clone(),
            rhs: eq.rhs.clone(),
        }),
    };

    let coupling = CouplingBlock {
        x_coeffs: RatMatrix::from_rows(nx + 1, vec![unit_row(nx + 1, nx)]),
        y_coeffs: RatMatrix::from_rows(ny, vec![d.iter().map(|v| -v).collect()]),
        rhs: vec![Rational::zero()],
    };

    let target = BilevelProblem::new(
        ProblemClass::PessCoupling,
        cost_x,
        None,
        leader_set,
        lower,
        Some(coupling),
    )
    .expect("construction yields a well-formed pess_cc instance");

    let trace = ReformTrace {
        transform: TransformKind::Epigraph,
        source_class: ProblemClass::PessNoCoupling,
        target_class: ProblemClass::PessCoupling,
        x_projection: (0..nx).collect(),
        kappa: None,
        notes: vec![
            "the epigraph variable is free, so the target leader set is unbounded by \
             construction"
                .into(),
        ],
    };
    Ok((target, trace))
}

/// One stage of a composed rewrite chain.
#[derive(Clone, Debug)]
pub struct ChainStage {
    pub problem: BilevelProblem,
    pub trace: ReformTrace,
}

/// A composed rewrite chain from a source instance.
#[derive(Clone, Debug)]
pub struct Chain {
    pub source: BilevelProblem,
    pub stages: Vec<ChainStage>,
    /// The certified penalty weights, in the order they were searched.
    pub kappas: Vec<KappaCertificate>,
}

impl Chain {
    pub fn final_problem(&self) -> &BilevelProblem {
        &self.stages.last().expect("chains have at least one stage").problem
    }

    /// Map a leader decision of the final stage back to the source.
    pub fn project_to_source(&self, final_x: &[Rational]) -> RatVector {
        let mut x = final_x.to_vec();
        for stage in self.stages.iter().rev() {
            x = stage.trace.project_x(&x);
        }
        x
    }
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error(transparent)]
    Reform(#[from] ReformError),
    #[error("penalty-weight search failed at the {stage} stage: {source}")]
    Kappa { stage: &'static str, source: KappaError },
}

/// Full rewrite chain `pess_cc → opt_cc → opt_nc → opt_cc → opt_nc →
/// pess_nc`. The two penalty weights are certified by the doubling search;
/// the chain fails (rather than guessing) when no finite weight works.
pub fn full_chain(p: &BilevelProblem) -> Result<Chain, ChainError> {
    let (s1, t1) = stacked_followers(p)?;
    let k1 = search_kappa(&s1, TransformKind::PenaltyLift)
        .map_err(|source| ChainError::Kappa { stage: "coupling-penalty", source })?;
    let (s2, t2) = penalty_lift(&s1, &k1.kappa)?;
    let (s3, t3) = level_auxiliary(&s2)?;
    let k2 = search_kappa(&s3, TransformKind::LevelPenalty)
        .map_err(|source| ChainError::Kappa { stage: "level-penalty", source })?;
    let (s4, t4) = level_penalty(&s3, &k2.kappa)?;
    let (s5, t5) = sense_swap(&s4)?;
    Ok(Chain {
        source: p.clone(),
        kappas: vec![k1, k2],
        stages: vec![
            ChainStage { problem: s1, trace: t1 },
            ChainStage { problem: s2, trace: t2 },
            ChainStage { problem: s3, trace: t3 },
            ChainStage { problem: s4, trace: t4 },
            ChainStage { problem: s5, trace: t5 },
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::linalg::{int, rat};
    use crate::model::{evaluate_leader, Eval};

    #[test]
    fn stacked_followers_sizes_and_layout() {
        let p = corpus::forced_right_endpoint();
        let (t, tr) = stacked_followers(&p).unwrap();
        assert_eq!(t.class, ProblemClass::OptCoupling);
        assert_eq!(t.n_x(), p.n_x() + p.n_y());
        assert_eq!(t.n_y(), p.n_coupling_rows() * p.n_y());
        assert_eq!(t.n_lower_rows(), p.n_coupling_rows() * (p.n_lower_rows() + 1));
        assert_eq!(t.n_coupling_rows(), p.n_coupling_rows());
        assert_eq!(t.leader_set.num_rows(), p.leader_set.num_rows() + p.n_lower_rows());
        assert_eq!(tr.x_projection, vec![0]);
        // Inner cost is zero; leader cost keeps c on the x block.
        assert!(t.cost_y.as_ref().unwrap().iter().all(num_traits::Zero::is_zero));
        assert_eq!(t.cost_x, vec![int(1), int(0)]);
    }

    #[test]
    fn stacked_followers_agrees_with_universal_semantics_pointwise() {
        // With ȳ on the follower's optimal level, target feasibility at
        // (x, ȳ) is exactly the source's universal check at x.
        let p = corpus::forced_right_endpoint();
        let (t, _) = stacked_followers(&p).unwrap();
        // x = 1 survives; the indifferent follower's level is 0 everywhere.
        assert_eq!(evaluate_leader(&t, &[int(1), int(0)]).unwrap(), Eval::Value(int(1)));
        // x = 1/2 fails: the adversarial copy plays y¹ = 0 < 1 - x.
        assert_eq!(evaluate_leader(&t, &[rat(1, 2), int(0)]).unwrap(), Eval::Infeasible);
        assert_eq!(evaluate_leader(&t, &[int(0), int(0)]).unwrap(), Eval::Infeasible);
    }

    #[test]
    fn stacked_followers_handles_multiple_coupling_rows() {
        let p = corpus::duplicated_coupling_row();
        let (t, _) = stacked_followers(&p).unwrap();
        assert_eq!(t.n_y(), 2);
        assert_eq!(t.n_lower_rows(), 2 * 3);
        assert_eq!(t.n_coupling_rows(), 2);
        assert_eq!(evaluate_leader(&t, &[int(1), int(0)]).unwrap(), Eval::Value(int(1)));
        assert_eq!(evaluate_leader(&t, &[rat(1, 2), int(0)]).unwrap(), Eval::Infeasible);
    }

    #[test]
    fn penalty_lift_sizes_and_row_order() {
        let p = corpus::greedy_follower_blocked();
        let kappa = int(2);
        let (t, tr) = penalty_lift(&p, &kappa).unwrap();
        assert_eq!(t.class, ProblemClass::OptNoCoupling);
        assert_eq!(t.n_x(), p.n_x());
        assert_eq!(t.n_y(), p.n_y() + 1);
        assert_eq!(t.n_lower_rows(), p.n_coupling_rows() + p.n_lower_rows() + 1);
        // Slack column: 1 on lifted coupling rows, 0 on source rows, 1 on the
        // final ε >= 0 row.
        let eps_col: Vec<_> =
            (0..t.n_lower_rows()).map(|r| t.lower.y_coeffs[(r, p.n_y())].clone()).collect();
        assert_eq!(eps_col, vec![int(1), int(0), int(0), int(1)]);
        assert_eq!(t.cost_y.as_ref().unwrap().last().unwrap(), &kappa);
        assert_eq!(tr.kappa, Some(kappa));
    }

    #[test]
    fn penalty_lift_restores_the_source_at_large_kappa_pointwise() {
        let p = corpus::greedy_follower_blocked();
        let (t, _) = penalty_lift(&p, &int(2)).unwrap();
        // Source: feasible only at x = 0 (follower plays y = 1).
        // Target: F_2(x) = -x + 2x = x at every x (ε* = x).
        assert_eq!(evaluate_leader(&t, &[int(0)]).unwrap(), Eval::Value(int(0)));
        assert_eq!(evaluate_leader(&t, &[rat(1, 2)]).unwrap(), Eval::Value(rat(1, 2)));
        assert_eq!(evaluate_leader(&t, &[int(1)]).unwrap(), Eval::Value(int(1)));
    }

    #[test]
    fn level_auxiliary_structure() {
        let p = corpus::tracking_follower_optimistic();
        let (t, tr) = level_auxiliary(&p).unwrap();
        assert_eq!(t.class, ProblemClass::OptCoupling);
        assert_eq!(t.n_x(), p.n_x() + p.n_y());
        assert_eq!(t.n_y(), p.n_y() + 1);
        assert_eq!(t.n_lower_rows(), p.n_lower_rows() + 1);
        assert_eq!(t.n_lower_eq_rows(), 1);
        assert_eq!(t.n_coupling_rows(), 2);
        // Leader pays the full source cost; inner cost is zero.
        assert_eq!(t.cost_x, vec![int(0), int(-1)]);
        assert!(t.cost_y.as_ref().unwrap().iter().all(num_traits::Zero::is_zero));
        // Level equality: fᵀȳ - fᵀy - ε = 0 with f = (1).
        let eq = t.lower.eq.as_ref().unwrap();
        assert_eq!(eq.x_coeffs.row(0), &[int(0), int(1)]);
        assert_eq!(eq.y_coeffs.row(0), &[int(-1), int(-1)]);
        assert_eq!(eq.rhs, vec![int(0)]);
        assert_eq!(tr.x_projection, vec![0]);
    }

    #[test]
    fn level_auxiliary_is_pointwise_exact() {
        let p = corpus::tracking_follower_optimistic();
        let (t, _) = level_auxiliary(&p).unwrap();
        // ȳ on the optimal level (ȳ = x): value matches the source, -x.
        assert_eq!(
            evaluate_leader(&t, &[rat(1, 2), rat(1, 2)]).unwrap(),
            Eval::Value(rat(-1, 2))
        );
        // ȳ off the level: the coupling pair ε = 0 is unsatisfiable.
        assert_eq!(evaluate_leader(&t, &[rat(1, 2), int(1)]).unwrap(), Eval::Infeasible);
    }

    #[test]
    fn level_penalty_prices_the_slack_and_drops_coupling() {
        let p = corpus::tracking_follower_optimistic();
        let (aux, _) = level_auxiliary(&p).unwrap();
        let (t, tr) = level_penalty(&aux, &int(2)).unwrap();
        assert_eq!(t.class, ProblemClass::OptNoCoupling);
        assert_eq!(t.n_x(), aux.n_x());
        assert_eq!(t.n_y(), aux.n_y());
        assert!(t.coupling.is_none());
        assert_eq!(t.cost_y.as_ref().unwrap(), &vec![int(0), int(2)]);
        assert_eq!(t.n_lower_eq_rows(), 1);
        assert_eq!(tr.kappa, Some(int(2)));
        // Pointwise: F_κ(x, ȳ) = -ȳ + κ(ȳ - x).
        assert_eq!(evaluate_leader(&t, &[int(1), int(2)]).unwrap(), Eval::Value(int(0)));
        assert_eq!(evaluate_leader(&t, &[int(1), int(1)]).unwrap(), Eval::Value(int(-1)));
        // Below the exactness threshold the slack is profitable: κ = 1/2.
        let (cheap, _) = level_penalty(&aux, &rat(1, 2)).unwrap();
        assert_eq!(
            evaluate_leader(&cheap, &[int(1), int(2)]).unwrap(),
            Eval::Value(rat(-3, 2))
        );
    }

    #[test]
    fn level_penalty_rejects_foreign_coupling_blocks() {
        let p = corpus::greedy_follower_blocked();
        assert!(matches!(
            level_penalty(&p, &int(2)),
            Err(ReformError::UnsupportedShape(_))
        ));
    }

    #[test]
    fn sense_swap_requires_the_pinned_slack_shape() {
        let p = corpus::tracking_follower_optimistic();
        // Raw opt_nc: no equality row pinning a slack.
        assert!(matches!(sense_swap(&p), Err(ReformError::UnsupportedShape(_))));
        // Through the level stages the shape is present.
        let (aux, _) = level_auxiliary(&p).unwrap();
        let (pen, _) = level_penalty(&aux, &int(2)).unwrap();
        let (sw, tr) = sense_swap(&pen).unwrap();
        assert_eq!(sw.class, ProblemClass::PessNoCoupling);
        assert_eq!(tr.x_projection, vec![0, 1]);
        // Pointwise equality of the two senses (the slack is pinned).
        for x in [[int(0), int(0)], [int(1), int(1)], [int(1), int(2)]] {
            assert_eq!(
                evaluate_leader(&sw, &x).unwrap(),
                evaluate_leader(&pen, &x).unwrap()
            );
        }
    }

    #[test]
    fn epigraph_adds_a_free_variable_and_one_coupling_row() {
        let p = corpus::indifferent_follower_pessimistic();
        let (t, tr) = epigraph(&p).unwrap();
        assert_eq!(t.class, ProblemClass::PessCoupling);
        assert_eq!(t.n_x(), p.n_x() + 1);
        assert_eq!(t.n_y(), p.n_y());
        assert_eq!(t.n_coupling_rows(), 1);
        assert_eq!(t.cost_x, vec![int(0), int(1)]);
        assert!(t.cost_y.is_none());
        // Row: t - dᵀy >= 0 with d = (1).
        let cb = t.coupling.as_ref().unwrap();
        assert_eq!(cb.x_coeffs.row(0), &[int(0), int(1)]);
        assert_eq!(cb.y_coeffs.row(0), &[int(-1)]);
        assert_eq!(cb.rhs, vec![int(0)]);
        assert_eq!(tr.x_projection, vec![0]);
        // Pointwise: (x, t) is viable iff t >= worst-case inner value (= 1).
        assert_eq!(evaluate_leader(&t, &[rat(1, 2), int(1)]).unwrap(), Eval::Value(int(1)));
        assert_eq!(
            evaluate_leader(&t, &[rat(1, 2), int(2)]).unwrap(),
            Eval::Value(int(2))
        );
        assert_eq!(evaluate_leader(&t, &[rat(1, 2), rat(1, 2)]).unwrap(), Eval::Infeasible);
    }

    #[test]
    fn wrong_class_inputs_are_rejected() {
        let pcc = corpus::forced_right_endpoint();
        let onc = corpus::tracking_follower_optimistic();
        let occ = corpus::greedy_follower_blocked();
        let pnc = corpus::tracking_follower_pessimistic();
        assert!(matches!(stacked_followers(&onc), Err(ReformError::WrongClass { .. })));
        assert!(matches!(penalty_lift(&pcc, &int(1)), Err(ReformError::WrongClass { .. })));
        assert!(matches!(level_auxiliary(&occ), Err(ReformError::WrongClass { .. })));
        assert!(matches!(level_penalty(&pnc, &int(1)), Err(ReformError::WrongClass { .. })));
        assert!(matches!(sense_swap(&occ), Err(ReformError::WrongClass { .. })));
        assert!(matches!(epigraph(&onc), Err(ReformError::WrongClass { .. })));
    }

    #[test]
    fn negative_weights_are_rejected() {
        let occ = corpus::greedy_follower_blocked();
        assert!(matches!(
            penalty_lift(&occ, &int(-1)),
            Err(ReformError::NegativeWeight(_))
        ));
    }
}
