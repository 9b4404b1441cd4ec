//! Small hand-verified instances used as fixtures across the test suite.
//!
//! Every optimal value quoted below was derived by hand from the instance
//! data and is frozen in tests; the solvers must reproduce them exactly.

use crate::linalg::{int, RatMatrix, RatVector};
use crate::model::{BilevelProblem, CouplingBlock, LowerLevel, ProblemClass};
use crate::polyhedron::Polyhedron;

/// `X = [0, 1]` as the two rows `x >= 0`, `-x >= -1`.
pub fn unit_interval() -> Polyhedron {
    Polyhedron::new(
        RatMatrix::from_rows(1, vec![vec![int(1)], vec![int(-1)]]),
        vec![int(0), int(-1)],
    )
    .expect("consistent dims")
}

/// Follower box `y ∈ [0, 1]`, unaffected by the leader (`C = 0`), with the
/// given objective.
fn indifferent_lower(cost: RatVector) -> LowerLevel {
    LowerLevel {
        cost,
        x_coeffs: RatMatrix::zeros(2, 1),
        y_coeffs: RatMatrix::from_rows(1, vec![vec![int(1)], vec![int(-1)]]),
        rhs: vec![int(0), int(-1)],
        eq: None,
    }
}

/// Pessimistic-with-coupling instance whose universal constraint forces the
/// leader to the right endpoint.
///
/// `X = [0,1]`, follower indifferent on `[0,1]` (`f = 0`, so `S(x) = [0,1]`
/// for every `x`), coupling `x + y >= 1`, leader cost `c = 1`.
/// The constraint must hold for *every* `y ∈ [0,1]`, i.e. for `y = 0`:
/// only `x = 1` survives, and the optimal value is `1`.
pub fn forced_right_endpoint() -> BilevelProblem {
    BilevelProblem::new(
        ProblemClass::PessCoupling,
        vec![int(1)],
        None,
        unit_interval(),
        indifferent_lower(vec![int(0)]),
        Some(CouplingBlock {
            x_coeffs: RatMatrix::from_rows(1, vec![vec![int(1)]]),
            y_coeffs: RatMatrix::from_rows(1, vec![vec![int(1)]]),
            rhs: vec![int(1)],
        }),
    )
    .expect("well-formed fixture")
}

/// Optimistic counterpart of the indifferent follower: `c = 0`, `d = 1`,
/// no coupling. The leader may pick the friendliest `y = 0`; value `0`.
pub fn indifferent_follower_optimistic() -> BilevelProblem {
    BilevelProblem::new(
        ProblemClass::OptNoCoupling,
        vec![int(0)],
        Some(vec![int(1)]),
        unit_interval(),
        indifferent_lower(vec![int(0)]),
        None,
    )
    .expect("well-formed fixture")
}

/// Pessimistic counterpart: the adversarial follower plays `y = 1`; value `1`.
/// Together with [`indifferent_follower_optimistic`] this exhibits the
/// largest possible optimistic/pessimistic gap on the unit box.
pub fn indifferent_follower_pessimistic() -> BilevelProblem {
    BilevelProblem::new(
        ProblemClass::PessNoCoupling,
        vec![int(0)],
        Some(vec![int(1)]),
        unit_interval(),
        indifferent_lower(vec![int(0)]),
        None,
    )
    .expect("well-formed fixture")
}

/// Optimistic-with-coupling instance where the follower's greed binds the
/// coupling row.
///
/// `X = [0,1]`, follower maximizes `y` over `[0,1]` (`f = -1`, so
/// `S(x) = {1}`), coupling `x + y <= 1`, leader cost `c = -1`, `d = 0`.
/// The leader wants `x` large but `y = 1` forces `x = 0`; value `0`.
pub fn greedy_follower_blocked() -> BilevelProblem {
    BilevelProblem::new(
        ProblemClass::OptCoupling,
        vec![int(-1)],
        Some(vec![int(0)]),
        unit_interval(),
        indifferent_lower(vec![int(-1)]),
        Some(CouplingBlock {
            x_coeffs: RatMatrix::from_rows(1, vec![vec![int(-1)]]),
            y_coeffs: RatMatrix::from_rows(1, vec![vec![int(-1)]]),
            rhs: vec![int(-1)],
        }),
    )
    .expect("well-formed fixture")
}

/// Follower tracks the leader exactly: `min y` s.t. `y >= x`, `y <= 2`,
/// so `S(x) = {x}` on `X = [0,1]`.
fn tracking_lower() -> LowerLevel {
    LowerLevel {
        cost: vec![int(1)],
        x_coeffs: RatMatrix::from_rows(1, vec![vec![int(-1)], vec![int(0)]]),
        y_coeffs: RatMatrix::from_rows(1, vec![vec![int(1)], vec![int(-1)]]),
        rhs: vec![int(0), int(-2)],
        eq: None,
    }
}

/// Optimistic, no coupling: `c = 0`, `d = -1` over the tracking follower.
/// Leader value is `-x`, minimized at `x = 1`; value `-1`.
pub fn tracking_follower_optimistic() -> BilevelProblem {
    BilevelProblem::new(
        ProblemClass::OptNoCoupling,
        vec![int(0)],
        Some(vec![int(-1)]),
        unit_interval(),
        tracking_lower(),
        None,
    )
    .expect("well-formed fixture")
}

/// Pessimistic twin of [`tracking_follower_optimistic`]: `S(x)` is a
/// singleton, so worst case equals best case; value `-1`.
pub fn tracking_follower_pessimistic() -> BilevelProblem {
    BilevelProblem::new(
        ProblemClass::PessNoCoupling,
        vec![int(0)],
        Some(vec![int(-1)]),
        unit_interval(),
        tracking_lower(),
        None,
    )
    .expect("well-formed fixture")
}

/// [`forced_right_endpoint`] with its coupling row stated twice. Redundant
/// rows must not change the optimum (`x = 1`, value `1`) and exercise the
/// multi-row universal check.
pub fn duplicated_coupling_row() -> BilevelProblem {
    BilevelProblem::new(
        ProblemClass::PessCoupling,
        vec![int(1)],
        None,
        unit_interval(),
        indifferent_lower(vec![int(0)]),
        Some(CouplingBlock {
            x_coeffs: RatMatrix::from_rows(1, vec![vec![int(1)], vec![int(1)]]),
            y_coeffs: RatMatrix::from_rows(1, vec![vec![int(1)], vec![int(1)]]),
            rhs: vec![int(1), int(1)],
        }),
    )
    .expect("well-formed fixture")
}

/// Optimistic-with-coupling instance whose coupling row `0·x + 0·y >= 1`
/// can never hold: the bilevel problem is infeasible, and no finite penalty
/// weight can drive the constraint violation to zero.
pub fn unsatisfiable_coupling() -> BilevelProblem {
    BilevelProblem::new(
        ProblemClass::OptCoupling,
        vec![int(0)],
        Some(vec![int(0)]),
        unit_interval(),
        indifferent_lower(vec![int(0)]),
        Some(CouplingBlock {
            x_coeffs: RatMatrix::zeros(1, 1),
            y_coeffs: RatMatrix::zeros(1, 1),
            rhs: vec![int(1)],
        }),
    )
    .expect("well-formed fixture")
}
