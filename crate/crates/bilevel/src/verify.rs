//! End-to-end verification: rewrite an instance, solve every stage with the
//! class-appropriate oracle, and check that each rewrite preserved exactly
//! what it promises to preserve.
//!
//! A [`VerificationReport`] is a list of named boolean checks (plus the raw
//! stage data behind them); the whole report passes iff every check passes.
//! The batteries by instance kind:
//!
//! * `pess_cc` — the full rewrite chain runs end to end: value agreement
//!   across the stacked-followers rewrite (with the projected optimum
//!   re-certified in the source), both penalty stages at searched weights,
//!   the slack-pinning stage, the sense swap (including a sampled pointwise
//!   comparison), the row-wise universal-constraint equivalences, whole-chain
//!   value equality, and the randomized falsifier.
//! * `opt_cc` — penalty weight search + certification, value agreement
//!   between the coupled and penalized problems, falsifier.
//! * `opt_nc` — the slack-pin / penalty / sense-swap chain with value
//!   agreement at each arc, the sampled pointwise swap comparison, and the
//!   falsifier.
//! * `pess_nc` — value agreement across the epigraph rewrite, falsifier.
//!
//! Rewrite or weight-search failures are reported as failed checks, not
//! panics: an unsatisfiable coupling row, for example, shows up as a failed
//! penalty check with the searcher's diagnosis in the detail column.

use crate::kappa::{search_kappa, validate_kappa, KappaCertificate};
use crate::linalg::format_rational;
use crate::model::{
    check_pc_feasible, evaluate_leader, BilevelProblem, Eval, EvalError, ProblemClass,
};
use crate::oracle::{
    check_universal_all_rows, check_universal_row_equivalence, falsify, sample_points, solve,
    BilevelSolution, OracleError, SolveStatus,
};
use crate::reform::{
    epigraph, full_chain, level_auxiliary, level_penalty, sense_swap, ReformTrace, TransformKind,
};
use serde::Serialize;
use std::time::Instant;
use thiserror::Error;

/// Sample counts and seeding for the randomized parts of a verification.
#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Leader decisions sampled for the row-wise universal-check agreement.
    pub row_samples: usize,
    /// Lifted leader decisions sampled for the sense-swap pointwise check.
    pub swap_samples: usize,
    /// Leader decisions handed to the falsifier.
    pub falsifier_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 0, row_samples: 50, swap_samples: 100, falsifier_samples: 1000 }
    }
}

/// One named boolean outcome with a human-readable detail line.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// What one problem (source or rewrite stage) looked like and how its
/// oracle run went.
#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub label: String,
    pub kind: String,
    pub leader_vars: usize,
    pub follower_vars: usize,
    pub lower_rows: usize,
    pub coupling_rows: usize,
    /// "optimal" | "infeasible" | "unbounded".
    pub status: String,
    /// Exact optimal value, when optimal.
    pub value: Option<String>,
    pub millis: u128,
}

/// A penalty weight the verification searched or checked.
#[derive(Clone, Debug, Serialize)]
pub struct WeightReport {
    pub stage: String,
    pub kappa: String,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub instance: String,
    pub kind: String,
    pub stages: Vec<StageReport>,
    pub weights: Vec<WeightReport>,
    pub checks: Vec<CheckOutcome>,
    /// True iff every check passed.
    pub pass: bool,
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Everything the batteries accumulate, bundled to keep signatures short.
struct Collector {
    stages: Vec<StageReport>,
    weights: Vec<WeightReport>,
    checks: Vec<CheckOutcome>,
}

impl Collector {
    fn new() -> Self {
        Collector { stages: Vec::new(), weights: Vec::new(), checks: Vec::new() }
    }

    fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckOutcome { name: name.to_string(), pass, detail: detail.into() });
    }

    fn weight(&mut self, stage: &str, cert: &KappaCertificate) {
        self.weights.push(WeightReport {
            stage: stage.to_string(),
            kappa: format_rational(&cert.kappa),
            iterations: cert.iterations,
        });
    }

    /// Solve `p`, record the stage row, and hand the solution back.
    fn solve_stage(
        &mut self,
        label: &str,
        p: &BilevelProblem,
    ) -> Result<BilevelSolution, VerifyError> {
        let start = Instant::now();
        let sol = solve(p)?;
        let millis = start.elapsed().as_millis();
        self.stages.push(StageReport {
            label: label.to_string(),
            kind: p.class.tag().to_string(),
            leader_vars: p.n_x(),
            follower_vars: p.n_y(),
            lower_rows: p.n_lower_rows(),
            coupling_rows: p.n_coupling_rows(),
            status: match sol.status {
                SolveStatus::Optimal => "optimal".to_string(),
                SolveStatus::Infeasible => "infeasible".to_string(),
                SolveStatus::Unbounded => "unbounded".to_string(),
            },
            value: sol.value.as_ref().map(format_rational),
            millis,
        });
        Ok(sol)
    }
}

fn describe(sol: &BilevelSolution) -> String {
    match (&sol.status, &sol.value) {
        (SolveStatus::Optimal, Some(v)) => format!("optimal, value {}", format_rational(v)),
        (SolveStatus::Infeasible, _) => "infeasible".to_string(),
        (SolveStatus::Unbounded, _) => "unbounded".to_string(),
        _ => "optimal (value missing?)".to_string(),
    }
}

fn outcomes_agree(a: &BilevelSolution, b: &BilevelSolution) -> bool {
    a.status == b.status && a.value == b.value
}

/// Value agreement across one rewrite arc, plus — when both sides are
/// optimal — re-certification of the target's optimum projected into the
/// source problem.
fn arc_agreement(
    col: &mut Collector,
    name: &str,
    source: &BilevelProblem,
    source_sol: &BilevelSolution,
    target_sol: &BilevelSolution,
    trace: &ReformTrace,
) -> Result<(), VerifyError> {
    if !outcomes_agree(source_sol, target_sol) {
        col.check(
            name,
            false,
            format!("source {}; target {}", describe(source_sol), describe(target_sol)),
        );
        return Ok(());
    }
    if source_sol.status != SolveStatus::Optimal {
        col.check(name, true, format!("both sides {}", describe(source_sol)));
        return Ok(());
    }
    let value = source_sol.value.as_ref().expect("optimal");
    let x_target = target_sol.x.as_ref().expect("optimal");
    let x_source = trace.project_x(x_target);
    let projected_ok = match evaluate_leader(source, &x_source)? {
        Eval::Value(v) => v == *value,
        Eval::Infeasible => false,
    };
    let universal_ok = if source.class == ProblemClass::PessCoupling {
        check_pc_feasible(source, &x_source)?
    } else {
        true
    };
    col.check(
        name,
        projected_ok && universal_ok,
        if projected_ok && universal_ok {
            format!("values agree ({}); projected optimum re-certifies", describe(source_sol))
        } else {
            format!(
                "values agree but the projected optimum does not re-certify \
                 (pointwise ok: {projected_ok}, universal rows ok: {universal_ok})"
            )
        },
    );
    Ok(())
}

/// Sampled pointwise agreement of leader evaluations across a sense swap:
/// the swapped problem must assign the *same* value to every leader
/// decision, because the pinned slack leaves the follower indifferent.
fn swap_pointwise_check(
    col: &mut Collector,
    before: &BilevelProblem,
    after: &BilevelProblem,
    opts: &VerifyOptions,
) -> Result<(), VerifyError> {
    let samples = sample_points(&before.leader_set, opts.swap_samples, opts.seed ^ 0x5a5a);
    let mut disagreements = 0usize;
    for x in &samples {
        let a = evaluate_leader(before, x)?;
        let b = evaluate_leader(after, x)?;
        if a != b {
            disagreements += 1;
        }
    }
    col.check(
        "sense_swap_pointwise_agreement",
        disagreements == 0,
        format!("{} sampled leader decisions, {disagreements} disagreement(s)", samples.len()),
    );
    Ok(())
}

fn falsifier_check(
    col: &mut Collector,
    p: &BilevelProblem,
    sol: &BilevelSolution,
    opts: &VerifyOptions,
) {
    let falsified = falsify(p, sol, opts.falsifier_samples, opts.seed);
    col.check(
        "falsifier_found_nothing",
        !falsified,
        format!(
            "{} independent samples against the claim `{}`",
            opts.falsifier_samples,
            describe(sol)
        ),
    );
}

/// Run the battery matching the instance's class.
pub fn verify_instance(
    p: &BilevelProblem,
    id: &str,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let mut col = Collector::new();
    match p.class {
        ProblemClass::PessCoupling => battery_pess_cc(&mut col, p, opts)?,
        ProblemClass::OptCoupling => battery_opt_cc(&mut col, p, opts)?,
        ProblemClass::OptNoCoupling => battery_opt_nc(&mut col, p, opts)?,
        ProblemClass::PessNoCoupling => battery_pess_nc(&mut col, p, opts)?,
    }
    let pass = col.checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        instance: id.to_string(),
        kind: p.class.tag().to_string(),
        stages: col.stages,
        weights: col.weights,
        checks: col.checks,
        pass,
    })
}

fn battery_pess_cc(
    col: &mut Collector,
    p: &BilevelProblem,
    opts: &VerifyOptions,
) -> Result<(), VerifyError> {
    let src_sol = col.solve_stage("source", p)?;

    // Row-wise universal-constraint equivalences on sampled leader
    // decisions: the direct row check against the worst optimal response
    // must agree with the existence-form check, row by row and in
    // conjunction.
    let samples = sample_points(&p.leader_set, opts.row_samples, opts.seed ^ 0xa11);
    let m = p.n_coupling_rows();
    let mut row_disagreements = 0usize;
    let mut all_disagreements = 0usize;
    for x in &samples {
        for i in 0..m {
            let (direct, existence) = check_universal_row_equivalence(p, x, i)?;
            if direct != existence {
                row_disagreements += 1;
            }
        }
        let (direct_all, existence_all) = check_universal_all_rows(p, x)?;
        if direct_all != existence_all {
            all_disagreements += 1;
        }
    }
    col.check(
        "universal_row_equivalence",
        row_disagreements == 0,
        format!(
            "{} sampled decisions x {m} rows, {row_disagreements} disagreement(s)",
            samples.len()
        ),
    );
    col.check(
        "universal_all_rows_agreement",
        all_disagreements == 0,
        format!("{} sampled decisions, {all_disagreements} disagreement(s)", samples.len()),
    );

    falsifier_check(col, p, &src_sol, opts);

    let chain = match full_chain(p) {
        Ok(chain) => chain,
        Err(e) => {
            col.check("chain_value_equality", false, format!("chain construction failed: {e}"));
            return Ok(());
        }
    };
    col.weight("coupling_penalty", &chain.kappas[0]);
    col.weight("level_penalty", &chain.kappas[1]);

    let mut sols = Vec::with_capacity(chain.stages.len());
    for stage in &chain.stages {
        let label = stage.trace.transform.tag();
        sols.push(col.solve_stage(label, &stage.problem)?);
    }

    arc_agreement(col, "stacked_value_agreement", p, &src_sol, &sols[0], &chain.stages[0].trace)?;
    arc_agreement(
        col,
        "coupling_penalty_value_agreement",
        &chain.stages[0].problem,
        &sols[0],
        &sols[1],
        &chain.stages[1].trace,
    )?;
    arc_agreement(
        col,
        "slack_pin_value_agreement",
        &chain.stages[1].problem,
        &sols[1],
        &sols[2],
        &chain.stages[2].trace,
    )?;
    arc_agreement(
        col,
        "level_penalty_value_agreement",
        &chain.stages[2].problem,
        &sols[2],
        &sols[3],
        &chain.stages[3].trace,
    )?;
    arc_agreement(
        col,
        "sense_swap_value_agreement",
        &chain.stages[3].problem,
        &sols[3],
        &sols[4],
        &chain.stages[4].trace,
    )?;
    swap_pointwise_check(col, &chain.stages[3].problem, &chain.stages[4].problem, opts)?;

    // Whole-chain equality: every stage (and the source) reports the same
    // outcome, and the final optimum projects to a certified source optimum.
    let all_equal = sols.iter().all(|s| outcomes_agree(&src_sol, s));
    let projection_ok = if all_equal && src_sol.status == SolveStatus::Optimal {
        let x_final = sols[4].x.as_ref().expect("optimal");
        let x_source = chain.project_to_source(x_final);
        let value = src_sol.value.as_ref().expect("optimal");
        check_pc_feasible(p, &x_source)?
            && matches!(evaluate_leader(p, &x_source)?, Eval::Value(v) if v == *value)
    } else {
        all_equal
    };
    col.check(
        "chain_value_equality",
        all_equal && projection_ok,
        if all_equal {
            format!(
                "six stage outcomes all `{}`; final projection re-certifies: {projection_ok}",
                describe(&src_sol)
            )
        } else {
            let mut parts = vec![format!("source {}", describe(&src_sol))];
            for (stage, sol) in chain.stages.iter().zip(&sols) {
                parts.push(format!("{} {}", stage.trace.transform.tag(), describe(sol)));
            }
            parts.join("; ")
        },
    );
    Ok(())
}

fn battery_opt_cc(
    col: &mut Collector,
    p: &BilevelProblem,
    opts: &VerifyOptions,
) -> Result<(), VerifyError> {
    let src_sol = col.solve_stage("source", p)?;
    falsifier_check(col, p, &src_sol, opts);

    match search_kappa(p, TransformKind::PenaltyLift) {
        Err(e) => {
            col.check("penalty_weight_certified", false, format!("search failed: {e}"));
        }
        Ok(cert) => {
            col.weight("coupling_penalty", &cert);
            col.check(
                "penalty_weight_certified",
                validate_kappa(&cert, p),
                format!(
                    "weight {} accepted after {} evaluations",
                    format_rational(&cert.kappa),
                    cert.iterations
                ),
            );
            let (penalized, trace) =
                crate::reform::penalty_lift(p, &cert.kappa).expect("searched weight builds");
            let pen_sol = col.solve_stage("penalty_lift", &penalized)?;
            arc_agreement(col, "coupling_penalty_value_agreement", p, &src_sol, &pen_sol, &trace)?;
        }
    }
    Ok(())
}

fn battery_opt_nc(
    col: &mut Collector,
    p: &BilevelProblem,
    opts: &VerifyOptions,
) -> Result<(), VerifyError> {
    let src_sol = col.solve_stage("source", p)?;
    falsifier_check(col, p, &src_sol, opts);

    let (aux, t_aux) = match level_auxiliary(p) {
        Ok(out) => out,
        Err(e) => {
            col.check("slack_pin_value_agreement", false, format!("rewrite failed: {e}"));
            return Ok(());
        }
    };
    let aux_sol = col.solve_stage("level_auxiliary", &aux)?;
    arc_agreement(col, "slack_pin_value_agreement", p, &src_sol, &aux_sol, &t_aux)?;

    let cert = match search_kappa(&aux, TransformKind::LevelPenalty) {
        Ok(cert) => cert,
        Err(e) => {
            col.check("level_penalty_weight_certified", false, format!("search failed: {e}"));
            return Ok(());
        }
    };
    col.weight("level_penalty", &cert);
    col.check(
        "level_penalty_weight_certified",
        validate_kappa(&cert, &aux),
        format!(
            "weight {} accepted after {} evaluations",
            format_rational(&cert.kappa),
            cert.iterations
        ),
    );
    let (pen, t_pen) = level_penalty(&aux, &cert.kappa).expect("searched weight builds");
    let pen_sol = col.solve_stage("level_penalty", &pen)?;
    arc_agreement(col, "level_penalty_value_agreement", &aux, &aux_sol, &pen_sol, &t_pen)?;

    let (swapped, t_swap) = sense_swap(&pen).expect("penalized level stage has the pinned shape");
    let swap_sol = col.solve_stage("sense_swap", &swapped)?;
    arc_agreement(col, "sense_swap_value_agreement", &pen, &pen_sol, &swap_sol, &t_swap)?;
    swap_pointwise_check(col, &pen, &swapped, opts)?;

    // Source-to-end equality with the final optimum mapped all the way back.
    let agree = outcomes_agree(&src_sol, &swap_sol);
    let projection_ok = if agree && src_sol.status == SolveStatus::Optimal {
        let x_final = swap_sol.x.as_ref().expect("optimal");
        let x_source = t_aux.project_x(&t_pen.project_x(&t_swap.project_x(x_final)));
        let value = src_sol.value.as_ref().expect("optimal");
        matches!(evaluate_leader(p, &x_source)?, Eval::Value(v) if v == *value)
    } else {
        agree
    };
    col.check(
        "chain_value_equality",
        agree && projection_ok,
        format!(
            "source {}; end of chain {}; final projection re-certifies: {projection_ok}",
            describe(&src_sol),
            describe(&swap_sol)
        ),
    );
    Ok(())
}

fn battery_pess_nc(
    col: &mut Collector,
    p: &BilevelProblem,
    opts: &VerifyOptions,
) -> Result<(), VerifyError> {
    let src_sol = col.solve_stage("source", p)?;
    falsifier_check(col, p, &src_sol, opts);

    let (lifted, trace) = match epigraph(p) {
        Ok(out) => out,
        Err(e) => {
            col.check("epigraph_value_agreement", false, format!("rewrite failed: {e}"));
            return Ok(());
        }
    };
    let lift_sol = col.solve_stage("epigraph", &lifted)?;
    arc_agreement(col, "epigraph_value_agreement", p, &src_sol, &lift_sol, &trace)?;
    Ok(())
}
