//! Instance files and a seeded instance generator.
//!
//! An instance file is a single JSON document carrying one problem. Every
//! coefficient is a rational string matching `-?[0-9]+(/[1-9][0-9]*)?` —
//! never a float — so what is on disk is exactly what the solvers compute
//! with. Matrices are flat arrays in row-major order; their shapes are
//! pinned by `nx`, `ny`, and the right-hand-side lengths (`h`, `b`, `a`,
//! `b_eq`), so a length mismatch is always detectable.
//!
//! The generator builds random instances that satisfy the standing
//! assumption *by construction*:
//!
//! * the leader set `X` is a box (nonempty, bounded);
//! * the follower matrix `D` contains `+e_j` and `-e_j` rows for every
//!   variable, so the recession cone of `{y : Dy >= 0}` is trivial and the
//!   follower's feasible set is compact for every `x`;
//! * every right-hand side is anchored so that the follower box's center
//!   `ŷ` stays feasible for **all** `x in X` (the `x`-part of each row is
//!   offset by its worst case over the vertices of `X`), hence `S(x)` is
//!   never empty;
//! * coupling rows are anchored at the center `x̂` of `X`: for existential
//!   (optimistic) coupling the right-hand side keeps one known point of
//!   `S(x̂)` feasible, for universal (pessimistic) coupling it keeps the
//!   row-wise worst point of `S(x̂)` feasible — so the generated problem
//!   always has at least one feasible leader decision.
//!
//! Generation is deterministic in the seed; identical parameters produce
//! byte-identical serialized files.

use crate::linalg::{dot, format_rational, int, parse_rational, rat, RatMatrix, RatVector, Rational};
use crate::lp::{LpProblem, LpStatus};
use crate::model::{
    check_standing_assumption, BilevelProblem, CouplingBlock, LowerEqualities, LowerLevel,
    ModelError, ProblemClass,
};
use crate::polyhedron::Polyhedron;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The only file format version this build reads and writes.
pub const FORMAT_VERSION: i64 = 1;

/// Free-form descriptive fields carried alongside the coefficient data.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl Metadata {
    pub fn is_empty(&self) -> bool {
        self.name.is_none() && self.seed.is_none() && self.provenance.is_none()
    }
}

/// A parsed instance: the problem plus whatever metadata the file carried.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub problem: BilevelProblem,
    pub metadata: Metadata,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    /// The text is not well-formed JSON; the message carries line/column.
    #[error("syntax error: {0}")]
    Syntax(serde_json::Error),
    /// The document declares a format version this build does not read.
    #[error("unsupported format_version {found} (this build reads version {FORMAT_VERSION})")]
    Version { found: i64 },
    /// A specific field is missing, malformed, or inconsistent.
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    /// The blocks parse individually but do not assemble into a problem.
    #[error("inconsistent instance: {0}")]
    Model(#[from] ModelError),
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> InstanceError {
    InstanceError::Field { field: field.into(), message: message.into() }
}

/// The raw document shape. Field names match the file format; matrices are
/// flat row-major arrays of rational strings.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    format_version: i64,
    kind: String,
    nx: u64,
    ny: u64,
    c: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<Vec<String>>,
    f: Vec<String>,
    #[serde(rename = "G")]
    g_mat: Vec<String>,
    h: Vec<String>,
    #[serde(rename = "C")]
    c_mat: Vec<String>,
    #[serde(rename = "D")]
    d_mat: Vec<String>,
    b: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "C_eq")]
    c_eq: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "D_eq")]
    d_eq: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_eq: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "A")]
    a_mat: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "B")]
    b_mat: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<Metadata>,
}

fn parse_vec(field: &str, raw: &[String]) -> Result<RatVector, InstanceError> {
    raw.iter()
        .enumerate()
        .map(|(i, s)| parse_rational(s).map_err(|e| field_err(format!("{field}[{i}]"), e)))
        .collect()
}

fn parse_vec_len(
    field: &str,
    raw: &[String],
    expect: usize,
    what: &str,
) -> Result<RatVector, InstanceError> {
    if raw.len() != expect {
        return Err(field_err(
            field,
            format!("expected {expect} entries ({what}), found {}", raw.len()),
        ));
    }
    parse_vec(field, raw)
}

fn parse_mat(
    field: &str,
    raw: &[String],
    rows: usize,
    cols: usize,
) -> Result<RatMatrix, InstanceError> {
    if raw.len() != rows * cols {
        return Err(field_err(
            field,
            format!(
                "expected {rows} x {cols} = {} entries in row-major order, found {}",
                rows * cols,
                raw.len()
            ),
        ));
    }
    let flat = parse_vec(field, raw)?;
    Ok(RatMatrix::from_rows(cols, flat.chunks(cols).map(<[Rational]>::to_vec).collect()))
}

/// Parse an instance document. Errors carry the offending field (or a JSON
/// line/column for syntax errors) so files can be fixed by hand.
pub fn parse(text: &str) -> Result<Instance, InstanceError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(InstanceError::Syntax)?;
    match value.get("format_version").and_then(serde_json::Value::as_i64) {
        None => return Err(field_err("format_version", "missing or not an integer")),
        Some(v) if v != FORMAT_VERSION => return Err(InstanceError::Version { found: v }),
        Some(_) => {}
    }
    let raw: RawInstance = serde_json::from_value(value)
        .map_err(|e| field_err("(document)", e.to_string()))?;
    raw_to_instance(raw)
}

fn raw_to_instance(raw: RawInstance) -> Result<Instance, InstanceError> {
    let class = ProblemClass::from_tag(&raw.kind).ok_or_else(|| {
        field_err(
            "kind",
            format!("unknown kind {:?}; expected opt_nc, opt_cc, pess_nc, or pess_cc", raw.kind),
        )
    })?;
    let nx = usize::try_from(raw.nx).map_err(|_| field_err("nx", "out of range"))?;
    let ny = usize::try_from(raw.ny).map_err(|_| field_err("ny", "out of range"))?;
    if nx == 0 {
        return Err(field_err("nx", "the leader needs at least one variable"));
    }

    let cost_x = parse_vec_len("c", &raw.c, nx, "one per leader variable")?;
    let f = parse_vec_len("f", &raw.f, ny, "one per follower variable")?;
    let cost_y = match (raw.d, class == ProblemClass::PessCoupling) {
        (Some(_), true) => {
            return Err(field_err("d", "forbidden for kind \"pess_cc\" (no follower cost there)"));
        }
        (None, false) => {
            return Err(field_err("d", format!("required for kind {:?}", class.tag())));
        }
        (Some(d), false) => Some(parse_vec_len("d", &d, ny, "one per follower variable")?),
        (None, true) => None,
    };

    let h = parse_vec("h", &raw.h)?;
    let g_mat = parse_mat("G", &raw.g_mat, h.len(), nx)?;
    let b = parse_vec("b", &raw.b)?;
    let c_mat = parse_mat("C", &raw.c_mat, b.len(), nx)?;
    let d_mat = parse_mat("D", &raw.d_mat, b.len(), ny)?;

    let eq = match (raw.c_eq, raw.d_eq, raw.b_eq) {
        (None, None, None) => None,
        (Some(ce), Some(de), Some(be)) => {
            let rhs = parse_vec("b_eq", &be)?;
            Some(LowerEqualities {
                x_coeffs: parse_mat("C_eq", &ce, rhs.len(), nx)?,
                y_coeffs: parse_mat("D_eq", &de, rhs.len(), ny)?,
                rhs,
            })
        }
        _ => {
            return Err(field_err(
                "C_eq/D_eq/b_eq",
                "the equality block must be given completely or not at all",
            ));
        }
    };

    let coupling = if class.has_coupling() {
        let (am, bm, av) = match (raw.a_mat, raw.b_mat, raw.a) {
            (Some(am), Some(bm), Some(av)) => (am, bm, av),
            _ => {
                return Err(field_err(
                    "A/B/a",
                    format!("kind {:?} requires the full coupling block", class.tag()),
                ));
            }
        };
        let rhs = parse_vec("a", &av)?;
        Some(CouplingBlock {
            x_coeffs: parse_mat("A", &am, rhs.len(), nx)?,
            y_coeffs: parse_mat("B", &bm, rhs.len(), ny)?,
            rhs,
        })
    } else {
        if raw.a_mat.is_some() || raw.b_mat.is_some() || raw.a.is_some() {
            return Err(field_err(
                "A/B/a",
                format!("kind {:?} must not carry a coupling block", class.tag()),
            ));
        }
        None
    };

    let leader_set = Polyhedron::new(g_mat, h)
        .map_err(|e| field_err("G/h", e.to_string()))?;
    let problem = BilevelProblem::new(
        class,
        cost_x,
        cost_y,
        leader_set,
        LowerLevel { cost: f, x_coeffs: c_mat, y_coeffs: d_mat, rhs: b, eq },
        coupling,
    )?;
    Ok(Instance { problem, metadata: raw.metadata.unwrap_or_default() })
}

fn format_vec(v: &[Rational]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

fn format_mat(m: &RatMatrix) -> Vec<String> {
    m.rows_iter().flat_map(|row| row.iter().map(format_rational)).collect()
}

/// Serialize a problem (plus metadata) to the file format. Rationals are
/// written in reduced form, so `parse(serialize(p)) == p` exactly.
pub fn serialize(problem: &BilevelProblem, metadata: &Metadata) -> String {
    let raw = RawInstance {
        format_version: FORMAT_VERSION,
        kind: problem.class.tag().to_string(),
        nx: problem.n_x() as u64,
        ny: problem.n_y() as u64,
        c: format_vec(&problem.cost_x),
        d: problem.cost_y.as_ref().map(|d| format_vec(d)),
        f: format_vec(&problem.lower.cost),
        g_mat: format_mat(problem.leader_set.mat()),
        h: format_vec(problem.leader_set.rhs()),
        c_mat: format_mat(&problem.lower.x_coeffs),
        d_mat: format_mat(&problem.lower.y_coeffs),
        b: format_vec(&problem.lower.rhs),
        c_eq: problem.lower.eq.as_ref().map(|e| format_mat(&e.x_coeffs)),
        d_eq: problem.lower.eq.as_ref().map(|e| format_mat(&e.y_coeffs)),
        b_eq: problem.lower.eq.as_ref().map(|e| format_vec(&e.rhs)),
        a_mat: problem.coupling.as_ref().map(|cb| format_mat(&cb.x_coeffs)),
        b_mat: problem.coupling.as_ref().map(|cb| format_mat(&cb.y_coeffs)),
        a: problem.coupling.as_ref().map(|cb| format_vec(&cb.rhs)),
        metadata: if metadata.is_empty() { None } else { Some(metadata.clone()) },
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("instances always serialize");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("generator parameter out of range: {0}")]
    Params(String),
}

/// Desk-scale caps for the generator.
pub const GEN_MAX_VARS: usize = 3;
pub const GEN_MAX_LOWER_ROWS: usize = 8;
pub const GEN_MAX_COUPLING_ROWS: usize = 3;

/// One random coefficient: numerator in `-4..=4`, denominator 1 or 2.
fn small_rat(rng: &mut ChaCha8Rng) -> Rational {
    let numer = rng.gen_range(-4i64..=4);
    let denom = if rng.gen_bool(0.3) { 2 } else { 1 };
    rat(numer, denom)
}

fn small_rat_vec(rng: &mut ChaCha8Rng, n: usize) -> RatVector {
    (0..n).map(|_| small_rat(rng)).collect()
}

/// A random vector that is not identically zero (re-drawn until nonzero).
fn nonzero_vec(rng: &mut ChaCha8Rng, n: usize) -> RatVector {
    loop {
        let v = small_rat_vec(rng, n);
        if v.iter().any(|r| !r.is_zero()) {
            return v;
        }
    }
}

/// A strictly positive slack margin.
fn margin(rng: &mut ChaCha8Rng) -> Rational {
    let choices = [rat(1, 2), int(1), rat(3, 2), int(2)];
    choices[rng.gen_range(0..choices.len())].clone()
}

/// Minimum of a linear function over an explicit point list.
fn min_over(points: &[RatVector], coeffs: &[Rational]) -> Rational {
    points
        .iter()
        .map(|p| dot(coeffs, p))
        .min()
        .expect("point list is never empty")
}

/// Build a random instance of the requested kind. Deterministic in `seed`.
///
/// Guarantees by construction (checked by a hard assertion before
/// returning): the result passes every standing-assumption check, and the
/// center of the leader box is a feasible leader decision.
pub fn generate(
    seed: u64,
    nx: usize,
    ny: usize,
    m_lower: usize,
    m_coupling: usize,
    kind: ProblemClass,
) -> Result<Instance, GenerateError> {
    let params = |msg: String| Err(GenerateError::Params(msg));
    if nx == 0 || nx > GEN_MAX_VARS || ny == 0 || ny > GEN_MAX_VARS {
        return params(format!("nx and ny must be in 1..={GEN_MAX_VARS} (got {nx}, {ny})"));
    }
    if m_lower < 2 * ny || m_lower > GEN_MAX_LOWER_ROWS {
        return params(format!(
            "m_lower must be in {}..={GEN_MAX_LOWER_ROWS} (2 box rows per follower variable, got {m_lower})",
            2 * ny
        ));
    }
    if m_coupling > GEN_MAX_COUPLING_ROWS {
        return params(format!("m_coupling must be <= {GEN_MAX_COUPLING_ROWS} (got {m_coupling})"));
    }
    if !kind.has_coupling() && m_coupling != 0 {
        return params(format!("kind {:?} takes m_coupling = 0 (got {m_coupling})", kind.tag()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two = int(2);

    // Leader box: l_j <= x_j <= u_j with small rational bounds.
    let mut x_lo = RatVector::new();
    let mut x_hi = RatVector::new();
    for _ in 0..nx {
        let lo = int(rng.gen_range(-3i64..=0));
        let hi = &lo + int(rng.gen_range(1i64..=4));
        x_lo.push(lo);
        x_hi.push(hi);
    }
    let mut g_rows = Vec::new();
    let mut h = RatVector::new();
    for j in 0..nx {
        let mut row = crate::linalg::zeros(nx);
        row[j] = int(1);
        g_rows.push(row);
        h.push(x_lo[j].clone());
    }
    for j in 0..nx {
        let mut row = crate::linalg::zeros(nx);
        row[j] = int(-1);
        g_rows.push(row);
        h.push(-&x_hi[j]);
    }
    let g_mat = RatMatrix::from_rows(nx, g_rows);

    // All 2^nx corners of the leader box: enough to take exact extrema of
    // any linear function of x over X.
    let mut x_vertices: Vec<RatVector> = vec![Vec::new()];
    for j in 0..nx {
        let mut next = Vec::new();
        for v in &x_vertices {
            let mut lo_v = v.clone();
            lo_v.push(x_lo[j].clone());
            next.push(lo_v);
            let mut hi_v = v.clone();
            hi_v.push(x_hi[j].clone());
            next.push(hi_v);
        }
        x_vertices = next;
    }
    let x_center: RatVector = (0..nx).map(|j| (&x_lo[j] + &x_hi[j]) / &two).collect();

    // Follower base box and its center ŷ, the universal anchor point.
    let mut y_lo = RatVector::new();
    let mut y_hi = RatVector::new();
    for _ in 0..ny {
        let lo = int(rng.gen_range(-3i64..=0));
        let hi = &lo + int(rng.gen_range(1i64..=4));
        y_lo.push(lo);
        y_hi.push(hi);
    }
    let y_center: RatVector = (0..ny).map(|j| (&y_lo[j] + &y_hi[j]) / &two).collect();

    // Lower rows: C x + D y >= b. Box rows first (D = ±e_j), then free-form
    // rows. Every right-hand side is anchored so ŷ satisfies the row for
    // every x in X: b_r = min over vert(X) of (C_r · x) + D_r · ŷ − slack.
    let mut c_rows = Vec::new();
    let mut d_rows = Vec::new();
    let mut b = RatVector::new();
    for j in 0..ny {
        let c_row = small_rat_vec(&mut rng, nx);
        let mut d_row = crate::linalg::zeros(ny);
        d_row[j] = int(1);
        let anchor = min_over(&x_vertices, &c_row) + &y_lo[j];
        c_rows.push(c_row);
        d_rows.push(d_row);
        b.push(anchor);
    }
    for j in 0..ny {
        let c_row = small_rat_vec(&mut rng, nx);
        let mut d_row = crate::linalg::zeros(ny);
        d_row[j] = int(-1);
        let anchor = min_over(&x_vertices, &c_row) - &y_hi[j];
        c_rows.push(c_row);
        d_rows.push(d_row);
        b.push(anchor);
    }
    for _ in 0..(m_lower - 2 * ny) {
        let c_row = small_rat_vec(&mut rng, nx);
        let d_row = nonzero_vec(&mut rng, ny);
        let anchor = min_over(&x_vertices, &c_row) + dot(&d_row, &y_center) - margin(&mut rng);
        c_rows.push(c_row);
        d_rows.push(d_row);
        b.push(anchor);
    }
    let c_mat = RatMatrix::from_rows(nx, c_rows);
    let d_mat = RatMatrix::from_rows(ny, d_rows);

    // Objectives: small rationals, zeros allowed (indifference is a feature).
    let f = small_rat_vec(&mut rng, ny);
    let cost_x = small_rat_vec(&mut rng, nx);
    let cost_y = if kind == ProblemClass::PessCoupling {
        None
    } else {
        Some(small_rat_vec(&mut rng, ny))
    };

    // Coupling rows, anchored at the leader-box center x̂ so that x̂ is
    // always a feasible leader decision of the finished problem.
    let coupling = if kind.has_coupling() {
        let rhs_at_center: RatVector = (0..m_lower)
            .map(|r| &b[r] - dot(c_mat.row(r), &x_center))
            .collect();
        let follower_at_center =
            Polyhedron::new(d_mat.clone(), rhs_at_center).expect("consistent by construction");
        let base = LpProblem::minimize(f.clone(), follower_at_center.clone());
        let base_sol = crate::lp::solve_lp(&base);
        assert_eq!(base_sol.status, LpStatus::Optimal, "anchored follower set is compact");
        let phi_center = base_sol.value.clone().expect("optimal LP carries a value");
        let witness = base_sol.point.clone().expect("optimal LP carries a point");
        let level_mat = RatMatrix::from_rows(ny, vec![f.clone()]);
        let level_rhs = vec![phi_center.clone()];

        let mut a_rows = Vec::new();
        let mut b_rows = Vec::new();
        let mut a_rhs = RatVector::new();
        for _ in 0..m_coupling {
            let a_row = small_rat_vec(&mut rng, nx);
            let b_row = nonzero_vec(&mut rng, ny);
            let worst = if kind == ProblemClass::PessCoupling {
                // Universal rows must hold at the row-wise worst optimal
                // response: min B_i · y over S(x̂).
                let lp = LpProblem::minimize(b_row.clone(), follower_at_center.clone())
                    .with_equalities(level_mat.clone(), level_rhs.clone());
                let sol = crate::lp::solve_lp(&lp);
                assert_eq!(sol.status, LpStatus::Optimal, "S(x̂) is compact and nonempty");
                sol.value.expect("optimal LP carries a value")
            } else {
                // Existential rows only need one shared point of S(x̂).
                dot(&b_row, &witness)
            };
            let rhs = dot(&a_row, &x_center) + worst - margin(&mut rng);
            a_rows.push(a_row);
            b_rows.push(b_row);
            a_rhs.push(rhs);
        }
        Some(CouplingBlock {
            x_coeffs: RatMatrix::from_rows(nx, a_rows),
            y_coeffs: RatMatrix::from_rows(ny, b_rows),
            rhs: a_rhs,
        })
    } else {
        None
    };

    let problem = BilevelProblem::new(
        kind,
        cost_x,
        cost_y,
        Polyhedron::new(g_mat, h).expect("consistent by construction"),
        LowerLevel { cost: f, x_coeffs: c_mat, y_coeffs: d_mat, rhs: b, eq: None },
        coupling,
    )
    .expect("generated blocks are mutually consistent");

    let report = check_standing_assumption(&problem);
    assert!(
        report.all_pass(),
        "generator invariant violated (seed {seed}): {report:?}"
    );

    Ok(Instance {
        problem,
        metadata: Metadata {
            name: Some(format!("gen-{}-{seed}", kind.tag())),
            seed: Some(seed),
            provenance: Some(format!(
                "generate(seed={seed}, nx={nx}, ny={ny}, m_lower={m_lower}, m_coupling={m_coupling}, kind={})",
                kind.tag()
            )),
        },
    })
}
