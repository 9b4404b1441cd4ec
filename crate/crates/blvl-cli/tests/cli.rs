//! End-to-end tests of the `blvl` binary: verb behavior, exit-code
//! contract (0 pass, 1 semantic failure, 2 usage/parse error), sidecar
//! round-trips, and output determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_blvl"));
    // Keep sampled checks small so the suite stays fast; the exactness of
    // each check does not depend on the sample count.
    cmd.env("BLVL_ROW_SAMPLES", "6")
        .env("BLVL_SWAP_SAMPLES", "8")
        .env("BLVL_FALSIFIER_SAMPLES", "40");
    cmd
}

fn instances_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances")
}

fn instance(name: &str) -> PathBuf {
    instances_dir().join(format!("{name}.blvl.json"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn check_passes_on_a_well_posed_instance() {
    let out = run(bin().arg("check").arg(instance("forced_right_endpoint")));
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("PASS"), "unexpected output: {text}");
}

#[test]
fn check_emits_machine_readable_json() {
    let out = run(bin().arg("check").arg(instance("greedy_follower_blocked")).arg("--json"));
    assert_eq!(exit_code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("valid json");
    assert_eq!(doc["kind"], "opt_cc");
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["leader_set_bounded"], true);
}

#[test]
fn check_fails_with_exit_1_when_the_leader_set_is_unbounded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("unbounded.blvl.json");
    // X = {x >= 0}: nonempty but unbounded, so the vertex-based decision
    // procedure for follower nonemptiness cannot run.
    fs::write(
        &path,
        r#"{
  "format_version": 1,
  "kind": "opt_nc",
  "nx": 1,
  "ny": 1,
  "c": ["1"],
  "d": ["0"],
  "f": ["1"],
  "G": ["1"],
  "h": ["0"],
  "C": ["0", "0"],
  "D": ["1", "-1"],
  "b": ["0", "-2"]
}"#,
    )
    .unwrap();
    let out = run(bin().arg("check").arg(&path));
    assert_eq!(exit_code(&out), 1);
    let text = stdout_of(&out);
    assert!(text.contains("leader set bounded ............. NO"), "output: {text}");
    assert!(text.contains("FAIL"));
}

#[test]
fn check_rejects_a_malformed_file_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.blvl.json");
    fs::write(&path, "{\"format_version\": 1, \"kind\": \"opt_nc\"").unwrap();
    let out = run(bin().arg("check").arg(&path));
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("error:"));
}

#[test]
fn check_rejects_an_unknown_format_version_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("future.blvl.json");
    fs::write(&path, "{\"format_version\": 99}").unwrap();
    let out = run(bin().arg("check").arg(&path));
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("format_version"), "stderr: {}", stderr_of(&out));
}

#[test]
fn solve_reports_the_exact_optimum() {
    let out = run(bin().arg("solve").arg(instance("forced_right_endpoint")).arg("--json"));
    assert_eq!(exit_code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("valid json");
    assert_eq!(doc["status"], "optimal");
    assert_eq!(doc["value"], "1");
    assert_eq!(doc["x"][0], "1");
}

#[test]
fn solve_exits_1_on_an_infeasible_instance() {
    let out = run(bin().arg("solve").arg(instance("unsatisfiable_coupling")));
    assert_eq!(exit_code(&out), 1);
    assert!(stdout_of(&out).contains("infeasible"));
}

#[test]
fn solve_rejects_an_unknown_method_with_exit_2() {
    let out = run(bin().arg("solve").arg(instance("forced_right_endpoint")).args(["--method", "simplex"]));
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("method"));
}

#[test]
fn reformulate_writes_target_and_trace_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("stacked.blvl.json");
    let out = run(bin()
        .arg("reformulate")
        .arg(instance("forced_right_endpoint"))
        .args(["--from", "pess_cc", "--to", "opt_cc"])
        .arg("--out")
        .arg(&out_path));
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    // Target parses, has the right kind, and solves to the same value.
    let solved = run(bin().arg("solve").arg(&out_path).arg("--json"));
    assert_eq!(exit_code(&solved), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&solved)).unwrap();
    assert_eq!(doc["value"], "1");

    // Sidecar exists and names the transform.
    let sidecar = dir.path().join("stacked.blvl.json.trace.json");
    let trace: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&sidecar).unwrap()).unwrap();
    assert_eq!(trace["source_kind"], "pess_cc");
    assert_eq!(trace["target_kind"], "opt_cc");
    assert_eq!(trace["transforms"][0]["transform"], "stacked_followers");
}

#[test]
fn reformulate_full_chain_records_both_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("chain.blvl.json");
    let out = run(bin()
        .arg("reformulate")
        .arg(instance("forced_right_endpoint"))
        .args(["--from", "pess_cc", "--to", "pess_nc"])
        .arg("--out")
        .arg(&out_path)
        .arg("--json"));
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["transforms"].as_array().unwrap().len(), 5);
    assert_eq!(doc["kappas"].as_array().unwrap().len(), 2);

    let solved = run(bin().arg("solve").arg(&out_path).arg("--json"));
    let sol: serde_json::Value = serde_json::from_str(&stdout_of(&solved)).unwrap();
    assert_eq!(sol["value"], "1");
}

#[test]
fn reformulate_rejects_an_unsupported_arc_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .arg("reformulate")
        .arg(instance("tracking_follower_optimistic"))
        .args(["--from", "opt_nc", "--to", "pess_cc"])
        .arg("--out")
        .arg(dir.path().join("x.json")));
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("unsupported arc"));
}

#[test]
fn reformulate_rejects_a_kind_mismatch_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .arg("reformulate")
        .arg(instance("tracking_follower_optimistic"))
        .args(["--from", "opt_cc", "--to", "opt_nc"])
        .arg("--out")
        .arg(dir.path().join("x.json")));
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("has kind opt_nc"));
}

#[test]
fn an_invalid_supplied_weight_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let aux = dir.path().join("aux.blvl.json");
    // Pin the follower level with the slack rewrite, then try to fold the
    // pin back with a weight that is too small to hold the follower down.
    let first = run(bin()
        .arg("reformulate")
        .arg(instance("tracking_follower_optimistic"))
        .args(["--from", "opt_nc", "--to", "opt_cc"])
        .arg("--out")
        .arg(&aux));
    assert_eq!(exit_code(&first), 0, "stderr: {}", stderr_of(&first));

    let bad = run(bin()
        .arg("reformulate")
        .arg(&aux)
        .args(["--from", "opt_cc", "--to", "opt_nc", "--kappa", "1/2"])
        .arg("--out")
        .arg(dir.path().join("pen.blvl.json")));
    assert_eq!(exit_code(&bad), 1);
    assert!(stderr_of(&bad).contains("kappa invalid"));

    let good = run(bin()
        .arg("reformulate")
        .arg(&aux)
        .args(["--from", "opt_cc", "--to", "opt_nc", "--kappa", "2"])
        .arg("--out")
        .arg(dir.path().join("pen.blvl.json")));
    assert_eq!(exit_code(&good), 0, "stderr: {}", stderr_of(&good));
}

#[test]
fn verify_passes_the_golden_corpus_and_emits_json() {
    let out = run(bin()
        .arg("verify")
        .arg(instance("forced_right_endpoint"))
        .arg(instance("greedy_follower_blocked"))
        .arg(instance("tracking_follower_pessimistic"))
        .arg("--json"));
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let docs: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("valid json");
    let reports = docs.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    for report in reports {
        assert_eq!(report["pass"], true, "failing report: {report}");
    }
}

#[test]
fn verify_fails_with_exit_1_when_no_weight_exists() {
    let out = run(bin().arg("verify").arg(instance("unsatisfiable_coupling")));
    assert_eq!(exit_code(&out), 1);
    assert!(stdout_of(&out).contains("FAIL penalty_weight_certified"));
}

#[test]
fn verify_checks_recorded_weights_and_rejects_doctored_ones() {
    let dir = tempfile::tempdir().unwrap();
    let chained = dir.path().join("chain.blvl.json");
    let reform = run(bin()
        .arg("reformulate")
        .arg(instance("forced_right_endpoint"))
        .args(["--from", "pess_cc", "--to", "pess_nc"])
        .arg("--out")
        .arg(&chained));
    assert_eq!(exit_code(&reform), 0, "stderr: {}", stderr_of(&reform));
    let sidecar = dir.path().join("chain.blvl.json.trace.json");

    // The honest sidecar re-validates.
    let good = run(bin()
        .arg("verify")
        .arg(instance("forced_right_endpoint"))
        .arg("--trace")
        .arg(&sidecar));
    assert_eq!(exit_code(&good), 0, "stderr: {}", stderr_of(&good));
    assert!(stdout_of(&good).contains("PASS recorded_weight_valid"));

    // Corrupt the recorded weights; verification must now fail.
    let doctored = dir.path().join("doctored.trace.json");
    let text = fs::read_to_string(&sidecar).unwrap().replace("\"2\"", "\"1/2\"");
    fs::write(&doctored, text).unwrap();
    let bad = run(bin()
        .arg("verify")
        .arg(instance("forced_right_endpoint"))
        .arg("--trace")
        .arg(&doctored));
    assert_eq!(exit_code(&bad), 1);
    assert!(stdout_of(&bad).contains("FAIL recorded_weight_valid"));

    // A syntactically broken sidecar is a parse error, not a failed check.
    let mangled = dir.path().join("mangled.trace.json");
    fs::write(&mangled, "not json").unwrap();
    let ugly = run(bin()
        .arg("verify")
        .arg(instance("forced_right_endpoint"))
        .arg("--trace")
        .arg(&mangled));
    assert_eq!(exit_code(&ugly), 2);
}

#[test]
fn verify_generates_and_checks_a_seeded_batch() {
    let out = run(bin()
        .arg("verify")
        .args(["--generate", "42", "6"])
        .args(["--kind", "pess_cc", "--nx", "1", "--ny", "1", "--m-lower", "4", "--m-coupling", "1"]));
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("6/6 instances pass"));
}

#[test]
fn verify_with_no_inputs_is_a_usage_error() {
    let out = run(bin().arg("verify"));
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn generate_is_deterministic_and_well_posed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.blvl.json");
    let b = dir.path().join("b.blvl.json");
    for path in [&a, &b] {
        let out = run(bin()
            .arg("generate")
            .args(["--seed", "7", "--kind", "opt_cc", "--nx", "2", "--ny", "1"])
            .args(["--m-lower", "4", "--m-coupling", "2"])
            .arg("--out")
            .arg(path));
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "same seed, same bytes");

    let checked = run(bin().arg("check").arg(&a));
    assert_eq!(exit_code(&checked), 0);
}

#[test]
fn generate_rejects_out_of_range_sizes_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .arg("generate")
        .args(["--seed", "1", "--kind", "opt_nc", "--nx", "9", "--ny", "1"])
        .arg("--out")
        .arg(dir.path().join("x.json")));
    assert_eq!(exit_code(&out), 2);

    // No-coupling kinds must not carry coupling rows.
    let out = run(bin()
        .arg("generate")
        .args(["--seed", "1", "--kind", "opt_nc", "--m-coupling", "1"])
        .arg("--out")
        .arg(dir.path().join("y.json")));
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn reformulated_files_verify_as_instances_in_their_own_right() {
    // The epigraph rewrite leaves the target leader set unbounded, so feed
    // verify a penalty-stage file instead: tracking follower, level chain.
    let dir = tempfile::tempdir().unwrap();
    let pinned = dir.path().join("pinned.blvl.json");
    let reform = run(bin()
        .arg("reformulate")
        .arg(instance("tracking_follower_optimistic"))
        .args(["--from", "opt_nc", "--to", "pess_nc"])
        .arg("--out")
        .arg(&pinned));
    assert_eq!(exit_code(&reform), 0, "stderr: {}", stderr_of(&reform));

    let solved = run(bin().arg("solve").arg(&pinned).arg("--json"));
    assert_eq!(exit_code(&solved), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&solved)).unwrap();
    assert_eq!(doc["value"], "-1", "level chain preserves the tracking optimum");
}
