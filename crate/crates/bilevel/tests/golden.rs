//! Golden-file tests: the checked-in instance files under `instances/` must
//! stay byte-identical to what the serializer produces for the built-in
//! corpus, and must parse back to exactly those problems.
//!
//! Regenerate the files with `BLESS=1 cargo test -p bilevel --test golden`.

use bilevel::corpus;
use bilevel::instance::{parse, serialize, Metadata};
use bilevel::model::BilevelProblem;
use std::fs;
use std::path::PathBuf;

fn instances_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../instances")
}

fn fixtures() -> Vec<(&'static str, BilevelProblem)> {
    vec![
        ("forced_right_endpoint", corpus::forced_right_endpoint()),
        ("indifferent_follower_optimistic", corpus::indifferent_follower_optimistic()),
        ("indifferent_follower_pessimistic", corpus::indifferent_follower_pessimistic()),
        ("greedy_follower_blocked", corpus::greedy_follower_blocked()),
        ("tracking_follower_optimistic", corpus::tracking_follower_optimistic()),
        ("tracking_follower_pessimistic", corpus::tracking_follower_pessimistic()),
        ("duplicated_coupling_row", corpus::duplicated_coupling_row()),
        ("unsatisfiable_coupling", corpus::unsatisfiable_coupling()),
    ]
}

#[test]
fn corpus_files_match_the_fixtures() {
    let dir = instances_dir();
    let bless = std::env::var_os("BLESS").is_some();
    if bless {
        fs::create_dir_all(&dir).expect("create instances dir");
    }
    for (name, problem) in fixtures() {
        let meta = Metadata { name: Some(name.to_string()), ..Metadata::default() };
        let expected = serialize(&problem, &meta);
        let path = dir.join(format!("{name}.blvl.json"));
        if bless {
            fs::write(&path, &expected).expect("write golden file");
            continue;
        }
        let text = fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("{}: {e} (run with BLESS=1 to regenerate)", path.display()));
        assert_eq!(text, expected, "{name}: file text must match the serializer");
        let parsed = parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parsed.problem, problem, "{name}: file must parse to the fixture");
    }
}
