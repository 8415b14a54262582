use std::path::PathBuf;

use qdt_core::audit::Relaxation;
use qdt_core::instance::{build, load, load_relaxed, parse_document, to_json, LoadError};
use qdt_core::problem::Violation;

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
}

const VALID: [&str; 4] = ["min2", "three_reward8", "four_reward8", "cycle3"];

#[test]
fn valid_fixtures_load() {
    for name in VALID {
        let inst = load(&path(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(inst.problem.dim <= 8);
    }
    let min2 = load(&path("min2")).unwrap();
    assert_eq!(
        (
            min2.problem.dim,
            min2.problem.macrostates.len(),
            min2.problem.rewards.len()
        ),
        (2, 2, 2)
    );
}

#[test]
fn documents_round_trip() {
    for name in VALID {
        let text = std::fs::read_to_string(path(name)).unwrap();
        let doc = parse_document(&text).unwrap();
        let again = parse_document(&to_json(&doc)).unwrap();
        assert_eq!(doc, again);
        let (a, b) = (
            build(doc, Relaxation::None).unwrap(),
            build(again, Relaxation::None).unwrap(),
        );
        for (x, y) in a.problem.macrostates.iter().zip(&b.problem.macrostates) {
            assert_eq!(x.id, y.id);
            assert!(x.subspace.approx_eq(&y.subspace));
        }
        for (x, y) in a.problem.act_generators.iter().zip(&b.problem.act_generators) {
            assert!(x.act.approx_eq(&y.act));
        }
        assert_eq!(a.utility, b.utility);
    }
}

#[test]
fn missing_flag_is_a_schema_error() {
    match load(&path("missing_r1")) {
        Err(LoadError::Schema { path, message }) => {
            assert_eq!(path, "rewards[1]");
            assert!(message.contains("`r1`"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn overlapping_macrostates_fail_validation() {
    match load(&path("nonorth")) {
        Err(LoadError::Validation { report, .. }) => assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonOrthogonal { left, right, .. } if left == "M0" && right == "M1"))),
        other => panic!("{other:?}"),
    }
}

#[test]
fn relaxations_lift_only_their_own_requirement() {
    assert!(load(&path("overlap_relaxed")).is_err());
    assert!(load_relaxed(&path("overlap_relaxed"), Relaxation::OrthMacr).is_ok());
    assert!(load_relaxed(&path("overlap_relaxed"), Relaxation::Irrev).is_err());
    assert!(matches!(load(&path("merge_irrev")), Err(LoadError::Validation { .. })));
    assert!(load_relaxed(&path("merge_irrev"), Relaxation::Irrev).is_ok());
    assert!(load_relaxed(&path("merge_irrev"), Relaxation::OrthMacr).is_err());
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load(&path("no_such_fixture")), Err(LoadError::Io { .. })));
}
