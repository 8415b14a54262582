use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
        .display()
        .to_string()
}

fn qdt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdt"))
        .args(args)
        .env_remove("QDT_SEED")
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    qdt(args).status.code().expect("exited normally")
}

#[test]
fn validate_exit_codes() {
    for (name, want) in [
        ("min2", 0),
        ("three_reward8", 0),
        ("four_reward8", 0),
        ("cycle3", 0),
        ("merge_irrev", 1),
        ("nonorth", 1),
        ("overlap_relaxed", 1),
        ("missing_r1", 2),
        ("does_not_exist", 2),
    ] {
        assert_eq!(code(&["validate", &fixture(name)]), want, "{name}");
    }
}

#[test]
fn schema_errors_name_the_field() {
    let out = qdt(&["validate", &fixture("missing_r1")]);
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("rewards[1]"), "{text}");
}

#[test]
fn audit_exit_codes() {
    let cases: [(&[&str], i32); 6] = [
        (
            &["audit-rationality", "three_reward8", "--samples", "30", "--seed", "3"],
            0,
        ),
        (
            &[
                "audit-rationality",
                "three_reward8",
                "--oracle",
                "counting",
                "--samples",
                "30",
                "--seed",
                "3",
            ],
            1,
        ),
        (&["audit-rationality", "cycle3", "--samples", "30", "--seed", "3"], 1),
        (&["audit-richness", "min2", "--samples", "30", "--seed", "3"], 0),
        // Invalid instances are usage errors outside `validate`.
        (&["audit-richness", "merge_irrev", "--samples", "30", "--seed", "3"], 2),
        (&["check-lemmas", "missing_r1", "--samples", "30", "--seed", "3"], 2),
    ];
    for (args, want) in cases {
        let mut args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        args[1] = fixture(&args[1]);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(code(&refs), want, "{args:?}");
    }
}

#[test]
fn counterexample_exit_codes() {
    let merge = fixture("merge_irrev");
    let overlap = fixture("overlap_relaxed");
    let four = fixture("four_reward8");
    let cycle = fixture("cycle3");
    assert_eq!(code(&["counterexample", &merge, "--relax", "irrev", "--seed", "1"]), 1);
    assert_eq!(
        code(&["counterexample", &overlap, "--relax", "orthmacr", "--seed", "1"]),
        1
    );
    assert_eq!(
        code(&[
            "counterexample",
            &four,
            "--relax",
            "orthmacr",
            "--budget",
            "200",
            "--seed",
            "1"
        ]),
        0
    );
    assert_eq!(
        code(&[
            "counterexample",
            &cycle,
            "--axiom",
            "Ord",
            "--budget",
            "40",
            "--seed",
            "1"
        ]),
        1
    );
    // Without a relaxation an axiom must be named.
    assert_eq!(code(&["counterexample", &cycle, "--seed", "1"]), 2);
    assert_eq!(
        code(&["counterexample", &cycle, "--axiom", "NoSuchAxiom", "--seed", "1"]),
        2
    );
}

#[test]
fn seed_comes_from_flag_or_environment() {
    let path = fixture("min2");
    assert_eq!(code(&["audit-richness", &path, "--samples", "10"]), 2);
    let via_flag = qdt(&["audit-richness", &path, "--samples", "10", "--seed", "17"]);
    let via_env = Command::new(env!("CARGO_BIN_EXE_qdt"))
        .args(["audit-richness", &path, "--samples", "10"])
        .env("QDT_SEED", "17")
        .output()
        .unwrap();
    assert_eq!(via_env.status.code(), Some(0));
    assert_eq!(via_flag.stdout, via_env.stdout);
    let bad_env = Command::new(env!("CARGO_BIN_EXE_qdt"))
        .args(["audit-richness", &path, "--samples", "10"])
        .env("QDT_SEED", "seventeen")
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let three = fixture("three_reward8");
    let runs: [&[&str]; 3] = [
        &[
            "--json",
            "audit-rationality",
            &three,
            "--oracle",
            "counting",
            "--samples",
            "30",
            "--seed",
            "9",
        ],
        &["check-lemmas", &three, "--samples", "30", "--seed", "9"],
        &["classical-vnm", "--order", "lexicographic", "--seed", "9"],
    ];
    for args in runs {
        let a = qdt(args);
        let b = qdt(args);
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.status.code(), b.status.code());
    }
}

#[test]
fn malformed_flags_are_usage_errors() {
    let path = fixture("min2");
    assert_eq!(code(&["audit-richness", &path, "--seed", "x"]), 2);
    assert_eq!(
        code(&["audit-rationality", &path, "--oracle", "psychic", "--seed", "1"]),
        2
    );
    assert_eq!(
        code(&[
            "simulate",
            "--k",
            "2",
            "--weights",
            "0.5,0.6",
            "--n",
            "10",
            "--eps",
            "0.1"
        ]),
        2
    );
    assert_eq!(
        code(&[
            "simulate",
            "--k",
            "3",
            "--weights",
            "0.5,0.5",
            "--n",
            "10",
            "--eps",
            "0.1"
        ]),
        2
    );
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn simulate_csv_is_decreasing() {
    let out = qdt(&[
        "simulate",
        "--k",
        "2",
        "--weights",
        "0.5,0.5",
        "--n",
        "10,100,1000",
        "--eps",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,eps,squared_amplitude_mass"));
    let masses: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(masses.len(), 3);
    assert!(masses.windows(2).all(|w| w[1] < w[0]), "{masses:?}");
}

#[test]
fn sweep_grain_counts_every_leaf_at_zero() {
    let out = qdt(&[
        "sweep-grain",
        "--k",
        "2",
        "--weights",
        "0.3,0.7",
        "--n",
        "10",
        "--theta-list",
        "0,0.5",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "theta,count");
    assert!(rows[1].ends_with(",1024"), "{text}");
    assert!(rows[2].ends_with(",0"), "{text}");
}

#[test]
fn classical_exit_codes() {
    assert_eq!(code(&["classical-vnm", "--seed", "4"]), 0);
    assert_eq!(code(&["classical-vnm", "--order", "lexicographic", "--seed", "4"]), 1);
    assert_eq!(code(&["savage", "--cells", "8"]), 0);
    assert_eq!(code(&["savage", "--cells", "8", "--states", "12"]), 2);
}

#[test]
fn elicit_recovers_instance_utilities() {
    let out = qdt(&["--json", "elicit", &fixture("four_reward8")]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["max_deviation"].as_f64().unwrap() <= 1e-6, "{doc}");
    assert_eq!(doc["utility"].as_object().unwrap().len(), 4);
}
