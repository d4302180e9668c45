//! End-to-end checks of the installed command-line interface: argument
//! parsing, the exit-code contract, report files, and determinism of
//! seeded runs. Everything here drives the real binary in a subprocess.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_igloo-kit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("igloo-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn refinement_on_the_ring_of_three_passes_at_depth_five() {
    let out = run(&["check-refinement", "--scenario", "leader3.json", "--depth", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("PASS"), "{text}");
}

#[test]
fn the_relay_process_matches_its_canonical_model() {
    let out = run(&["check-theorem4", "--process", "example8", "--depth", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));
}

#[test]
fn seeded_simulation_output_is_byte_identical_across_runs() {
    let args = [
        "simulate",
        "--scenario",
        "leader4.json",
        "--seed",
        "7",
        "--steps",
        "2000",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stdout_of(&first));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn unknown_flags_are_a_usage_error() {
    let out = run(&["simulate", "--scenario", "leader3.json", "--turbo"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommands_are_a_usage_error() {
    let out = run(&["prove-everything"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn a_missing_scenario_is_a_config_error() {
    let out = run(&["simulate", "--scenario", "no-such-scenario.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn an_exhausted_pair_budget_exits_three() {
    let out = run(&[
        "check-refinement",
        "--scenario",
        "leader3.json",
        "--depth",
        "5",
        "--budget",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stdout_of(&out));
}

#[test]
fn a_scenario_with_a_planted_bug_exits_one() {
    let path = scratch("unbuffered.json");
    std::fs::write(
        &path,
        r#"{ "kind": "leader", "ring": 3, "program": "unbuffered-send" }"#,
    )
    .unwrap();
    let out = run(&["simulate", "--scenario", path.to_str().unwrap(), "--steps", "400"]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout_of(&out));
}

#[test]
fn report_files_carry_the_published_schema() {
    let path = scratch("refine-report.json");
    let out = run(&[
        "check-refinement",
        "--scenario",
        "leader3.json",
        "--depth",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["schema"], "igloo-kit/1");
    assert_eq!(report["command"], "check-refinement");
    assert_eq!(report["exit-code"], 0);
    assert!(report["checks"].as_array().is_some_and(|c| !c.is_empty()));
}

#[test]
fn simulate_reports_replay_cleanly_for_every_scenario_kind() {
    for (scenario, seed) in [("leader3.json", "5"), ("repl-3s-1c.json", "3"), ("auth-2a.json", "9")] {
        let path = scratch(&format!("replay-{scenario}"));
        let sim = run(&[
            "simulate",
            "--scenario",
            scenario,
            "--seed",
            seed,
            "--steps",
            "400",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(sim.status.code(), Some(0), "{scenario}: {}", stdout_of(&sim));
        let replay = run(&["replay", "--scenario", scenario, "--log", path.to_str().unwrap()]);
        assert_eq!(replay.status.code(), Some(0), "{scenario}: {}", stdout_of(&replay));
    }
}

#[test]
fn dump_iospec_prints_the_io_specification_text() {
    let out = run(&["dump-iospec", "--scenario", "leader3.json", "--component", "node:2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.contains("∃t. token(t)"), "{text}");
    assert!(text.contains("UDP_receive_int"), "{text}");
    assert!(text.contains("UDP_send_int"), "{text}");
}

#[test]
fn enumerate_and_the_random_oracles_run_with_small_budgets() {
    let out = run(&["enumerate", "--scenario", "leader3.json", "--depth", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));
    let comp = run(&["check-composition", "--budget", "5", "--depth", "3"]);
    assert_eq!(comp.status.code(), Some(0), "{}", stdout_of(&comp));
    let trans = run(&["check-theorem3", "--budget", "5", "--depth", "3"]);
    assert_eq!(trans.status.code(), Some(0), "{}", stdout_of(&trans));
    let canon = run(&["check-theorem4", "--budget", "3", "--depth", "2"]);
    assert_eq!(canon.status.code(), Some(0), "{}", stdout_of(&canon));
}
