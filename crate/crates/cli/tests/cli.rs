use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydrodual"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.display().to_string()
}

#[test]
fn gap_on_the_shipped_fixture() {
    let out = run(&["gap", &fixture("five_scenario.json"), "--system", &fixture("sys_individual.json")]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["kind"], "gap");
    assert!(doc["gap"]["rel_gap"].as_f64().unwrap() <= 1e-7);
    assert_eq!(doc["gap"]["gap_ok"], true);
    assert_eq!(doc["tree"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(doc["options"]["tol"], Value::Null);
    assert_eq!(doc["closed_form"]["applies"], false);
}

#[test]
fn gap_with_tolerance_override_and_mps_dump() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("mps");
    let report = dir.path().join("gap.json");
    let out = run(&[
        "gap",
        &fixture("five_scenario_two_dams.json"),
        "--system",
        &fixture("sys_cascade.json"),
        "--tol",
        "1e-8",
        "--dump-mps",
        mps.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["options"]["solver"]["feasibility_tol"], 1e-8);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(written, doc);
    for side in ["primal.mps", "dual.mps"] {
        let lp = hydro_lp::read_mps(&std::fs::read_to_string(mps.join(side)).unwrap()).unwrap();
        assert!(lp.num_columns() > 0);
    }
    assert_eq!(doc["closed_form"]["regime"], "Martingale");
}

#[test]
fn solve_sides_and_null_sections() {
    let tree = fixture("five_scenario_two_dams.json");
    let sys = fixture("sys_cascade.json");
    let primal = json_of(&run(&["solve", &tree, "--system", &sys, "--side", "primal"]));
    assert_eq!(primal["dual"], Value::Null);
    assert_eq!(primal["primal"]["status"], "Optimal");
    assert_eq!(primal["primal"]["policy_feasible"], true);
    assert!(primal["primal"]["policy"]["transfer"].is_array());

    let both = run(&["solve", &tree, "--system", &sys]);
    assert_eq!(both.status.code(), Some(0));
    let both = json_of(&both);
    let p = both["primal"]["objective"].as_f64().unwrap();
    let d = both["dual"]["objective"].as_f64().unwrap();
    assert!((p - d).abs() <= 1e-7 * p.abs());
    assert_eq!(both["dual"]["certificate_feasible"], true);
    assert!(both["dual"]["shadow_policy"]["policy"]["drain"].is_array());
    assert_eq!(both["mps"], Value::Null);
}

#[test]
fn infeasible_instance_exits_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write(
        dir.path(),
        "tight.json",
        &json!({"n_dams": 1, "b": [0.1], "m": [14], "v1": [10], "alpha": 0.9, "variant": {"kind": "Individual"}}),
    );
    let tree = fixture("five_scenario.json");
    let out = run(&["gap", &tree, "--system", &sys]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_of(&out)["error"]["class"], "not_optimal");

    let out = run(&["solve", &tree, "--system", &sys, "--side", "primal"]);
    assert_eq!(out.status.code(), Some(2));
    let doc = json_of(&out);
    assert_eq!(doc["primal"]["status"], "Infeasible");
    assert_eq!(doc["primal"]["objective"], Value::Null);
}

#[test]
fn validate_reports_a_non_refining_filtration() {
    let ok = run(&["validate", &fixture("five_scenario.json"), "--system", &fixture("sys_totalcap.json")]);
    assert_eq!(ok.status.code(), Some(0));
    let doc = json_of(&ok);
    assert_eq!(doc["tree"]["manager_atoms"], json!([1, 3, 5]));
    assert_eq!(doc["system"]["variant"]["kind"], "TotalCap");

    let dir = tempfile::tempdir().unwrap();
    let mut tree: Value = serde_json::from_str(&std::fs::read_to_string(fixture("five_scenario.json")).unwrap()).unwrap();
    tree["manager_atoms"][0] = json!([["w1", "w2"], ["w3", "w4", "w5"]]);
    tree["full_atoms"][0] = json!([["w1", "w2"], ["w3", "w4", "w5"]]);
    let bad = write(dir.path(), "bad.json", &tree);
    let out = run(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json_of(&out);
    assert_eq!(doc["valid"], false);
    assert_eq!(doc["tree"], Value::Null);
    let msg = doc["errors"][0].as_str().unwrap();
    assert!(msg.contains("atom") && msg.contains("stage"), "{msg}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("atom"));
}

#[test]
fn classify_a_generated_martingale_tree() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    let out = run(&["generate", "--spec", &fixture("gen_martingale.json"), "--seed", "7", "--out", tree.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["tree"], Value::Null);
    let sys = write(
        dir.path(),
        "sys.json",
        &json!({"n_dams": 2, "b": [3, 3], "m": [1000, 1000], "v1": [5, 5], "alpha": 1.0, "variant": {"kind": "Individual"}}),
    );
    let doc = json_of(&run(&["classify", tree.to_str().unwrap(), "--system", &sys]));
    assert_eq!(doc["regime"], "Martingale");
    assert_eq!(doc["no_flood"], true);
    assert_eq!(doc["closed_form_obstacles"], json!([]));

    let bare = json_of(&run(&["classify", tree.to_str().unwrap()]));
    for key in ["no_flood", "system", "flood_violations", "closed_form_obstacles"] {
        assert_eq!(bare[key], Value::Null, "{key}");
    }
    let keys = |v: &Value| v.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
    assert_eq!(keys(&bare), keys(&doc));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let spec = fixture("gen_martingale.json");
    let a = run(&["generate", "--spec", &spec, "--seed", "11"]);
    let b = run(&["generate", "--spec", &spec, "--seed", "11"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(json_of(&a)["tree"].is_object());
    let c = run(&["generate", "--spec", &spec, "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);

    let args = ["solve", &fixture("five_scenario.json"), "--system", &fixture("sys_flood_prone.json")];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn usage_and_io_errors_exit_with_status_three() {
    for args in [
        vec!["frobnicate"],
        vec!["gap", "x.json"],
        vec!["solve", "x.json", "--system", "y.json", "--side", "sideways"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(3), "{args:?}");
        assert_eq!(json_of(&out)["error"]["code"], 3);
    }
    let out = run(&["validate", "/nonexistent/tree.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_of(&out)["error"]["class"], "io");
    let out = run(&["gap", &fixture("five_scenario.json"), "--system", &fixture("sys_individual.json"), "--tol", "-1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn report_renders_tables() {
    let dir = tempfile::tempdir().unwrap();
    let gap = dir.path().join("gap.json");
    run(&[
        "gap",
        &fixture("five_scenario.json"),
        "--system",
        &fixture("sys_totalcap.json"),
        "--out",
        gap.to_str().unwrap(),
    ]);
    let out = run(&["report", gap.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("gap report"));
    assert!(text.contains("gap.rel_gap"));

    let junk = write(dir.path(), "junk.json", &json!({"kind": "unknown"}));
    assert_eq!(run(&["report", &junk]).status.code(), Some(1));
}

#[test]
fn campaign_failures_replay_from_disk() {
    let clean = run(&["analysis", "campaign", "--seed", "5", "--cases", "10"]);
    assert_eq!(clean.status.code(), Some(0));
    assert_eq!(json_of(&clean)["report"]["passed"], true);

    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "analysis",
        "campaign",
        "--seed",
        "42",
        "--cases",
        "100",
        "--mutation",
        "flip-w",
        "--skip-lp",
        "--failures-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json_of(&out);
    let first = doc["failure_files"][0].as_str().unwrap().to_string();
    let replayed = run(&["analysis", "replay", &first]);
    assert_eq!(replayed.status.code(), Some(1));
    let r = json_of(&replayed);
    assert_eq!(r["report"]["reproduced"], true);
    assert_eq!(r["report"]["dump_matches"], true);
}

#[test]
fn counts_and_ordering() {
    let doc = json_of(&run(&[
        "analysis",
        "counts",
        &fixture("five_scenario_two_dams.json"),
        "--system",
        &fixture("sys_totalcap_two_dams.json"),
    ]));
    assert_eq!(doc["report"]["matches"], true);
    assert_eq!(doc["report"]["prose_claim_holds"], false);

    let doc = json_of(&run(&[
        "analysis",
        "ordering",
        &fixture("five_scenario_two_dams.json"),
        "--system",
        &fixture("sys_individual_two_dams.json"),
    ]));
    assert_eq!(doc["report"]["individual_below_total"], true);
}
