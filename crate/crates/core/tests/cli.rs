//! End-to-end runs of the `dynext` binary on the bundled corpus.

mod common;

use common::*;
use serde_json::Value;

fn json(args: &[&str]) -> (i32, Value) {
    let (code, out) = cli(args);
    let v = serde_json::from_str(&out).unwrap_or_else(|e| panic!("`{out}` is not JSON: {e}"));
    (code, v)
}

fn path(name: &str) -> String {
    corpus_file(name).display().to_string()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn check_reports_the_double_integrator_flag() {
    let (code, r) = json(&["check", &path("double_integrator")]);
    assert_eq!(code, 0);
    assert_eq!(r["command"], "check");
    assert_eq!(r["flag"]["state_dims"], serde_json::json!([2, 1, 0]));
    assert_eq!(r["flag"]["linearizable"], true);
    assert_eq!(r["flag"]["lid"], 0);
    assert!(r.get("search").is_none());
}

#[test]
fn check_reports_the_unicycle_defect() {
    let (code, r) = json(&["check", &path("unicycle")]);
    assert_eq!(code, 0);
    assert_eq!(r["flag"]["lid"], 1);
    assert_eq!(r["flag"]["leading_index"], 1);
    assert_eq!(r["flag"]["linearizable"], false);
}

#[test]
fn search_prolongs_the_unicycle_speed_and_the_result_round_trips() {
    let (code, r) = json(&["search", &path("unicycle")]);
    assert_eq!(code, 0);
    let s = &r["search"];
    assert_eq!(s["status"], "found");
    assert_eq!(s["cost"], 1);
    assert_eq!(s["algorithm"], "dijkstra");
    assert_eq!(s["arrows"][0]["replaced_input"], "u1");
    assert_eq!(s["arrows"][0]["relative_degree"], 0);
    assert_eq!(s["dp_root"], 1);
    assert_eq!(s["final_system"]["flag"]["linearizable"], true);

    let dir = tempfile::tempdir().unwrap();
    let file = write(&dir, "extended.toml", s["final_system"]["file"].as_str().unwrap());
    let (code, back) = json(&["check", &file]);
    assert_eq!(code, 0);
    assert_eq!(back["flag"]["linearizable"], true);
    assert_eq!(back["system"]["states"], s["final_system"]["system"]["states"]);
    assert!(back["flag"].get("base_point_regular").is_none());

    // The prolonged speed is a state now; the flag degenerates where it vanishes.
    let (_, moving) = json(&["check", &file, "--point", "u1=1"]);
    assert_eq!(moving["flag"]["base_point_regular"], true);
    let (_, stopped) = json(&["check", &file, "--point", "u1=0"]);
    assert_eq!(stopped["flag"]["base_point_regular"], false);
}

#[test]
fn heuristic_without_algorithm_runs_astar() {
    let (code, r) = json(&["search", &path("unicycle"), "--heuristic", "lid"]);
    assert_eq!(code, 0);
    assert_eq!(r["search"]["algorithm"], "astar");
    assert_eq!(r["search"]["heuristic"], "lid");
    assert_eq!(r["search"]["cost"], 1);
}

#[test]
fn linearizable_systems_cost_nothing() {
    let (code, r) = json(&["search", &path("brunovsky")]);
    assert_eq!(code, 0);
    assert_eq!(r["search"]["cost"], 0);
    assert_eq!(r["search"]["arrows"], serde_json::json!([]));
}

#[test]
fn enumerate_finds_the_unicycle_profile() {
    let (code, r) = json(&["enumerate", &path("unicycle"), "--max-order", "2"]);
    assert_eq!(code, 0);
    let e = &r["enumerate"];
    assert_eq!(e["max_order"], 2);
    assert_eq!(e["least_order"], 1);
    assert_eq!(e["profiles"].as_array().unwrap().len(), 6);
    let first = e["profiles"].as_array().unwrap().iter().find(|p| p["linearizable"] == true).unwrap();
    assert_eq!(first["orders"]["u1"], 1);
}

#[test]
fn out_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let (code, stdout) = cli(&["check", &path("double_integrator"), "--out", &out.display().to_string()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let (_, direct) = cli(&["check", &path("double_integrator")]);
    assert_eq!(std::fs::read_to_string(out).unwrap(), direct);
}

#[test]
fn pinned_points_show_up_in_the_report() {
    let (code, r) = json(&["check", &path("unicycle"), "--point", "theta=1/3"]);
    assert_eq!(code, 0);
    assert_eq!(r["system"]["point"]["theta"], "1/3");
}

#[test]
fn uncontrollable_systems_warn_on_check_and_fail_search() {
    let (code, r) = json(&["check", &path("uncontrollable")]);
    assert_eq!(code, 0);
    assert_eq!(r["flag"]["controllable"], false);
    assert_eq!(r["warnings"].as_array().unwrap().len(), 1);

    let (code, r) = json(&["search", &path("uncontrollable")]);
    assert_eq!(code, 1);
    assert_eq!(r["error"]["kind"], "engine");
    assert_eq!(r["error"]["exit_code"], 1);
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.toml", "[system]\nstates = [\"x\"]\ninputs = [\"u\"]\n\n[dynamics]\nx = \"u + v\"\n");
    let (code, r) = json(&["check", &bad]);
    assert_eq!(code, 1);
    assert_eq!(r["error"]["kind"], "input");
    let msg = r["error"]["message"].as_str().unwrap();
    assert!(msg.contains(":6: dynamics.x"), "{msg}");
    assert!(msg.contains("`v`"), "{msg}");

    let (code, r) = json(&["check", &dir.path().join("missing.toml").display().to_string()]);
    assert_eq!(code, 1);
    assert_eq!(r["error"]["kind"], "input");

    let (code, r) = json(&["check", &path("unicycle"), "--point", "theta"]);
    assert_eq!(code, 1);
    assert_eq!(r["error"]["kind"], "usage");
}

#[test]
fn singular_systems_are_genericity_failures() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "singular.toml", "[system]\nstates = [\"x\"]\ninputs = [\"u\"]\n\n[dynamics]\nx = \"u*ln(-1 - x^2)\"\n");
    let (code, r) = json(&["check", &f]);
    assert_eq!(code, 2);
    assert_eq!(r["error"]["kind"], "genericity");
}

#[test]
fn reports_are_byte_identical() {
    let runs: Vec<Vec<String>> = vec![
        vec!["check".into(), path("first_order")],
        vec!["search".into(), path("unicycle")],
        vec!["search".into(), path("unicycle"), "--heuristic".into(), "cover".into()],
        vec!["enumerate".into(), path("unicycle"), "--max-order".into(), "2".into()],
    ];
    reports_deterministic(&runs).unwrap();
}
