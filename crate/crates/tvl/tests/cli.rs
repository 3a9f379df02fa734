use serde_json::Value;
use std::process::{Command, Output};

fn tvl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvl"))
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn sat_on_percentage_fixture() {
    let out = tvl(&["sat", "fixtures/percentage.tvl"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict"], "sat");
    assert!(v["model"].is_object());
    assert_eq!(v["config"]["search_box"], 16);
}

#[test]
fn summary_mode_prints_one_line() {
    let out = tvl(&["--json", "false", "sat", "fixtures/matching.tvl"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "\"sat\"");
}

#[test]
fn matching_spectrum_has_even_totals() {
    let out = tvl(&["spectrum", "--cap", "6", "fixtures/matching.tvl"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["totals"], serde_json::json!([2, 4, 6]));
    assert_eq!(v["inconclusive"], serde_json::json!([]));
}

#[test]
fn model_with_vector_matches_request() {
    let out = tvl(&["model", "--vector", "0=4", "fixtures/matching.tvl"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["model"]["size"], 4);
    let odd = tvl(&["model", "--vector", "0=3", "fixtures/matching.tvl"]);
    assert_eq!(odd.status.code(), Some(0));
    assert!(json(&odd)["model"].is_null());
}

#[test]
fn parse_error_reports_position() {
    let dir = std::env::temp_dir().join(format!("tvl-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.tvl");
    std::fs::write(&path, "vocab { unary P; binary R; }\nsentence forall x . (P(x) &\n").unwrap();
    let out = tvl(&["parse", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["error"]["position"]["line"], 3);
}

#[test]
fn missing_file_is_an_input_error() {
    let out = tvl(&["sat", "fixtures/does_not_exist.tvl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["error"].is_object());
}

#[test]
fn output_is_deterministic() {
    for args in [
        ["sat", "fixtures/percentage.tvl"],
        ["spectrum", "fixtures/out_one.tvl"],
        ["normalize", "fixtures/two_relations.tvl"],
    ] {
        let a = tvl(&args);
        let b = tvl(&args);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn oracle_agrees_with_sat_on_cycle_cover() {
    let sat = json(&tvl(&["sat", "fixtures/cycle_cover.tvl"]));
    let oracle = json(&tvl(&["--cap", "4", "oracle", "fixtures/cycle_cover.tvl"]));
    assert_eq!(sat["verdict"], "sat");
    assert!(oracle["model"].is_object(), "{oracle}");
}

#[test]
fn selftest_passes() {
    let out = tvl(&["selftest"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["pass"], true);
}
