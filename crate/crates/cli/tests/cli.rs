use std::process::{Command, Output};

fn qcforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcforge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

#[test]
fn cantor_level_three() {
    let o = qcforge(&["cantor", "--gauge", "geometric:1", "--depth", "3", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["squares"].as_array().unwrap().len(), 64);
    let side: f64 = v["side"].to_string().parse().unwrap();
    assert_eq!(side, 1.0 / 64.0);
}

#[test]
fn cantor_csv_has_lf_and_fixed_digits() {
    let o = qcforge(&["cantor", "--gauge", "slow", "--depth", "2", "--format", "csv"]);
    let text = stdout(&o);
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,x,y,side");
    assert_eq!(lines.len(), 17);
    let mantissa = lines[1].split(',').nth(1).unwrap().split('e').next().unwrap();
    assert_eq!(mantissa.trim_start_matches('-').len(), 18);
}

#[test]
fn david_slow_to_geometric_passes() {
    let o = qcforge(&["david", "--case", "slow-to-geometric:1", "--depth", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["passed"], true);
    for dir in ["forward", "inverse"] {
        let m = &v[dir]["margin"];
        let positive = m == "inf" || m.to_string().parse::<f64>().unwrap() > 0.0;
        assert!(positive, "{dir} margin {m}");
    }
}

#[test]
fn david_failure_exits_two() {
    let o = qcforge(&["david", "--case", "geometric-to-fast:1", "--depth", "10", "--k0", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["passed"], false);
}

#[test]
fn curve_polyline_visits_every_square() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let o = qcforge(&["curve", "--depth", "6", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("t,x,y"));
    let rows = text.lines().count() - 1;
    assert!(rows > 2 * 4usize.pow(6), "{rows} vertices");
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 1, "temporary file left behind");

    let v = json(&qcforge(&["curve", "--depth", "6", "--format", "json"]));
    assert_eq!(v["squares_met"], "4096");
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["dims", "--gauge", "geometric:1", "--frostman", "0.9", "--seed", "7"];
    assert_eq!(qcforge(&args).stdout, qcforge(&args).stdout);
    let args = ["profile", "--case", "slow-to-fast", "--depth", "6"];
    assert_eq!(qcforge(&args).stdout, qcforge(&args).stdout);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(qcforge(&["bogus"]).status.code(), Some(1));
    assert_eq!(
        qcforge(&["cantor", "--gauge", "geometric:1", "--depth", "2", "--nope"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        qcforge(&["cantor", "--gauge", "wobbly", "--depth", "2"]).status.code(),
        Some(1)
    );
    assert_eq!(qcforge(&["annulus", "--a", "0.7", "--b", "0.1"]).status.code(), Some(1));
    assert_eq!(qcforge(&["report", "--acceptance", "11"]).status.code(), Some(1));
    assert_eq!(qcforge(&["--help"]).status.code(), Some(0));
}

#[test]
fn depth_guard_is_configurable() {
    let deep = ["sigma", "--depth", "15", "--format", "csv"];
    assert_eq!(qcforge(&deep).status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_qcforge"))
        .args(["sigma", "--depth", "3"])
        .env("QCFORGE_DEPTH_GUARD", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn extensions_validate() {
    let v = json(&qcforge(&["annulus", "--a", "0.2", "--b", "0.2"]));
    assert_eq!(v["validation"]["passed"], true);
    assert_eq!(v["max_K"].to_string().parse::<f64>().unwrap(), 1.0);
    let o = qcforge(&["twist", "--a", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let k: f64 = json(&o)["max_K"].to_string().parse().unwrap();
    assert!((2.85..3.65).contains(&(k * 0.1)));
}

#[test]
fn homeo_sigma_source_and_point() {
    let v = json(&qcforge(&[
        "homeo", "--gauge", "sigma", "--target", "sqrt", "--depth", "4", "--point", "0.3,0",
    ]));
    assert_eq!(v["resolved"], true);
    let text = stdout(&qcforge(&[
        "homeo",
        "--case",
        "slow-to-fast",
        "--depth",
        "5",
        "--format",
        "csv",
    ]));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn report_single_criterion() {
    let o = qcforge(&["report", "--acceptance", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("criterion 2 [exact areas]: PASS"));
}

#[test]
fn scenario_report_json() {
    let o = qcforge(&["report", "--case", "slow-to-geometric:1", "--depth", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["per_depth"].as_array().unwrap().len(), 6);
    assert_eq!(v["per_level"].as_array().unwrap().len(), 6);
}
