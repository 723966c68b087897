use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn problems(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "problems", name]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn dsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsym"))
        .args(args)
        .env_remove("DSYM_SEED")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut all = vec!["--format", "json"];
    all.extend_from_slice(args);
    let out = dsym(&all);
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: stdout {:?} stderr {:?}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    });
    (v, out.status.code().unwrap())
}

fn temp_file(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

#[test]
fn check_accepts_both_systems() {
    let (v, code) = json(&["check", &problems("swap.sys")]);
    assert_eq!(code, 0);
    assert_eq!(v["schema"], "dsym/1");
    assert_eq!(v["result"]["name"], "swap");

    let (v, code) = json(&["check", &problems("example2.sys")]);
    assert_eq!(code, 0);
    let guards: Vec<&str> = v["result"]["guards"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g.as_str().unwrap())
        .collect();
    assert!(guards.contains(&"x[n] - 1") && guards.contains(&"y[n] - 1"), "{guards:?}");
    assert!(guards.contains(&"x[n] + y[n+1]"), "{guards:?}");
}

#[test]
fn offset_beyond_the_order_is_a_parse_error() {
    let f = temp_file("system bad\nx[n+2] = x[n+3]\ny[n+2] = y[n]\nend\n");
    let out = dsym(&["check", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn degenerate_system_exits_with_two() {
    let f = temp_file("system flat\nx[n+2] = x[n+1]\ny[n+2] = y[n]\nend\n");
    let out = dsym(&["check", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_arguments_and_bad_flags_exit_with_one() {
    assert_eq!(dsym(&["frobnicate"]).status.code(), Some(1));
    let sys = problems("swap.sys");
    assert_eq!(dsym(&["--window", "0:3", "check", &sys]).status.code(), Some(1));
    assert_eq!(dsym(&["--tol", "-1", "check", &sys]).status.code(), Some(1));
    assert_eq!(dsym(&["simulate", &sys, "1,2,3", "4"]).status.code(), Some(1));
    assert_eq!(dsym(&["symmetries", &sys, "no-such-ansatz"]).status.code(), Some(1));
}

#[test]
fn simulate_swap_orbit_has_period_four() {
    let (v, code) = json(&["simulate", &problems("swap.sys"), "2,3,5,7", "8"]);
    assert_eq!(code, 0);
    // Hand iteration: x[n+2] = y[n], y[n+2] = x[n].
    let mut want = vec![[2.0, 3.0], [5.0, 7.0]];
    for k in 2..=8 {
        let [x, y] = want[k - 2];
        want.push([y, x]);
    }
    let points = v["result"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 9);
    for (k, p) in points.iter().enumerate() {
        assert_eq!(p["n"], k as i64);
        assert_eq!(p["x"].as_f64().unwrap(), want[k][0]);
        assert_eq!(p["y"].as_f64().unwrap(), want[k][1]);
        assert_eq!(p["x"], points[k % 4]["x"]);
    }
    assert_eq!(v["result"]["termination"]["reason"], "completed");
}

#[test]
fn symmetries_of_the_swap_with_constant_characteristics() {
    let (v, code) = json(&["symmetries", &problems("swap.sys"), "constant"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["dimension"], 4);
    let forms: Vec<String> = v["result"]["elements"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["characteristic"][0].as_str().unwrap().to_string())
        .collect();
    assert!(forms.iter().all(|f| f.contains("i^n")), "{forms:?}");
}

#[test]
fn symmetries_of_example_two_from_an_ansatz_file() {
    let (v, code) = json(&["symmetries", &problems("example2.sys"), &problems("loglinear.ans")]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["dimension"], 6);
    assert_eq!(v["passed"], true);
}

#[test]
fn rank_jump_in_the_window_exits_with_three() {
    let f = temp_file("system kink\nx[n+2] = (n - 22)*x[n]^2 + y[n]\ny[n+2] = x[n]\nend\n");
    let out = dsym(&["symmetries", f.path().to_str().unwrap(), "affine"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn integrals_of_the_swap() {
    let (v, code) = json(&["integrals", &problems("swap.sys"), &problems("affine.ans")]);
    assert_eq!(code, 0);
    let r = &v["result"];
    assert_eq!(r["dimension"], 12);
    assert_eq!(r["integrable_dimension"], 8);
    for e in r["integrals"].as_array().unwrap() {
        assert_eq!(e["orbits"]["passed"], true);
        assert!(e["closed_form"].is_string());
    }
}

#[test]
fn reduce_with_the_log_scaling_generator() {
    let (v, code) = json(&["reduce", &problems("example2.sys"), &problems("reduce_x1.red")]);
    assert_eq!(code, 0);
    assert!(v["result"]["max_deviation"].as_f64().unwrap() < 1e-9);
    assert_eq!(v["result"]["trials"], 20);
}

#[test]
fn verify_presets_and_a_wrong_generator() {
    let (v, code) = json(&["verify", &problems("swap.sys"), &problems("swap_integrals.int")]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["items"].as_array().unwrap().len(), 12);

    let (_, code) = json(&[
        "verify",
        &problems("example2.sys"),
        &problems("example2_generators.chp"),
    ]);
    assert_eq!(code, 0);

    let f = temp_file("charpair wrong Q1 = x[n]^2 Q2 = y[n]\n");
    let (v, code) = json(&["verify", &problems("swap.sys"), f.path().to_str().unwrap()]);
    assert_eq!(code, 4);
    assert_eq!(v["passed"], false);

    let g = temp_file("integral drift phi = x[n]\n");
    let (_, code) = json(&["verify", &problems("swap.sys"), g.path().to_str().unwrap()]);
    assert_eq!(code, 4);
}

#[test]
fn json_reports_are_byte_identical_across_runs() {
    let args = ["--format", "json", "integrals", &problems("swap.sys"), "affine"];
    let args: Vec<&str> = args.to_vec();
    let a = dsym(&args).stdout;
    let b = dsym(&args).stdout;
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn seed_comes_from_the_flag_or_the_environment() {
    let sys = problems("swap.sys");
    let (v, _) = json(&["--seed", "0x10", "check", &sys]);
    assert_eq!(v["config"]["seed"], 16);
    let out = Command::new(env!("CARGO_BIN_EXE_dsym"))
        .args(["--format", "json", "check", &sys])
        .env("DSYM_SEED", "99")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 99);
    let (v, _) = json(&["check", &sys]);
    assert_eq!(v["config"]["seed"], 0x5EED);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let out = dsym(&["--format", "json", "check", &problems("swap.sys")]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1.0000000000000001e-9"), "{text}");
}
