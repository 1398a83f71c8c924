use std::path::Path;
use std::process::{Command, Output};

use addiso_core::{backfit, build_dataset, FitConfig};
use serde_json::Value;

fn addiso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_addiso"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Left-block rule with constant extrapolation on both sides.
fn step_eval(knots: &[f64], levels: &[f64], x: f64) -> f64 {
    let k = knots.partition_point(|&t| t <= x);
    levels[k.saturating_sub(1)]
}

#[test]
fn fit_hand_example() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.csv", "y,x1,x2\n0,1,2\n2,2,1\n");
    let out = addiso(&["fit", "--input", &input]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["c_hat"], 1.0);
    assert_eq!(v["components"][0]["levels"], serde_json::json!([-1.0, 1.0]));
    assert_eq!(v["components"][1]["levels"], serde_json::json!([0.0, 0.0]));
    assert_eq!(v["final_objective"], 0.0);
    assert_eq!(v["converged"], true);
}

#[test]
fn fit_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.csv", "y,x1,x2\n0,1,2\n2,2,1\n");
    let out = addiso(&["fit", "--input", &input, "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text,
        "term,knot,level,weight\nc_hat,,1,\nx1,1,-1,1\nx1,2,1,1\nx2,1,0,1\nx2,2,0,1\n"
    );
}

#[test]
fn monotone_single_covariate_is_interpolated() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.csv", "y,x\n1,0.1\n4,0.2\n4.5,0.3\n10,0.4\n");
    let out = addiso(&["fit", "--input", &input]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let levels: Vec<f64> = serde_json::from_value(v["components"][0]["levels"].clone()).unwrap();
    let mean = (1.0 + 4.0 + 4.5 + 10.0) / 4.0;
    for (l, y) in levels.iter().zip([1.0, 4.0, 4.5, 10.0]) {
        assert!((l - (y - mean)).abs() < 1e-12);
    }
    assert_eq!(v["final_objective"], 0.0);
}

#[test]
fn fit_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let n = 120;
    let rows: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            let (a, b) = (next(), next());
            [a.powi(3) + (b * 1.5).sin() + 0.3 * next(), a, b]
        })
        .collect();
    let mut text = String::from("y,a,b\n");
    for r in &rows {
        text.push_str(&format!("{},{},{}\n", r[0], r[1], r[2]));
    }
    let input = write(dir.path(), "in.csv", &text);
    let report = dir.path().join("fit.json");
    let out = addiso(&[
        "fit",
        "--input",
        &input,
        "--output",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();

    let ds = build_dataset(
        rows.iter().map(|r| r[0]).collect(),
        vec![
            rows.iter().map(|r| r[1]).collect(),
            rows.iter().map(|r| r[2]).collect(),
        ],
    )
    .unwrap();
    let fit = backfit(&ds, &FitConfig::default()).unwrap();
    let expected = fit.fitted_values(&ds);
    let c: f64 = v["c_hat"].as_f64().unwrap();
    let comps: Vec<(Vec<f64>, Vec<f64>)> = (0..2)
        .map(|j| {
            (
                serde_json::from_value(v["components"][j]["knots"].clone()).unwrap(),
                serde_json::from_value(v["components"][j]["levels"].clone()).unwrap(),
            )
        })
        .collect();
    for (fitted, (knots, levels)) in fit.components.iter().zip(&comps) {
        assert_eq!(fitted.knots(), &knots[..]);
        assert_eq!(fitted.levels(), &levels[..]);
    }
    for (i, r) in rows.iter().enumerate() {
        let got = c
            + step_eval(&comps[0].0, &comps[0].1, r[1])
            + step_eval(&comps[1].0, &comps[1].1, r[2]);
        assert!(
            (got - expected[i]).abs() < 1e-9,
            "{i}: {got} vs {}",
            expected[i]
        );
    }
}

#[test]
fn non_numeric_cell_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.csv", "y,x1\n1,2\n3,abc\n");
    let out = addiso(&["fit", "--input", &input]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("line 3") && msg.contains("column 2"), "{msg}");
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(
        addiso(&["fit", "--input", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(addiso(&["fit"]).status.code(), Some(2));
    let cfg = write(dir.path(), "bad.cfg", "preset = table7\n");
    assert_eq!(
        addiso(&["reproduce-table", "--config", &cfg]).status.code(),
        Some(2)
    );
    let cfg = write(dir.path(), "rho.cfg", "rho = 1.5\nreps = 1\n");
    assert_eq!(
        addiso(&["simulate", "--config", &cfg]).status.code(),
        Some(2)
    );
    let input = write(dir.path(), "in.csv", "y,x1\n1,2\n");
    assert_eq!(
        addiso(&["fit", "--input", &input, "--tol", "-1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unconverged_fit_exits_3_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.csv", "y,x1,x2\n0,1,3\n1,2,1\n5,3,2\n");
    let out = addiso(&["fit", "--input", &input, "--max-cycles", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["converged"], false);
    assert!(stderr(&out).contains("did not converge"));
}

#[test]
fn reproduce_table_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.cfg", "preset = table2\nreps = 2\nseed = 3\n");
    let out = addiso(&["reproduce-table", "--config", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 16);
    assert_eq!(lines[0], addiso_core::simulation::TABLE_CSV_HEADER);
    for l in &lines[1..] {
        let cells: Vec<&str> = l.split(',').collect();
        assert_eq!(cells.len(), 17);
        for c in &cells {
            assert!(c.parse::<f64>().is_ok_and(f64::is_finite), "{l}");
        }
    }
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", "n = 50\nreps = 100\nseed = 1\n");
    let out = addiso(&["simulate", "--config", &cfg, "--reps", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["reps_completed"], 3);
    assert_eq!(v["config"]["n"], 50);
}

#[test]
fn oracle_check_single_n_has_no_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "o.cfg", "ns = 100\nreps = 4\n");
    let out = addiso(&["oracle-check", "--config", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["strictly_decreasing"].is_null());
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);

    let cfg = write(dir.path(), "o1.cfg", "ns = 100, 200\nreps = 4\nm2 = none\n");
    let out = addiso(&["oracle-check", "--config", &cfg]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for row in v["rows"].as_array().unwrap() {
        assert_eq!(row["median_sup"], serde_json::json!([0.0]));
    }
}

#[test]
fn quantile_curves_long_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.cfg", "n = 60\nreps = 5\nseed = 2\n");
    let out = addiso(&["quantile-curves", "--config", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,value,series,quantile"));
    // 3 quantiles x 3 series x 101 grid points
    assert_eq!(lines.count(), 3 * 3 * 101);
}
