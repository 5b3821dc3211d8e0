use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_qgpart");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn gaussian_model(dir: &Path, name: &str, mean: f64) -> PathBuf {
    let path = dir.join(name);
    let doc = format!(
        r#"{{"dim":1,"atom":null,"components":[{{"weight":1.0,"marginals":[{{"a":{mean},"alpha_neg":0.0,"alpha_pos":0.0,"sigma":1.0,"c_neg":1.0,"c_pos":1.0}}]}}]}}"#
    );
    std::fs::write(&path, doc).unwrap();
    path
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}

#[test]
fn simulate_from_atom_only_model_repeats_the_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("atom.json"),
        r#"{"dim":2,"atom":{"weight":1.0,"location":[1.5,-2.0]},"components":[]}"#,
    )
    .unwrap();
    let out = stdout(dir.path(), &["simulate", "--model", "atom.json", "--n", "5", "--seed", "4"]);
    assert!(out.starts_with("# qgpart simulate --model atom.json --n 5 --seed 4\nx1,x2\n"));
    assert_eq!(data_rows(&out), vec![vec![1.5, -2.0]; 5]);
}

#[test]
fn fit_selects_one_component_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    gaussian_model(dir.path(), "g.json", 0.0);
    let sample = stdout(dir.path(), &["simulate", "--model", "g.json", "--n", "500", "--seed", "11"]);
    std::fs::write(dir.path().join("d.csv"), &sample).unwrap();
    let report = stdout(dir.path(), &["fit", "--input", "d.csv", "--n-max", "3", "--output", "/dev/stdout"]);
    let value: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(value["n_selected"], 1);
    assert!(value["command"].as_str().unwrap().starts_with("qgpart fit --input d.csv"));

    std::fs::write(dir.path().join("fit.json"), &report).unwrap();
    let data = data_rows(&sample);
    let model = qgpart::model_from_json(&value["model"].to_string()).unwrap();
    let ll = qgpart::log_likelihood(&model, &data).unwrap();
    let reported = value["log_likelihood"].as_f64().unwrap();
    assert!((ll - reported).abs() <= 1e-12 * reported.abs(), "{ll} vs {reported}");

    // A fit report is accepted wherever a model is expected.
    let again = stdout(dir.path(), &["simulate", "--model", "fit.json", "--n", "3"]);
    assert_eq!(data_rows(&again).len(), 3);
}

#[test]
fn classify_labels_by_smaller_cost() {
    let dir = tempfile::tempdir().unwrap();
    gaussian_model(dir.path(), "h0.json", 0.0);
    gaussian_model(dir.path(), "h1.json", 2.0);
    std::fs::write(dir.path().join("p.csv"), "x\n1.01\n0.99\n-3\n").unwrap();
    let out = stdout(dir.path(), &["classify", "--input", "p.csv", "--model", "h0.json", "--model", "h1.json"]);
    let labels: Vec<f64> = data_rows(&out).iter().map(|r| r[1]).collect();
    assert_eq!(labels, vec![1.0, 0.0, 0.0]);
}

#[test]
fn risk_reports_the_two_gaussian_optimum() {
    let dir = tempfile::tempdir().unwrap();
    gaussian_model(dir.path(), "h0.json", 0.0);
    gaussian_model(dir.path(), "h1.json", 2.0);
    let out = stdout(dir.path(), &["risk", "--model", "h0.json", "--model", "h1.json"]);
    let value: serde_json::Value = serde_json::from_str(&out).unwrap();
    let z = value["report"]["z"].as_f64().unwrap();
    assert!((z - 0.317_310_507_862_914_1).abs() < 1e-9, "{z}");

    let constant = stdout(
        dir.path(),
        &["risk", "--model", "h0.json", "--model", "h1.json", "--rule", "constant:0", "--format", "csv"],
    );
    let z_line = constant.lines().find_map(|l| l.strip_prefix("# z=")).unwrap();
    let z: f64 = z_line.split_whitespace().next().unwrap().parse().unwrap();
    assert!((z - 1.0).abs() < 1e-12, "{constant}");
}

#[test]
fn grid_lp_matches_pointwise_argmin() {
    let dir = tempfile::tempdir().unwrap();
    gaussian_model(dir.path(), "h0.json", 0.0);
    gaussian_model(dir.path(), "h1.json", 2.0);
    let out = stdout(
        dir.path(),
        &["grid-lp", "--model", "h0.json", "--model", "h1.json", "--grid-resolution", "40"],
    );
    assert!(out.contains("label_mismatches=0"), "{out}");
    assert_eq!(data_rows(&out).len(), 40);
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    gaussian_model(dir.path(), "g.json", 0.0);
    std::fs::write(dir.path().join("run.json"), r#"{"model": ["g.json"], "n": 4, "seed": 9}"#).unwrap();
    let from_config = stdout(dir.path(), &["simulate", "--config", "run.json"]);
    let direct = stdout(dir.path(), &["simulate", "--model", "g.json", "--n", "4", "--seed", "9"]);
    assert_eq!(from_config, direct);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    gaussian_model(dir.path(), "g.json", 0.0);
    gaussian_model(dir.path(), "h.json", 3.0);
    let sim = ["simulate", "--model", "g.json", "--n", "300", "--seed", "21"];
    let a = stdout(dir.path(), &sim);
    assert_eq!(a, stdout(dir.path(), &sim));
    std::fs::write(dir.path().join("d.csv"), &a).unwrap();
    let fit = ["fit", "--input", "d.csv", "--n-max", "2", "--seed", "5"];
    assert_eq!(stdout(dir.path(), &fit), stdout(dir.path(), &fit));
    let mc = ["risk", "--model", "g.json", "--model", "h.json", "--method", "monte-carlo", "--n", "2000"];
    assert_eq!(stdout(dir.path(), &mc), stdout(dir.path(), &mc));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    gaussian_model(dir.path(), "g.json", 0.0);
    std::fs::write(dir.path().join("bad.csv"), "1\nNaN\n").unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"dim":1,"atom":null,"components":[]}"#).unwrap();

    let cases: [&[&str]; 5] = [
        &["fit"],
        &["fit", "--input", "bad.csv"],
        &["fit", "--input", "missing.csv"],
        &["simulate", "--model", "bad.json", "--n", "3"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}
