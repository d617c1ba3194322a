use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const EXAMPLE: &str = "# robust-instance v1
problem selection
n 4
p 2
N 3
c 5 5 3 3
c 3 8 9 7
c 3 2 1 6
";

fn robustkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robustkit"))
        .args(args)
        .env_remove("ROBUSTKIT_WORKERS")
        .output()
        .expect("binary runs")
}

fn example_file(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("example.txt");
    fs::write(&path, EXAMPLE).unwrap();
    path
}

fn keys(out: &Output) -> HashMap<String, String> {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').expect("key=value line");
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn num(map: &HashMap<String, String>, key: &str) -> f64 {
    map.get(key).unwrap_or_else(|| panic!("missing {key}")).parse().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn construct_lp_k1_on_example() {
    let dir = TempDir::new().unwrap();
    let f = example_file(&dir);
    let out = keys(&robustkit(&[
        "construct",
        "--in",
        path_str(&f),
        "--method",
        "lp",
        "--k",
        "1",
    ]));
    assert_eq!(out["method"], "lp");
    assert!((num(&out, "apriori") - 1.33).abs() < 0.01);
    assert!((num(&out, "t_star") - 0.75).abs() < 1e-6);
    let lambda: Vec<f64> = out["lambda"].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(lambda.len(), 3);
    assert!((lambda.iter().sum::<f64>() - 1.0).abs() < 1e-5);
}

#[test]
fn construct_midpoint_on_example() {
    let dir = TempDir::new().unwrap();
    let f = example_file(&dir);
    let out = keys(&robustkit(&["construct", "--in", path_str(&f), "--method", "midpoint"]));
    let c: Vec<f64> = out["scenario"].split(',').map(|v| v.parse().unwrap()).collect();
    for (got, want) in c.iter().zip([3.67, 5.0, 4.33, 5.33]) {
        assert!((got - want).abs() < 0.005, "{got} vs {want}");
    }
}

#[test]
fn construct_rejects_k_above_p() {
    let dir = TempDir::new().unwrap();
    let f = example_file(&dir);
    let out = robustkit(&["construct", "--in", path_str(&f), "--method", "lp", "--k", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn worstcase_reports_cardinality_guarantee() {
    let dir = TempDir::new().unwrap();
    let f = example_file(&dir);
    let out = keys(&robustkit(&["bounds", "--in", path_str(&f), "--method", "worstcase"]));
    assert_eq!(num(&out, "apriori"), 2.0);
    assert!(out.contains_key("ub"));
    assert!(!out.contains_key("lb"));
}

#[test]
fn bounds_midpoint_on_example() {
    let dir = TempDir::new().unwrap();
    let f = example_file(&dir);
    let out = keys(&robustkit(&["bounds", "--in", path_str(&f), "--method", "midpoint"]));
    assert_eq!(num(&out, "lb"), 8.0);
    assert_eq!(num(&out, "ub"), 12.0);
    assert_eq!(num(&out, "aposteriori"), 1.5);
}

#[test]
fn bounds_lp_k2_with_exact_and_maxmin() {
    let dir = TempDir::new().unwrap();
    let f = example_file(&dir);
    let out = keys(&robustkit(&[
        "bounds",
        "--in",
        path_str(&f),
        "--method",
        "lp",
        "--k",
        "2",
        "--with-exact",
        "--with-maxmin",
    ]));
    assert_eq!(num(&out, "apriori"), 1.0);
    assert_eq!(num(&out, "opt"), 10.0);
    assert_eq!(out["opt_solution"], "0,3");
    assert_eq!(num(&out, "maxmin_lb"), 10.0);
}

#[test]
fn exact_over_budget_exits_3() {
    let dir = TempDir::new().unwrap();
    let f = example_file(&dir);
    let out = robustkit(&[
        "bounds",
        "--in",
        path_str(&f),
        "--method",
        "midpoint",
        "--with-exact",
        "--exact-budget",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_instance_exits_1() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("bad.txt");
    fs::write(&f, "# robust-instance v1\nproblem selection\nn 3\np 1\nN 1\nc 1 2\n").unwrap();
    let out = robustkit(&["construct", "--in", path_str(&f), "--method", "midpoint"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let args = [
            "gen",
            "--n",
            "10",
            "--p",
            "3",
            "--N",
            "5",
            "--count",
            "2",
            "--seed",
            "1",
            "--out-dir",
        ];
        let out = robustkit(&[&args[..], &[path_str(&out_dir)]].concat());
        assert!(out.status.success());
        let mut names: Vec<_> = fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert_eq!(names, ["inst_0.txt", "inst_1.txt"]);
        names
            .iter()
            .map(|n| fs::read(out_dir.join(n)).unwrap())
            .collect::<Vec<_>>()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    assert_ne!(a[0], a[1]);

    // Generated files are valid input.
    let f = dir.path().join("a/inst_0.txt");
    keys(&robustkit(&[
        "bounds",
        "--in",
        path_str(&f),
        "--method",
        "lp",
        "--k",
        "2",
    ]));
}

#[test]
fn gen_rejects_zero_n_as_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = robustkit(&[
        "gen",
        "--n",
        "0",
        "--p",
        "1",
        "--N",
        "1",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(robustkit(&["construct", "--bogus"]).status.code(), Some(2));
}

#[test]
fn experiment_single_instance_has_every_metric() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("r.csv");
    let out = robustkit(&[
        "experiment",
        "--grid-spec",
        "8,3,4",
        "--count",
        "1",
        "--seed",
        "7",
        "--out",
        path_str(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,p,N,metric,method,k,value,stderr,instances,runtime_ms")
    );
    let rows: Vec<&str> = lines.collect();
    // 3 + 3 a-priori, then (Mid, LP×3, MM) for aposteriori/ub/lb, plus OPT.
    assert_eq!(rows.len(), 6 + 3 * 5 + 1);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert!(!fields[6].is_empty(), "missing value in {row}");
        assert_eq!(fields[8], "1");
    }
}

#[test]
fn experiment_output_independent_of_workers() {
    let dir = TempDir::new().unwrap();
    let run = |workers: &str| {
        let csv = dir.path().join(format!("w{workers}.csv"));
        let out = robustkit(&[
            "experiment",
            "--grid-spec",
            "10,3,10;12,4,5",
            "--count",
            "40",
            "--seed",
            "3",
            "--workers",
            workers,
            "--out",
            path_str(&csv),
        ]);
        assert!(out.status.success());
        fs::read(csv).unwrap()
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn experiment_grid_spec_file() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("grid.txt");
    fs::write(&spec, "# cells\n6 2 3\n").unwrap();
    let out = robustkit(&[
        "experiment",
        "--grid-spec",
        path_str(&spec),
        "--count",
        "3",
        "--no-opt",
        "--k",
        "1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "6,2,3,opt,OPT,,,,0,"));
    assert!(text.lines().skip(1).all(|l| l.starts_with("6,2,3,")));
}

#[test]
fn experiment_rejects_bad_grid() {
    let out = robustkit(&["experiment", "--grid-spec", "3,5,2", "--count", "1"]);
    assert_eq!(out.status.code(), Some(1));
}
