use std::path::Path;
use std::process::{Command, Output};

fn galerkin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_galerkin"))
        .args(args)
        .output()
        .expect("spawn galerkin")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const POLY3: &str = r#"{"family":"poly","degree":3}"#;

#[test]
fn decompose_reports_sphere_error() {
    let o = galerkin(&[
        "decompose",
        "--data",
        "sampler:sphere",
        "--n",
        "2000",
        "--d",
        "3",
        "--kernel",
        POLY3,
        "--p",
        "16",
        "--k",
        "9",
        "--geometry",
        "sphere",
        "--truth-sphere",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[0]["type"], "eigenvalue");
    let first = lines[0]["value"].as_f64().unwrap();
    assert!((first - 2.0).abs() < 0.5, "{first}");
    assert_eq!(lines[9]["type"], "surrogate_error");
    assert!(lines[9]["value"].as_f64().unwrap() < 0.2);
}

#[test]
fn exit_codes() {
    let bad_kernel = galerkin(&[
        "decompose",
        "--data",
        "sampler:sphere",
        "--n",
        "50",
        "--d",
        "3",
        "--kernel",
        "{\"family\":\"nope\"}",
    ]);
    assert_eq!(bad_kernel.status.code(), Some(1));
    let missing_n = galerkin(&["decompose", "--data", "sampler:sphere", "--kernel", POLY3]);
    assert_eq!(missing_n.status.code(), Some(1));
    let unknown_flag = galerkin(&["decompose", "--bogus"]);
    assert_eq!(unknown_flag.status.code(), Some(1));
    let missing_file = galerkin(&["decompose", "--data", "/definitely/not/here.csv", "--kernel", POLY3]);
    assert_eq!(missing_file.status.code(), Some(2));
    let singular = galerkin(&[
        "decompose",
        "--data",
        "sampler:sphere",
        "--n",
        "50",
        "--d",
        "3",
        "--kernel",
        r#"{"family":"poly","degree":1100}"#,
        "--p",
        "10",
    ]);
    assert_eq!(
        singular.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&singular.stderr)
    );
    let graph_cap = galerkin(&[
        "graph-baseline",
        "--data",
        "sampler:sphere",
        "--n",
        "300",
        "--d",
        "3",
        "--kernel",
        POLY3,
        "--max-n",
        "100",
    ]);
    assert_eq!(graph_cap.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&graph_cap.stderr).contains("O(n^2)"));
}

#[test]
fn graph_baseline_csv() {
    let o = galerkin(&[
        "graph-baseline",
        "--data",
        "sampler:sphere",
        "--n",
        "400",
        "--d",
        "3",
        "--kernel",
        POLY3,
        "--p",
        "16",
        "--alpha",
        "2",
        "--k",
        "4",
        "--truth-sphere",
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("type,index,value"));
    assert_eq!(lines.clone().count(), 5);
    assert!(lines.last().unwrap().starts_with("surrogate_error,,"));
}

#[test]
fn saved_estimate_feeds_export() {
    let dir = tempfile::tempdir().unwrap();
    let est = dir.path().join("est.glkn");
    let o = galerkin(&[
        "decompose",
        "--data",
        "sampler:moons",
        "--n",
        "400",
        "--kernel",
        r#"{"family":"exp","sigma":1}"#,
        "--p",
        "30",
        "--save",
        est.to_str().unwrap(),
        "--k",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = dir.path().join("grid.csv");
    let o = galerkin(&[
        "export-grid",
        "--estimate",
        est.to_str().unwrap(),
        "--indices",
        "0,1",
        "--mins",
        "-1,-0.5",
        "--maxs",
        "2,1",
        "--resolution",
        "3,2",
        "--out",
        grid.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&grid).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,f0,f1");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("-1.0,-0.5,"));
}

#[test]
fn sweep_jsonl_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"task":"galerkin_sphere","n":[300],"d":[3],"kernels":[{"family":"poly","degree":2}],"p":[9,20],"k":4}"#,
    )
    .unwrap();
    let o = galerkin(&["sweep", cfg.to_str().unwrap(), "--reps", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let items: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(items.len(), 5);
    assert!(items[..4].iter().all(|v| v["type"] == "record"));
    assert_eq!(items[4]["type"], "summary");

    let out = dir.path().join("runs.csv");
    let o = galerkin(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(rdr.headers().unwrap().len(), 16);
    assert_eq!(rdr.records().count(), 3);
}

#[test]
fn sweep_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"task":"galerkin_sphere","n":[10],"d":[3],"p":[50]}"#).unwrap();
    assert_eq!(galerkin(&["sweep", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert!(!Path::new(&dir.path().join("missing.json")).exists());
    assert_eq!(
        galerkin(&["sweep", dir.path().join("missing.json").to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn hermite_demo_and_time_report() {
    let o = galerkin(&[
        "hermite",
        "--data",
        "sampler:gaussian",
        "--n",
        "300",
        "--d",
        "1",
        "--kernel",
        r#"{"family":"gauss","sigma":1}"#,
        "--p",
        "20",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let kinds: Vec<String> = stdout(&o)
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["type"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(kinds, ["train_rmse", "test_rmse", "plain_test_rmse"]);

    let o = galerkin(&[
        "time-report",
        "--kernel",
        POLY3,
        "--p",
        "10",
        "--n",
        "100,200",
        "--d",
        "3,4",
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 5);
}
