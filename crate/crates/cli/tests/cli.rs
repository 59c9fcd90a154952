use std::fs;
use std::process::{Command, Output};

fn greybm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greybm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

#[test]
fn list_names_experiments_with_references() {
    let out = greybm(&["list"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    for line in [
        "crossings-lt  (Thm. 4.3)",
        "odd-squared  (Appendix A)",
        "power-variation  (Thm. 3.6)",
    ] {
        assert!(stdout.lines().any(|l| l == line), "missing {line}");
    }
}

#[test]
fn berman_prints_the_existence_value() {
    let out = greybm(&["run", "berman", "--alpha", "1.0", "--beta", "1.0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out).contains("6.6843"), "{}", text(&out));
}

#[test]
fn specfun_golden_passes() {
    assert_eq!(greybm(&["run", "specfun-golden"]).status.code(), Some(0));
}

#[test]
fn crossings_run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let args = [
        "run",
        "crossings-lt",
        "--alpha",
        "1.2",
        "--beta",
        "0.6",
        "--eps-ladder",
        "2^-4..2^-7",
        "--replicas",
        "3",
        "--grid-n",
        "1025",
        "--out",
        out_dir,
    ];
    let out = greybm(&args);
    assert!(
        matches!(out.status.code(), Some(0) | Some(4)),
        "{}",
        text(&out)
    );
    let csv = fs::read_to_string(dir.path().join("crossings-lt.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    for column in ["epsilon", "scaled_crossings", "target", "gap"] {
        assert!(header.split(',').any(|c| c == column), "{header}");
    }
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("crossings-lt.json")).unwrap())
            .unwrap();
    assert_eq!(json["config"]["replicas"], 3);
    assert!(json["version"].is_string());
    assert!(json["wall_seconds"].is_number());
    assert!(json["gates"].as_array().is_some_and(|g| !g.is_empty()));

    let again = tempfile::tempdir().unwrap();
    let mut rerun = args.to_vec();
    let last = rerun.len() - 1;
    rerun[last] = again.path().to_str().unwrap();
    greybm(&rerun);
    assert_eq!(
        csv.as_bytes(),
        fs::read(again.path().join("crossings-lt.csv")).unwrap()
    );
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "alpha = 0.9\nbeta = 0.5\nreplicas = 2\ngrid-n = 1025\n",
    )
    .unwrap();
    let out = greybm(&[
        "run",
        "crossings-lt",
        "--config",
        cfg.to_str().unwrap(),
        "--alpha",
        "1.1",
        "--format",
        "json",
    ]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["config"]["alpha"], 1.1);
    assert_eq!(json["config"]["beta"], 0.5);
    assert_eq!(json["config"]["replicas"], 2);
}

#[test]
fn exit_codes() {
    assert_eq!(
        greybm(&["run", "no-such-experiment"]).status.code(),
        Some(2)
    );
    assert_eq!(
        greybm(&["run", "crossings-lt", "--alpha", "2.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        greybm(&["run", "crossings-lt", "--replicas", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        greybm(&["run", "crossings-lt", "--gamma", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        greybm(&["eval", "ml", "--beta", "0.5", "--x", "nan"])
            .status
            .code(),
        Some(2)
    );
    // E_{0.3}(1000) overflows f64
    assert_eq!(
        greybm(&["eval", "ml", "--beta", "0.3", "--x", "1000"])
            .status
            .code(),
        Some(3)
    );
    // the mean-square slope at alpha = 1 sits near 1, outside the gate
    let gate = greybm(&["run", "moment-convergence", "--replicas", "4"]);
    assert_eq!(gate.status.code(), Some(4), "{}", text(&gate));
}

#[test]
fn eval_and_sample_emit_data() {
    let out = greybm(&["eval", "ml", "--beta", "0.5", "--x", "-1,0"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let values: Vec<f64> = stdout
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    // E_{1/2}(−1) = e·erfc(1)
    assert!((values[0] - 0.427_583_576_155_807).abs() < 1e-12);
    assert_eq!(values[1], 1.0);

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("path.bin");
    let out = greybm(&[
        "sample",
        "path",
        "--alpha",
        "0.8",
        "--beta",
        "0.7",
        "--grid-n",
        "65",
        "--seed",
        "3",
        "--format",
        "binary",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let path = greybm::SamplePath::read_binary(fs::File::open(&file).unwrap()).unwrap();
    assert_eq!(path.core_values().len(), 65);
    assert_eq!(path.params.alpha(), 0.8);

    let out = greybm(&["sample", "mixing", "--beta", "0.5", "--replicas", "5"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);
}
