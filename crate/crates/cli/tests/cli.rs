//! End-to-end runs of the `lazyattack` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lazyattack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic dataset plus a trained softmax model.
fn fixture(dir: &Path) {
    let data = dir.join("data");
    ok(&[
        "gen-data",
        "--out-dir",
        s(&data),
        "--classes",
        "4",
        "--height",
        "12",
        "--width",
        "12",
        "--train",
        "400",
        "--test",
        "80",
        "--seed",
        "5",
    ]);
    let out = ok(&[
        "train",
        "--images",
        s(&data.join("train-images.idx")),
        "--labels",
        s(&data.join("train-labels.idx")),
        "--test-images",
        s(&data.join("test-images.idx")),
        "--test-labels",
        s(&data.join("test-labels.idx")),
        "--out",
        s(&dir.join("model.json")),
    ]);
    assert!(out.contains("test accuracy"), "{out}");
}

fn campaign_args<'a>(dir: &'a Path, out: &'a str) -> Vec<String> {
    let data = dir.join("data");
    [
        "--model",
        s(&dir.join("model.json")),
        "--images",
        s(&data.join("test-images.idx")),
        "--labels",
        s(&data.join("test-labels.idx")),
        "--epsilon",
        "0.1",
        "--count",
        "20",
        "--max-queries",
        "2000",
        "--out-dir",
        s(&dir.join(out)),
    ]
    .iter()
    .map(|a| a.to_string())
    .collect()
}

fn ok_owned(args: Vec<String>) -> String {
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn gen_data_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        ok(&[
            "gen-data",
            "--out-dir",
            s(d),
            "--train",
            "50",
            "--test",
            "20",
            "--seed",
            "9",
        ]);
    }
    for f in [
        "train-images.idx",
        "train-labels.idx",
        "test-images.idx",
        "test-labels.idx",
    ] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn campaigns_rerun_bitwise_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir);

    let mut first = vec!["attack".to_string()];
    first.extend(campaign_args(dir, "lazy"));
    ok_owned(first);
    let mut again = vec!["attack".to_string()];
    again.extend(campaign_args(dir, "lazy2"));
    ok_owned(again);
    for f in ["per_image.csv", "curve.csv", "noise.csv"] {
        assert_eq!(
            fs::read(dir.join("lazy").join(f)).unwrap(),
            fs::read(dir.join("lazy2").join(f)).unwrap(),
            "{f} differs between reruns"
        );
    }
    let curve = fs::read_to_string(dir.join("lazy/curve.csv")).unwrap();
    assert!(curve.starts_with("queries,success_rate\n"));

    for (method, extra) in [
        ("random-sign", vec![]),
        ("fgsm", vec!["--no-clip"]),
        ("pgd", vec!["--pgd-steps", "5"]),
    ] {
        let mut args = vec!["baseline".to_string(), "--method".into(), method.into()];
        args.extend(campaign_args(dir, method));
        args.extend(extra.into_iter().map(String::from));
        ok_owned(args);
    }

    // Report over three campaigns; medians recomputed here from the CSVs.
    let csvs: Vec<String> = ["lazy", "random-sign", "pgd"]
        .iter()
        .map(|c| s(&dir.join(c).join("per_image.csv")).to_string())
        .collect();
    let mut args = vec!["report".to_string()];
    args.extend(csvs.iter().cloned());
    args.extend([
        "--reference".into(),
        csvs[1].clone(),
        "--out-dir".into(),
        s(&dir.join("report")).into(),
    ]);
    ok_owned(args);
    let summary = fs::read_to_string(dir.join("report/summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for (row, csv) in rows.iter().zip(&csvs) {
        let text = fs::read_to_string(csv).unwrap();
        let mut q: Vec<u64> = text
            .lines()
            .skip(1)
            .filter(|l| l.split(',').nth(3) == Some("true"))
            .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
            .collect();
        q.sort();
        let expected = match q.len() {
            0 => String::new(),
            n if n % 2 == 1 => (q[n / 2] as f64).to_string(),
            n => ((q[n / 2 - 1] + q[n / 2]) as f64 / 2.0).to_string(),
        };
        assert_eq!(row.split(',').nth(6).unwrap(), expected, "{row}");
    }
    // PGD's query column is its step count.
    assert!(rows[2].ends_with("gradient-steps"));
    let pgd = fs::read_to_string(&csvs[2]).unwrap();
    assert!(pgd.lines().skip(1).all(|l| l.split(',').nth(4) == Some("5")));

    // Unclipped FGSM noise sits entirely on the vertices.
    let out = ok(&[
        "report",
        &csvs[0],
        "--noise",
        s(&dir.join("fgsm/noise.csv")),
        "--bins",
        "8",
    ]);
    assert!(out.contains("vertex fraction 1.0000"), "{out}");
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir);
    let data = dir.join("data");
    let config = dir.join("campaign.toml");
    fs::write(
        &config,
        format!(
            "schema_version = 1\nmode = \"targeted\"\nepsilon = 0.2\nimages = 5\nmax_queries = 0\nmodel = {:?}\ndata_images = {:?}\ndata_labels = {:?}\n",
            s(&dir.join("model.json")),
            s(&data.join("test-images.idx")),
            s(&data.join("test-labels.idx")),
        ),
    )
    .unwrap();
    let out_dir = dir.join("out");
    ok(&[
        "attack",
        "--config",
        s(&config),
        "--max-queries",
        "300",
        "--out-dir",
        s(&out_dir),
    ]);
    let resolved = fs::read_to_string(out_dir.join("config.toml")).unwrap();
    assert!(resolved.contains("max_queries = 300"));
    assert!(resolved.contains("mode = \"targeted\""));
    let rows = fs::read_to_string(out_dir.join("per_image.csv")).unwrap();
    assert_eq!(rows.lines().count(), 6);
    // Every targeted row names a target.
    assert!(rows.lines().skip(1).all(|l| !l.split(',').nth(2).unwrap().is_empty()));
}

#[test]
fn errors_name_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let bad = dir.join("model.json");
    fs::write(&bad, "{\"schema\": ").unwrap();
    let out = run(&["attack", "--model", s(&bad), "--out-dir", s(&dir.join("o"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.json") && err.contains("byte"), "{err}");

    let out = run(&[
        "train",
        "--images",
        s(&dir.join("missing.idx")),
        "--labels",
        "x",
        "--out",
        "y",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.idx"));
}

#[test]
fn verify_exit_status() {
    let out = ok(&["verify", "--suite", "counterexample"]);
    assert!(out.contains("A={} B={1} e=2"));
    assert!(out.trim_end().ends_with("# PASS: 4/4 passed"));
    let out = ok(&["verify", "--suite", "theorem1", "--trials", "100", "--seed", "7"]);
    assert!(out.contains("# PASS: 100/100 passed"));
    assert_eq!(out.lines().filter(|l| l.starts_with("ok ")).count(), 100);
    let out = run(&["verify", "--suite", "no-such-suite"]);
    assert_eq!(out.status.code(), Some(2));
}
