use std::path::Path;
use std::process::{Command, Output};

fn rsa_exh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsa-exh"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn records(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn check_reports_both_wrsa_regions() {
    let out = rsa_exh(&[
        "check",
        "--model",
        "wrsa",
        "--lambda",
        "3",
        "--cost-ab",
        "1",
        "--cost-anb",
        "1.2",
        "--xi",
        "0.1",
        "--predicate",
        "listener-anti-exh",
    ]);
    let rows = records(&stdout(&out));
    let bounds: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[2].parse().unwrap(), r[3].parse().unwrap()))
        .collect();
    let expected = [(0.0, 0.04), (0.57, 0.95)];
    assert_eq!(bounds.len(), 2, "{bounds:?}");
    for (got, want) in bounds.iter().zip(expected) {
        assert!(
            (got.0 - want.0).abs() <= 0.01 && (got.1 - want.1).abs() <= 0.01,
            "{bounds:?}"
        );
    }
}

#[test]
fn check_json_carries_the_bwrsa_threshold() {
    let out = rsa_exh(&[
        "check",
        "--model",
        "bwrsa",
        "--lambda",
        "3",
        "--cost-ab",
        "1",
        "--cost-anb",
        "1.2",
        "--xi",
        "0.95",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let f = |x: f64| logistic(3.0 * x);
    let ln2 = 2f64.ln();
    let expected = f(1.0) / (f(1.0) - f(1.0 - ln2) + f(1.2 - ln2));
    assert!((v["bwrsa_threshold"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert_eq!(v["intervals"].as_array().unwrap().len(), 0);
}

#[test]
fn sweep_crosses_the_identity_once() {
    let out = rsa_exh(&[
        "sweep",
        "--model",
        "base",
        "--lambda",
        "3",
        "--cost-ab",
        "0.5",
        "--cost-anb",
        "1",
        "--grid",
        "99",
    ]);
    let rows = records(&stdout(&out));
    assert_eq!(rows.len(), 99);
    let crossing = logistic(0.5);
    for r in &rows {
        let p: f64 = r[1].parse().unwrap();
        let post_a: f64 = r[5].parse().unwrap();
        assert_eq!(r[2] == "true", p > crossing, "p = {p}");
        assert_eq!(post_a > p, p > crossing, "p = {p}");
    }
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [
        vec![
            "sweep",
            "--model",
            "wrsa",
            "--lambda",
            "3",
            "--cost-ab",
            "1",
            "--cost-anb",
            "1",
        ],
        vec![
            "sweep",
            "--model",
            "nope",
            "--lambda",
            "3",
            "--cost-ab",
            "1",
            "--cost-anb",
            "1",
        ],
        vec![
            "check",
            "--model",
            "base",
            "--lambda",
            "3",
            "--cost-ab",
            "1",
            "--cost-anb",
            "1",
            "--predicate",
            "x",
        ],
        vec![
            "sweep",
            "--model",
            "base",
            "--lambda",
            "-1",
            "--cost-ab",
            "1",
            "--cost-anb",
            "1",
        ],
        vec!["compare", "--models", "base,nope", "--data", "x.csv"],
        vec![],
    ] {
        let out = rsa_exh(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn runtime_errors_exit_with_1() {
    let out = rsa_exh(&[
        "fit",
        "--model",
        "base",
        "--data",
        "/definitely/not/here.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error (io)"));
}

#[test]
fn params_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("params.json");
    std::fs::write(
        &path,
        r#"{"lambda": 3, "delta_ab": 1, "delta_anb": 1.2, "xi": 0.5}"#,
    )
    .unwrap();
    let path = path.to_str().unwrap();
    let from_file = stdout(&rsa_exh(&[
        "sweep", "--model", "wrsa", "--params", path, "--xi", "0.1", "--grid", "9",
    ]));
    let from_flags = stdout(&rsa_exh(&[
        "sweep",
        "--model",
        "wrsa",
        "--lambda",
        "3",
        "--cost-ab",
        "1",
        "--cost-anb",
        "1.2",
        "--xi",
        "0.1",
        "--grid",
        "9",
    ]));
    assert_eq!(from_file, from_flags);
}

fn synth(dir: &Path, seed: u64) -> String {
    let path = dir.join(format!("synth-{seed}.csv"));
    let seed = seed.to_string();
    let out = rsa_exh(&[
        "synth",
        "--model",
        "wrsa",
        "--lambda",
        "3.9",
        "--cost-ab",
        "0",
        "--cost-anb",
        "0.37",
        "--xi",
        "0.86",
        "--seed",
        &seed,
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty(), "--out keeps stdout empty");
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_and_fit_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read(synth(dir.path(), 4)).unwrap();
    let data = synth(dir.path(), 4);
    assert_eq!(a, std::fs::read(&data).unwrap());
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 481);

    let fit = |format: &str| {
        stdout(&rsa_exh(&[
            "fit",
            "--model",
            "wrsa",
            "--data",
            &data,
            "--restarts",
            "2",
            "--seed",
            "7",
            "--format",
            format,
        ]))
    };
    assert_eq!(fit("csv"), fit("csv"));
    let v: serde_json::Value = serde_json::from_str(&fit("json")).unwrap();
    let (k, ll, aic) = (
        v["n_params"].as_f64().unwrap(),
        v["loglik"].as_f64().unwrap(),
        v["aic"].as_f64().unwrap(),
    );
    assert_eq!(k, 7.0);
    assert!((aic - (2.0 * k - 2.0 * ll)).abs() < 1e-9);
}

#[test]
fn simulate_tables_are_normalised() {
    let out = rsa_exh(&[
        "simulate",
        "--model",
        "li1",
        "--lambda",
        "2",
        "--cost-ab",
        "0.5",
        "--cost-anb",
        "1",
        "--p",
        "0.4",
    ]);
    let rows = records(&stdout(&out));
    for level in ["1", "2"] {
        for world in ["W_A", "W_AB"] {
            let total: f64 = rows
                .iter()
                .filter(|r| r[0] == level && r[1] == "speaker" && r[2] == "0" && r[3] == world)
                .map(|r| r[5].parse::<f64>().unwrap())
                .sum();
            assert!(
                (total - 1.0).abs() < 1e-12,
                "level {level} {world}: {total}"
            );
        }
    }
}

#[test]
fn compare_recovers_the_generating_model() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = 20;
    let mut hits = 0;
    for seed in 0..seeds {
        let data = synth(dir.path(), seed);
        let out = rsa_exh(&[
            "compare",
            "--models",
            "all",
            "--data",
            &data,
            "--restarts",
            "4",
            "--seed",
            &seed.to_string(),
        ]);
        let rows = records(&stdout(&out));
        assert_eq!(rows.len(), 9);
        let aics: Vec<f64> = rows.iter().map(|r| r[10].parse().unwrap()).collect();
        assert!(aics.windows(2).all(|w| w[0] <= w[1]));
        hits += usize::from(rows[0][0] == "wrsa");
    }
    assert!(hits * 5 >= seeds as usize * 4, "{hits}/{seeds}");
}
