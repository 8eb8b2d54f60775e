use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use ris_locate_cli::output::fmt_f64;

fn ris_locate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-locate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn records(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn noiseless_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[scene]\n").unwrap();
    let out = dir.path().join("r");
    let run = ris_locate(&[
        "noiseless",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let csv = out.join("trajectory.csv");
    assert_eq!(header(&csv), "actual_x,actual_y,est_x,est_y,err_m");
    let rows = records(&csv);
    assert_eq!(rows.len(), 20);
    for r in rows {
        assert!(r[4].parse::<f64>().unwrap() <= 1e-2);
    }
}

#[test]
fn custom_trajectory_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[trajectory]\npoints = [[60.0, 20.0], [55.0, 25.0]]\n",
    )
    .unwrap();
    let run = ris_locate(&[
        "noiseless",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let rows = records(&dir.path().join("trajectory.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[1][0], "55");
}

#[test]
fn snr_sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let run = ris_locate(&[
            "snr-sweep",
            "--seed",
            "7",
            "--trials",
            "40",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(run.status.success());
    }
    for name in ["summary.csv", "trials.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(
        header(&a.join("summary.csv")),
        "snr_db,mean_m,median_m,p90_m,trials"
    );
    let trials = records(&a.join("trials.csv"));
    assert_eq!(trials.len(), 5 * 40);
    assert!(trials.iter().all(|r| &r[2] == "100"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[experiment]\nseed = 99\ntrials = 10\nsnr_db = [12.0]\n",
    )
    .unwrap();
    let run = |seed: Option<&str>, out: &str| {
        let out = dir.path().join(out);
        let mut args = vec!["snr-sweep", "--config", cfg.to_str().unwrap()];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        let o = out.to_str().unwrap().to_string();
        args.extend(["--out", &o]);
        assert!(ris_locate(&args).status.success());
        fs::read(out.join("trials.csv")).unwrap()
    };
    assert_eq!(run(None, "cfg"), run(Some("99"), "flag"));
    assert_ne!(run(None, "cfg"), run(Some("7"), "other"));
}

#[test]
fn compare_baseline_columns() {
    let dir = tempfile::tempdir().unwrap();
    let run = ris_locate(&[
        "compare-baseline",
        "--trials",
        "20",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let csv = dir.path().join("comparison.csv");
    assert_eq!(
        header(&csv),
        "snr_db,proposed_median_m,baseline_median_m,trials"
    );
    assert_eq!(records(&csv).len(), 5);
    assert_eq!(
        header(&dir.path().join("comparison_trials.csv")),
        "trial,snr_db,proposed_err_m,baseline_err_m"
    );
}

#[test]
fn elements_sweep_summary_keyed_by_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[experiment]\nn_ris = [10, 20]\n").unwrap();
    let run = ris_locate(&[
        "elements-sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let rows = records(&dir.path().join("summary.csv"));
    assert_eq!(
        header(&dir.path().join("summary.csv")),
        "n_ris,mean_m,median_m,p90_m,trials"
    );
    assert_eq!((&rows[0][0], &rows[1][0]), ("10", "20"));
}

#[test]
fn usage_errors_exit_nonzero() {
    for args in [
        &["bogus"][..],
        &["noiseless", "--nope"],
        &[],
        &["snr-sweep", "--trials", "0"],
    ] {
        let run = ris_locate(args);
        assert!(!run.status.success(), "{args:?}");
        assert!(!run.stderr.is_empty());
    }
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[scene]\nmu = -1.0\n", "mu"),
        ("[scene]\nbogus = 1\n", "scene.bogus"),
        ("[experiment]\ntrials = \"many\"\n", "experiment.trials"),
        (
            "[scene]\nris = [[30.0, 20.0, 20.0], [30.0, 20.0, 20.0], [40.0, 40.0, 20.0]]\n",
            "scene.ris",
        ),
    ];
    for (i, (text, key)) in cases.iter().enumerate() {
        let cfg = dir.path().join(format!("c{i}.toml"));
        fs::write(&cfg, text).unwrap();
        let out = dir.path().join(format!("out{i}"));
        let run = ris_locate(&[
            "noiseless",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(run.status.code(), Some(1));
        let err = String::from_utf8_lossy(&run.stderr);
        assert!(err.contains(key), "{key}: {err}");
        assert!(!out.exists(), "no output on config error");
    }
}

#[test]
fn missing_config_file_fails() {
    let run = ris_locate(&["noiseless", "--config", "/nonexistent/c.toml"]);
    assert_eq!(run.status.code(), Some(1));
}

proptest! {
    #[test]
    fn formatted_values_round_trip_through_csv(values in prop::collection::vec(any::<f64>(), 1..20)) {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(values.iter().map(|v| fmt_f64(*v))).unwrap();
        let bytes = w.into_inner().unwrap();
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes.as_slice());
        let rec = r.records().next().unwrap().unwrap();
        for (field, v) in rec.iter().zip(&values) {
            let back: f64 = field.parse().unwrap();
            if v.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), v.to_bits(), "{} -> {}", v, field);
            }
        }
    }
}
