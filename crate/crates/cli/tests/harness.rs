use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use softorder::Real;
use softorder_harness::config::{ExperimentConfig, LoadedConfig};
use softorder_harness::fsutil::{find_files, read_text};
use softorder_harness::main_with_args;
use softorder_harness::run::{cmd_run, Stat, Summary};

fn small_random(out: &Path) -> LoadedConfig {
    let text = serde_json::json!({
        "experiment": {"random-tasks": {"m": 6, "sample_sizes": [8, 16], "nonlinearity": "relu"}},
        "architecture": {"depth": 2, "modes": ["parallel", "permuted", "soft"]},
        "train": {"iterations": 60, "batch_size": 4, "eval_every": 20},
        "trials": 3,
        "seed": 5,
        "output": out,
    })
    .to_string();
    LoadedConfig::from_parts(ExperimentConfig::from_json(&text).unwrap(), PathBuf::from("/")).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_cli(args: &[&str]) -> i32 {
    main_with_args(
        std::iter::once("softorder")
            .chain(args.iter().copied())
            .map(std::ffi::OsString::from),
    )
}

/// Final train-split metrics of one trial, recomputed from its CSV.
fn final_from_csv(path: &Path) -> (Real, Real) {
    let text = read_text(path).unwrap();
    let rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .filter(|r: &Vec<String>| r[2] == "train")
        .collect();
    let last = rows.iter().map(|r| r[0].parse::<usize>().unwrap()).max().unwrap();
    let finals: Vec<&Vec<String>> = rows.iter().filter(|r| r[0].parse::<usize>().unwrap() == last).collect();
    let loss: Real = finals.iter().map(|r| r[3].parse::<Real>().unwrap()).sum();
    let acc: Real = finals.iter().map(|r| r[4].parse::<Real>().unwrap()).sum::<Real>() / finals.len() as Real;
    (loss, acc)
}

#[test]
fn summary_statistics_match_per_trial_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let summary = cmd_run(&small_random(&out), &out).unwrap();
    assert_eq!(summary.cells.len(), 6);
    for cell in &summary.cells {
        let dir = out.join(cell.mode.as_str()).join(&cell.variant);
        let (mut losses, mut accs) = (Vec::new(), Vec::new());
        for t in 0..3 {
            let (l, a) = final_from_csv(&dir.join(format!("trial_{t}")).join("metrics.csv"));
            losses.push(l);
            accs.push(a);
        }
        for (metric, values) in [("train_loss", losses), ("train_accuracy", accs)] {
            let want = Stat::of(values);
            let got = &cell.metrics[metric];
            assert!((got.mean - want.mean).abs() < 1e-9, "{metric} mean");
            assert!((got.std.unwrap() - want.std.unwrap()).abs() < 1e-9, "{metric} std");
        }
    }
    let on_disk: Summary = serde_json::from_str(&read_text(&out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, summary);
}

fn metric_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    find_files(root, "metrics.csv")
        .unwrap()
        .into_iter()
        .map(|p| (p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let summary = cmd_run(&small_random(&first), &first).unwrap();
    let echoed = serde_json::to_string(&summary.config).unwrap();
    let again = LoadedConfig::from_parts(
        ExperimentConfig::from_json(&echoed).unwrap(),
        tmp.path().join("elsewhere"),
    )
    .unwrap();
    let second = tmp.path().join("second");
    cmd_run(&again, &second).unwrap();
    let (a, b) = (metric_files(&first), metric_files(&second));
    assert_eq!(a.len(), 18);
    assert_eq!(a, b);
}

#[test]
fn outputs_stay_under_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    cmd_run(&small_random(&out), &out).unwrap();
    let entries: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
    assert!(out.join("plots").read_dir().unwrap().count() > 0);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let typo = write(
        tmp.path(),
        "typo.json",
        r#"{"experiment": {"trace-check": {"tasks": 2, "dim": 2, "with_scalars": false}}, "trails": 3}"#,
    );
    assert_eq!(run_cli(&["run", typo.to_str().unwrap()]), 2);
    let err = ExperimentConfig::load(&typo).unwrap_err();
    assert!(err.to_string().contains("line 1"), "{err}");
    assert_eq!(run_cli(&["run", tmp.path().join("missing.json").to_str().unwrap()]), 2);
    let no_file = write(
        tmp.path(),
        "nofile.json",
        r#"{"experiment": {"tabular": {"files": ["absent.csv"], "split_seed": 0}},
            "architecture": {"depth": 2, "modes": ["soft"]}, "train": {"iterations": 5}}"#,
    );
    assert_eq!(run_cli(&["run", no_file.to_str().unwrap()]), 2);
    assert_eq!(run_cli(&["tracecheck", "--tasks", "1"]), 2);
    assert_eq!(run_cli(&["frobnicate"]), 2);
}

#[test]
fn malformed_data_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.csv", "a,b,label\n1,x,0\n2,3,1\n");
    let cfg = write(
        tmp.path(),
        "tab.json",
        &format!(
            r#"{{"experiment": {{"tabular": {{"files": ["bad.csv"], "split_seed": 0}}}},
                "architecture": {{"depth": 2, "modes": ["parallel"]}}, "train": {{"iterations": 5}},
                "output": "{}"}}"#,
            tmp.path().join("out").display()
        ),
    );
    assert_eq!(run_cli(&["run", cfg.to_str().unwrap()]), 3);
}

#[test]
fn analyze_refuses_runs_without_scalings() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let mut cfg = small_random(&out);
    cfg.config.architecture.as_mut().unwrap().modes = vec![softorder_harness::config::ModeName::Parallel];
    cmd_run(&cfg, &out).unwrap();
    assert_eq!(run_cli(&["analyze", out.to_str().unwrap()]), 3);
}

#[test]
fn analyze_starts_hardness_at_uniform() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    cmd_run(&small_random(&out), &out).unwrap();
    assert_eq!(run_cli(&["analyze", out.to_str().unwrap()]), 0);
    let hardness = find_files(&out, "hardness.csv").unwrap();
    assert_eq!(hardness.len(), 6);
    for p in hardness {
        let text = read_text(&p).unwrap();
        assert_eq!(text.lines().nth(1), Some("0,0.5"));
    }
}

#[test]
fn sweep_of_a_non_pixel_run_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    cmd_run(&small_random(&out), &out).unwrap();
    assert_eq!(run_cli(&["sweep", out.to_str().unwrap()]), 2);
}

#[test]
fn tracecheck_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        run_cli(&["tracecheck", "--tasks", "3", "--dim", "4", "--with-scalars", "--json"]),
        0
    );
    let zero = write(
        tmp.path(),
        "zero.json",
        r#"{"matrices": [[[1, 0], [0, -1]], [[1, 0], [0, 1]]]}"#,
    );
    assert_eq!(
        run_cli(&["tracecheck", "--with-scalars", "--fixture", zero.to_str().unwrap()]),
        4
    );
    let ragged = write(tmp.path(), "ragged.json", r#"{"matrices": [[[1, 0]], [[1]]]}"#);
    assert_eq!(run_cli(&["tracecheck", "--fixture", ragged.to_str().unwrap()]), 3);
}

#[test]
fn bundled_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if path.extension().is_none_or(|e| e != "json") || name.contains("fixture") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        ExperimentConfig::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        seen += 1;
    }
    assert!(seen >= 8);
}
