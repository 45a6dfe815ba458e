use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use hfnt::data::TaskKind;
use hfnt::error::Error;
use hfnt::mogp::ObjectiveMode;
use hfnt::pipeline::{gen_mackey_glass, model_dir, run_ensemble, run_report, run_train, CvProtocol, RunConfig};
use hfnt::tree::NeuralTree;

fn small_config(dataset: &Path, task: TaskKind, cv: CvProtocol, out: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        dataset: Some(dataset.to_path_buf()),
        task,
        cv,
        out: out.to_path_buf(),
        general_repetitions: 1,
        param_iterations: 20,
        de_pop_size: 10,
        bag_size: 5,
        ..RunConfig::default()
    };
    cfg.mogp.generations = 4;
    cfg.ensemble.max_evaluations = 2_000;
    cfg
}

fn series_file(dir: &Path) -> PathBuf {
    let p = dir.join("mg.csv");
    gen_mackey_glass(&p, 200, 0).unwrap();
    p
}

fn three_class_file(dir: &Path) -> PathBuf {
    let mut s = String::from("x0,x1,label\n");
    for i in 0..90 {
        let c = i % 3;
        let x0 = c as f64 * 0.4 + (i as f64 * 0.37).sin() * 0.05;
        let x1 = ((i * 7) % 10) as f64 / 10.0;
        s.push_str(&format!("{x0},{x1},{}\n", ["a", "b", "c"][c]));
    }
    let p = dir.join("three.csv");
    fs::write(&p, s).unwrap();
    p
}

fn dir_contents(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "config.json" {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn same_seed_reproduces_the_artifact_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let data = series_file(tmp.path());
    let a = small_config(&data, TaskKind::Timeseries, CvProtocol::Holdout(0.5), &tmp.path().join("a"));
    let b = RunConfig {
        out: tmp.path().join("b"),
        ..a.clone()
    };
    run_train(&a).unwrap();
    run_train(&b).unwrap();
    run_ensemble(&a.out, None).unwrap();
    run_ensemble(&b.out, None).unwrap();
    assert_eq!(dir_contents(&a.out), dir_contents(&b.out));
    let c = RunConfig {
        seed: 1,
        out: tmp.path().join("c"),
        ..a.clone()
    };
    run_train(&c).unwrap();
    assert_ne!(dir_contents(&a.out), dir_contents(&c.out));
}

#[test]
fn zero_repetitions_only_evaluate_the_initial_population() {
    let tmp = tempfile::tempdir().unwrap();
    let data = series_file(tmp.path());
    let mut cfg = small_config(&data, TaskKind::Timeseries, CvProtocol::Holdout(0.5), &tmp.path().join("r"));
    cfg.general_repetitions = 0;
    let s = run_train(&cfg).unwrap();
    assert_eq!(s.folds[0].evaluations, vec![30]);
    assert_eq!(s.evaluation_budget, 30);
}

#[test]
fn kfold_run_writes_every_fold_and_models_validate_on_load() {
    let tmp = tempfile::tempdir().unwrap();
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/wdbc.csv");
    let cfg = small_config(&data, TaskKind::Classification, CvProtocol::Kfold(3), &tmp.path().join("w"));
    let s = run_train(&cfg).unwrap();
    assert_eq!(s.folds.len(), 3);
    assert_eq!(s.folds.iter().map(|f| f.test_samples).sum::<usize>(), 569);
    for f in &s.folds {
        assert!(f.test.accuracy.unwrap() > 0.5);
        let text = fs::read_to_string(model_dir(&cfg.out, f.fold, 0).join("best_model.json")).unwrap();
        NeuralTree::from_json(&text).unwrap().validate(&cfg.mogp.tree, Some(30)).unwrap();
    }
    let e = run_ensemble(&cfg.out, Some(1)).unwrap();
    for (ef, tf) in e.folds.iter().zip(&s.folds) {
        assert!(ef.no_regression);
        assert_eq!(ef.bag_diversity, vec![1.0]);
        // a singleton bag is the lowest-error member, i.e. the best model
        assert_eq!(ef.test.accuracy, tf.test.accuracy);
    }
    let e = run_ensemble(&cfg.out, Some(10)).unwrap();
    assert!(e.folds.iter().all(|f| f.no_regression));
    assert!(e.folds.iter().all(|f| f.features.tsf >= 1));
    assert_eq!(e.folds.len(), 3);
}

#[test]
fn five_by_two_runs_ten_folds() {
    let tmp = tempfile::tempdir().unwrap();
    let data = series_file(tmp.path());
    let mut cfg = small_config(&data, TaskKind::Timeseries, CvProtocol::FiveByTwo, &tmp.path().join("f"));
    cfg.general_repetitions = 0;
    let s = run_train(&cfg).unwrap();
    assert_eq!(s.folds.len(), 10);
}

#[test]
fn multi_class_trains_one_model_per_class() {
    let tmp = tempfile::tempdir().unwrap();
    let data = three_class_file(tmp.path());
    let cfg = small_config(&data, TaskKind::Classification, CvProtocol::Kfold(3), &tmp.path().join("m"));
    let s = run_train(&cfg).unwrap();
    assert_eq!(s.models_per_fold, 3);
    for f in &s.folds {
        assert_eq!(f.evaluations.len(), 3);
        assert!(model_dir(&cfg.out, f.fold, 2).join("population.json").exists());
    }
    let e = run_ensemble(&cfg.out, None).unwrap();
    assert!(e.folds.iter().all(|f| f.no_regression && f.fit.len() == 3));
    assert!(e.mean_test_accuracy.unwrap() > 1.0 / 3.0);
}

#[test]
fn report_tables_have_expected_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = series_file(tmp.path());
    let multi = small_config(&data, TaskKind::Timeseries, CvProtocol::Kfold(2), &tmp.path().join("multi"));
    let mut single = RunConfig {
        out: tmp.path().join("single"),
        ..multi.clone()
    };
    single.mogp.mode = ObjectiveMode::Single;
    run_train(&multi).unwrap();
    run_train(&single).unwrap();
    run_ensemble(&multi.out, None).unwrap();
    let out = tmp.path().join("report");
    let r = run_report(&[multi.out.clone(), single.out.clone()], &out).unwrap();
    // two folds plus best and mean, per run
    assert_eq!(r.summary_rows, 8);
    assert_eq!(r.pareto_rows, 2 * 2 * 30);
    assert_eq!(r.trajectory_rows, 2 * 2 * 5);
    let traj = fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert!(traj.contains(",single,") && traj.contains(",multi,"));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let ensemble_cells = summary.lines().nth(1).unwrap().split(',').nth(11).unwrap().to_string();
    assert!(!ensemble_cells.is_empty());
}

#[test]
fn one_fold_report_has_best_equal_to_mean() {
    let tmp = tempfile::tempdir().unwrap();
    let data = series_file(tmp.path());
    let cfg = small_config(&data, TaskKind::Timeseries, CvProtocol::Holdout(0.5), &tmp.path().join("h"));
    run_train(&cfg).unwrap();
    let out = tmp.path().join("rep");
    run_report(std::slice::from_ref(&cfg.out), &out).unwrap();
    let text = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][2..], rows[2][2..]);
}

#[test]
fn corrupt_artifact_error_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = series_file(tmp.path());
    let cfg = small_config(&data, TaskKind::Timeseries, CvProtocol::Holdout(0.5), &tmp.path().join("x"));
    run_train(&cfg).unwrap();
    let pop = model_dir(&cfg.out, 0, 0).join("population.json");
    fs::write(&pop, "[{\"tree\": 3").unwrap();
    let err = run_report(std::slice::from_ref(&cfg.out), &tmp.path().join("rep")).unwrap_err();
    assert!(matches!(err, Error::Artifact { .. }));
    assert!(err.to_string().contains("population.json"), "{err}");
    let err = run_ensemble(&cfg.out, None).unwrap_err();
    assert!(err.to_string().contains("population.json"), "{err}");
    fs::remove_file(&pop).unwrap();
    assert!(run_ensemble(&cfg.out, None).is_err());
}

#[test]
fn invalid_config_fails_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let data = series_file(tmp.path());
    let mut cfg = small_config(&data, TaskKind::Timeseries, CvProtocol::Holdout(0.5), &tmp.path().join("bad"));
    cfg.mogp.pc = 0.5;
    assert!(run_train(&cfg).is_err());
    assert!(!cfg.out.exists());
    let missing = RunConfig {
        dataset: Some(tmp.path().join("nope.csv")),
        ..small_config(&data, TaskKind::Regression, CvProtocol::Kfold(2), &tmp.path().join("m"))
    };
    assert!(run_train(&missing).is_err());
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hfnt"))
}

#[test]
fn command_line_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mg = tmp.path().join("mg.csv");
    let st = bin()
        .args(["gen-data", "--out", mg.to_str().unwrap(), "--points", "150", "--seed", "2"])
        .output()
        .unwrap();
    assert!(st.status.success());
    let cfg_path = tmp.path().join("cfg.json");
    fs::write(
        &cfg_path,
        r#"{"general_repetitions": 1, "param_iterations": 10, "de_pop_size": 8, "mogp": {"generations": 2}, "ensemble": {"max_evaluations": 500}}"#,
    )
    .unwrap();
    let run = tmp.path().join("run");
    let out = bin()
        .args(["train", "--config", cfg_path.to_str().unwrap(), "--dataset", mg.to_str().unwrap()])
        .args(["--task", "timeseries", "--cv", "holdout:0.5", "--seed", "5", "--single-objective"])
        .args(["--bag-size", "4", "--out", run.to_str().unwrap()])
        .env("NT_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stored: RunConfig = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!((stored.seed, stored.bag_size, stored.mogp.mode), (5, 4, ObjectiveMode::Single));
    assert_eq!(stored.mogp.generations, 2);
    assert!(bin().args(["ensemble", "--out", run.to_str().unwrap()]).output().unwrap().status.success());
    let rep = tmp.path().join("rep");
    let st = bin()
        .args(["report", run.to_str().unwrap(), "--out", rep.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(st.status.success());
    assert!(rep.join("pareto.csv").exists());
}

#[test]
fn command_line_failures_exit_nonzero_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["train".into(), "--dataset".into(), tmp.path().join("missing.csv").display().to_string()],
        vec!["train".into(), "--cv".into(), "kfold:1".into()],
        vec!["ensemble".into(), "--out".into(), tmp.path().join("norun").display().to_string()],
        vec!["report".into(), tmp.path().join("norun").display().to_string()],
    ];
    for args in cases {
        let out = bin().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(!stderr.trim().is_empty(), "{args:?}");
    }
    let out = bin()
        .args(["gen-data", "--out", tmp.path().join("g.csv").to_str().unwrap()])
        .env("NT_THREADS", "zero")
        .output()
        .unwrap();
    assert!(out.status.success(), "gen-data does not spawn workers");
    let mg = tmp.path().join("g.csv");
    let out = bin()
        .args(["train", "--dataset", mg.to_str().unwrap(), "--task", "timeseries", "--cv", "holdout:0.5"])
        .env("NT_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("NT_THREADS"));
}
