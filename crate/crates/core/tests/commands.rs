use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use lms_autotsf::commands::{
    ablation_configs, cmd_ablate, cmd_decompose, cmd_eval, cmd_synth, cmd_train, DecomposeRequest, EvalRequest,
    CHECKPOINT_FILE, PREDICTIONS_FILE, RESOLVED_CONFIG_FILE, TRAIN_LOG_FILE, TRAIN_LOG_HEADER,
};
use lms_autotsf::config::RunConfig;
use lms_autotsf::data::{load_csv, Split};
use lms_autotsf::model::checkpoint::Checkpoint;
use lms_autotsf::model::Model;
use lms_autotsf::training::resolve_model_config;
use lms_autotsf::Error;

fn small(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.model.lookback = 32;
    cfg.model.horizon = 8;
    cfg.model.scales = 3;
    cfg.synth.length = 400;
    cfg.synth.noise = 0.05;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.output_dir = dir.to_path_buf();
    cfg
}

#[test]
fn zero_epoch_run_writes_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.epochs = 0;
    let summary = cmd_train(&cfg).unwrap();
    assert_eq!(summary.epochs_run, 0);
    assert_eq!(summary.best_epoch, None);
    assert_eq!(fs::read_to_string(dir.path().join(TRAIN_LOG_FILE)).unwrap(), TRAIN_LOG_HEADER);

    let ck = Checkpoint::load(&dir.path().join(CHECKPOINT_FILE)).unwrap();
    let data = lms_autotsf::training::prepare_data(&cfg).unwrap();
    let init = Model::new(resolve_model_config(&cfg, &data).unwrap()).unwrap();
    let restored = ck.into_model().unwrap();
    for (a, b) in restored.store.iter().zip(init.store.iter()) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.value, b.value);
    }
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&dir.path().join("first"));
    cmd_train(&cfg).unwrap();
    let text = fs::read_to_string(cfg.output_dir.join(RESOLVED_CONFIG_FILE)).unwrap();
    let mut again = RunConfig::from_text(&text).unwrap();
    assert_eq!(again.model.channels, 3);
    again.output_dir = dir.path().join("second");
    cmd_train(&again).unwrap();
    assert_eq!(
        fs::read(cfg.output_dir.join(CHECKPOINT_FILE)).unwrap(),
        fs::read(again.output_dir.join(CHECKPOINT_FILE)).unwrap()
    );
}

#[test]
fn eval_on_val_matches_best_logged_val_mse() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.epochs = 3;
    let summary = cmd_train(&cfg).unwrap();
    let best = summary.best_val_mse.unwrap();
    let report = cmd_eval(&EvalRequest {
        checkpoint: dir.path().join(CHECKPOINT_FILE),
        overrides: BTreeMap::from([("output_dir".to_string(), dir.path().join("eval").display().to_string())]),
        split: Split::Val,
        horizons: vec![],
        dump_predictions: false,
    })
    .unwrap();
    assert!((report.pooled.mse - best).abs() <= 1e-9, "{} vs {best}", report.pooled.mse);
}

#[test]
fn prediction_dump_has_one_row_per_window_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_train(&cfg).unwrap();
    let out = dir.path().join("eval");
    let report = cmd_eval(&EvalRequest {
        checkpoint: dir.path().join(CHECKPOINT_FILE),
        overrides: BTreeMap::from([("output_dir".to_string(), out.display().to_string())]),
        split: Split::Test,
        horizons: vec![2, 4, 8],
        dump_predictions: true,
    })
    .unwrap();
    let rows = csv::Reader::from_path(out.join(PREDICTIONS_FILE)).unwrap().records().count();
    assert_eq!(rows, report.windows * cfg.model.horizon);
    let labels: Vec<&str> = report.rows.iter().map(|r| r.horizon.as_str()).collect();
    assert_eq!(labels, ["2", "4", "8"]);
    assert!(out.join("metrics.json").is_file() && out.join("metrics.csv").is_file());
}

#[test]
fn eval_rejects_channel_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_train(&cfg).unwrap();
    let err = cmd_eval(&EvalRequest {
        checkpoint: dir.path().join(CHECKPOINT_FILE),
        overrides: BTreeMap::from([
            ("synth_channels".to_string(), "1".to_string()),
            ("synth_slopes".to_string(), "0".to_string()),
            ("synth_periods".to_string(), "24".to_string()),
            ("synth_amplitudes".to_string(), "1".to_string()),
            ("output_dir".to_string(), dir.path().join("e").display().to_string()),
        ]),
        split: Split::Test,
        horizons: vec![],
        dump_predictions: false,
    })
    .unwrap_err();
    assert!(err.to_string().contains("channels"), "{err}");
}

#[test]
fn decompose_sums_to_input_and_reports_init_cutoffs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    for scale in 0..3 {
        let out = cmd_decompose(&DecomposeRequest {
            checkpoint: None,
            config: cfg.clone(),
            overrides: BTreeMap::new(),
            scale,
        })
        .unwrap();
        assert!(out.filters.iter().all(|&(fc, s)| fc == 0.1 && s == 10.0));
        let trend = load_csv(&dir.path().join("trend.csv"), false).unwrap();
        let seasonal = load_csv(&dir.path().join("seasonal.csv"), false).unwrap();
        let input = load_csv(&dir.path().join("input.csv"), false).unwrap();
        assert_eq!(input.rows(), 400 >> scale);
        for ((t, s), x) in trend.values().iter().zip(seasonal.values()).zip(input.values()) {
            assert!((t + s - x).abs() <= 1e-9);
        }
    }
    let err = cmd_decompose(&DecomposeRequest {
        checkpoint: None,
        config: cfg,
        overrides: BTreeMap::new(),
        scale: 3,
    })
    .unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn training_on_a_sinusoid_moves_the_cutoff() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.model.lookback = 96;
    cfg.model.horizon = 24;
    cfg.model.scales = 4;
    cfg.synth.channels = 1;
    cfg.synth.slopes = vec![0.0];
    cfg.synth.periods = vec![24.0];
    cfg.synth.amplitudes = vec![1.0];
    cfg.synth.noise = 0.0;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 20;
    cfg.output_dir = dir.path().to_path_buf();
    cmd_train(&cfg).unwrap();
    let out = cmd_decompose(&DecomposeRequest {
        checkpoint: Some(dir.path().join(CHECKPOINT_FILE)),
        config: RunConfig::default(),
        overrides: BTreeMap::from([("output_dir".to_string(), dir.path().join("split").display().to_string())]),
        scale: 0,
    })
    .unwrap();
    // which side of 1/24 it settles on depends on the init seed
    let (cutoff, _) = out.filters[0];
    assert!((cutoff - 0.1).abs() > 0.01, "learned cutoff {cutoff}");
}

#[test]
fn ablation_has_three_rows_and_only_toggles_flags() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.epochs = 1;
    let rows = cmd_ablate(&cfg).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.variant.as_str()).collect();
    assert_eq!(names, ["fixed", "learnable", "learnable_autocorr"]);
    let table = fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);

    let maps: Vec<BTreeMap<String, String>> = ablation_configs(&cfg)
        .into_iter()
        .map(|(name, c)| {
            let text = fs::read_to_string(c.output_dir.join(RESOLVED_CONFIG_FILE)).unwrap();
            assert_eq!(c.output_dir, dir.path().join(name));
            RunConfig::from_text(&text).unwrap().to_map()
        })
        .collect();
    for pair in maps.windows(2) {
        let changed: Vec<&String> = pair[0]
            .keys()
            .filter(|k| pair[0][*k] != pair[1][*k])
            .collect();
        assert!(changed
            .iter()
            .all(|k| ["decomposition", "autocorrelation", "output_dir"].contains(&k.as_str())));
        assert!(changed.len() >= 2);
    }
}

#[test]
fn synth_is_reproducible_and_reloads_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.synth.noise = 0.3;
    cfg.synth.length = 300;
    let a = dir.path().join("a.csv");
    let b = dir.path().join("nested/b.csv");
    let frame = cmd_synth(&cfg, &a).unwrap();
    cmd_synth(&cfg, &b).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 301);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 4);
    let back = load_csv(&a, true).unwrap();
    for (x, y) in back.values().iter().zip(frame.values()) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn training_from_csv_leaves_the_file_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("series.csv");
    let mut cfg = small(&dir.path().join("run"));
    cmd_synth(&cfg, &csv_path).unwrap();
    let before = fs::read(&csv_path).unwrap();
    cfg.data = csv_path.display().to_string();
    cmd_train(&cfg).unwrap();
    assert_eq!(fs::read(&csv_path).unwrap(), before);
}

#[test]
fn exploding_learning_rate_aborts_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.learning_rate = 1e300;
    cfg.epochs = 3;
    let err = cmd_train(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
    assert!(err.to_string().contains("epoch"), "{err}");
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lms-autotsf"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let ok = binary()
        .args(["synth", "--out", out.to_str().unwrap(), "--synth-length", "120"])
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 121);

    let bad_key = binary().args(["train", "--no-such-key", "1"]).output().unwrap();
    assert_eq!(bad_key.status.code(), Some(2));

    let missing = binary()
        .args(["train", "--data", dir.path().join("absent.csv").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(3), "{}", String::from_utf8_lossy(&missing.stderr));

    let run = dir.path().join("run");
    let cfg_file = dir.path().join("run.cfg");
    fs::write(
        &cfg_file,
        "lookback = 16\nhorizon = 4\nscales = 2\nsynth_length = 200\nepochs = 1\n",
    )
    .unwrap();
    let train = binary()
        .args(["train", "--config", cfg_file.to_str().unwrap(), "--output-dir", run.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let resolved = RunConfig::load(&run.join(RESOLVED_CONFIG_FILE)).unwrap();
    assert_eq!(resolved.model.lookback, 16);
    assert_eq!(resolved.epochs, 1);

    let eval = binary()
        .args([
            "eval",
            "--checkpoint",
            run.join(CHECKPOINT_FILE).to_str().unwrap(),
            "--split",
            "val",
            "--horizons",
            "2,4",
            "--output-dir",
            dir.path().join("eval").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(String::from_utf8_lossy(&eval.stdout).starts_with("horizon,"));
}
