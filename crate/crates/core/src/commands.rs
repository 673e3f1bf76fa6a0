//! The train / eval / ablate / decompose / synth commands. Each writes its
//! artifacts under the configured output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::{RunConfig, LOCATION_KEYS};
use crate::data::{synth_trend_seasonal, write_csv, SeriesFrame, Split};
use crate::decomposition::{decompose, fixed_decompose};
use crate::error::{Error, Result};
use crate::metrics::{ForecastSet, MetricsReport};
use crate::model::checkpoint::Checkpoint;
use crate::model::{DecompositionMode, Model};
use crate::numerics::{avg_pool_downsample, Tensor3};
use crate::training::{self, prepare_data, predict_split, resolve_model_config, Dataset, EpochRecord};

pub const CHECKPOINT_FILE: &str = "checkpoint.lmsa";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.txt";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const METRICS_JSON_FILE: &str = "metrics.json";
pub const METRICS_CSV_FILE: &str = "metrics.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

pub const TRAIN_LOG_HEADER: &str = "epoch,train_loss,val_mse,seconds\n";

fn log_line(r: &EpochRecord) -> String {
    format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_mse, r.seconds)
}

/// Run config entries stored inside a checkpoint: everything except output
/// locations, so identical runs written to different directories produce
/// identical checkpoint bytes.
fn checkpoint_extra(cfg: &RunConfig) -> BTreeMap<String, String> {
    let mut map = cfg.to_map();
    for k in LOCATION_KEYS {
        map.remove(*k);
    }
    map
}

fn write_report(dir: &Path, report: &MetricsReport) -> Result<()> {
    fs::write(dir.join(METRICS_JSON_FILE), report.to_json()?)?;
    fs::write(dir.join(METRICS_CSV_FILE), report.to_csv()?)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub output_dir: PathBuf,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub best_val_mse: Option<f64>,
    pub test: MetricsReport,
    pub test_seconds: f64,
}

/// Trains per `cfg`, keeping the best-val checkpoint, and evaluates it on
/// the test split.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let data = prepare_data(cfg)?;
    train_on(cfg, &data)
}

pub fn train_on(cfg: &RunConfig, data: &Dataset) -> Result<TrainSummary> {
    let mut cfg = cfg.clone();
    cfg.model = resolve_model_config(&cfg, data)?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(RESOLVED_CONFIG_FILE), cfg.to_text())?;

    let mut log = String::from(TRAIN_LOG_HEADER);
    let outcome = training::train(&cfg, data, |r| log.push_str(&log_line(r)))?;
    fs::write(dir.join(TRAIN_LOG_FILE), &log)?;
    Checkpoint::from_model(&outcome.model, &checkpoint_extra(&cfg)).save(&dir.join(CHECKPOINT_FILE))?;

    let clock = Instant::now();
    let test = evaluate(&cfg, &outcome.model, data, Split::Test, &[cfg.model.horizon], None)?;
    let test_seconds = clock.elapsed().as_secs_f64();
    write_report(&dir, &test)?;
    let summary = TrainSummary {
        output_dir: dir.clone(),
        epochs_run: outcome.log.len(),
        best_epoch: outcome.best_epoch,
        best_val_mse: outcome.best_val_mse,
        test,
        test_seconds,
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Metrics over `split`, in normalized or original units per
/// `cfg.scaled_metrics`. With `dump`, also writes one CSV row per
/// `(window, step)`.
pub fn evaluate(
    cfg: &RunConfig,
    model: &Model,
    data: &Dataset,
    split: Split,
    horizons: &[usize],
    dump: Option<&Path>,
) -> Result<MetricsReport> {
    let mut f = predict_split(cfg, model, data, split)?;
    if !cfg.scaled_metrics {
        f.pred = data.scaler.inverse_tensor(&f.pred);
        f.truth = data.scaler.inverse_tensor(&f.truth);
        f.inputs = data.scaler.inverse_tensor(&f.inputs);
    }
    if let Some(path) = dump {
        write_predictions(path, data, &f.starts, &f.pred, &f.truth, model.config.lookback)?;
    }
    MetricsReport::evaluate(
        &ForecastSet {
            pred: &f.pred,
            truth: &f.truth,
            insample: &f.inputs,
        },
        horizons,
        cfg.mase_period,
    )
}

fn write_predictions(
    path: &Path,
    data: &Dataset,
    starts: &[usize],
    pred: &Tensor3,
    truth: &Tensor3,
    lookback: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["window".to_string(), "step".to_string(), "row".to_string()];
    for name in &data.raw.channel_names {
        header.push(format!("pred_{name}"));
        header.push(format!("true_{name}"));
    }
    w.write_record(&header)?;
    for (wi, &s) in starts.iter().enumerate() {
        for step in 0..pred.len() {
            let mut rec = vec![wi.to_string(), step.to_string(), (s + lookback + step).to_string()];
            for c in 0..pred.channels() {
                rec.push(pred.get(wi, step, c).to_string());
                rec.push(truth.get(wi, step, c).to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads a checkpoint and the config stored in it, with `overrides` applied
/// on top (e.g. a different data path).
pub fn load_checkpoint(path: &Path, overrides: &BTreeMap<String, String>) -> Result<(RunConfig, Model)> {
    let ck = Checkpoint::load(path)?;
    let mut cfg = RunConfig::from_map(&ck.config)?;
    cfg.apply(overrides)?;
    let model = ck.into_model()?;
    Ok((cfg, model))
}

#[derive(Debug, Clone)]
pub struct EvalRequest {
    pub checkpoint: PathBuf,
    pub overrides: BTreeMap<String, String>,
    pub split: Split,
    /// Forecast-step prefixes to score; empty means the full horizon.
    pub horizons: Vec<usize>,
    pub dump_predictions: bool,
}

pub fn cmd_eval(req: &EvalRequest) -> Result<MetricsReport> {
    let (cfg, model) = load_checkpoint(&req.checkpoint, &req.overrides)?;
    let data = prepare_data(&cfg)?;
    if data.channels() != model.config.channels {
        return Err(Error::Shape(format!(
            "checkpoint expects {} channels, data has {}",
            model.config.channels,
            data.channels()
        )));
    }
    let horizons = if req.horizons.is_empty() {
        vec![model.config.horizon]
    } else {
        req.horizons.clone()
    };
    fs::create_dir_all(&cfg.output_dir)?;
    let dump = req.dump_predictions.then(|| cfg.output_dir.join(PREDICTIONS_FILE));
    let report = evaluate(&cfg, &model, &data, req.split, &horizons, dump.as_deref())?;
    write_report(&cfg.output_dir, &report)?;
    Ok(report)
}

/// The three ablation settings: fixed moving-average decomposition,
/// learnable decomposition, and learnable decomposition with the
/// autocorrelation gate.
pub const ABLATION_VARIANTS: [(&str, DecompositionMode, bool); 3] = [
    ("fixed", DecompositionMode::Fixed, false),
    ("learnable", DecompositionMode::Learnable, false),
    ("learnable_autocorr", DecompositionMode::Learnable, true),
];

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub mse: f64,
    pub mae: f64,
    pub best_val_mse: Option<f64>,
}

pub fn ablation_configs(cfg: &RunConfig) -> Vec<(String, RunConfig)> {
    ABLATION_VARIANTS
        .iter()
        .map(|&(name, mode, gate)| {
            let mut c = cfg.clone();
            c.model.decomposition = mode;
            c.model.autocorrelation = gate;
            c.output_dir = cfg.output_dir.join(name);
            (name.to_string(), c)
        })
        .collect()
}

/// Trains all three variants on identical data and seeds; writes
/// `ablation.csv` / `ablation.json` with one row per variant.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<AblationRow>> {
    let data = prepare_data(cfg)?;
    let mut rows = Vec::new();
    for (name, variant) in ablation_configs(cfg) {
        let summary = train_on(&variant, &data)?;
        rows.push(AblationRow {
            variant: name,
            mse: summary.test.average.mse,
            mae: summary.test.average.mae,
            best_val_mse: summary.best_val_mse,
        });
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let mut w = csv::Writer::from_path(cfg.output_dir.join("ablation.csv"))?;
    w.write_record(["variant", "mse", "mae", "best_val_mse"])?;
    for r in &rows {
        w.write_record([
            r.variant.clone(),
            r.mse.to_string(),
            r.mae.to_string(),
            r.best_val_mse.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    fs::write(cfg.output_dir.join("ablation.json"), serde_json::to_string_pretty(&rows)?)?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct DecomposeRequest {
    /// Trained parameters to use; `None` initializes a model from `config`.
    pub checkpoint: Option<PathBuf>,
    pub config: RunConfig,
    pub overrides: BTreeMap<String, String>,
    /// 0 is the raw series, k the series pooled k times.
    pub scale: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposeOutput {
    pub input: Tensor3,
    pub trend: Tensor3,
    pub seasonal: Tensor3,
    /// `(cutoff, steepness)` per channel; empty in fixed mode.
    pub filters: Vec<(f64, f64)>,
}

/// Splits the whole normalized series at `scale` with that scale's filter
/// bank and writes `input.csv`, `trend.csv`, `seasonal.csv`, `filters.csv`.
pub fn cmd_decompose(req: &DecomposeRequest) -> Result<DecomposeOutput> {
    let (cfg, model) = match &req.checkpoint {
        Some(path) => load_checkpoint(path, &req.overrides)?,
        None => {
            let mut cfg = req.config.clone();
            cfg.apply(&req.overrides)?;
            let data = prepare_data(&cfg)?;
            cfg.model = resolve_model_config(&cfg, &data)?;
            let model = Model::new(cfg.model.clone())?;
            (cfg, model)
        }
    };
    let data = prepare_data(&cfg)?;
    if data.channels() != model.config.channels {
        return Err(Error::Shape(format!(
            "model expects {} channels, data has {}",
            model.config.channels,
            data.channels()
        )));
    }
    let scale = model.scales.get(req.scale).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "scale {} out of range, model has {}",
            req.scale,
            model.scales.len()
        ))
    })?;
    let mut input = data.scaled.to_tensor(0, data.scaled.rows())?;
    for _ in 0..req.scale {
        input = avg_pool_downsample(&input, model.config.downsample_factor)?;
    }
    let (trend, seasonal, filters) = match &scale.filter {
        Some(bank) => {
            let (t, s) = decompose(&input, bank, &model.store)?;
            let fc = &model.store.get(bank.cutoff).value;
            let st = &model.store.get(bank.steepness).value;
            (t, s, fc.iter().copied().zip(st.iter().copied()).collect())
        }
        None => {
            let (t, s) = fixed_decompose(&input, model.config.fixed_kernel)?;
            (t, s, Vec::new())
        }
    };

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let names = data.raw.channel_names.clone();
    let frame = |x: &Tensor3| SeriesFrame::new(None, names.clone(), x.data().to_vec());
    write_csv(&frame(&input)?, &dir.join("input.csv"))?;
    write_csv(&frame(&trend)?, &dir.join("trend.csv"))?;
    write_csv(&frame(&seasonal)?, &dir.join("seasonal.csv"))?;
    let mut w = csv::Writer::from_path(dir.join("filters.csv"))?;
    w.write_record(["channel", "cutoff", "steepness"])?;
    for (name, (fc, s)) in names.iter().zip(&filters) {
        w.write_record([name.clone(), fc.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(DecomposeOutput {
        input,
        trend,
        seasonal,
        filters,
    })
}

/// Writes the configured synthetic series to `path`.
pub fn cmd_synth(cfg: &RunConfig, path: &Path) -> Result<SeriesFrame> {
    let frame = synth_trend_seasonal(&cfg.synth)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_csv(&frame, path)?;
    Ok(frame)
}
