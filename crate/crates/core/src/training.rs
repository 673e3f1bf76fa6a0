//! Data preparation, the Adam/MSE training loop with early stopping, and
//! batched inference over a split.

use std::time::Instant;

use crate::autodiff::{AdamConfig, AdamState};
use crate::config::{RunConfig, SYNTH_SOURCE};
use crate::data::{chronological_split, load_csv, synth_trend_seasonal, Scaler, SeriesFrame, Split, WindowSampler};
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{Model, ModelConfig, Normalization};
use crate::numerics::Tensor3;

/// A loaded series with its split and (already applied) normalization.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub raw: SeriesFrame,
    /// `raw` after normalization; this is what the model sees.
    pub scaled: SeriesFrame,
    pub scaler: Scaler,
    pub sampler: WindowSampler,
}

impl Dataset {
    pub fn channels(&self) -> usize {
        self.raw.channels()
    }
}

/// Loads the series named by `cfg.data` (or generates it), splits it and fits
/// the scaler on the train rows only.
pub fn prepare_data(cfg: &RunConfig) -> Result<Dataset> {
    let raw = if cfg.data == SYNTH_SOURCE {
        synth_trend_seasonal(&cfg.synth)?
    } else {
        load_csv(std::path::Path::new(&cfg.data), cfg.has_date)?
    };
    prepare_frame(cfg, raw)
}

pub fn prepare_frame(cfg: &RunConfig, raw: SeriesFrame) -> Result<Dataset> {
    let sampler = chronological_split(
        raw.rows(),
        &cfg.split,
        cfg.model.lookback,
        cfg.model.horizon,
        cfg.stride,
    )?;
    let scaler = match cfg.model.normalization {
        Normalization::Standard => Scaler::fit(&raw, sampler.train_rows)?,
        Normalization::None => Scaler::identity(raw.channels()),
    };
    let scaled = scaler.transform(&raw);
    Ok(Dataset {
        raw,
        scaled,
        scaler,
        sampler,
    })
}

/// The model config with its channel count taken from `data`. An explicit
/// channel count that disagrees with the data is an error.
pub fn resolve_model_config(cfg: &RunConfig, data: &Dataset) -> Result<ModelConfig> {
    let mut model = cfg.model.clone();
    let c = data.channels();
    if model.channels != c && model.channels != ModelConfig::default().channels {
        return Err(Error::Data(format!(
            "config declares {} channels but the data has {c}",
            model.channels
        )));
    }
    model.channels = c;
    model.validate()?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mse: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest val MSE (the initialization
    /// when no epoch ran).
    pub model: Model,
    pub log: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_mse: Option<f64>,
}

fn batch(cfg: &RunConfig, data: &Dataset, starts: &[usize]) -> Result<(Tensor3, Tensor3)> {
    if cfg.parallel_batches {
        data.sampler.batch_parallel(&data.scaled, starts)
    } else {
        data.sampler.batch(&data.scaled, starts)
    }
}

/// Trains a freshly initialized model. `on_epoch` sees each log record as
/// it is produced.
pub fn train(
    cfg: &RunConfig,
    data: &Dataset,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut model = Model::new(resolve_model_config(cfg, data)?)?;
    let mut adam = AdamState::new(
        &model.store,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        },
    );
    let mut best = model.clone();
    let mut best_val: Option<f64> = None;
    let mut best_epoch = None;
    let mut stale = 0;
    let mut log = Vec::new();

    for epoch in 0..cfg.epochs {
        let clock = Instant::now();
        let order = data.sampler.shuffled_train_starts(cfg.model.seed, epoch);
        let mut loss_sum = 0.0;
        for (bi, starts) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = batch(cfg, data, starts)?;
            model.store.zero_grads();
            let loss = model.accumulate_gradients(&x, &y).map_err(|e| match e {
                Error::NonFinite(msg) => {
                    Error::NonFinite(format!("epoch {epoch}, batch {bi}: {msg}"))
                }
                other => other,
            })?;
            adam.step(&mut model.store);
            model.clamp_filters();
            loss_sum += loss * starts.len() as f64;
        }
        let train_loss = loss_sum / order.len() as f64;
        let val_mse = split_mse(cfg, &model, data, Split::Val)?;
        if !val_mse.is_finite() {
            return Err(Error::NonFinite(format!("epoch {epoch}: val MSE is {val_mse}")));
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_mse,
            seconds: clock.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        log.push(record);

        if best_val.is_none_or(|b| val_mse < b) {
            best_val = Some(val_mse);
            best_epoch = Some(epoch);
            best = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        log,
        best_epoch,
        best_val_mse: best_val,
    })
}

/// Forecasts for every window of `split`, stacked as `(windows, H, C)`,
/// together with the true labels and the lookback inputs, all in model
/// (normalized) units.
pub struct SplitForecast {
    pub pred: Tensor3,
    pub truth: Tensor3,
    pub inputs: Tensor3,
    pub starts: Vec<usize>,
}

pub fn predict_split(cfg: &RunConfig, model: &Model, data: &Dataset, split: Split) -> Result<SplitForecast> {
    let starts = data.sampler.starts(split);
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    let mut inputs = Vec::new();
    for chunk in starts.chunks(cfg.batch_size.max(1)) {
        let (x, y) = batch(cfg, data, chunk)?;
        preds.extend(model.forward(&x)?.into_data());
        truths.extend(y.into_data());
        inputs.extend(x.into_data());
    }
    let n = starts.len();
    let c = data.channels();
    Ok(SplitForecast {
        pred: Tensor3::new(n, model.config.horizon, c, preds)?,
        truth: Tensor3::new(n, model.config.horizon, c, truths)?,
        inputs: Tensor3::new(n, model.config.lookback, c, inputs)?,
        starts,
    })
}

/// MSE over all windows and steps of `split`, in normalized units.
pub fn split_mse(cfg: &RunConfig, model: &Model, data: &Dataset, split: Split) -> Result<f64> {
    let f = predict_split(cfg, model, data, split)?;
    metrics::mse(f.pred.data(), f.truth.data())
}
