//! Run configuration: every model, data and training knob as a flat
//! `key = value` map. A resolved config written by a run reproduces it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::data::{SplitSpec, SynthSpec};
use crate::error::{Error, Result};
use crate::model::checkpoint::{config_text, parse_config_text};
use crate::model::{parse_value, ModelConfig};

/// `data` value selecting the built-in synthetic generator.
pub const SYNTH_SOURCE: &str = "synth";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// CSV path, or `synth` for the generator described by `synth`.
    pub data: String,
    pub has_date: bool,
    pub split: SplitSpec,
    pub stride: usize,
    pub synth: SynthSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Epochs without val improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    pub output_dir: PathBuf,
    /// Report metrics on standardized values (true) or original units.
    pub scaled_metrics: bool,
    pub mase_period: usize,
    pub parallel_batches: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            data: SYNTH_SOURCE.to_string(),
            has_date: true,
            split: SplitSpec::default(),
            stride: 1,
            synth: SynthSpec::default(),
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-4,
            weight_decay: 0.0,
            patience: 3,
            output_dir: PathBuf::from("runs/default"),
            scaled_metrics: true,
            mase_period: 1,
            parallel_batches: false,
        }
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_value(key, v)).collect()
}

/// Keys that describe where a run writes, not what it computes.
pub const LOCATION_KEYS: &[&str] = &["output_dir"];

impl RunConfig {
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut map = self.model.to_map();
        let s = &self.synth;
        let pairs = [
            ("data", self.data.clone()),
            ("has_date", self.has_date.to_string()),
            ("split", self.split.to_string()),
            ("stride", self.stride.to_string()),
            ("synth_length", s.length.to_string()),
            ("synth_channels", s.channels.to_string()),
            ("synth_slopes", join(&s.slopes)),
            ("synth_periods", join(&s.periods)),
            ("synth_amplitudes", join(&s.amplitudes)),
            ("synth_noise", s.noise.to_string()),
            ("synth_seed", s.seed.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("patience", self.patience.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("scaled_metrics", self.scaled_metrics.to_string()),
            ("mase_period", self.mase_period.to_string()),
            ("parallel_batches", self.parallel_batches.to_string()),
        ];
        map.extend(pairs.into_iter().map(|(k, v)| (k.to_string(), v)));
        map
    }

    /// The resolved config as canonical text.
    pub fn to_text(&self) -> String {
        config_text(&self.to_map())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.model.set(key, value)? {
            return Ok(());
        }
        let v = value.trim();
        match key {
            "data" => self.data = v.to_string(),
            "has_date" => self.has_date = parse_value(key, v)?,
            "split" => self.split = SplitSpec::parse(v)?,
            "stride" => self.stride = parse_value(key, v)?,
            "synth_length" => self.synth.length = parse_value(key, v)?,
            "synth_channels" => self.synth.channels = parse_value(key, v)?,
            "synth_slopes" => self.synth.slopes = parse_list(key, v)?,
            "synth_periods" => self.synth.periods = parse_list(key, v)?,
            "synth_amplitudes" => self.synth.amplitudes = parse_list(key, v)?,
            "synth_noise" => self.synth.noise = parse_value(key, v)?,
            "synth_seed" => self.synth.seed = parse_value(key, v)?,
            "epochs" => self.epochs = parse_value(key, v)?,
            "batch_size" => self.batch_size = parse_value(key, v)?,
            "learning_rate" => self.learning_rate = parse_value(key, v)?,
            "weight_decay" => self.weight_decay = parse_value(key, v)?,
            "patience" => self.patience = parse_value(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "scaled_metrics" => self.scaled_metrics = parse_value(key, v)?,
            "mase_period" => self.mase_period = parse_value(key, v)?,
            "parallel_batches" => self.parallel_batches = parse_value(key, v)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in map {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply(map)?;
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        RunConfig::from_map(&parse_config_text(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_text(&text)
    }

    /// Checks the non-model fields; model fields are checked once the
    /// channel count is known.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(
                "learning_rate must be positive and weight_decay non-negative".into(),
            ));
        }
        if self.stride == 0 || self.mase_period == 0 {
            return Err(Error::Config("stride and mase_period must be positive".into()));
        }
        Ok(())
    }
}

/// Parses `--key value` / `--key=value` pairs; underscores and dashes in
/// keys are interchangeable.
pub fn parse_overrides(args: &[String]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let flag = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected --key, got {arg:?}")))?;
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("flag --{flag} is missing a value")))?;
                (flag.to_string(), v.clone())
            }
        };
        map.insert(key.replace('-', "_"), value);
    }
    Ok(map)
}
