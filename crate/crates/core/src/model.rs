//! Multi-scale assembly: pooled scales, per-scale decomposition, a trend and
//! a seasonal encoder per scale, and a fusion layer over the concatenated
//! per-scale forecasts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::decomposition::{record_fixed, FilterBank, DEFAULT_CUTOFF, DEFAULT_STEEPNESS};
use crate::encoder::{register_linear, Activation, EncoderParams};
use crate::error::{Error, Result};
use crate::numerics::{Axis, Tensor3};

pub mod checkpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecompositionMode {
    #[default]
    Learnable,
    Fixed,
}

impl fmt::Display for DecompositionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecompositionMode::Learnable => "learnable",
            DecompositionMode::Fixed => "fixed",
        })
    }
}

impl FromStr for DecompositionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learnable" => Ok(DecompositionMode::Learnable),
            "fixed" => Ok(DecompositionMode::Fixed),
            other => Err(Error::Config(format!("unknown decomposition mode {other:?}"))),
        }
    }
}

/// How input windows are scaled before reaching the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Per-channel standardization with train-split statistics.
    #[default]
    Standard,
    None,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Standard => "standard",
            Normalization::None => "none",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Normalization::Standard),
            "none" => Ok(Normalization::None),
            other => Err(Error::Config(format!("unknown normalization {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub channels: usize,
    pub scales: usize,
    pub downsample_factor: usize,
    pub decomposition: DecompositionMode,
    pub autocorrelation: bool,
    pub fixed_kernel: usize,
    pub init_cutoff: f64,
    pub init_steepness: f64,
    pub activation: Activation,
    pub normalization: Normalization,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lookback: 96,
            horizon: 96,
            channels: 1,
            scales: 4,
            downsample_factor: 2,
            decomposition: DecompositionMode::Learnable,
            autocorrelation: true,
            fixed_kernel: 25,
            init_cutoff: DEFAULT_CUTOFF,
            init_steepness: DEFAULT_STEEPNESS,
            activation: Activation::None,
            normalization: Normalization::Standard,
            seed: 2024,
        }
    }
}

/// Keys under which [`ModelConfig`] fields are stored in config text.
pub const MODEL_KEYS: &[&str] = &[
    "activation",
    "autocorrelation",
    "channels",
    "decomposition",
    "downsample_factor",
    "fixed_kernel",
    "horizon",
    "init_cutoff",
    "init_steepness",
    "lookback",
    "normalization",
    "scales",
    "seed",
];

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.scales == 0 {
            return bad("scales must be at least 1".into());
        }
        if self.horizon == 0 || self.channels == 0 || self.lookback == 0 {
            return bad("lookback, horizon and channels must be at least 1".into());
        }
        if self.downsample_factor == 0 {
            return bad("downsample_factor must be at least 1".into());
        }
        let span = (self.downsample_factor as u128).checked_pow(self.scales as u32 - 1);
        match span {
            Some(span) if self.lookback as u128 % span == 0 => {}
            _ => {
                return bad(format!(
                    "lookback {} must be divisible by {}^{}",
                    self.lookback,
                    self.downsample_factor,
                    self.scales - 1
                ))
            }
        }
        if self.decomposition == DecompositionMode::Fixed && self.fixed_kernel % 2 == 0 {
            return bad(format!("fixed_kernel must be odd, got {}", self.fixed_kernel));
        }
        if !(0.0..=0.5).contains(&self.init_cutoff) || !(self.init_steepness > 0.0) {
            return bad("init_cutoff must lie in [0, 0.5] and init_steepness be positive".into());
        }
        Ok(())
    }

    /// Series length at each scale, finest first.
    pub fn scale_lengths(&self) -> Vec<usize> {
        (0..self.scales)
            .scan(self.lookback, |len, k| {
                if k > 0 {
                    *len /= self.downsample_factor;
                }
                Some(*len)
            })
            .collect()
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        let pairs: [(&str, String); 13] = [
            ("activation", self.activation.to_string()),
            ("autocorrelation", self.autocorrelation.to_string()),
            ("channels", self.channels.to_string()),
            ("decomposition", self.decomposition.to_string()),
            ("downsample_factor", self.downsample_factor.to_string()),
            ("fixed_kernel", self.fixed_kernel.to_string()),
            ("horizon", self.horizon.to_string()),
            ("init_cutoff", self.init_cutoff.to_string()),
            ("init_steepness", self.init_steepness.to_string()),
            ("lookback", self.lookback.to_string()),
            ("normalization", self.normalization.to_string()),
            ("scales", self.scales.to_string()),
            ("seed", self.seed.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Sets one field from its text form; returns false for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "activation" => self.activation = parse_value(key, value)?,
            "autocorrelation" => self.autocorrelation = parse_value(key, value)?,
            "channels" => self.channels = parse_value(key, value)?,
            "decomposition" => self.decomposition = parse_value(key, value)?,
            "downsample_factor" => self.downsample_factor = parse_value(key, value)?,
            "fixed_kernel" => self.fixed_kernel = parse_value(key, value)?,
            "horizon" => self.horizon = parse_value(key, value)?,
            "init_cutoff" => self.init_cutoff = parse_value(key, value)?,
            "init_steepness" => self.init_steepness = parse_value(key, value)?,
            "lookback" => self.lookback = parse_value(key, value)?,
            "normalization" => self.normalization = parse_value(key, value)?,
            "scales" => self.scales = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Reads the model keys from `map`, defaulting any that are missing.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        for (k, v) in map {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parameters belonging to one scale.
#[derive(Debug, Clone, Copy)]
pub struct ScaleParams {
    pub len: usize,
    pub filter: Option<FilterBank>,
    pub trend: EncoderParams,
    pub seasonal: EncoderParams,
}

/// Handles to the intermediates of one recorded forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub scale_inputs: Vec<Var>,
    pub trends: Vec<Var>,
    pub seasonals: Vec<Var>,
    pub scale_forecasts: Vec<Var>,
    pub output: Var,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub scales: Vec<ScaleParams>,
    pub fusion_weight: ParamId,
    pub fusion_bias: ParamId,
}

impl Model {
    /// Builds a model with seeded uniform `+-1/sqrt(fan_in)` weights and the
    /// configured filter initialization.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let c = config.channels;
        let h = config.horizon;
        let mut scales = Vec::with_capacity(config.scales);
        for (k, len) in config.scale_lengths().into_iter().enumerate() {
            let filter = match config.decomposition {
                DecompositionMode::Learnable => Some(FilterBank::register(
                    &mut store,
                    k,
                    c,
                    config.init_cutoff,
                    config.init_steepness,
                )?),
                DecompositionMode::Fixed => None,
            };
            let mut encoder = |part: &str| {
                EncoderParams::register(
                    &mut store,
                    &mut rng,
                    &format!("scale{k}.{part}"),
                    len,
                    c,
                    h,
                    config.autocorrelation,
                    config.activation,
                )
            };
            let trend = encoder("trend")?;
            let seasonal = encoder("seasonal")?;
            scales.push(ScaleParams {
                len,
                filter,
                trend,
                seasonal,
            });
        }
        let (fusion_weight, fusion_bias) =
            register_linear(&mut store, &mut rng, "fusion", config.scales * h, h)?;
        Ok(Model {
            config,
            store,
            scales,
            fusion_weight,
            fusion_bias,
        })
    }

    /// Rebuilds a model around an existing parameter store, checking that
    /// every expected parameter is present with the right shape.
    pub fn with_store(config: ModelConfig, store: ParamStore) -> Result<Self> {
        let mut model = Model::new(config)?;
        if store.len() != model.store.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                model.store.len(),
                store.len()
            )));
        }
        for (want, got) in model.store.iter().zip(store.iter()) {
            if want.name != got.name || want.shape != got.shape {
                return Err(Error::Checkpoint(format!(
                    "parameter mismatch: expected {} {:?}, found {} {:?}",
                    want.name, want.shape, got.name, got.shape
                )));
            }
        }
        model.store = store;
        Ok(model)
    }

    /// Records the forward pass for a `(B, L, C)` input on `tape`.
    pub fn record(&self, tape: &mut Tape, x: Var) -> Result<ForwardTrace> {
        let (_, len, channels) = tape.value(x).shape();
        if len != self.config.lookback || channels != self.config.channels {
            return Err(Error::Shape(format!(
                "model expects windows of {} steps x {} channels, got {len} x {channels}",
                self.config.lookback, self.config.channels
            )));
        }
        let store = &self.store;
        let mut trace = ForwardTrace {
            scale_inputs: Vec::new(),
            trends: Vec::new(),
            seasonals: Vec::new(),
            scale_forecasts: Vec::new(),
            output: x,
        };
        let mut xk = x;
        for (k, scale) in self.scales.iter().enumerate() {
            if k > 0 {
                xk = tape.avg_pool(xk, self.config.downsample_factor)?;
            }
            let (trend, seasonal) = match &scale.filter {
                Some(bank) => bank.record(tape, store, xk)?,
                None => record_fixed(tape, xk, self.config.fixed_kernel)?,
            };
            let t_hat = scale.trend.record(tape, store, trend)?.output;
            let s_hat = scale.seasonal.record(tape, store, seasonal)?.output;
            let forecast = tape.add(t_hat, s_hat)?;
            trace.scale_inputs.push(xk);
            trace.trends.push(trend);
            trace.seasonals.push(seasonal);
            trace.scale_forecasts.push(forecast);
        }
        let stacked = tape.concat_time(&trace.scale_forecasts)?;
        trace.output = tape.affine(store, stacked, self.fusion_weight, self.fusion_bias, Axis::Temporal)?;
        Ok(trace)
    }

    /// Forecast `(B, H, C)` for a `(B, L, C)` batch of windows.
    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        let mut tape = Tape::new();
        let xi = tape.input(x.clone());
        let trace = self.record(&mut tape, xi)?;
        Ok(tape.value(trace.output).clone())
    }

    /// MSE of the forecast against `y`; gradients are accumulated into the
    /// store. Returns the loss.
    pub fn accumulate_gradients(&mut self, x: &Tensor3, y: &Tensor3) -> Result<f64> {
        let mut tape = Tape::new();
        let xi = tape.input(x.clone());
        let trace = self.record(&mut tape, xi)?;
        let loss = tape.mse(trace.output, y)?;
        tape.backward(loss, &mut self.store)?;
        Ok(tape.value(loss).data()[0])
    }

    /// Projects every filter bank back into its valid range.
    pub fn clamp_filters(&mut self) {
        for scale in &self.scales {
            if let Some(bank) = &scale.filter {
                bank.clamp(&mut self.store);
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.store.numel()
    }
}

/// Closed-form trainable scalar count for `config`.
pub fn count_params(config: &ModelConfig) -> usize {
    let c = config.channels;
    let h = config.horizon;
    let per_scale: usize = config
        .scale_lengths()
        .into_iter()
        .map(|len| {
            let filters = match config.decomposition {
                DecompositionMode::Learnable => 2 * c,
                DecompositionMode::Fixed => 0,
            };
            2 * EncoderParams::count(len, c, h) + filters
        })
        .sum();
    per_scale + config.scales * h * h + h
}

/// Estimated floating-point operations for one forward pass at batch 1.
///
/// Per scale: `5 L log2(L) C` for the transform pair, `2 (L/2 + 1) C` for the
/// masks, `2 (L^2 C + C^2 L + L H C)` for the two encoders' affine layers and
/// `L C` for the gate; plus `K H^2 C` for fusion. The multiply-add total is
/// doubled. This is an estimate, not a measurement.
pub fn estimate_flops(config: &ModelConfig) -> u64 {
    let c = config.channels as f64;
    let h = config.horizon as f64;
    let mut total = 0.0;
    for len in config.scale_lengths() {
        let l = len as f64;
        let transform = 5.0 * l * l.log2() * c;
        let mask = 2.0 * ((len / 2 + 1) as f64) * c;
        let affine = 2.0 * (l * l * c + c * c * l + l * h * c);
        let gate = l * c;
        total += transform + mask + affine + gate;
    }
    total += config.scales as f64 * h * h * c;
    (2.0 * total).round() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scales: usize) -> ModelConfig {
        ModelConfig {
            lookback: 16,
            horizon: 4,
            channels: 3,
            scales,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn param_count_matches_closed_form_example() {
        let cfg = ModelConfig {
            lookback: 4,
            horizon: 4,
            channels: 1,
            scales: 1,
            ..ModelConfig::default()
        };
        assert_eq!(count_params(&cfg), 106);
        assert_eq!(Model::new(cfg).unwrap().num_params(), 106);
    }

    #[test]
    fn param_count_agrees_with_store_across_configs() {
        for scales in 1..=3 {
            for channels in [1, 2, 5] {
                for decomposition in [DecompositionMode::Learnable, DecompositionMode::Fixed] {
                    let cfg = ModelConfig {
                        lookback: 16,
                        horizon: 3,
                        channels,
                        scales,
                        decomposition,
                        ..ModelConfig::default()
                    };
                    assert_eq!(count_params(&cfg), Model::new(cfg).unwrap().num_params());
                }
            }
        }
    }

    #[test]
    fn doubling_channels_changes_only_channel_terms() {
        let a = small(2);
        let b = ModelConfig { channels: 6, ..a.clone() };
        // per scale: two channel FCs (C^2 + C) and 2C filter params
        let delta = |c: usize| 2 * (2 * (c * c + c) + 2 * c);
        assert_eq!(count_params(&b) - count_params(&a), delta(6) - delta(3));
    }

    #[test]
    fn fixed_mode_drops_filter_params() {
        let a = small(3);
        let b = ModelConfig {
            decomposition: DecompositionMode::Fixed,
            fixed_kernel: 5,
            ..a.clone()
        };
        assert_eq!(count_params(&a) - count_params(&b), 2 * 3 * 3);
    }

    #[test]
    fn flops_hand_expanded() {
        let cfg = ModelConfig {
            lookback: 1,
            horizon: 1,
            channels: 1,
            scales: 1,
            ..ModelConfig::default()
        };
        // transform 0, mask 2, affines 2*(1+1+1) = 6, gate 1, fusion 1 -> 10, doubled
        assert_eq!(estimate_flops(&cfg), 20);
    }

    #[test]
    fn flops_polynomial_in_channels() {
        let at = |c: usize| {
            estimate_flops(&ModelConfig {
                lookback: 32,
                horizon: 8,
                channels: c,
                scales: 2,
                ..ModelConfig::default()
            }) as f64
        };
        // f(C) = a C + b C^2 with b = 2 * 2 * sum_k L_k = 4 * (32 + 16)
        let b = 4.0 * 48.0;
        let a = at(1) - b;
        for c in [2usize, 3, 7] {
            let cf = c as f64;
            assert!((at(c) - (a * cf + b * cf * cf)).abs() <= 1.0, "C = {c}");
        }
    }

    #[test]
    fn pems_shaped_flops_within_band_of_reported() {
        let cfg = ModelConfig {
            lookback: 96,
            horizon: 12,
            channels: 358,
            scales: 4,
            ..ModelConfig::default()
        };
        let f = estimate_flops(&cfg) as f64;
        let reported = 151.52e6;
        assert!(f >= reported / 3.0 && f <= reported * 3.0, "{f}");
    }

    #[test]
    fn zero_params_zero_output() {
        let mut m = Model::new(small(2)).unwrap();
        for p in m.store.iter_mut() {
            p.value.fill(0.0);
        }
        let x = Tensor3::from_fn(2, 16, 3, |b, t, c| (b + t + c) as f64);
        let y = m.forward(&x).unwrap();
        assert_eq!(y.shape(), (2, 4, 3));
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_scale_with_identity_fusion_is_scale_forecast() {
        let mut m = Model::new(small(1)).unwrap();
        let w = m.store.get_mut(m.fusion_weight);
        w.value = crate::numerics::Matrix::identity(4).data;
        m.store.get_mut(m.fusion_bias).value.fill(0.0);
        let x = Tensor3::from_fn(2, 16, 3, |b, t, c| ((b * 5 + t * 3 + c) as f64).sin());
        let mut tape = Tape::new();
        let xi = tape.input(x);
        let tr = m.record(&mut tape, xi).unwrap();
        assert_eq!(tape.value(tr.output), tape.value(tr.scale_forecasts[0]));
    }

    #[test]
    fn decomposition_reconstructs_every_scale() {
        let m = Model::new(small(3)).unwrap();
        let x = Tensor3::from_fn(2, 16, 3, |b, t, c| ((b * 5 + t * 3 + c) as f64 * 0.7).sin() * 4.0);
        let mut tape = Tape::new();
        let xi = tape.input(x);
        let tr = m.record(&mut tape, xi).unwrap();
        for k in 0..3 {
            let xk = tape.value(tr.scale_inputs[k]);
            let sum = tape
                .value(tr.trends[k])
                .zip_with(tape.value(tr.seasonals[k]), |a, b| a + b)
                .unwrap();
            let err = sum.zip_with(xk, |a, b| (a - b).abs()).unwrap().max_abs();
            assert!(err <= 1e-9 * xk.max_abs().max(1.0));
            assert_eq!(xk.len(), [16, 8, 4][k]);
        }
    }

    #[test]
    fn same_seed_same_output_and_ablation_shapes() {
        let cfg = small(2);
        let x = Tensor3::from_fn(1, 16, 3, |_, t, c| (t * (c + 1)) as f64 * 0.1);
        let a = Model::new(cfg.clone()).unwrap().forward(&x).unwrap();
        let b = Model::new(cfg.clone()).unwrap().forward(&x).unwrap();
        assert_eq!(a.data(), b.data());

        let on = Model::new(cfg.clone()).unwrap();
        let off = Model::new(ModelConfig {
            autocorrelation: false,
            ..cfg
        })
        .unwrap();
        for (p, q) in on.store.iter().zip(off.store.iter()) {
            assert_eq!(p.name, q.name);
            assert_eq!(p.shape, q.shape);
            assert_eq!(p.value, q.value);
        }
    }

    #[test]
    fn rejects_inconsistent_config_and_input() {
        assert!(Model::new(ModelConfig {
            lookback: 18,
            scales: 3,
            ..small(1)
        })
        .is_err());
        assert!(Model::new(ModelConfig { scales: 0, ..small(1) }).is_err());
        let m = Model::new(small(2)).unwrap();
        assert!(m.forward(&Tensor3::zeros(1, 15, 3)).is_err());
        assert!(m.forward(&Tensor3::zeros(1, 16, 2)).is_err());
    }

    #[test]
    fn config_map_roundtrip() {
        let cfg = ModelConfig {
            init_cutoff: 0.123456789012345,
            autocorrelation: false,
            decomposition: DecompositionMode::Fixed,
            ..small(2)
        };
        let map = cfg.to_map();
        assert_eq!(map.keys().map(String::as_str).collect::<Vec<_>>(), MODEL_KEYS);
        assert_eq!(ModelConfig::from_map(&map).unwrap(), cfg);
    }
}
