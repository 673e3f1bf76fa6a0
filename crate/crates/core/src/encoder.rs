//! Per-component forecasting encoder.
//!
//! ```text
//! x_temp    = FC_temp(x)                      (time axis, L_k -> L_k)
//! x_temp    = x_temp * diff(x)                (autocorrelation gate, optional)
//! x_channel = FC_channel(x_temp)              (channel axis, C -> C)
//! out       = FC_projection(x_temp + x_channel)   (time axis, L_k -> H)
//! ```

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::numerics::{Axis, Tensor3};

/// Optional nonlinearity applied to `x_temp` after gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    None,
    Relu,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::None => "none",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Activation::None),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// Parameters of one encoder; the ids point into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderParams {
    pub temporal_weight: ParamId,
    pub temporal_bias: ParamId,
    pub channel_weight: ParamId,
    pub channel_bias: ParamId,
    pub projection_weight: ParamId,
    pub projection_bias: ParamId,
    pub seq_len: usize,
    pub horizon: usize,
    pub channels: usize,
    pub use_autocorrelation: bool,
    pub activation: Activation,
}

/// Draws `n` values uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub(crate) fn uniform_init(rng: &mut impl Rng, fan_in: usize, n: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Registers a fully connected layer `prefix.weight` (`d_in x d_out`) and
/// `prefix.bias`.
pub(crate) fn register_linear(
    store: &mut ParamStore,
    rng: &mut impl Rng,
    prefix: &str,
    d_in: usize,
    d_out: usize,
) -> Result<(ParamId, ParamId)> {
    let w = uniform_init(rng, d_in, d_in * d_out);
    let b = uniform_init(rng, d_in, d_out);
    Ok((
        store.add(&format!("{prefix}.weight"), vec![d_in, d_out], w)?,
        store.add(&format!("{prefix}.bias"), vec![d_out], b)?,
    ))
}

/// Ids and intermediate handles from one recorded encoder pass.
#[derive(Debug, Clone, Copy)]
pub struct EncoderTrace {
    /// `x_temp` after the gate (and activation).
    pub x_temp: Var,
    pub output: Var,
}

impl EncoderParams {
    #[allow(clippy::too_many_arguments)]
    pub fn register(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        prefix: &str,
        seq_len: usize,
        channels: usize,
        horizon: usize,
        use_autocorrelation: bool,
        activation: Activation,
    ) -> Result<Self> {
        let (temporal_weight, temporal_bias) =
            register_linear(store, rng, &format!("{prefix}.temporal"), seq_len, seq_len)?;
        let (channel_weight, channel_bias) =
            register_linear(store, rng, &format!("{prefix}.channel"), channels, channels)?;
        let (projection_weight, projection_bias) =
            register_linear(store, rng, &format!("{prefix}.projection"), seq_len, horizon)?;
        Ok(EncoderParams {
            temporal_weight,
            temporal_bias,
            channel_weight,
            channel_bias,
            projection_weight,
            projection_bias,
            seq_len,
            horizon,
            channels,
            use_autocorrelation,
            activation,
        })
    }

    /// Trainable scalars held by one encoder.
    pub fn count(seq_len: usize, channels: usize, horizon: usize) -> usize {
        (seq_len * seq_len + seq_len) + (channels * channels + channels) + (seq_len * horizon + horizon)
    }

    pub fn record(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<EncoderTrace> {
        let (_, len, channels) = tape.value(x).shape();
        if len != self.seq_len || channels != self.channels {
            return Err(Error::Shape(format!(
                "encoder expects length {} x {} channels, got {len} x {channels}",
                self.seq_len, self.channels
            )));
        }
        let mut x_temp = tape.affine(store, x, self.temporal_weight, self.temporal_bias, Axis::Temporal)?;
        if self.use_autocorrelation {
            let delta = tape.lagged_difference(x);
            x_temp = tape.mul(x_temp, delta)?;
        }
        if self.activation == Activation::Relu {
            x_temp = tape.relu(x_temp);
        }
        let x_channel = tape.affine(store, x_temp, self.channel_weight, self.channel_bias, Axis::Channel)?;
        let merged = tape.add(x_temp, x_channel)?;
        let output = tape.affine(
            store,
            merged,
            self.projection_weight,
            self.projection_bias,
            Axis::Temporal,
        )?;
        Ok(EncoderTrace { x_temp, output })
    }

    /// Inference-only forward pass.
    pub fn encode(&self, store: &ParamStore, x: &Tensor3) -> Result<Tensor3> {
        let mut tape = Tape::new();
        let xi = tape.input(x.clone());
        let trace = self.record(&mut tape, store, xi)?;
        Ok(tape.value(trace.output).clone())
    }
}

/// `out[t] = x[t] - x[t-1]`, with `out[0] = 0`.
pub fn lagged_difference(x: &Tensor3) -> Tensor3 {
    crate::autodiff::lagged_difference(x)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn build(seq_len: usize, channels: usize, horizon: usize, gate: bool) -> (ParamStore, EncoderParams) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = EncoderParams::register(
            &mut store,
            &mut rng,
            "enc",
            seq_len,
            channels,
            horizon,
            gate,
            Activation::None,
        )
        .unwrap();
        (store, p)
    }

    #[test]
    fn lagged_difference_examples() {
        let x = Tensor3::from_series(&[1.0, 4.0, 9.0]).unwrap();
        assert_eq!(lagged_difference(&x).data(), &[0.0, 3.0, 5.0]);
        let c = Tensor3::from_series(&[2.0; 5]).unwrap();
        assert!(lagged_difference(&c).data().iter().all(|&v| v == 0.0));
        let r = Tensor3::from_series(&[0.5, -1.0, 3.0, 2.5, 7.0]).unwrap();
        let s: f64 = lagged_difference(&r).data()[1..].iter().sum();
        assert!((s - (7.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn zero_params_give_zero_output() {
        let (mut store, p) = build(6, 2, 3, true);
        for param in store.iter_mut() {
            param.value.fill(0.0);
        }
        let x = Tensor3::from_fn(2, 6, 2, |b, t, c| (b + t * c) as f64);
        let y = p.encode(&store, &x).unwrap();
        assert_eq!(y.shape(), (2, 3, 2));
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_input_with_gate_is_bias_only() {
        // (1, 2, 1) toy, hand-evaluated: x_temp = 0 after gating, so
        // x_channel = b_channel and out[o] = sum_t W_proj[t, o] * b_channel + b_proj[o].
        let (mut store, p) = build(2, 1, 2, true);
        store.get_mut(p.temporal_weight).value = vec![0.5, -1.0, 2.0, 0.25];
        store.get_mut(p.temporal_bias).value = vec![0.3, -0.7];
        store.get_mut(p.channel_weight).value = vec![1.5];
        store.get_mut(p.channel_bias).value = vec![0.2];
        store.get_mut(p.projection_weight).value = vec![1.0, 2.0, 3.0, 4.0];
        store.get_mut(p.projection_bias).value = vec![0.01, 0.02];
        let x = Tensor3::new(1, 2, 1, vec![5.0, 5.0]).unwrap();
        let y = p.encode(&store, &x).unwrap();
        let expect = [(1.0 + 3.0) * 0.2 + 0.01, (2.0 + 4.0) * 0.2 + 0.02];
        for (got, want) in y.data().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn unit_ramp_gate_is_identity_after_first_step() {
        let (store, gated) = build(8, 2, 3, true);
        let plain = EncoderParams {
            use_autocorrelation: false,
            ..gated
        };
        let x = Tensor3::from_fn(1, 8, 2, |_, t, c| t as f64 + 10.0 * c as f64);
        let run = |p: &EncoderParams| {
            let mut tape = Tape::new();
            let xi = tape.input(x.clone());
            let tr = p.record(&mut tape, &store, xi).unwrap();
            tape.value(tr.x_temp).clone()
        };
        let (a, b) = (run(&gated), run(&plain));
        for t in 1..8 {
            for c in 0..2 {
                assert_eq!(a.get(0, t, c), b.get(0, t, c));
            }
        }
        assert_eq!(a.get(0, 0, 0), 0.0);
    }

    #[test]
    fn gate_off_equals_all_ones_gate() {
        let (store, p) = build(6, 3, 2, false);
        let x = Tensor3::from_fn(2, 6, 3, |b, t, c| ((b * 7 + t * 3 + c) as f64).cos());
        let y = p.encode(&store, &x).unwrap();

        let mut tape = Tape::new();
        let xi = tape.input(x.clone());
        let ones = tape.input(x.map(|_| 1.0));
        let xt = tape.affine(&store, xi, p.temporal_weight, p.temporal_bias, Axis::Temporal).unwrap();
        let xt = tape.mul(xt, ones).unwrap();
        let xc = tape.affine(&store, xt, p.channel_weight, p.channel_bias, Axis::Channel).unwrap();
        let m = tape.add(xt, xc).unwrap();
        let out = tape
            .affine(&store, m, p.projection_weight, p.projection_bias, Axis::Temporal)
            .unwrap();
        assert_eq!(&y, tape.value(out));
    }

    #[test]
    fn shape_contract_and_mismatch() {
        let (store, p) = build(12, 2, 5, true);
        let y = p.encode(&store, &Tensor3::zeros(3, 12, 2)).unwrap();
        assert_eq!(y.shape(), (3, 5, 2));
        assert!(p.encode(&store, &Tensor3::zeros(3, 10, 2)).is_err());
        assert!(p.encode(&store, &Tensor3::zeros(3, 12, 3)).is_err());
    }

    #[test]
    fn activation_roundtrips_text() {
        for a in [Activation::None, Activation::Relu] {
            assert_eq!(a.to_string().parse::<Activation>().unwrap(), a);
        }
        assert!("gelu".parse::<Activation>().is_err());
    }
}
