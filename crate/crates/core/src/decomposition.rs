//! Learnable frequency-domain trend/seasonal split.
//!
//! Each channel of a series is transformed to the frequency domain and
//! multiplied by a sigmoid low-pass mask (trend) or its complement (seasonal),
//! `sigmoid(-(f - cutoff) * s)` and `sigmoid((f - cutoff) * s)`, before the
//! inverse transform. The cutoff and steepness are trainable per channel.
//! Because the two masks sum to one at every bin, `trend + seasonal`
//! reconstructs the input for any parameter values.

use crate::autodiff::{apply_mask, filter_mask, moving_average, Band, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::numerics::{half_bins, rfft, Tensor3};

pub const DEFAULT_CUTOFF: f64 = 0.1;
pub const DEFAULT_STEEPNESS: f64 = 10.0;
pub const MIN_CUTOFF: f64 = 0.0;
pub const MAX_CUTOFF: f64 = 0.5;
pub const MIN_STEEPNESS: f64 = 0.1;
pub const MAX_STEEPNESS: f64 = 1000.0;

/// Per-channel low/high-pass filter pair serving one scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterBank {
    pub cutoff: ParamId,
    pub steepness: ParamId,
    pub scale_index: usize,
}

impl FilterBank {
    /// Registers `scale{k}.filter.cutoff` and `scale{k}.filter.steepness`.
    pub fn register(
        store: &mut ParamStore,
        scale_index: usize,
        channels: usize,
        cutoff: f64,
        steepness: f64,
    ) -> Result<Self> {
        let prefix = format!("scale{scale_index}.filter");
        Ok(FilterBank {
            cutoff: store.add(&format!("{prefix}.cutoff"), vec![channels], vec![cutoff; channels])?,
            steepness: store.add(
                &format!("{prefix}.steepness"),
                vec![channels],
                vec![steepness; channels],
            )?,
            scale_index,
        })
    }

    pub fn channels(&self, store: &ParamStore) -> usize {
        store.get(self.cutoff).len()
    }

    /// Projects cutoff into `[0, 0.5]` and steepness into `[0.1, 1000]`.
    pub fn clamp(&self, store: &mut ParamStore) {
        for v in &mut store.get_mut(self.cutoff).value {
            *v = v.clamp(MIN_CUTOFF, MAX_CUTOFF);
        }
        for v in &mut store.get_mut(self.steepness).value {
            *v = v.clamp(MIN_STEEPNESS, MAX_STEEPNESS);
        }
    }

    /// Records the filter pair on `tape`, returning `(trend, seasonal)`.
    pub fn record(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<(Var, Var)> {
        self.check_channels(store, tape.value(x).channels())?;
        let trend = tape.spectral_filter(store, x, self.cutoff, self.steepness, Band::Low)?;
        let seasonal = tape.spectral_filter(store, x, self.cutoff, self.steepness, Band::High)?;
        Ok((trend, seasonal))
    }

    fn check_channels(&self, store: &ParamStore, channels: usize) -> Result<()> {
        let bank = self.channels(store);
        if bank != channels {
            return Err(Error::Shape(format!(
                "filter bank for scale {} has {bank} channels, input has {channels}",
                self.scale_index
            )));
        }
        Ok(())
    }
}

/// Normalized frequencies `i / len` for the half-spectrum bins `0..=len/2`.
pub fn frequency_grid(len: usize) -> Vec<f64> {
    (0..half_bins(len)).map(|i| i as f64 / len as f64).collect()
}

/// Splits `x` with explicit per-channel `cutoff` and `steepness` values.
pub fn decompose_with(x: &Tensor3, cutoff: &[f64], steepness: &[f64]) -> Result<(Tensor3, Tensor3)> {
    let (batch, len, channels) = x.shape();
    if cutoff.len() != channels || steepness.len() != channels {
        return Err(Error::Shape(format!(
            "filter bank has {} cutoffs / {} steepnesses for {channels} channels",
            cutoff.len(),
            steepness.len()
        )));
    }
    let grid = frequency_grid(len);
    let mut trend = Tensor3::zeros(batch, len, channels);
    let mut seasonal = Tensor3::zeros(batch, len, channels);
    for c in 0..channels {
        let low: Vec<f64> = grid
            .iter()
            .map(|&f| filter_mask(f, cutoff[c], steepness[c], Band::Low))
            .collect();
        let high: Vec<f64> = grid
            .iter()
            .map(|&f| filter_mask(f, cutoff[c], steepness[c], Band::High))
            .collect();
        for b in 0..batch {
            let half = rfft(&x.series(b, c));
            let lo = apply_mask(&half, &low, len);
            let hi = apply_mask(&half, &high, len);
            for t in 0..len {
                let i = trend.index(b, t, c);
                trend.data_mut()[i] = lo[t];
                seasonal.data_mut()[i] = hi[t];
            }
        }
    }
    Ok((trend, seasonal))
}

/// Splits `x` with the current values of `bank`.
pub fn decompose(x: &Tensor3, bank: &FilterBank, store: &ParamStore) -> Result<(Tensor3, Tensor3)> {
    bank.check_channels(store, x.channels())?;
    decompose_with(x, &store.get(bank.cutoff).value, &store.get(bank.steepness).value)
}

/// Non-learnable baseline: centered moving average (edge replication) as
/// trend, remainder as seasonal.
pub fn fixed_decompose(x: &Tensor3, kernel: usize) -> Result<(Tensor3, Tensor3)> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "moving-average kernel must be odd and positive, got {kernel}"
        )));
    }
    let trend = moving_average(x, kernel);
    let seasonal = x.zip_with(&trend, |a, b| a - b)?;
    Ok((trend, seasonal))
}

/// Tape version of [`fixed_decompose`].
pub fn record_fixed(tape: &mut Tape, x: Var, kernel: usize) -> Result<(Var, Var)> {
    let trend = tape.moving_average(x, kernel)?;
    let seasonal = tape.sub(x, trend)?;
    Ok((trend, seasonal))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn energy(x: &Tensor3) -> f64 {
        x.data().iter().map(|v| v * v).sum()
    }

    #[test]
    fn grid_examples() {
        assert_eq!(frequency_grid(4), vec![0.0, 0.25, 0.5]);
        let g = frequency_grid(96);
        assert_eq!(g.len(), 49);
        assert_eq!(*g.last().unwrap(), 0.5);
        for w in g.windows(2) {
            assert!((w[1] - w[0] - 1.0 / 96.0).abs() < 1e-15);
        }
        assert_eq!(frequency_grid(5), vec![0.0, 0.2, 0.4]);
    }

    #[test]
    fn constant_series_is_all_trend() {
        let x = Tensor3::from_series(&[3.0; 32]).unwrap();
        let (trend, seasonal) = decompose_with(&x, &[0.25], &[100.0]).unwrap();
        assert!(trend.zip_with(&x, |a, b| a - b).unwrap().max_abs() < 1e-6);
        assert!(seasonal.max_abs() < 1e-6);
    }

    #[test]
    fn high_frequency_sinusoid_is_seasonal() {
        let x: Vec<f64> = (0..64)
            .map(|t| (2.0 * std::f64::consts::PI * 8.0 * t as f64 / 64.0).sin())
            .collect();
        let x = Tensor3::from_series(&x).unwrap();
        let (trend, seasonal) = decompose_with(&x, &[0.0625], &[500.0]).unwrap();
        // mask at bin 8 (f = 0.125): sigmoid(0.0625 * 500) for the high band
        let high = filter_mask(0.125, 0.0625, 500.0, Band::High);
        assert!(high > 0.999_999);
        let total = energy(&x);
        assert!(energy(&seasonal) >= 0.99 * total);
        assert!(energy(&trend) <= 0.01 * total);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let x = Tensor3::zeros(1, 8, 2);
        assert!(decompose_with(&x, &[0.1], &[10.0]).is_err());
        let mut store = ParamStore::new();
        let bank = FilterBank::register(&mut store, 0, 3, 0.1, 10.0).unwrap();
        assert!(decompose(&x, &bank, &store).is_err());
    }

    #[test]
    fn clamp_projects_into_range() {
        let mut store = ParamStore::new();
        let bank = FilterBank::register(&mut store, 0, 2, 0.1, 10.0).unwrap();
        store.get_mut(bank.cutoff).value = vec![-0.2, 0.9];
        store.get_mut(bank.steepness).value = vec![0.0, 5000.0];
        bank.clamp(&mut store);
        assert_eq!(store.get(bank.cutoff).value, vec![0.0, 0.5]);
        assert_eq!(store.get(bank.steepness).value, vec![0.1, 1000.0]);
    }

    #[test]
    fn fixed_decompose_examples() {
        let x = Tensor3::from_fn(1, 10, 1, |_, t, _| (t + 1) as f64);
        let (trend, seasonal) = fixed_decompose(&x, 1).unwrap();
        assert_eq!(trend, x);
        assert!(seasonal.data().iter().all(|&v| v == 0.0));

        let c = Tensor3::from_series(&[4.0; 7]).unwrap();
        let (trend, seasonal) = fixed_decompose(&c, 5).unwrap();
        assert!(trend.zip_with(&c, |a, b| a - b).unwrap().max_abs() < 1e-15);
        assert!(seasonal.max_abs() < 1e-15);

        // ramp, kernel 3: brute-force replicated-window means
        let (trend, seasonal) = fixed_decompose(&x, 3).unwrap();
        let ramp: Vec<f64> = (1..=10).map(f64::from).collect();
        for t in 0..10 {
            let w: f64 = [-1i32, 0, 1]
                .iter()
                .map(|j| ramp[(t as i32 + j).clamp(0, 9) as usize])
                .sum::<f64>()
                / 3.0;
            assert!((trend.data()[t] - w).abs() < 1e-12);
        }
        for t in 1..9 {
            assert!((trend.data()[t] - ramp[t]).abs() < 1e-12);
            assert!(seasonal.data()[t].abs() < 1e-12);
        }
        assert!(fixed_decompose(&x, 4).is_err());
    }

    #[test]
    fn tape_and_direct_paths_agree() {
        let x = Tensor3::from_fn(2, 24, 3, |b, t, c| ((b + 1) as f64 * t as f64 * 0.37 + c as f64).sin());
        let mut store = ParamStore::new();
        let bank = FilterBank::register(&mut store, 1, 3, 0.15, 20.0).unwrap();
        let (t0, s0) = decompose(&x, &bank, &store).unwrap();
        let mut tape = Tape::new();
        let xi = tape.input(x);
        let (t1, s1) = bank.record(&mut tape, &store, xi).unwrap();
        assert_eq!(&t0, tape.value(t1));
        assert_eq!(&s0, tape.value(s1));
    }
}
