//! Dense tensor substrate: the `[batch, length, channels]` tensor, real-input
//! Fourier transform pair, average-pool downsampling and axis-wise affine maps.

use std::cell::RefCell;
use std::fmt;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Batched multivariate series, row-major over `(batch, length, channels)`.
#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    batch: usize,
    len: usize,
    channels: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor3")
            .field("shape", &self.shape())
            .field("data", &self.data)
            .finish()
    }
}

impl Tensor3 {
    pub fn new(batch: usize, len: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if batch == 0 || len == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "tensor dimensions must be positive, got ({batch}, {len}, {channels})"
            )));
        }
        if data.len() != batch * len * channels {
            return Err(Error::Shape(format!(
                "data length {} does not equal {batch}*{len}*{channels}",
                data.len()
            )));
        }
        Ok(Tensor3 {
            batch,
            len,
            channels,
            data,
        })
    }

    /// Panics if any dimension is zero.
    pub fn zeros(batch: usize, len: usize, channels: usize) -> Self {
        assert!(batch > 0 && len > 0 && channels > 0, "zero-sized tensor");
        Tensor3 {
            batch,
            len,
            channels,
            data: vec![0.0; batch * len * channels],
        }
    }

    pub fn from_fn(
        batch: usize,
        len: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut out = Tensor3::zeros(batch, len, channels);
        for b in 0..batch {
            for t in 0..len {
                for c in 0..channels {
                    let i = out.index(b, t, c);
                    out.data[i] = f(b, t, c);
                }
            }
        }
        out
    }

    /// A single-batch, single-channel tensor holding `values` along time.
    pub fn from_series(values: &[f64]) -> Result<Self> {
        Tensor3::new(1, values.len(), 1, values.to_vec())
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.len, self.channels)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false: tensors have positive dimensions by construction.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, b: usize, t: usize, c: usize) -> usize {
        (b * self.len + t) * self.channels + c
    }

    #[inline]
    pub fn get(&self, b: usize, t: usize, c: usize) -> f64 {
        self.data[self.index(b, t, c)]
    }

    /// Time series of one `(batch, channel)` pair.
    pub fn series(&self, b: usize, c: usize) -> Vec<f64> {
        (0..self.len).map(|t| self.get(b, t, c)).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn zip_with(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Result<Tensor3> {
        self.require_same_shape(other)?;
        Ok(Tensor3 {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            ..*self
        })
    }

    pub fn require_same_shape(&self, other: &Tensor3) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "expected matching shapes, got {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Concatenate tensors along the time axis.
    pub fn concat_time(parts: &[&Tensor3]) -> Result<Tensor3> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let (batch, _, channels) = first.shape();
        for p in parts {
            if p.batch != batch || p.channels != channels {
                return Err(Error::Shape(format!(
                    "concat needs equal batch/channels, got {:?} and {:?}",
                    first.shape(),
                    p.shape()
                )));
            }
        }
        let len: usize = parts.iter().map(|p| p.len).sum();
        let mut data = Vec::with_capacity(batch * len * channels);
        for b in 0..batch {
            for p in parts {
                let start = p.index(b, 0, 0);
                data.extend_from_slice(&p.data[start..start + p.len * channels]);
            }
        }
        Tensor3::new(batch, len, channels, data)
    }

    /// Time steps `[start, start + len)`.
    pub fn slice_time(&self, start: usize, len: usize) -> Result<Tensor3> {
        if len == 0 || start + len > self.len {
            return Err(Error::Shape(format!(
                "time slice [{start}, {}) out of range for length {}",
                start + len,
                self.len
            )));
        }
        let mut data = Vec::with_capacity(self.batch * len * self.channels);
        for b in 0..self.batch {
            let from = self.index(b, start, 0);
            data.extend_from_slice(&self.data[from..from + len * self.channels]);
        }
        Tensor3::new(self.batch, len, self.channels, data)
    }
}

impl std::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    fn index(&self, (b, t, c): (usize, usize, usize)) -> &f64 {
        &self.data[Tensor3::index(self, b, t, c)]
    }
}

/// Non-negative-frequency half of the DFT of every `(batch, channel)` series.
///
/// Bins are stored as `[batch][channel][bin]` with `origin_length / 2 + 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumHalf {
    batch: usize,
    channels: usize,
    origin_length: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

pub fn half_bins(len: usize) -> usize {
    len / 2 + 1
}

impl SpectrumHalf {
    /// Builds a spectrum from raw bins. Fails unless each series has exactly
    /// `origin_length / 2 + 1` bins.
    pub fn new(
        batch: usize,
        channels: usize,
        origin_length: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    ) -> Result<Self> {
        if batch == 0 || channels == 0 || origin_length == 0 {
            return Err(Error::Shape("spectrum dimensions must be positive".into()));
        }
        let expect = batch * channels * half_bins(origin_length);
        if re.len() != expect || im.len() != expect {
            return Err(Error::Shape(format!(
                "origin length {origin_length} needs {} bins per series ({expect} total), got re {} / im {}",
                half_bins(origin_length),
                re.len(),
                im.len()
            )));
        }
        Ok(SpectrumHalf {
            batch,
            channels,
            origin_length,
            re,
            im,
        })
    }

    pub fn origin_length(&self) -> usize {
        self.origin_length
    }

    pub fn bins(&self) -> usize {
        half_bins(self.origin_length)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn offset(&self, b: usize, c: usize) -> usize {
        (b * self.channels + c) * self.bins()
    }

    pub fn bin(&self, b: usize, c: usize, k: usize) -> (f64, f64) {
        let i = self.offset(b, c) + k;
        (self.re[i], self.im[i])
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized complex DFT of `buf` in place (`inverse` flips the exponent sign).
fn fft_in_place(buf: &mut [Complex<f64>], inverse: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let plan = if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        };
        plan.process(buf);
    });
}

/// Half spectrum of a single real series, `X_k = sum_t x_t e^{-2 pi i k t / T}`.
pub fn rfft(series: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_in_place(&mut buf, false);
    buf.truncate(half_bins(series.len()));
    buf
}

/// Inverse of [`rfft`]: real series of length `len`, with the `1/len` factor.
/// Imaginary parts of bin 0 and (for even `len`) the Nyquist bin are ignored.
pub fn irfft(half: &[Complex<f64>], len: usize) -> Vec<f64> {
    debug_assert_eq!(half.len(), half_bins(len));
    let mut full = vec![Complex::new(0.0, 0.0); len];
    for k in 0..len {
        full[k] = if k < half.len() {
            half[k]
        } else {
            half[len - k].conj()
        };
    }
    full[0].im = 0.0;
    if len % 2 == 0 {
        full[len / 2].im = 0.0;
    }
    fft_in_place(&mut full, true);
    let scale = 1.0 / len as f64;
    full.iter().map(|z| z.re * scale).collect()
}

pub fn forward_transform(x: &Tensor3) -> SpectrumHalf {
    let (batch, len, channels) = x.shape();
    let bins = half_bins(len);
    let mut re = Vec::with_capacity(batch * channels * bins);
    let mut im = Vec::with_capacity(batch * channels * bins);
    for b in 0..batch {
        for c in 0..channels {
            for z in rfft(&x.series(b, c)) {
                re.push(z.re);
                im.push(z.im);
            }
        }
    }
    SpectrumHalf {
        batch,
        channels,
        origin_length: len,
        re,
        im,
    }
}

pub fn inverse_transform(s: &SpectrumHalf) -> Result<Tensor3> {
    let len = s.origin_length;
    let bins = s.bins();
    if s.re.len() != s.batch * s.channels * bins || s.im.len() != s.re.len() {
        return Err(Error::Shape(format!(
            "origin length {len} inconsistent with {} stored bins",
            s.re.len()
        )));
    }
    let mut out = Tensor3::zeros(s.batch, len, s.channels);
    let mut half = vec![Complex::new(0.0, 0.0); bins];
    for b in 0..s.batch {
        for c in 0..s.channels {
            let off = s.offset(b, c);
            for (k, z) in half.iter_mut().enumerate() {
                *z = Complex::new(s.re[off + k], s.im[off + k]);
            }
            for (t, v) in irfft(&half, len).into_iter().enumerate() {
                let i = out.index(b, t, c);
                out.data[i] = v;
            }
        }
    }
    Ok(out)
}

/// Non-overlapping mean pooling along time with stride `factor`. A trailing
/// incomplete window is dropped.
pub fn avg_pool_downsample(x: &Tensor3, factor: usize) -> Result<Tensor3> {
    if factor == 0 {
        return Err(Error::InvalidArgument("pooling factor must be positive".into()));
    }
    let (batch, len, channels) = x.shape();
    let out_len = len / factor;
    if out_len == 0 {
        return Err(Error::Shape(format!(
            "pooling factor {factor} exceeds series length {len}"
        )));
    }
    let inv = 1.0 / factor as f64;
    Ok(Tensor3::from_fn(batch, out_len, channels, |b, t, c| {
        (0..factor).map(|j| x.get(b, t * factor + j, c)).sum::<f64>() * inv
    }))
}

/// Which tensor axis an affine map acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Temporal,
    Channel,
}

/// Row-major `rows x cols` matrix; as an affine weight, `rows` is the input
/// width and `cols` the output width.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix data length {} does not equal {rows}*{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// `y = x W + b` along `axis`; other axes are broadcast.
pub fn affine_apply(x: &Tensor3, weight: &Matrix, bias: &[f64], axis: Axis) -> Result<Tensor3> {
    affine_raw(x, &weight.data, weight.rows, weight.cols, bias, axis)
}

pub(crate) fn affine_raw(
    x: &Tensor3,
    weight: &[f64],
    d_in: usize,
    d_out: usize,
    bias: &[f64],
    axis: Axis,
) -> Result<Tensor3> {
    let (batch, len, channels) = x.shape();
    let axis_len = match axis {
        Axis::Temporal => len,
        Axis::Channel => channels,
    };
    if axis_len != d_in {
        return Err(Error::Shape(format!(
            "{axis:?} axis has length {axis_len} but the weight expects {d_in} inputs"
        )));
    }
    if weight.len() != d_in * d_out || bias.len() != d_out {
        return Err(Error::Shape(format!(
            "weight {} / bias {} inconsistent with {d_in} -> {d_out}",
            weight.len(),
            bias.len()
        )));
    }
    match axis {
        Axis::Temporal => {
            let mut out = Tensor3::zeros(batch, d_out, channels);
            for b in 0..batch {
                for o in 0..d_out {
                    let dst = out.index(b, o, 0);
                    out.data[dst..dst + channels].fill(bias[o]);
                }
                for t in 0..d_in {
                    let src = x.index(b, t, 0);
                    let row = &x.data[src..src + channels];
                    for o in 0..d_out {
                        let w = weight[t * d_out + o];
                        let dst = out.index(b, o, 0);
                        for (y, &v) in out.data[dst..dst + channels].iter_mut().zip(row) {
                            *y += v * w;
                        }
                    }
                }
            }
            Ok(out)
        }
        Axis::Channel => {
            let mut out = Tensor3::zeros(batch, len, d_out);
            for b in 0..batch {
                for t in 0..len {
                    let src = x.index(b, t, 0);
                    let dst = out.index(b, t, 0);
                    for o in 0..d_out {
                        let mut acc = bias[o];
                        for c in 0..d_in {
                            acc += x.data[src + c] * weight[c * d_out + o];
                        }
                        out.data[dst + o] = acc;
                    }
                }
            }
            Ok(out)
        }
    }
}
