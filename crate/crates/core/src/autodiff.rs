//! Reverse-mode differentiation over a recorded tape of tensor operations,
//! the named parameter store it differentiates into, and the Adam optimizer.
//!
//! A forward pass records every intermediate [`Tensor3`] on a [`Tape`].
//! Parameters live in a [`ParamStore`] and are referenced by [`ParamId`];
//! [`Tape::backward`] walks the tape in reverse and accumulates
//! `d loss / d param` into each parameter's `grad`.

use std::collections::HashMap;

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::numerics::{affine_raw, half_bins, irfft, rfft, Axis, Tensor3};

/// A trainable array with its gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Insertion-ordered set of named parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: Vec<usize>, value: Vec<f64>) -> Result<ParamId> {
        let numel: usize = shape.iter().product();
        if numel != value.len() {
            return Err(Error::Shape(format!(
                "param {name}: shape {shape:?} holds {numel} values, got {}",
                value.len()
            )));
        }
        if self.by_name.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate param name {name}")));
        }
        let id = self.params.len();
        self.by_name.insert(name.to_string(), id);
        self.params.push(Param {
            name: name.to_string(),
            grad: vec![0.0; value.len()],
            shape,
            value,
        });
        Ok(ParamId(id))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn numel(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Which side of the sigmoid frequency mask a spectral filter keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// `sigmoid(-(f - cutoff) * steepness)`
    Low,
    /// `sigmoid((f - cutoff) * steepness)`
    High,
}

enum Op {
    Input,
    Affine {
        x: Var,
        weight: ParamId,
        bias: ParamId,
        axis: Axis,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Relu(Var),
    SpectralFilter {
        x: Var,
        cutoff: ParamId,
        steepness: ParamId,
        band: Band,
        // per (batch, channel) half spectrum of x, and per (channel, bin) mask
        spectrum: Vec<Complex<f64>>,
        mask: Vec<f64>,
    },
    MovingAverage {
        x: Var,
        kernel: usize,
    },
    AvgPool {
        x: Var,
        factor: usize,
    },
    LaggedDiff(Var),
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    MeanSquaredError {
        pred: Var,
        target: Tensor3,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Affine { .. } => "affine",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Sigmoid(_) => "sigmoid",
            Op::Relu(_) => "relu",
            Op::SpectralFilter { .. } => "spectral_filter",
            Op::MovingAverage { .. } => "moving_average",
            Op::AvgPool { .. } => "avg_pool",
            Op::LaggedDiff(_) => "lagged_difference",
            Op::Concat(_) => "concat",
            Op::Slice { .. } => "slice",
            Op::MeanSquaredError { .. } => "mse",
        }
    }
}

struct Node {
    value: Tensor3,
    op: Op,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Frequency-mask value for normalized frequency `f`.
pub fn filter_mask(f: f64, cutoff: f64, steepness: f64, band: Band) -> f64 {
    match band {
        Band::Low => sigmoid(-(f - cutoff) * steepness),
        Band::High => sigmoid((f - cutoff) * steepness),
    }
}

/// Applies `irfft(mask * rfft(series))` for a single series.
pub(crate) fn apply_mask(half: &[Complex<f64>], mask: &[f64], len: usize) -> Vec<f64> {
    let filtered: Vec<Complex<f64>> = half.iter().zip(mask).map(|(z, &m)| z * m).collect();
    irfft(&filtered, len)
}

pub(crate) fn moving_average(x: &Tensor3, kernel: usize) -> Tensor3 {
    let (batch, len, channels) = x.shape();
    let half = (kernel / 2) as isize;
    let inv = 1.0 / kernel as f64;
    Tensor3::from_fn(batch, len, channels, |b, t, c| {
        (-half..=half)
            .map(|j| x.get(b, (t as isize + j).clamp(0, len as isize - 1) as usize, c))
            .sum::<f64>()
            * inv
    })
}

pub(crate) fn lagged_difference(x: &Tensor3) -> Tensor3 {
    let (batch, len, channels) = x.shape();
    Tensor3::from_fn(batch, len, channels, |b, t, c| {
        if t == 0 {
            0.0
        } else {
            x.get(b, t, c) - x.get(b, t - 1, c)
        }
    })
}

/// Recorded forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor3 {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor3, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant input; no gradient is reported for it.
    pub fn input(&mut self, x: Tensor3) -> Var {
        self.push(x, Op::Input)
    }

    pub fn affine(
        &mut self,
        store: &ParamStore,
        x: Var,
        weight: ParamId,
        bias: ParamId,
        axis: Axis,
    ) -> Result<Var> {
        let w = store.get(weight);
        if w.shape.len() != 2 {
            return Err(Error::Shape(format!("{} is not a matrix", w.name)));
        }
        let y = affine_raw(
            self.value(x),
            &w.value,
            w.shape[0],
            w.shape[1],
            &store.get(bias).value,
            axis,
        )
        .map_err(|e| Error::Shape(format!("{}: {e}", w.name)))?;
        Ok(self.push(
            y,
            Op::Affine {
                x,
                weight,
                bias,
                axis,
            },
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_with(self.value(b), |p, q| p + q)?;
        Ok(self.push(y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_with(self.value(b), |p, q| p - q)?;
        Ok(self.push(y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_with(self.value(b), |p, q| p * q)?;
        Ok(self.push(y, Op::Mul(a, b)))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let y = self.value(x).map(sigmoid);
        self.push(y, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| v.max(0.0));
        self.push(y, Op::Relu(x))
    }

    /// Frequency-domain sigmoid filter with per-channel `cutoff` and
    /// `steepness`, evaluated on the grid `f_k = k / T`.
    pub fn spectral_filter(
        &mut self,
        store: &ParamStore,
        x: Var,
        cutoff: ParamId,
        steepness: ParamId,
        band: Band,
    ) -> Result<Var> {
        let xv = self.value(x);
        let (batch, len, channels) = xv.shape();
        let fc = &store.get(cutoff).value;
        let st = &store.get(steepness).value;
        if fc.len() != channels || st.len() != channels {
            return Err(Error::Shape(format!(
                "filter bank has {} cutoffs / {} steepnesses for {channels} channels",
                fc.len(),
                st.len()
            )));
        }
        let bins = half_bins(len);
        let mut mask = Vec::with_capacity(channels * bins);
        for c in 0..channels {
            for k in 0..bins {
                mask.push(filter_mask(k as f64 / len as f64, fc[c], st[c], band));
            }
        }
        let mut spectrum = Vec::with_capacity(batch * channels * bins);
        let mut out = Tensor3::zeros(batch, len, channels);
        for b in 0..batch {
            for c in 0..channels {
                let half = rfft(&xv.series(b, c));
                let y = apply_mask(&half, &mask[c * bins..(c + 1) * bins], len);
                for (t, v) in y.into_iter().enumerate() {
                    let i = out.index(b, t, c);
                    out.data_mut()[i] = v;
                }
                spectrum.extend(half);
            }
        }
        Ok(self.push(
            out,
            Op::SpectralFilter {
                x,
                cutoff,
                steepness,
                band,
                spectrum,
                mask,
            },
        ))
    }

    /// Centered moving average with edge replication; `kernel` must be odd.
    pub fn moving_average(&mut self, x: Var, kernel: usize) -> Result<Var> {
        if kernel == 0 || kernel.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "moving-average kernel must be odd and positive, got {kernel}"
            )));
        }
        let y = moving_average(self.value(x), kernel);
        Ok(self.push(y, Op::MovingAverage { x, kernel }))
    }

    pub fn avg_pool(&mut self, x: Var, factor: usize) -> Result<Var> {
        let y = crate::numerics::avg_pool_downsample(self.value(x), factor)?;
        Ok(self.push(y, Op::AvgPool { x, factor }))
    }

    pub fn lagged_difference(&mut self, x: Var) -> Var {
        let y = lagged_difference(self.value(x));
        self.push(y, Op::LaggedDiff(x))
    }

    pub fn concat_time(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor3> = parts.iter().map(|&v| self.value(v)).collect();
        let y = Tensor3::concat_time(&values)?;
        Ok(self.push(y, Op::Concat(parts.to_vec())))
    }

    pub fn slice_time(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let y = self.value(x).slice_time(start, len)?;
        Ok(self.push(y, Op::Slice { x, start }))
    }

    /// Mean squared error against a constant target; a `(1, 1, 1)` scalar.
    pub fn mse(&mut self, pred: Var, target: &Tensor3) -> Result<Var> {
        let p = self.value(pred);
        p.require_same_shape(target)?;
        let n = p.data().len() as f64;
        let loss = p
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        let y = Tensor3::new(1, 1, 1, vec![loss])?;
        Ok(self.push(
            y,
            Op::MeanSquaredError {
                pred,
                target: target.clone(),
            },
        ))
    }

    fn first_non_finite(&self) -> Option<(usize, &'static str)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| !n.value.is_finite())
            .map(|(i, n)| (i, n.op.name()))
    }

    /// Accumulates `d loss / d param` into `store` for every parameter the
    /// loss depends on. `loss` must be a finite `(1, 1, 1)` value.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1, 1) {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        if !lv.is_finite() {
            let (i, name) = self.first_non_finite().unwrap_or((loss.0, "loss"));
            return Err(Error::NonFinite(format!(
                "loss is {}; first non-finite intermediate is node {i} ({name})",
                lv.data()[0]
            )));
        }

        let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Affine {
                    x,
                    weight,
                    bias,
                    axis,
                } => {
                    let xv = self.value(*x);
                    let (gx, gw, gb) = affine_backward(xv, &store.get(*weight).value, &node.value, &g, *axis);
                    add_into(&mut store.get_mut(*weight).grad, &gw);
                    add_into(&mut store.get_mut(*bias).grad, &gb);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.iter().map(|v| -v).collect());
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    accumulate(&mut grads, *a, g.iter().zip(bv).map(|(g, b)| g * b).collect());
                    accumulate(&mut grads, *b, g.iter().zip(av).map(|(g, a)| g * a).collect());
                }
                Op::Sigmoid(x) => {
                    let gx = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(g, y)| g * y * (1.0 - y))
                        .collect();
                    accumulate(&mut grads, *x, gx);
                }
                Op::Relu(x) => {
                    let gx = g
                        .iter()
                        .zip(self.value(*x).data())
                        .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, gx);
                }
                Op::SpectralFilter {
                    x,
                    cutoff,
                    steepness,
                    band,
                    spectrum,
                    mask,
                } => {
                    let (gx, gfc, gs) = spectral_backward(
                        &node.value,
                        &g,
                        *band,
                        spectrum,
                        mask,
                        &store.get(*cutoff).value,
                        &store.get(*steepness).value,
                    );
                    add_into(&mut store.get_mut(*cutoff).grad, &gfc);
                    add_into(&mut store.get_mut(*steepness).grad, &gs);
                    accumulate(&mut grads, *x, gx);
                }
                Op::MovingAverage { x, kernel } => {
                    let (batch, len, channels) = node.value.shape();
                    let half = (*kernel / 2) as isize;
                    let inv = 1.0 / *kernel as f64;
                    let mut gx = vec![0.0; g.len()];
                    for b in 0..batch {
                        for t in 0..len {
                            for j in -half..=half {
                                let src = (t as isize + j).clamp(0, len as isize - 1) as usize;
                                for c in 0..channels {
                                    gx[node.value.index(b, src, c)] +=
                                        g[node.value.index(b, t, c)] * inv;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::AvgPool { x, factor } => {
                    let xv = self.value(*x);
                    let (batch, len, channels) = node.value.shape();
                    let inv = 1.0 / *factor as f64;
                    let mut gx = vec![0.0; xv.data().len()];
                    for b in 0..batch {
                        for t in 0..len {
                            for j in 0..*factor {
                                for c in 0..channels {
                                    gx[xv.index(b, t * factor + j, c)] +=
                                        g[node.value.index(b, t, c)] * inv;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::LaggedDiff(x) => {
                    let (batch, len, channels) = node.value.shape();
                    let mut gx = vec![0.0; g.len()];
                    for b in 0..batch {
                        for t in 1..len {
                            for c in 0..channels {
                                let gi = g[node.value.index(b, t, c)];
                                gx[node.value.index(b, t, c)] += gi;
                                gx[node.value.index(b, t - 1, c)] -= gi;
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Concat(parts) => {
                    let (batch, _, channels) = node.value.shape();
                    let mut offset = 0;
                    for &p in parts {
                        let pv = self.value(p);
                        let plen = pv.len();
                        let mut gp = Vec::with_capacity(pv.data().len());
                        for b in 0..batch {
                            let from = node.value.index(b, offset, 0);
                            gp.extend_from_slice(&g[from..from + plen * channels]);
                        }
                        accumulate(&mut grads, p, gp);
                        offset += plen;
                    }
                }
                Op::Slice { x, start } => {
                    let xv = self.value(*x);
                    let (batch, len, channels) = node.value.shape();
                    let mut gx = vec![0.0; xv.data().len()];
                    for b in 0..batch {
                        let to = xv.index(b, *start, 0);
                        let from = node.value.index(b, 0, 0);
                        gx[to..to + len * channels].copy_from_slice(&g[from..from + len * channels]);
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::MeanSquaredError { pred, target } => {
                    let p = self.value(*pred).data();
                    let scale = 2.0 * g[0] / p.len() as f64;
                    let gp = p
                        .iter()
                        .zip(target.data())
                        .map(|(a, b)| scale * (a - b))
                        .collect();
                    accumulate(&mut grads, *pred, gp);
                }
            }
        }
        Ok(())
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut grads[v.0] {
        Some(existing) => add_into(existing, &g),
        slot @ None => *slot = Some(g),
    }
}

fn affine_backward(
    x: &Tensor3,
    weight: &[f64],
    y: &Tensor3,
    g: &[f64],
    axis: Axis,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (batch, len, channels) = x.shape();
    let xd = x.data();
    let mut gx = vec![0.0; xd.len()];
    let mut gw = vec![0.0; weight.len()];
    match axis {
        Axis::Temporal => {
            let d_out = y.len();
            let mut gb = vec![0.0; d_out];
            for b in 0..batch {
                for o in 0..d_out {
                    let gy = &g[y.index(b, o, 0)..y.index(b, o, 0) + channels];
                    gb[o] += gy.iter().sum::<f64>();
                    for t in 0..len {
                        let xi = x.index(b, t, 0);
                        let xrow = &xd[xi..xi + channels];
                        let w = weight[t * d_out + o];
                        let mut dot = 0.0;
                        for c in 0..channels {
                            dot += xrow[c] * gy[c];
                            gx[xi + c] += w * gy[c];
                        }
                        gw[t * d_out + o] += dot;
                    }
                }
            }
            (gx, gw, gb)
        }
        Axis::Channel => {
            let d_out = y.channels();
            let mut gb = vec![0.0; d_out];
            for b in 0..batch {
                for t in 0..len {
                    let xi = x.index(b, t, 0);
                    let yi = y.index(b, t, 0);
                    for o in 0..d_out {
                        let gy = g[yi + o];
                        gb[o] += gy;
                        for c in 0..channels {
                            gw[c * d_out + o] += xd[xi + c] * gy;
                            gx[xi + c] += weight[c * d_out + o] * gy;
                        }
                    }
                }
            }
            (gx, gw, gb)
        }
    }
}

/// Gradients of `y = irfft(mask * rfft(x))` with respect to `x`, cutoff and
/// steepness.
///
/// The mask is real and symmetric in frequency, so the filter is a symmetric
/// linear operator on `x` and its adjoint is the same filter. For half bin
/// `k` the mask derivative is `w_k / T * Re(X_k * conj(G_k))`, with `w_k = 1`
/// at DC and Nyquist and 2 elsewhere, where `G = rfft(grad_y)`.
fn spectral_backward(
    y: &Tensor3,
    g: &[f64],
    band: Band,
    spectrum: &[Complex<f64>],
    mask: &[f64],
    cutoff: &[f64],
    steepness: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (batch, len, channels) = y.shape();
    let bins = half_bins(len);
    let mut gx = vec![0.0; g.len()];
    let mut gfc = vec![0.0; channels];
    let mut gs = vec![0.0; channels];
    let mut gseries = vec![0.0; len];
    for b in 0..batch {
        for c in 0..channels {
            for (t, v) in gseries.iter_mut().enumerate() {
                *v = g[y.index(b, t, c)];
            }
            let gh = rfft(&gseries);
            let m = &mask[c * bins..(c + 1) * bins];
            for (t, v) in apply_mask(&gh, m, len).into_iter().enumerate() {
                gx[y.index(b, t, c)] = v;
            }
            let xh = &spectrum[(b * channels + c) * bins..(b * channels + c + 1) * bins];
            for k in 0..bins {
                let weight = if k == 0 || (len % 2 == 0 && k == len / 2) {
                    1.0
                } else {
                    2.0
                };
                let dmask = weight / len as f64 * (xh[k] * gh[k].conj()).re;
                // mask = sigmoid(z) with z = (cutoff - f) * s for Low and
                // (f - cutoff) * s for High; dm/dz = m (1 - m).
                let f = k as f64 / len as f64;
                let dz = dmask * m[k] * (1.0 - m[k]);
                let sign = match band {
                    Band::Low => 1.0,
                    Band::High => -1.0,
                };
                gfc[c] += dz * sign * steepness[c];
                gs[c] += dz * sign * (cutoff[c] - f);
            }
        }
    }
    (gx, gfc, gs)
}

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Coupled L2 penalty added to the gradient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First and second moment estimates for every parameter in a store.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        AdamState {
            config,
            m: store.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: store.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of every parameter from its `grad`.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            weight_decay,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.value.len() {
                let g = p.grad[i] + weight_decay * p.value[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p.value[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}
