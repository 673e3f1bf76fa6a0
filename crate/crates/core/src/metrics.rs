//! Point-forecast error metrics: MSE and MAE, plus the M4 competition set
//! (sMAPE on the 0-200 scale, MAPE on 0-100, MASE and OWA).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::Tensor3;

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "prediction has {} values, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::MetricUndefined("empty input".into()));
    }
    Ok(())
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(s / pred.len() as f64)
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(s / pred.len() as f64)
}

/// `200/n * sum |p - t| / (|p| + |t|)`; terms with a zero denominator count as 0.
pub fn smape(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let s: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let d = p.abs() + t.abs();
            if d == 0.0 {
                0.0
            } else {
                (p - t).abs() / d
            }
        })
        .sum();
    Ok(200.0 * s / pred.len() as f64)
}

/// Truth entries with `|t| < MAPE_ZERO` are excluded from the MAPE mean.
pub const MAPE_ZERO: f64 = 1e-8;

pub fn mape(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let (sum, n) = pred
        .iter()
        .zip(truth)
        .filter(|(_, t)| t.abs() >= MAPE_ZERO)
        .fold((0.0, 0usize), |(s, n), (p, t)| (s + ((p - t) / t).abs(), n + 1));
    if n == 0 {
        return Err(Error::MetricUndefined("MAPE with all-zero truth".into()));
    }
    Ok(100.0 * sum / n as f64)
}

/// In-sample mean absolute error of the seasonal-naive forecast with lag `period`.
pub fn naive_scale(insample: &[f64], period: usize) -> Result<f64> {
    if period == 0 || insample.len() <= period {
        return Err(Error::InvalidArgument(format!(
            "MASE needs an in-sample length ({}) greater than the period ({period})",
            insample.len()
        )));
    }
    let s: f64 = insample
        .windows(period + 1)
        .map(|w| (w[period] - w[0]).abs())
        .sum();
    Ok(s / (insample.len() - period) as f64)
}

pub fn mase(pred: &[f64], truth: &[f64], insample: &[f64], period: usize) -> Result<f64> {
    check_pair(pred, truth)?;
    let scale = naive_scale(insample, period)?;
    if scale == 0.0 {
        return Err(Error::MetricUndefined(
            "MASE scale degenerate: in-sample seasonal-naive error is zero".into(),
        ));
    }
    Ok(mae(pred, truth)? / scale)
}

pub fn owa(smape_val: f64, mase_val: f64, naive2_smape: f64, naive2_mase: f64) -> Result<f64> {
    if !(naive2_smape > 0.0) || !(naive2_mase > 0.0) {
        return Err(Error::MetricUndefined(format!(
            "OWA reference values must be positive, got sMAPE {naive2_smape}, MASE {naive2_mase}"
        )));
    }
    Ok(0.5 * (smape_val / naive2_smape + mase_val / naive2_mase))
}

/// Repeats the last `period` in-sample values over `horizon` steps.
pub fn seasonal_naive(insample: &[f64], period: usize, horizon: usize) -> Vec<f64> {
    let n = insample.len();
    let period = period.clamp(1, n);
    (0..horizon).map(|h| insample[n - period + h % period]).collect()
}

/// One row of a report: metrics over the first `horizon` forecast steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub horizon: String,
    pub mse: f64,
    pub mae: f64,
    pub smape: f64,
    pub mape: Option<f64>,
    pub mase: Option<f64>,
    pub owa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub windows: usize,
    pub horizons: Vec<usize>,
    pub rows: Vec<MetricRow>,
    /// Mean of `rows` over horizons; the value comparable to published tables.
    pub average: MetricRow,
    /// All windows and all forecast steps pooled.
    pub pooled: MetricRow,
}

/// Forecasts for a set of windows, all shaped `(windows, steps, channels)`.
pub struct ForecastSet<'a> {
    pub pred: &'a Tensor3,
    pub truth: &'a Tensor3,
    /// Lookback windows, used for MASE scaling and the naive reference.
    pub insample: &'a Tensor3,
}

fn prefix(x: &Tensor3, steps: usize) -> Vec<f64> {
    let (w, _, c) = x.shape();
    let mut out = Vec::with_capacity(w * steps * c);
    for b in 0..w {
        let s = x.index(b, 0, 0);
        out.extend_from_slice(&x.data()[s..s + steps * c]);
    }
    out
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (s, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn mase_over_series(set: &ForecastSet, pred: &Tensor3, steps: usize, period: usize) -> Option<f64> {
    let (w, _, c) = pred.shape();
    let per_series = (0..w).flat_map(|b| (0..c).map(move |ch| (b, ch))).map(|(b, ch)| {
        let p: Vec<f64> = (0..steps).map(|t| pred.get(b, t, ch)).collect();
        let t: Vec<f64> = (0..steps).map(|t| set.truth.get(b, t, ch)).collect();
        mase(&p, &t, &set.insample.series(b, ch), period).ok()
    });
    mean_defined(per_series)
}

impl MetricsReport {
    /// Evaluates `set` at each horizon prefix. MASE is averaged over the
    /// `(window, channel)` series whose seasonal-naive scale is nonzero; OWA
    /// is relative to the seasonal-naive forecast on the same windows.
    pub fn evaluate(set: &ForecastSet, horizons: &[usize], period: usize) -> Result<Self> {
        set.pred.require_same_shape(set.truth)?;
        let (w, steps, c) = set.pred.shape();
        if set.insample.batch() != w || set.insample.channels() != c {
            return Err(Error::Shape(format!(
                "in-sample windows {:?} do not match forecasts {:?}",
                set.insample.shape(),
                set.pred.shape()
            )));
        }
        if horizons.is_empty() || horizons.iter().any(|&h| h == 0 || h > steps) {
            return Err(Error::InvalidArgument(format!(
                "horizons {horizons:?} must lie in 1..={steps}"
            )));
        }
        let naive = Tensor3::from_fn(w, steps, c, {
            let cache: Vec<Vec<f64>> = (0..w)
                .flat_map(|b| (0..c).map(move |ch| (b, ch)))
                .map(|(b, ch)| seasonal_naive(&set.insample.series(b, ch), period, steps))
                .collect();
            move |b, t, ch| cache[b * c + ch][t]
        });

        let row = |steps: usize, label: String| -> Result<MetricRow> {
            let p = prefix(set.pred, steps);
            let t = prefix(set.truth, steps);
            let s = smape(&p, &t)?;
            let m = mase_over_series(set, set.pred, steps, period);
            let naive_s = smape(&prefix(&naive, steps), &t)?;
            let naive_m = mase_over_series(set, &naive, steps, period);
            let owa_val = match (m, naive_m) {
                (Some(m), Some(nm)) => owa(s, m, naive_s, nm).ok(),
                _ => None,
            };
            Ok(MetricRow {
                horizon: label,
                mse: mse(&p, &t)?,
                mae: mae(&p, &t)?,
                smape: s,
                mape: mape(&p, &t).ok(),
                mase: m,
                owa: owa_val,
            })
        };

        let rows = horizons
            .iter()
            .map(|&h| row(h, h.to_string()))
            .collect::<Result<Vec<_>>>()?;
        let n = rows.len() as f64;
        let average = MetricRow {
            horizon: "avg".into(),
            mse: rows.iter().map(|r| r.mse).sum::<f64>() / n,
            mae: rows.iter().map(|r| r.mae).sum::<f64>() / n,
            smape: rows.iter().map(|r| r.smape).sum::<f64>() / n,
            mape: mean_defined(rows.iter().map(|r| r.mape)),
            mase: mean_defined(rows.iter().map(|r| r.mase)),
            owa: mean_defined(rows.iter().map(|r| r.owa)),
        };
        let pooled = row(steps, "pooled".into())?;
        Ok(MetricsReport {
            windows: w,
            horizons: horizons.to_vec(),
            rows,
            average,
            pooled,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One CSV row per horizon, then `avg` and `pooled`. Undefined metrics are empty cells.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["horizon", "mse", "mae", "smape", "mape", "mase", "owa"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in self.rows.iter().chain([&self.average, &self.pooled]) {
            w.write_record([
                r.horizon.clone(),
                r.mse.to_string(),
                r.mae.to_string(),
                r.smape.to_string(),
                opt(r.mape),
                opt(r.mase),
                opt(r.owa),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}
