//! Dataset ingestion and windowing.
//!
//! Benchmark CSVs have a header row, an optional leading `date` column and
//! one numeric column per channel. Series are split chronologically into
//! train/val/test spans; val and test spans start `lookback` rows early so
//! their first window has full context, while labels never cross a span end.

use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::Tensor3;

/// Multivariate series, `values` row-major `rows x channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    pub timestamps: Option<Vec<String>>,
    pub channel_names: Vec<String>,
    values: Vec<f64>,
    rows: usize,
}

impl SeriesFrame {
    pub fn new(
        timestamps: Option<Vec<String>>,
        channel_names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let channels = channel_names.len();
        if channels == 0 || !values.len().is_multiple_of(channels) {
            return Err(Error::Data(format!(
                "{} values cannot fill {channels} channels",
                values.len()
            )));
        }
        let rows = values.len() / channels;
        if let Some(ts) = &timestamps {
            if ts.len() != rows {
                return Err(Error::Data(format!("{} timestamps for {rows} rows", ts.len())));
            }
        }
        Ok(SeriesFrame {
            timestamps,
            channel_names,
            values,
            rows,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, channel: usize) -> f64 {
        self.values[row * self.channels() + channel]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.channels();
        &self.values[row * c..(row + 1) * c]
    }

    /// Rows `[start, end)` as a single-batch tensor.
    pub fn to_tensor(&self, start: usize, end: usize) -> Result<Tensor3> {
        if start >= end || end > self.rows {
            return Err(Error::Shape(format!(
                "row range [{start}, {end}) invalid for {} rows",
                self.rows
            )));
        }
        let c = self.channels();
        Tensor3::new(1, end - start, c, self.values[start * c..end * c].to_vec())
    }

    fn with_values(&self, values: Vec<f64>) -> SeriesFrame {
        SeriesFrame {
            values,
            ..self.clone()
        }
    }
}

/// Reads a benchmark-layout CSV. Coordinates in errors are 1-based with the
/// header as row 1.
pub fn load_csv(path: &Path, has_date_column: bool) -> Result<SeriesFrame> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let skip = usize::from(has_date_column);
    if headers.len() <= skip {
        return Err(Error::Data(format!("{}: no value columns", path.display())));
    }
    let channel_names: Vec<String> = headers.iter().skip(skip).map(str::to_string).collect();
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        if record.len() != headers.len() {
            return Err(Error::DataCell {
                path: path.to_path_buf(),
                row,
                col: record.len().min(headers.len()) + 1,
                message: format!("expected {} columns, found {}", headers.len(), record.len()),
            });
        }
        if has_date_column {
            timestamps.push(record[0].to_string());
        }
        for (j, cell) in record.iter().enumerate().skip(skip) {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::DataCell {
                path: path.to_path_buf(),
                row,
                col: j + 1,
                message: if cell.is_empty() {
                    "missing value".to_string()
                } else {
                    format!("cannot parse {cell:?} as a number")
                },
            })?;
            if !v.is_finite() {
                return Err(Error::DataCell {
                    path: path.to_path_buf(),
                    row,
                    col: j + 1,
                    message: "non-finite value".into(),
                });
            }
            values.push(v);
        }
    }
    let frame = SeriesFrame::new(has_date_column.then_some(timestamps), channel_names, values)?;
    if frame.rows() < 2 {
        return Err(Error::Data(format!(
            "{}: need at least 2 data rows, found {}",
            path.display(),
            frame.rows()
        )));
    }
    Ok(frame)
}

/// Writes `frame` in the same layout [`load_csv`] reads. Values use the
/// shortest representation that parses back to the identical `f64`.
pub fn write_csv(frame: &SeriesFrame, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = Vec::new();
    if frame.timestamps.is_some() {
        header.push("date");
    }
    header.extend(frame.channel_names.iter().map(String::as_str));
    w.write_record(&header)?;
    for r in 0..frame.rows() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if let Some(ts) = &frame.timestamps {
            rec.push(ts[r].clone());
        }
        rec.extend(frame.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// How to carve a series into train/val/test.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitSpec {
    /// Fractions of the total row count. When they sum to one, val takes
    /// whatever rounding leaves between train and test.
    Ratios { train: f64, val: f64, test: f64 },
    /// Row counts.
    Spans { train: usize, val: usize, test: usize },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Ratios {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitSpec {
    /// 12/4/4 months of hourly rows.
    pub fn ett_hour() -> Self {
        let month = 30 * 24;
        SplitSpec::Spans {
            train: 12 * month,
            val: 4 * month,
            test: 4 * month,
        }
    }

    /// 12/4/4 months of 15-minute rows.
    pub fn ett_minute() -> Self {
        let month = 30 * 24 * 4;
        SplitSpec::Spans {
            train: 12 * month,
            val: 4 * month,
            test: 4 * month,
        }
    }

    /// Accepts `ett_hour`, `ett_minute`, `a,b,c` ratios or `spans:a,b,c`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "ett_hour" => return Ok(Self::ett_hour()),
            "ett_minute" => return Ok(Self::ett_minute()),
            _ => {}
        }
        let bad = || Error::Config(format!("cannot parse split {s:?}"));
        if let Some(rest) = s.strip_prefix("spans:") {
            let v: Vec<usize> = rest
                .split(',')
                .map(|p| p.trim().parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            let [train, val, test] = v[..] else { return Err(bad()) };
            return Ok(SplitSpec::Spans { train, val, test });
        }
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [train, val, test] = v[..] else { return Err(bad()) };
        Ok(SplitSpec::Ratios { train, val, test })
    }
}

impl std::fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitSpec::Ratios { train, val, test } => write!(f, "{train},{val},{test}"),
            SplitSpec::Spans { train, val, test } => write!(f, "spans:{train},{val},{test}"),
        }
    }
}

/// Half-open row range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// Enumerates `(lookback, horizon)` windows inside each split.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSampler {
    pub train: Span,
    pub val: Span,
    pub test: Span,
    pub lookback: usize,
    pub horizon: usize,
    pub stride: usize,
    /// Rows used to fit normalization statistics.
    pub train_rows: Span,
}

/// Number of windows a span of `len` rows yields.
pub fn window_count(len: usize, lookback: usize, horizon: usize, stride: usize) -> usize {
    if len < lookback + horizon || stride == 0 {
        0
    } else {
        (len - lookback - horizon) / stride + 1
    }
}

pub fn chronological_split(
    total_rows: usize,
    spec: &SplitSpec,
    lookback: usize,
    horizon: usize,
    stride: usize,
) -> Result<WindowSampler> {
    if stride == 0 {
        return Err(Error::Config("stride must be positive".into()));
    }
    let (n_train, n_val, n_test) = match *spec {
        SplitSpec::Ratios { train, val, test } => {
            let parts = [train, val, test];
            if parts.iter().any(|r| !(*r >= 0.0)) {
                return Err(Error::Config(format!("split ratios must be non-negative: {spec}")));
            }
            let sum: f64 = parts.iter().sum();
            if sum > 1.0 + 1e-9 {
                return Err(Error::Config(format!("split ratios sum to {sum} > 1")));
            }
            let rows = |r: f64| (r * total_rows as f64 + 1e-9).floor() as usize;
            let n_train = rows(train);
            let n_test = rows(test);
            let n_val = if (sum - 1.0).abs() <= 1e-9 {
                total_rows - n_train - n_test
            } else {
                rows(val)
            };
            (n_train, n_val, n_test)
        }
        SplitSpec::Spans { train, val, test } => (train, val, test),
    };
    if n_train + n_val + n_test > total_rows {
        return Err(Error::Data(format!(
            "split {n_train}/{n_val}/{n_test} exceeds {total_rows} rows"
        )));
    }
    if n_train < lookback {
        return Err(Error::Data(format!(
            "train span of {n_train} rows is shorter than the lookback {lookback}"
        )));
    }
    let val_end = n_train + n_val;
    let sampler = WindowSampler {
        train: Span {
            start: 0,
            end: n_train,
        },
        val: Span {
            start: n_train - lookback,
            end: val_end,
        },
        test: Span {
            start: val_end - lookback,
            end: val_end + n_test,
        },
        lookback,
        horizon,
        stride,
        train_rows: Span {
            start: 0,
            end: n_train,
        },
    };
    for split in [Split::Train, Split::Val, Split::Test] {
        if sampler.count(split) == 0 {
            return Err(Error::Data(format!(
                "{split:?} span of {} rows cannot hold one window of {} + {} steps",
                sampler.span(split).len(),
                lookback,
                horizon
            )));
        }
    }
    Ok(sampler)
}

impl WindowSampler {
    pub fn span(&self, split: Split) -> Span {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn count(&self, split: Split) -> usize {
        window_count(self.span(split).len(), self.lookback, self.horizon, self.stride)
    }

    /// First row of every window in `split`, in chronological order.
    pub fn starts(&self, split: Split) -> Vec<usize> {
        let span = self.span(split);
        (0..self.count(split))
            .map(|i| span.start + i * self.stride)
            .collect()
    }

    /// Train window starts in the order for `epoch`, a pure function of
    /// `(seed, epoch)`.
    pub fn shuffled_train_starts(&self, seed: u64, epoch: usize) -> Vec<usize> {
        let mut starts = self.starts(Split::Train);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch as u64 + 1);
        starts.shuffle(&mut rng);
        starts
    }

    /// Stacks the windows beginning at `starts` into `(inputs, labels)` of
    /// shapes `(n, lookback, C)` and `(n, horizon, C)`.
    pub fn batch(&self, frame: &SeriesFrame, starts: &[usize]) -> Result<(Tensor3, Tensor3)> {
        let parts: Vec<(Vec<f64>, Vec<f64>)> =
            starts.iter().map(|&s| self.window(frame, s)).collect::<Result<_>>()?;
        self.stack(frame, starts.len(), parts)
    }

    /// Same result as [`WindowSampler::batch`], built on the rayon pool.
    pub fn batch_parallel(&self, frame: &SeriesFrame, starts: &[usize]) -> Result<(Tensor3, Tensor3)> {
        let parts: Vec<(Vec<f64>, Vec<f64>)> = starts
            .par_iter()
            .map(|&s| self.window(frame, s))
            .collect::<Result<_>>()?;
        self.stack(frame, starts.len(), parts)
    }

    fn window(&self, frame: &SeriesFrame, start: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let c = frame.channels();
        let mid = start + self.lookback;
        let end = mid + self.horizon;
        if end > frame.rows() {
            return Err(Error::Data(format!(
                "window at row {start} needs {end} rows, frame has {}",
                frame.rows()
            )));
        }
        let v = frame.values();
        Ok((v[start * c..mid * c].to_vec(), v[mid * c..end * c].to_vec()))
    }

    fn stack(
        &self,
        frame: &SeriesFrame,
        n: usize,
        parts: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<(Tensor3, Tensor3)> {
        let c = frame.channels();
        let mut xs = Vec::with_capacity(n * self.lookback * c);
        let mut ys = Vec::with_capacity(n * self.horizon * c);
        for (x, y) in parts {
            xs.extend(x);
            ys.extend(y);
        }
        Ok((
            Tensor3::new(n, self.lookback, c, xs)?,
            Tensor3::new(n, self.horizon, c, ys)?,
        ))
    }
}

/// Per-channel standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Standard deviations below this are replaced by 1.
pub const MIN_STD: f64 = 1e-8;

impl Scaler {
    /// Population mean and standard deviation over `rows` of `frame`.
    pub fn fit(frame: &SeriesFrame, rows: Span) -> Result<Self> {
        if rows.is_empty() || rows.end > frame.rows() {
            return Err(Error::Data(format!(
                "cannot fit scaler on rows [{}, {})",
                rows.start, rows.end
            )));
        }
        let c = frame.channels();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; c];
        for r in rows.start..rows.end {
            for (m, v) in mean.iter_mut().zip(frame.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; c];
        for r in rows.start..rows.end {
            for ((s, v), m) in var.iter_mut().zip(frame.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < MIN_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Scaler { mean, std })
    }

    /// Mean 0 and std 1 for each channel.
    pub fn identity(channels: usize) -> Self {
        Scaler {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn transform(&self, frame: &SeriesFrame) -> SeriesFrame {
        let c = frame.channels();
        let values = frame
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % c]) / self.std[i % c])
            .collect();
        frame.with_values(values)
    }

    pub fn inverse_transform(&self, frame: &SeriesFrame) -> SeriesFrame {
        let c = frame.channels();
        let values = frame
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.std[i % c] + self.mean[i % c])
            .collect();
        frame.with_values(values)
    }

    /// Undoes standardization on a `(B, T, C)` tensor.
    pub fn inverse_tensor(&self, x: &Tensor3) -> Tensor3 {
        Tensor3::from_fn(x.batch(), x.len(), x.channels(), |b, t, c| {
            x.get(b, t, c) * self.std[c] + self.mean[c]
        })
    }
}

/// Parameters of the trend + sinusoid + Gaussian noise generator. Per-channel
/// lists of length 1 are broadcast to every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub length: usize,
    pub channels: usize,
    pub slopes: Vec<f64>,
    pub periods: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            length: 2000,
            channels: 3,
            slopes: vec![0.002, -0.001, 0.0],
            periods: vec![24.0, 12.0, 48.0],
            amplitudes: vec![1.0, 0.5, 2.0],
            noise: 0.0,
            seed: 7,
        }
    }
}

fn per_channel(name: &str, values: &[f64], channels: usize) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; channels]),
        n if n == channels => Ok(values.to_vec()),
        n => Err(Error::Config(format!(
            "{name} has {n} entries, expected 1 or {channels}"
        ))),
    }
}

/// `x[t, c] = slope_c * t + amp_c * sin(2 pi t / period_c) + noise`.
pub fn synth_trend_seasonal(spec: &SynthSpec) -> Result<SeriesFrame> {
    let c = spec.channels;
    if c == 0 || spec.length < 2 {
        return Err(Error::Config("synthetic series needs >= 1 channel and >= 2 rows".into()));
    }
    let slopes = per_channel("synth_slopes", &spec.slopes, c)?;
    let periods = per_channel("synth_periods", &spec.periods, c)?;
    let amps = per_channel("synth_amplitudes", &spec.amplitudes, c)?;
    if periods.iter().any(|&p| !(p >= 2.0)) {
        return Err(Error::Config("seasonal periods must be at least 2".into()));
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::Config("noise sigma must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let mut values = Vec::with_capacity(spec.length * c);
    for t in 0..spec.length {
        let tf = t as f64;
        for ch in 0..c {
            let eps = if spec.noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            values.push(
                slopes[ch] * tf
                    + amps[ch] * (2.0 * std::f64::consts::PI * tf / periods[ch]).sin()
                    + eps,
            );
        }
    }
    let origin = NaiveDate::from_ymd_opt(2020, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date");
    let timestamps = (0..spec.length)
        .map(|t| (origin + Duration::hours(t as i64)).format("%Y-%m-%d %H:%M:%S").to_string())
        .collect();
    let names = (0..c).map(|i| format!("ch{i}")).collect();
    SeriesFrame::new(Some(timestamps), names, values)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_small_csv() {
        let f = write_tmp("date,a,b\n2020-01-01,1.0,2\n2020-01-02,3,4.5\n2020-01-03,-1,0\n");
        let frame = load_csv(f.path(), true).unwrap();
        assert_eq!(frame.rows(), 3);
        assert_eq!(frame.channels(), 2);
        assert_eq!(frame.channel_names, vec!["a", "b"]);
        assert_eq!(frame.get(1, 1), 4.5);
        assert_eq!(frame.timestamps.as_ref().unwrap()[2], "2020-01-03");
    }

    #[test]
    fn blank_cell_reports_coordinates() {
        let f = write_tmp("date,a,b\n2020-01-01,1.0,2\n2020-01-02,,4.5\n");
        let err = load_csv(f.path(), true).unwrap_err();
        match err {
            Error::DataCell { row, col, .. } => assert_eq!((row, col), (3, 2)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn ragged_and_garbage_rejected() {
        let f = write_tmp("a,b\n1,2\n3\n");
        assert!(matches!(load_csv(f.path(), false).unwrap_err(), Error::DataCell { row: 3, .. }));
        let f = write_tmp("a,b\n1,2\n3,x\n");
        assert!(matches!(
            load_csv(f.path(), false).unwrap_err(),
            Error::DataCell { row: 3, col: 2, .. }
        ));
        let f = write_tmp("a,b\n1,2\n");
        assert!(load_csv(f.path(), false).is_err());
    }

    #[test]
    fn ratio_split_window_counts() {
        let s = chronological_split(100, &SplitSpec::default(), 10, 5, 1).unwrap();
        assert_eq!(s.train, Span { start: 0, end: 70 });
        assert_eq!(s.count(Split::Train), 56);
        assert_eq!(s.val, Span { start: 60, end: 80 });
        assert_eq!(s.test, Span { start: 70, end: 100 });
        assert_eq!(s.count(Split::Test), 16);
        assert_eq!(s.starts(Split::Test), s.starts(Split::Test));
    }

    #[test]
    fn bad_splits_rejected() {
        let over = SplitSpec::Ratios {
            train: 0.7,
            val: 0.2,
            test: 0.2,
        };
        assert!(chronological_split(100, &over, 10, 5, 1).is_err());
        // val span of 10 rows + 10 context cannot hold 10 + 15
        assert!(chronological_split(100, &SplitSpec::default(), 10, 15, 1).is_err());
        assert!(chronological_split(100, &SplitSpec::default(), 80, 5, 1).is_err());
    }

    #[test]
    fn split_spec_parsing() {
        assert_eq!(SplitSpec::parse("0.6, 0.2, 0.2").unwrap(), SplitSpec::Ratios { train: 0.6, val: 0.2, test: 0.2 });
        assert_eq!(SplitSpec::parse("ett_hour").unwrap(), SplitSpec::Spans { train: 8640, val: 2880, test: 2880 });
        let s = SplitSpec::parse("spans:10,5,5").unwrap();
        assert_eq!(SplitSpec::parse(&s.to_string()).unwrap(), s);
        assert!(SplitSpec::parse("0.5,0.5").is_err());
    }

    #[test]
    fn windows_never_cross_span_end() {
        let s = chronological_split(257, &SplitSpec::default(), 12, 7, 3).unwrap();
        for split in [Split::Train, Split::Val, Split::Test] {
            let span = s.span(split);
            for st in s.starts(split) {
                assert!(st >= span.start && st + 12 + 7 <= span.end);
            }
        }
    }

    #[test]
    fn shuffled_order_depends_only_on_seed_and_epoch() {
        let s = chronological_split(300, &SplitSpec::default(), 12, 4, 1).unwrap();
        let a = s.shuffled_train_starts(5, 0);
        assert_eq!(a, s.shuffled_train_starts(5, 0));
        assert_ne!(a, s.shuffled_train_starts(5, 1));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, s.starts(Split::Train));
    }

    #[test]
    fn parallel_batch_matches_serial() {
        let frame = synth_trend_seasonal(&SynthSpec::default()).unwrap();
        let s = chronological_split(frame.rows(), &SplitSpec::default(), 24, 6, 1).unwrap();
        let starts = s.shuffled_train_starts(1, 3)[..40].to_vec();
        assert_eq!(s.batch(&frame, &starts).unwrap(), s.batch_parallel(&frame, &starts).unwrap());
    }

    #[test]
    fn scaler_handles_constant_channel_and_roundtrips() {
        let frame = SeriesFrame::new(None, vec!["a".into(), "b".into()], vec![1.0, 5.0, 3.0, 5.0, 8.0, 5.0]).unwrap();
        let sc = Scaler::fit(&frame, Span { start: 0, end: 3 }).unwrap();
        assert_eq!(sc.std[1], 1.0);
        let back = sc.inverse_transform(&sc.transform(&frame));
        for (a, b) in back.values().iter().zip(frame.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn synth_is_seeded_and_validated() {
        let spec = SynthSpec {
            noise: 0.3,
            ..SynthSpec::default()
        };
        assert_eq!(synth_trend_seasonal(&spec).unwrap(), synth_trend_seasonal(&spec).unwrap());
        let other = SynthSpec { seed: 8, ..spec.clone() };
        assert_ne!(synth_trend_seasonal(&spec).unwrap(), synth_trend_seasonal(&other).unwrap());
        let bad = SynthSpec { periods: vec![1.0], ..spec };
        assert!(synth_trend_seasonal(&bad).is_err());
    }

    #[test]
    fn noiseless_synth_is_exact_formula() {
        let spec = SynthSpec {
            length: 50,
            channels: 1,
            slopes: vec![0.5],
            periods: vec![10.0],
            amplitudes: vec![2.0],
            noise: 0.0,
            seed: 0,
        };
        let f = synth_trend_seasonal(&spec).unwrap();
        for t in 0..50 {
            let want = 0.5 * t as f64 + 2.0 * (2.0 * std::f64::consts::PI * t as f64 / 10.0).sin();
            assert_eq!(f.get(t, 0), want);
        }
        assert_eq!(f.timestamps.as_ref().unwrap()[1], "2020-01-01 01:00:00");
    }
}
