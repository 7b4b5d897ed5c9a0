//! Trace processing: iteration averaging, rolling normalisation, zero
//! removal, IQR outlier capping, feature extraction, CDFs and correlation.
//!
//! Features are computed on raw (unnormalised) bin values after zero removal
//! and capping. Normalisation is for plotting and CDF export.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    RawBytes,
    Normalized,
}

/// Time-binned throughput for one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSeries {
    pub bin_width_ms: f64,
    pub values: Vec<f64>,
    pub unit: Unit,
}

impl ThroughputSeries {
    pub fn new(bin_width_ms: f64, values: Vec<f64>, unit: Unit) -> Result<Self> {
        if !(bin_width_ms.is_finite() && bin_width_ms > 0.0) {
            return Err(Error::Config(format!("bin width {bin_width_ms} must be positive")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Parse(format!("throughput value {v} is not a finite non-negative number")));
        }
        Ok(Self {
            bin_width_ms,
            values,
            unit,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Rolling window as a fraction of the trace length.
    pub window_fraction: f64,
    /// Values above `Q3 + iqr_multiplier * IQR` are outliers.
    pub iqr_multiplier: f64,
    /// Percentile substituted for outliers.
    pub cap_percentile: f64,
    pub min_window: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_fraction: 0.2,
            iqr_multiplier: 2.0,
            cap_percentile: 95.0,
            min_window: 2,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::Config(format!("window_fraction {} outside (0,1]", self.window_fraction)));
        }
        if !(self.iqr_multiplier > 0.0 && self.iqr_multiplier.is_finite()) {
            return Err(Error::Config(format!("iqr_multiplier {} must be positive", self.iqr_multiplier)));
        }
        if !(self.cap_percentile > 0.0 && self.cap_percentile < 100.0) {
            return Err(Error::Config(format!("cap_percentile {} outside (0,100)", self.cap_percentile)));
        }
        if self.min_window == 0 {
            return Err(Error::Config("min_window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Element-wise mean of repeated measurements, truncated to the shortest.
pub fn average_iterations(traces: &[ThroughputSeries]) -> Result<ThroughputSeries> {
    let first = traces.first().ok_or(Error::Empty("no traces to average"))?;
    if let Some(t) = traces.iter().find(|t| t.bin_width_ms != first.bin_width_ms || t.unit != first.unit) {
        return Err(Error::LengthMismatch(format!(
            "cannot average {} ms bins with {} ms bins of another unit or width",
            first.bin_width_ms, t.bin_width_ms
        )));
    }
    let len = traces.iter().map(ThroughputSeries::len).min().unwrap_or(0);
    let n = traces.len() as f64;
    let values = (0..len)
        .map(|i| traces.iter().map(|t| t.values[i]).sum::<f64>() / n)
        .collect();
    ThroughputSeries::new(first.bin_width_ms, values, first.unit)
}

fn sorted(data: &[f64]) -> Vec<f64> {
    let mut s = data.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn percentile_sorted(s: &[f64], p: f64) -> f64 {
    // Rank kept in percent units so the fraction is exact for whole percentiles:
    // 95% of 4 gives 380 -> rank 3, fraction 0.8 rather than 3.8 - 3.
    let scaled = p * (s.len() - 1) as f64;
    let lo = (scaled / 100.0).floor().min((s.len() - 1) as f64);
    let frac = (scaled - lo * 100.0) / 100.0;
    let lo = lo as usize;
    if frac == 0.0 || s[lo] == s[lo + 1] {
        return s[lo];
    }
    (1.0 - frac) * s[lo] + frac * s[lo + 1]
}

/// Linear-interpolation percentile at fractional rank `p/100 * (n-1)`.
pub fn percentile(data: &[f64], p: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("percentile of empty data"));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Config(format!("percentile {p} outside [0,100]")));
    }
    Ok(percentile_sorted(&sorted(data), p))
}

/// Strictly positive elements in their original order.
pub fn remove_zeros(data: &[f64]) -> Result<Vec<f64>> {
    let out: Vec<f64> = data.iter().copied().filter(|&x| x > 0.0).collect();
    if out.is_empty() {
        return Err(Error::DegenerateTrace("no non-zero values".into()));
    }
    Ok(out)
}

/// Replaces every value above `Q3 + k * IQR` with the cap percentile.
/// All statistics come from the input, not from partially capped data.
pub fn iqr_cap(data: &[f64], cfg: &PipelineConfig) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Empty("iqr_cap of empty data"));
    }
    let s = sorted(data);
    let q1 = percentile_sorted(&s, 25.0);
    let q3 = percentile_sorted(&s, 75.0);
    let upper = q3 + cfg.iqr_multiplier * (q3 - q1);
    let cap = percentile_sorted(&s, cfg.cap_percentile);
    Ok(data.iter().map(|&x| if x > upper { cap } else { x }).collect())
}

/// Trailing window length for a series of `n` bins.
pub fn window_len(n: usize, cfg: &PipelineConfig) -> usize {
    cfg.min_window.max((cfg.window_fraction * n as f64).round() as usize)
}

/// Min-max normalisation of each value against its trailing window.
/// A flat window maps to zero.
pub fn rolling_normalize(series: &ThroughputSeries, cfg: &PipelineConfig) -> ThroughputSeries {
    let v = &series.values;
    let w = window_len(v.len(), cfg);
    let values = (0..v.len())
        .map(|i| {
            let window = &v[(i + 1).saturating_sub(w)..=i];
            let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                ((v[i] - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    ThroughputSeries {
        bin_width_ms: series.bin_width_ms,
        values,
        unit: Unit::Normalized,
    }
}

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Population standard deviation.
pub fn std_dev(data: &[f64]) -> f64 {
    let m = mean(data);
    (data.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / data.len() as f64).sqrt()
}

/// Least-squares slope of values against their index.
pub fn slope(data: &[f64]) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::Empty("slope needs at least two points"));
    }
    let x_mean = (data.len() - 1) as f64 / 2.0;
    let y_mean = mean(data);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in data.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionFeatures {
    pub mean: f64,
    pub std: f64,
    pub slope: f64,
    pub q1: f64,
    pub q3: f64,
}

impl DirectionFeatures {
    /// Features of an already cleaned direction.
    fn of(clean: &[f64]) -> Self {
        let s = sorted(clean);
        Self {
            mean: mean(clean),
            std: std_dev(clean),
            // single surviving bin has no trend
            slope: slope(clean).unwrap_or(0.0),
            q1: percentile_sorted(&s, 25.0),
            q3: percentile_sorted(&s, 75.0),
        }
    }
}

pub const FEATURE_NAMES: [&str; 10] = [
    "ul_mean", "ul_std", "ul_slope", "ul_q1", "ul_q3", "dl_mean", "dl_std", "dl_slope", "dl_q1", "dl_q3",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ul: DirectionFeatures,
    pub dl: DirectionFeatures,
    pub label: Option<String>,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; 10] {
        let (u, d) = (&self.ul, &self.dl);
        [u.mean, u.std, u.slope, u.q1, u.q3, d.mean, d.std, d.slope, d.q1, d.q3]
    }

    pub fn from_array(v: [f64; 10], label: Option<String>) -> Self {
        let dir = |o: usize| DirectionFeatures {
            mean: v[o],
            std: v[o + 1],
            slope: v[o + 2],
            q1: v[o + 3],
            q3: v[o + 4],
        };
        Self {
            ul: dir(0),
            dl: dir(5),
            label,
        }
    }
}

fn clean(values: &[f64], cfg: &PipelineConfig, which: &str) -> Result<Vec<f64>> {
    let nz = remove_zeros(values).map_err(|_| Error::DegenerateTrace(format!("{which} has no non-zero bins")))?;
    iqr_cap(&nz, cfg)
}

/// Ten-value feature vector: mean, std, slope, Q1, Q3 for each direction.
pub fn extract_features(ul: &ThroughputSeries, dl: &ThroughputSeries, cfg: &PipelineConfig) -> Result<FeatureVector> {
    let ul = DirectionFeatures::of(&clean(&ul.values, cfg, "uplink")?);
    let dl = DirectionFeatures::of(&clean(&dl.values, cfg, "downlink")?);
    Ok(FeatureVector { ul, dl, label: None })
}

/// Empirical step CDF evaluated at each distinct value.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    pub points: Vec<(f64, f64)>,
}

impl CdfCurve {
    /// CSV `value,probability`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wtr.write_record(["value", "probability"])?;
        for (v, p) in &self.points {
            wtr.write_record([v.to_string(), p.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn empirical_cdf(data: &[f64]) -> Result<CdfCurve> {
    if data.is_empty() {
        return Err(Error::Empty("cdf of empty data"));
    }
    let s = sorted(data);
    let n = s.len();
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in s.iter().enumerate() {
        if i + 1 == n || s[i + 1] != v {
            points.push((v, (i + 1) as f64 / n as f64));
        }
    }
    Ok(CdfCurve { points })
}

/// CDF of one direction after zero removal and outlier capping, optionally
/// rolling-normalised first.
pub fn series_cdf(series: &ThroughputSeries, cfg: &PipelineConfig, normalize: bool) -> Result<CdfCurve> {
    if series.is_empty() {
        return Err(Error::Empty("cdf of empty trace"));
    }
    let capped = clean(&series.values, cfg, "series")?;
    let values = if normalize {
        let s = ThroughputSeries::new(series.bin_width_ms, capped, series.unit)?;
        rolling_normalize(&s, cfg).values
    } else {
        capped
    };
    empirical_cdf(&values)
}

/// Pearson correlation coefficient.
pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two samples"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Serialize, Deserialize)]
struct FeatureRow {
    label: String,
    ul_mean: f64,
    ul_std: f64,
    ul_slope: f64,
    ul_q1: f64,
    ul_q3: f64,
    dl_mean: f64,
    dl_std: f64,
    dl_slope: f64,
    dl_q1: f64,
    dl_q3: f64,
}

/// Writes the feature dataset CSV (`label,ul_mean,...,dl_q3`).
pub fn write_features_csv<W: Write>(rows: &[FeatureVector], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    wtr.write_record(std::iter::once("label").chain(FEATURE_NAMES))?;
    for fv in rows {
        let (u, d) = (&fv.ul, &fv.dl);
        wtr.serialize(FeatureRow {
            label: fv.label.clone().unwrap_or_default(),
            ul_mean: u.mean,
            ul_std: u.std,
            ul_slope: u.slope,
            ul_q1: u.q1,
            ul_q3: u.q3,
            dl_mean: d.mean,
            dl_std: d.std,
            dl_slope: d.slope,
            dl_q1: d.q1,
            dl_q3: d.q3,
        })
        .map_err(Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_features_csv<R: Read>(r: R) -> Result<Vec<FeatureVector>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut records = rdr.records();
    match records.next() {
        Some(h) if h.as_ref().map(|h| h.iter().eq(std::iter::once("label").chain(FEATURE_NAMES))).unwrap_or(false) => {}
        _ => return Err(Error::Parse("feature CSV must start with the label,ul_mean,...,dl_q3 header".into())),
    }
    let mut out = Vec::new();
    for rec in records {
        let rec = rec?;
        let row: FeatureRow = rec.deserialize(None)?;
        let fv = FeatureVector::from_array(
            [
                row.ul_mean, row.ul_std, row.ul_slope, row.ul_q1, row.ul_q3, row.dl_mean, row.dl_std, row.dl_slope,
                row.dl_q1, row.dl_q3,
            ],
            Some(row.label),
        );
        if fv.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("non-finite feature in row {}", out.len() + 1)));
        }
        out.push(fv);
    }
    Ok(out)
}
