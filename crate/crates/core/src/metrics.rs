//! Quality metrics: array patterns, main-lobe width, peak-to-integral
//! sidelobe ratio, image entropy, and report formatting.
//!
//! Pattern levels use `20 log10` of magnitude ratios; power quantities use
//! `10 log10`.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::config::RadarConfig;
use crate::error::{Error, Result};
use crate::geometry::{steering_vector, window_for_range, wrap_angle};
use crate::imaging::SarImage;
use crate::signal::range_bin_of;
use crate::synthesis::inner;

/// Sampled array response `F(phi) = w^H a(phi; R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternTrace {
    /// Strictly increasing, radians.
    pub angles: Vec<f64>,
    pub response: Vec<Complex64>,
}

impl PatternTrace {
    pub fn new(angles: Vec<f64>, response: Vec<Complex64>) -> Result<Self> {
        if angles.len() != response.len() {
            return Err(Error::Dimension(format!(
                "{} angles for {} responses",
                angles.len(),
                response.len()
            )));
        }
        if angles.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::Metric("pattern angles must increase strictly".into()));
        }
        Ok(Self { angles, response })
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.response.iter().map(|f| f.norm()).collect()
    }

    /// Index of the largest magnitude (first on ties).
    pub fn peak_index(&self) -> Option<usize> {
        argmax(&self.magnitudes())
    }

    /// Levels in dB relative to the peak, `20 log10(|F| / max |F|)`.
    pub fn db(&self) -> Vec<f64> {
        let mags = self.magnitudes();
        let peak = mags.iter().copied().fold(0.0, f64::max);
        mags.iter().map(|m| 20.0 * (m / peak).log10()).collect()
    }
}

fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|b| b.0)
}

/// Response of window-relative weights `w` (canonical window at `range`)
/// toward each angle, optionally with a fixed error `e` added to every
/// steering vector.
pub fn array_pattern(
    cfg: &RadarConfig,
    w: &[Complex64],
    range: f64,
    angles: &[f64],
    error: Option<&[Complex64]>,
) -> Result<PatternTrace> {
    let window = window_for_range(cfg, range)?;
    if w.len() != window.len() {
        return Err(Error::Dimension(format!(
            "{} weights for a window of {}",
            w.len(),
            window.len()
        )));
    }
    if let Some(e) = error {
        if e.len() != w.len() {
            return Err(Error::Dimension(format!("error vector of {} for {} weights", e.len(), w.len())));
        }
    }
    let response = angles
        .iter()
        .map(|&phi| {
            let mut a = steering_vector(cfg, phi, range, &window)?.entries;
            if let Some(e) = error {
                a.iter_mut().zip(e).for_each(|(x, d)| *x += d);
            }
            Ok(inner(w, &a))
        })
        .collect::<Result<Vec<_>>>()?;
    PatternTrace::new(angles.to_vec(), response)
}

/// Uniform angle samples over `[pi/2 - span, pi/2 + span]` at `step`.
pub fn boresight_angles(span: f64, step: f64) -> Vec<f64> {
    let half = (span / step).floor() as i64;
    (-half..=half).map(|i| FRAC_PI_2 + i as f64 * step).collect()
}

/// Angular distance from the peak to the nearest strict local minimum of
/// `|F|` on either side.
pub fn half_mainlobe_width(trace: &PatternTrace) -> Result<f64> {
    let m = trace.magnitudes();
    let p = trace.peak_index().ok_or_else(|| Error::Metric("empty pattern".into()))?;
    if m.iter().enumerate().any(|(i, &v)| i != p && v == m[p]) {
        return Err(Error::Metric("pattern peak is not unique".into()));
    }
    let is_min = |i: usize| i > 0 && i + 1 < m.len() && m[i] < m[i - 1] && m[i] < m[i + 1];
    let left = (1..p).rev().find(|&i| is_min(i)).map(|i| trace.angles[p] - trace.angles[i]);
    let right = (p + 1..m.len()).find(|&i| is_min(i)).map(|i| trace.angles[i] - trace.angles[p]);
    match (left, right) {
        (Some(a), Some(b)) => Ok(a.min(b)),
        (Some(a), None) | (None, Some(a)) => Ok(a),
        (None, None) => Err(Error::Metric("no local minimum beside the peak".into())),
    }
}

/// Peak power over summed sidelobe power for samples `(angle, value)`,
/// with sidelobes the samples more than `mainlobe_half_width` away from
/// the peak. Zero sidelobe energy yields `+inf`.
pub fn pisr(samples: &[(f64, Complex64)], mainlobe_half_width: f64) -> Result<f64> {
    let powers: Vec<f64> = samples.iter().map(|s| s.1.norm_sqr()).collect();
    let p = argmax(&powers).ok_or_else(|| Error::Metric("no samples".into()))?;
    let peak_angle = samples[p].0;
    let mut count = 0usize;
    let mut side = 0.0;
    for ((angle, _), pw) in samples.iter().zip(&powers) {
        if wrap_angle(angle - peak_angle).abs() > mainlobe_half_width {
            count += 1;
            side += pw;
        }
    }
    if count == 0 {
        return Err(Error::Metric("no sidelobe samples outside the main lobe".into()));
    }
    if side == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(powers[p] / side)
}

/// [`pisr`] over a pattern trace.
pub fn pattern_pisr(trace: &PatternTrace, mainlobe_half_width: f64) -> Result<f64> {
    let s: Vec<(f64, Complex64)> = trace.angles.iter().copied().zip(trace.response.iter().copied()).collect();
    pisr(&s, mainlobe_half_width)
}

/// [`pisr`] along the range bin of the brightest pixel: all pixels mapping
/// to that bin form the azimuth cut.
pub fn image_pisr(img: &SarImage, cfg: &RadarConfig, mainlobe_half_width: f64) -> Result<f64> {
    let (rows, cols) = img.shape();
    let (pr, pc) = img.peak();
    let peak_bin = range_bin_of(cfg, img.grid.polar_of(pr, pc).1)?;
    let mut cut = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            if let Some((phi, r)) = img.grid.imageable(cfg, row, col) {
                if range_bin_of(cfg, r).ok() == Some(peak_bin) {
                    cut.push((phi, img.at(row, col)));
                }
            }
        }
    }
    pisr(&cut, mainlobe_half_width)
}

/// Shannon entropy `-sum d ln d` of the normalized pixel energies
/// `d = |I|^2 / sum |I|^2`.
pub fn entropy(pixels: &[Complex64]) -> Result<f64> {
    let total: f64 = pixels.iter().map(|p| p.norm_sqr()).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Metric("image has no energy".into()));
    }
    Ok(-pixels
        .iter()
        .map(|p| p.norm_sqr() / total)
        .filter(|&d| d > 0.0)
        .map(|d| d * d.ln())
        .sum::<f64>())
}

pub fn image_entropy(img: &SarImage) -> Result<f64> {
    entropy(&img.pixels)
}

/// Number of `angles` at which `|w^H (a + e)|^2 > eta |w^H (a_0 + e)|^2`,
/// with `a_0` the boresight steering vector.
pub fn grid_violations(
    cfg: &RadarConfig,
    w: &[Complex64],
    range: f64,
    angles: &[f64],
    error: Option<&[Complex64]>,
    eta: f64,
) -> Result<usize> {
    let main = array_pattern(cfg, w, range, &[FRAC_PI_2], error)?.response[0].norm_sqr();
    let trace = array_pattern(cfg, w, range, angles, error)?;
    Ok(trace.response.iter().filter(|f| f.norm_sqr() > eta * main).count())
}

/// One row of a metrics report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub metric: String,
    pub backend: String,
    pub value: f64,
    pub units: String,
}

impl MetricRecord {
    pub fn new(metric: &str, backend: &str, value: f64, units: &str) -> Self {
        Self {
            metric: metric.into(),
            backend: backend.into(),
            value,
            units: units.into(),
        }
    }
}

/// Aligned plain-text table.
pub fn format_table(records: &[MetricRecord]) -> String {
    let heads = ["metric", "backend", "value", "units"];
    let rows: Vec<[String; 4]> = records
        .iter()
        .map(|r| [r.metric.clone(), r.backend.clone(), format_value(r.value), r.units.clone()])
        .collect();
    let mut width = heads.map(str::len);
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: [&str; 4], out: &mut String| {
        let _ = writeln!(
            out,
            "{:<w0$}  {:<w1$}  {:>w2$}  {}",
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            w0 = width[0],
            w1 = width[1],
            w2 = width[2]
        );
    };
    line(heads, &mut out);
    for row in &rows {
        line([&row[0], &row[1], &row[2], &row[3]], &mut out);
    }
    out
}

/// Comma-separated report with a header row.
pub fn format_csv(records: &[MetricRecord]) -> String {
    let mut out = String::from("metric,backend,value,units\n");
    for r in records {
        let _ = writeln!(out, "{},{},{},{}", r.metric, r.backend, format_value(r.value), r.units);
    }
    out
}

fn format_value(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6}")
    }
}
