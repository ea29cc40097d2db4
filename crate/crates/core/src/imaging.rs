//! Image formation: back-projection, sparse-array filtering and their
//! range-FFT accelerated variants, plus a random sparse baseline.
//!
//! Every pixel is evaluated independently, so a parallel run reproduces a
//! serial one bit for bit.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::index::sample;
use rayon::prelude::*;

use crate::config::RadarConfig;
use crate::error::{Error, Result};
use crate::geometry::{range_angle_from, window_at, window_for_range};
use crate::rng::substream;
use crate::signal::{fractional_bin, range_bin_of, DataKind, DataMatrix};
use crate::synthesis::{WeightEntry, WeightTable};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Output pixel layout; the origin is the rotation center.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageGrid {
    /// Rows are ranges, columns are azimuths.
    Polar { azimuths: Vec<f64>, ranges: Vec<f64> },
    /// Rows run from `+y` down to `-y`, columns from `-x` to `+x`; both axes
    /// are centered on the origin.
    Cartesian { extent_x: f64, extent_y: f64, step: f64 },
}

impl ImageGrid {
    pub fn polar(azimuths: Vec<f64>, ranges: Vec<f64>) -> Self {
        Self::Polar { azimuths, ranges }
    }

    pub fn cartesian(extent_x: f64, extent_y: f64, step: f64) -> Self {
        Self::Cartesian {
            extent_x,
            extent_y,
            step,
        }
    }

    /// Square grid of side `2 R_max` at the given step.
    pub fn full_scene(cfg: &RadarConfig, step: f64) -> Self {
        let side = 2.0 * cfg.unambiguous_range();
        Self::cartesian(side, side, step)
    }

    /// Polar grid over range-bin centers and every phase-center azimuth.
    pub fn polar_bins(cfg: &RadarConfig, bins: &[usize]) -> Self {
        let step = cfg.angular_step();
        Self::Polar {
            azimuths: (0..cfg.pulses).map(|n| n as f64 * step).collect(),
            ranges: bins.iter().map(|&b| cfg.bin_range(b)).collect(),
        }
    }

    pub fn validate(&self, cfg: &RadarConfig) -> Result<()> {
        match self {
            Self::Polar { azimuths, ranges } => {
                if azimuths.is_empty() || ranges.is_empty() {
                    return Err(Error::InvalidConfig("polar grid needs azimuths and ranges".into()));
                }
                let r_max = cfg.unambiguous_range();
                if let Some(&r) = ranges.iter().find(|&&r| !(r > cfg.radius && r < r_max)) {
                    return Err(Error::BeyondUnambiguousRange { range: r, max: r_max });
                }
                if azimuths.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidConfig("non-finite azimuth".into()));
                }
            }
            Self::Cartesian {
                extent_x,
                extent_y,
                step,
            } => {
                if !(*step > 0.0 && *extent_x > 0.0 && *extent_y > 0.0) {
                    return Err(Error::InvalidConfig("cartesian grid needs positive extents and step".into()));
                }
            }
        }
        Ok(())
    }

    /// `(rows, cols)`.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Self::Polar { azimuths, ranges } => (ranges.len(), azimuths.len()),
            Self::Cartesian {
                extent_x,
                extent_y,
                step,
            } => (axis_len(*extent_y, *step), axis_len(*extent_x, *step)),
        }
    }

    pub fn len(&self) -> usize {
        let (r, c) = self.shape();
        r * c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cartesian position of a pixel.
    pub fn xy(&self, row: usize, col: usize) -> (f64, f64) {
        match self {
            Self::Polar { azimuths, ranges } => {
                let (s, c) = azimuths[col].sin_cos();
                (ranges[row] * c, ranges[row] * s)
            }
            Self::Cartesian { step, .. } => {
                let (rows, cols) = self.shape();
                let x = (col as f64 - (cols as f64 - 1.0) / 2.0) * step;
                let y = ((rows as f64 - 1.0) / 2.0 - row as f64) * step;
                (x, y)
            }
        }
    }

    /// Polar position `(azimuth in [0, 2 pi), range)` of a pixel.
    pub fn polar_of(&self, row: usize, col: usize) -> (f64, f64) {
        match self {
            Self::Polar { azimuths, ranges } => (azimuths[col], ranges[row]),
            Self::Cartesian { .. } => {
                let (x, y) = self.xy(row, col);
                (y.atan2(x).rem_euclid(2.0 * PI), x.hypot(y))
            }
        }
    }

    /// Polar position of a pixel that can be imaged, `None` for pixels
    /// inside the rotor or at or beyond the unambiguous range.
    pub fn imageable(&self, cfg: &RadarConfig, row: usize, col: usize) -> Option<(f64, f64)> {
        let (phi, r) = self.polar_of(row, col);
        (r > cfg.radius && r < cfg.unambiguous_range()).then_some((phi, r))
    }
}

fn axis_len(extent: f64, step: f64) -> usize {
    ((extent / step).round() as usize).max(1)
}

/// Imaging backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Backend {
    Bpa,
    FftBpa,
    Sas,
    FftSas,
    Rbpa,
    FftRbpa,
}

impl Backend {
    pub const ALL: [Backend; 6] = [
        Backend::Bpa,
        Backend::FftBpa,
        Backend::Sas,
        Backend::FftSas,
        Backend::Rbpa,
        Backend::FftRbpa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bpa => "BPA",
            Self::FftBpa => "FFT_BPA",
            Self::Sas => "SAS",
            Self::FftSas => "FFT_SAS",
            Self::Rbpa => "RBPA",
            Self::FftRbpa => "FFT_RBPA",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace(['+', '-'], "_");
        Self::ALL
            .into_iter()
            .find(|b| b.name() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown backend {s:?}")))
    }

    /// Whether the backend works on range-compressed data.
    pub fn uses_fft(self) -> bool {
        matches!(self, Self::FftBpa | Self::FftSas | Self::FftRbpa)
    }

    /// Whether the backend needs a weight table (RBPA takes its per-bin
    /// tap counts from it).
    pub fn needs_table(self) -> bool {
        !matches!(self, Self::Bpa | Self::FftBpa)
    }

    pub fn needs_seed(self) -> bool {
        matches!(self, Self::Rbpa | Self::FftRbpa)
    }

    pub fn data_kind(self) -> DataKind {
        if self.uses_fft() {
            DataKind::RangeCompressed
        } else {
            DataKind::IntermediateFrequency
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Execution options for [`image`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImageOptions {
    /// Worker threads; `0` uses every available core.
    pub threads: usize,
    /// Refuse weight-table entries that failed verification.
    pub require_verified: bool,
}

/// A formed image with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SarImage {
    pub grid: ImageGrid,
    /// Row-major, `grid.shape()`.
    pub pixels: Vec<Complex64>,
    pub backend: Backend,
    /// Wall-clock seconds spent filtering pixels.
    pub seconds: f64,
    pub table_hash: Option<String>,
    pub threads: usize,
}

impl SarImage {
    pub fn shape(&self) -> (usize, usize) {
        self.grid.shape()
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.pixels[row * self.shape().1 + col]
    }

    /// `(row, col)` of the brightest pixel (first on ties).
    pub fn peak(&self) -> (usize, usize) {
        let cols = self.shape().1;
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in self.pixels.iter().enumerate() {
            let v = p.norm_sqr();
            if v > best.1 {
                best = (i, v);
            }
        }
        (best.0 / cols, best.0 % cols)
    }
}

/// Maps unwrapped phase-center indices `start..=end` onto data columns.
/// Full-revolution data wraps modulo `N`; partial data must contain the
/// whole span.
fn column_mapper(data: &DataMatrix, cfg: &RadarConfig, start: i64, end: i64) -> Result<impl Fn(i64) -> usize> {
    let pulses = data.pulses();
    let full = pulses == cfg.pulses;
    if !full && (start < 0 || end >= pulses as i64) {
        return Err(Error::WindowOutOfData { start, end, pulses });
    }
    let n = pulses as i64;
    Ok(move |i: i64| if full { i.rem_euclid(n) as usize } else { i as usize })
}

/// `sum_m y(m) exp(-j 2 pi tau K m t_s)`, with `tau = 2 R_n / c`.
#[inline]
fn fast_time_compensate(col: &[Complex64], cfg: &RadarConfig, dist: f64) -> Complex64 {
    let tau = 2.0 * dist / cfg.c;
    let z = Complex64::from_polar(1.0, -2.0 * PI * tau * cfg.slope * cfg.sample_interval());
    let mut p = Complex64::new(1.0, 0.0);
    let mut acc = ZERO;
    for &y in col {
        acc += y * p;
        p *= z;
    }
    acc
}

/// Range and gain from nominal phase center `n` (unwrapped) to `(phi, r)`.
#[inline]
fn center_geometry(cfg: &RadarConfig, n: i64, phi: f64, r: f64) -> (f64, f64) {
    let (dist, theta) = range_angle_from(cfg.radius, n as f64 * cfg.angular_step(), phi, r);
    (dist, cfg.antenna.gain(theta))
}

/// Back-projection matched filter at `(phi, r)`: each window column is
/// compensated in fast time and multiplied by `alpha_n exp(-j 2 k R_n)`.
pub fn bpa_pixel(data: &DataMatrix, cfg: &RadarConfig, phi: f64, r: f64) -> Result<Complex64> {
    data.expect_kind(DataKind::IntermediateFrequency)?;
    check_range(cfg, r)?;
    let win = window_at(cfg, phi, r)?;
    if win.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let col_of = column_mapper(data, cfg, win.n_min, win.n_max)?;
    let two_k = 2.0 * cfg.wavenumber();
    let mut acc = ZERO;
    for n in win.indices() {
        let (dist, alpha) = center_geometry(cfg, n, phi, r);
        if alpha == 0.0 {
            continue;
        }
        let s = fast_time_compensate(data.column(col_of(n)), cfg, dist);
        acc += s * Complex64::from_polar(alpha, -two_k * dist);
    }
    Ok(acc)
}

fn check_range(cfg: &RadarConfig, r: f64) -> Result<()> {
    let max = cfg.unambiguous_range();
    if !(r < max) {
        return Err(Error::BeyondUnambiguousRange { range: r, max });
    }
    if !(r > cfg.radius) {
        return Err(Error::TargetInsideRotor {
            range: r,
            radius: cfg.radius,
        });
    }
    Ok(())
}

/// Weight-table entry serving range `r`, looked up by its range bin.
pub fn lookup_entry<'a>(
    table: &'a WeightTable,
    cfg: &RadarConfig,
    r: f64,
    require_verified: bool,
) -> Result<&'a WeightEntry> {
    let bin = range_bin_of(cfg, r)?;
    if require_verified {
        table.get_verified(bin)
    } else {
        table.get(bin)
    }
}

/// First data column of an entry's window once it is centered on the
/// phase center nearest `phi`; the left half takes `floor((len - 1) / 2)`.
fn centered_start(cfg: &RadarConfig, phi: f64, len: usize) -> i64 {
    let center = (phi / cfg.angular_step()).round() as i64;
    center - ((len as i64 - 1) / 2)
}

/// Sparse-array filter at `(phi, r)` with the weights of `entry`:
/// `sum_k conj(w_k) sum_m y(m, col_k) exp(-j 2 pi tau_k K m t_s)` over the
/// nonzero weights only.
pub fn sas_pixel(data: &DataMatrix, cfg: &RadarConfig, entry: &WeightEntry, phi: f64, r: f64) -> Result<Complex64> {
    data.expect_kind(DataKind::IntermediateFrequency)?;
    check_range(cfg, r)?;
    let start = centered_start(cfg, phi, entry.weights.len());
    let col_of = column_mapper(data, cfg, start, start + entry.weights.len() as i64 - 1)?;
    let mut acc = ZERO;
    for (k, w) in entry.weights.iter().enumerate() {
        if w.norm_sqr() == 0.0 {
            continue;
        }
        let n = start + k as i64;
        let (dist, _) = center_geometry(cfg, n, phi, r);
        acc += w.conj() * fast_time_compensate(data.column(col_of(n)), cfg, dist);
    }
    Ok(acc)
}

/// Range-compressed filter at `(phi, r)`: `sum_k conj(w_k) Y_1D(l*_k, n_k)`
/// with `l*_k = round(2 R_k K t_s L / c)` and window columns starting at
/// `start`. A matched back-projection filter uses `w_k = alpha_k exp(j 2 k R_k)`.
pub fn fft_pixel(
    data: &DataMatrix,
    cfg: &RadarConfig,
    weights: &[Complex64],
    start: i64,
    phi: f64,
    r: f64,
) -> Result<Complex64> {
    data.expect_kind(DataKind::RangeCompressed)?;
    check_range(cfg, r)?;
    if weights.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let col_of = column_mapper(data, cfg, start, start + weights.len() as i64 - 1)?;
    let mut acc = ZERO;
    for (k, w) in weights.iter().enumerate() {
        if w.norm_sqr() == 0.0 {
            continue;
        }
        let n = start + k as i64;
        let (dist, _) = center_geometry(cfg, n, phi, r);
        acc += w.conj() * data.column(col_of(n))[compressed_bin(cfg, data, dist)?];
    }
    Ok(acc)
}

#[inline]
fn compressed_bin(cfg: &RadarConfig, data: &DataMatrix, dist: f64) -> Result<usize> {
    let l = fractional_bin(cfg, dist).round();
    if !(l >= 0.0 && l < data.rows as f64) {
        return Err(Error::RangeBinOutOfRange {
            bin: l as i64,
            bins: data.rows,
        });
    }
    Ok(l as usize)
}

/// Back-projection weights `alpha_n exp(j 2 k R_n)` over the window that
/// sees `(phi, r)`, in the `conj(w)` convention of [`fft_pixel`].
pub fn bpa_weights(cfg: &RadarConfig, phi: f64, r: f64) -> Result<(i64, Vec<Complex64>)> {
    let win = window_at(cfg, phi, r)?;
    if win.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let two_k = 2.0 * cfg.wavenumber();
    let w = win
        .indices()
        .map(|n| {
            let (dist, alpha) = center_geometry(cfg, n, phi, r);
            Complex64::from_polar(alpha, two_k * dist)
        })
        .collect();
    Ok((win.n_min, w))
}

/// Random tap subsets for the sparse baseline, one per range bin: window
/// positions drawn uniformly without replacement, as many as the table
/// entry has nonzeros.
fn random_subsets(
    cfg: &RadarConfig,
    table: &WeightTable,
    bins: &[usize],
    seed: u64,
    require_verified: bool,
) -> Result<Vec<(usize, Vec<bool>)>> {
    bins.iter()
        .map(|&bin| {
            let entry = if require_verified {
                table.get_verified(bin)?
            } else {
                table.get(bin)?
            };
            let len = window_for_range(cfg, cfg.bin_range(bin))?.len();
            let mut rng = substream(seed, "random-taps", bin as u64);
            let mut mask = vec![false; len];
            for k in sample(&mut rng, len, entry.nnz().min(len)) {
                mask[k] = true;
            }
            Ok((bin, mask))
        })
        .collect()
}

/// Random sparse baseline at `(phi, r)`: back-projection restricted to the
/// window positions flagged in `mask` (window centered as for SAS).
fn random_pixel(data: &DataMatrix, cfg: &RadarConfig, mask: &[bool], phi: f64, r: f64, fft: bool) -> Result<Complex64> {
    check_range(cfg, r)?;
    let start = centered_start(cfg, phi, mask.len());
    let col_of = column_mapper(data, cfg, start, start + mask.len() as i64 - 1)?;
    let two_k = 2.0 * cfg.wavenumber();
    let mut acc = ZERO;
    for (k, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let n = start + k as i64;
        let (dist, alpha) = center_geometry(cfg, n, phi, r);
        if alpha == 0.0 {
            continue;
        }
        let col = data.column(col_of(n));
        let s = if fft {
            col[compressed_bin(cfg, data, dist)?]
        } else {
            fast_time_compensate(col, cfg, dist)
        };
        acc += s * Complex64::from_polar(alpha, -two_k * dist);
    }
    Ok(acc)
}

enum Prepared<'a> {
    Bpa,
    FftBpa,
    Sas(&'a WeightTable),
    FftSas(&'a WeightTable),
    Random { masks: Vec<Option<Vec<bool>>>, fft: bool },
}

/// Forms an image of `data` over `grid` with `backend`.
///
/// SAS paths read weights from `table`; the random baseline takes its tap
/// counts from `table` and its draws from `seed`. Cartesian pixels inside
/// the rotor or beyond the unambiguous range are left at zero. Timing covers
/// the pixel loop only.
pub fn image(
    backend: Backend,
    data: &DataMatrix,
    cfg: &RadarConfig,
    grid: &ImageGrid,
    table: Option<&WeightTable>,
    seed: Option<u64>,
    opts: &ImageOptions,
) -> Result<SarImage> {
    cfg.validate()?;
    grid.validate(cfg)?;
    data.expect_kind(backend.data_kind())?;
    data.check_against(cfg)?;
    let table = match (backend.needs_table(), table) {
        (true, None) => {
            return Err(Error::InvalidConfig(format!("backend {backend} needs a weight table")));
        }
        (_, t) => t,
    };
    if let Some(t) = table {
        if t.cfg != *cfg {
            return Err(Error::InvalidConfig(
                "weight table was synthesized for a different radar configuration".into(),
            ));
        }
    }
    let prepared = match backend {
        Backend::Bpa => Prepared::Bpa,
        Backend::FftBpa => Prepared::FftBpa,
        Backend::Sas => Prepared::Sas(table.expect("checked above")),
        Backend::FftSas => Prepared::FftSas(table.expect("checked above")),
        Backend::Rbpa | Backend::FftRbpa => {
            let seed = seed.ok_or_else(|| Error::InvalidConfig(format!("backend {backend} needs a seed")))?;
            let table = table.expect("checked above");
            let bins: Vec<usize> = table.entries.keys().copied().collect();
            let mut masks = vec![None; cfg.range_bins];
            for (bin, mask) in random_subsets(cfg, table, &bins, seed, opts.require_verified)? {
                if bin < masks.len() {
                    masks[bin] = Some(mask);
                }
            }
            Prepared::Random {
                masks,
                fft: backend == Backend::FftRbpa,
            }
        }
    };

    let (rows, cols) = grid.shape();
    let eval = |idx: usize| -> Result<Complex64> {
        let (row, col) = (idx / cols, idx % cols);
        let Some((phi, r)) = grid.imageable(cfg, row, col) else {
            return Ok(ZERO);
        };
        let v = match &prepared {
            Prepared::Bpa => bpa_pixel(data, cfg, phi, r),
            Prepared::FftBpa => bpa_weights(cfg, phi, r).and_then(|(start, w)| fft_pixel(data, cfg, &w, start, phi, r)),
            Prepared::Sas(t) => {
                lookup_entry(t, cfg, r, opts.require_verified).and_then(|e| sas_pixel(data, cfg, e, phi, r))
            }
            Prepared::FftSas(t) => lookup_entry(t, cfg, r, opts.require_verified).and_then(|e| {
                let start = centered_start(cfg, phi, e.weights.len());
                fft_pixel(data, cfg, &e.weights, start, phi, r)
            }),
            Prepared::Random { masks, fft } => {
                let bin = range_bin_of(cfg, r)?;
                match masks.get(bin).and_then(|m| m.as_ref()) {
                    Some(mask) => random_pixel(data, cfg, mask, phi, r, *fft),
                    None => Err(Error::MissingBin(bin)),
                }
            }
        };
        v.map_err(|e| Error::Pixel {
            row,
            col,
            source: Box::new(e),
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let started = Instant::now();
    let pixels: Result<Vec<Complex64>> = pool.install(|| (0..rows * cols).into_par_iter().map(eval).collect());
    let seconds = started.elapsed().as_secs_f64();
    Ok(SarImage {
        grid: grid.clone(),
        pixels: pixels?,
        backend,
        seconds,
        table_hash: table.map(|t| t.digest()),
        threads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::JitterModel;
    use crate::geometry::steering_vector;
    use crate::signal::{range_fft, simulate_if, PointScene};
    use crate::synthesis::WeightEntry;
    use std::f64::consts::FRAC_PI_2;

    fn small_cfg() -> RadarConfig {
        RadarConfig {
            pulses: 120,
            ..RadarConfig::default()
        }
    }

    fn point_data(cfg: &RadarConfig, phi: f64, r: f64) -> DataMatrix {
        simulate_if(cfg, &PointScene::single(phi, r), &JitterModel::none()).unwrap()
    }

    fn matched_table(cfg: &RadarConfig, bins: &[usize]) -> WeightTable {
        let mut t = WeightTable::new(*cfg, Default::default());
        for &bin in bins {
            let range = cfg.bin_range(bin);
            let win = window_for_range(cfg, range).unwrap();
            let a = steering_vector(cfg, FRAC_PI_2, range, &win).unwrap();
            t.insert(WeightEntry::from_weights(cfg, bin, a.entries).unwrap());
        }
        t
    }

    #[test]
    fn backend_names_round_trip() {
        for b in Backend::ALL {
            assert_eq!(Backend::parse(b.name()).unwrap(), b);
        }
        assert_eq!(Backend::parse("fft+sas").unwrap(), Backend::FftSas);
        assert!(Backend::parse("omega-k").is_err());
    }

    #[test]
    fn cartesian_grid_is_centered() {
        let g = ImageGrid::cartesian(1.0, 0.5, 0.1);
        assert_eq!(g.shape(), (5, 10));
        let (x0, y0) = g.xy(0, 0);
        let (x1, y1) = g.xy(4, 9);
        assert!((x0 + x1).abs() < 1e-12 && (y0 + y1).abs() < 1e-12);
        assert!(y0 > 0.0 && x0 < 0.0);
        let odd = ImageGrid::cartesian(1.0, 1.0, 0.2);
        assert_eq!(odd.xy(2, 2), (0.0, 0.0));
        assert!(odd.imageable(&RadarConfig::default(), 2, 2).is_none());
    }

    #[test]
    fn bpa_peak_equals_amplitude_sum() {
        let cfg = small_cfg();
        let bin = 45;
        let r = cfg.bin_range(bin);
        let data = point_data(&cfg, FRAC_PI_2, r);
        let win = window_at(&cfg, FRAC_PI_2, r).unwrap();
        let expected: f64 = win
            .indices()
            .map(|n| center_geometry(&cfg, n, FRAC_PI_2, r).1.powi(2))
            .sum::<f64>()
            * cfg.samples as f64;
        let v = bpa_pixel(&data, &cfg, FRAC_PI_2, r).unwrap();
        assert!((v.norm() - expected).abs() < 1e-9 * expected, "{} vs {expected}", v.norm());
        assert!(v.im.abs() < 1e-8 * expected);
    }

    #[test]
    fn zero_data_gives_zero() {
        let cfg = small_cfg();
        let zeros = DataMatrix::new(
            DataKind::IntermediateFrequency,
            cfg.samples,
            vec![ZERO; cfg.samples * cfg.pulses],
            vec![0.0; cfg.pulses],
        )
        .unwrap();
        assert_eq!(bpa_pixel(&zeros, &cfg, 1.0, 2.0).unwrap(), ZERO);
        let compressed = range_fft(&zeros, &cfg).unwrap();
        let (start, w) = bpa_weights(&cfg, 1.0, 2.0).unwrap();
        assert_eq!(fft_pixel(&compressed, &cfg, &w, start, 1.0, 2.0).unwrap(), ZERO);
    }

    #[test]
    fn matched_table_reproduces_bpa_on_phase_center_grid() {
        let cfg = small_cfg();
        let bins = [30, 45, 60];
        let table = matched_table(&cfg, &bins);
        let data = point_data(&cfg, 1.3, cfg.bin_range(45));
        for &bin in &bins {
            let r = cfg.bin_range(bin);
            for n in [0usize, 17, 30, 61, 119] {
                let phi = n as f64 * cfg.angular_step();
                let b = bpa_pixel(&data, &cfg, phi, r).unwrap();
                let s = sas_pixel(&data, &cfg, table.get(bin).unwrap(), phi, r).unwrap();
                assert!((b - s).norm() <= 1e-9 * b.norm().max(1.0), "bin {bin} n {n}: {b} vs {s}");
            }
        }
    }

    #[test]
    fn sparse_evaluation_matches_dense_with_zeros() {
        let cfg = small_cfg();
        let table = matched_table(&cfg, &[45]);
        let mut entry = table.get(45).unwrap().clone();
        for (k, w) in entry.weights.iter_mut().enumerate() {
            if k % 3 != 0 {
                *w = ZERO;
            }
        }
        let data = point_data(&cfg, FRAC_PI_2, 2.0);
        let r = 2.0;
        let sparse = sas_pixel(&data, &cfg, &entry, FRAC_PI_2, r).unwrap();
        let start = centered_start(&cfg, FRAC_PI_2, entry.weights.len());
        let mut dense = ZERO;
        for (k, w) in entry.weights.iter().enumerate() {
            let n = start + k as i64;
            let (dist, _) = center_geometry(&cfg, n, FRAC_PI_2, r);
            let col = data.column(n.rem_euclid(cfg.pulses as i64) as usize);
            if w.norm_sqr() > 0.0 {
                dense += w.conj() * fast_time_compensate(col, &cfg, dist);
            }
        }
        assert_eq!(sparse, dense);
    }

    #[test]
    fn partial_data_rejects_wrapping_windows() {
        let cfg = small_cfg();
        let full = point_data(&cfg, FRAC_PI_2, 2.0);
        let half = cfg.pulses / 2;
        let partial = DataMatrix::new(
            full.kind,
            full.rows,
            full.data[..half * full.rows].to_vec(),
            full.pulse_azimuths[..half].to_vec(),
        )
        .unwrap();
        assert!(bpa_pixel(&partial, &cfg, FRAC_PI_2, 2.0).is_ok());
        assert!(matches!(
            bpa_pixel(&partial, &cfg, 0.0, 2.0),
            Err(Error::WindowOutOfData { .. })
        ));
    }

    #[test]
    fn image_validates_inputs() {
        let cfg = small_cfg();
        let data = point_data(&cfg, FRAC_PI_2, 2.0);
        let grid = ImageGrid::polar(vec![FRAC_PI_2], vec![2.0]);
        let opts = ImageOptions::default();
        assert!(image(Backend::Sas, &data, &cfg, &grid, None, None, &opts).is_err());
        assert!(matches!(
            image(Backend::FftBpa, &data, &cfg, &grid, None, None, &opts),
            Err(Error::KindMismatch { .. })
        ));
        let table = matched_table(&cfg, &[45]);
        assert!(image(Backend::Rbpa, &data, &cfg, &grid, Some(&table), None, &opts).is_err());
        let strict = ImageOptions {
            require_verified: true,
            ..opts
        };
        let mut unverified = table.clone();
        unverified.entries.get_mut(&45).unwrap().verified = false;
        let err = image(Backend::Sas, &data, &cfg, &grid, Some(&unverified), None, &strict).unwrap_err();
        assert!(matches!(err, Error::Pixel { row: 0, col: 0, .. }), "{err}");
        assert!(image(Backend::Sas, &data, &cfg, &grid, Some(&unverified), None, &opts).is_ok());
    }

    #[test]
    fn fft_bpa_peaks_at_target() {
        let cfg = small_cfg();
        let r0 = cfg.bin_range(45);
        let data = range_fft(&point_data(&cfg, FRAC_PI_2, r0), &cfg).unwrap();
        let grid = ImageGrid::polar_bins(&cfg, &(40..=50).collect::<Vec<_>>());
        let img = image(Backend::FftBpa, &data, &cfg, &grid, None, None, &ImageOptions::default()).unwrap();
        let (row, col) = img.peak();
        assert_eq!(grid.polar_of(row, col).1, r0);
        assert_eq!(col, cfg.pulses / 4);
    }

    #[test]
    fn random_baseline_is_seeded() {
        let cfg = small_cfg();
        let bins: Vec<usize> = (43..=47).collect();
        let mut table = matched_table(&cfg, &bins);
        for e in table.entries.values_mut() {
            let keep = e.weights.len() / 3;
            e.weights.iter_mut().skip(keep).for_each(|w| *w = ZERO);
        }
        let data = point_data(&cfg, FRAC_PI_2, 2.0);
        let grid = ImageGrid::polar_bins(&cfg, &bins);
        let opts = ImageOptions::default();
        let a = image(Backend::Rbpa, &data, &cfg, &grid, Some(&table), Some(7), &opts).unwrap();
        let b = image(Backend::Rbpa, &data, &cfg, &grid, Some(&table), Some(7), &opts).unwrap();
        let c = image(Backend::Rbpa, &data, &cfg, &grid, Some(&table), Some(8), &opts).unwrap();
        assert_eq!(a.pixels, b.pixels);
        assert_ne!(a.pixels, c.pixels);
    }

    #[test]
    fn parallel_and_serial_images_agree_bitwise() {
        let cfg = small_cfg();
        let data = point_data(&cfg, 0.7, 1.5);
        let grid = ImageGrid::cartesian(4.0, 4.0, 0.2);
        let serial = image(
            Backend::Bpa,
            &data,
            &cfg,
            &grid,
            None,
            None,
            &ImageOptions {
                threads: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let parallel = image(
            Backend::Bpa,
            &data,
            &cfg,
            &grid,
            None,
            None,
            &ImageOptions {
                threads: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(serial.pixels, parallel.pixels);
        assert_eq!(parallel.threads, 4);
    }
}
