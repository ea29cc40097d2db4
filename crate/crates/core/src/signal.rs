//! Deramped FMCW returns on the circular aperture and range compression.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::config::{JitterModel, RadarConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    range_angle_from, steering_entries, steering_vector, window_for_range, ApertureWindow, TargetPolar,
};
use crate::rng::substream;

/// A point scatterer with complex reflectivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTarget {
    pub position: TargetPolar,
    pub reflectivity: Complex64,
}

/// Point targets plus receiver noise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointScene {
    pub targets: Vec<PointTarget>,
    /// Variance of the circular complex white noise added to every sample.
    pub noise_power: f64,
    pub noise_seed: u64,
}

impl PointScene {
    pub fn single(azimuth: f64, range: f64) -> Self {
        Self {
            targets: vec![PointTarget {
                position: TargetPolar::new(azimuth, range),
                reflectivity: Complex64::new(1.0, 0.0),
            }],
            noise_power: 0.0,
            noise_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(Error::InvalidConfig("noise power must be non-negative".into()));
        }
        if self
            .targets
            .iter()
            .any(|t| !(t.reflectivity.re.is_finite() && t.reflectivity.im.is_finite()))
        {
            return Err(Error::InvalidConfig("reflectivity must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    /// Raw deramped samples, `M` rows.
    IntermediateFrequency,
    /// Range-FFT output, `L` rows.
    RangeCompressed,
}

impl DataKind {
    pub fn name(self) -> &'static str {
        match self {
            DataKind::IntermediateFrequency => "IF",
            DataKind::RangeCompressed => "range_compressed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "IF" => Ok(DataKind::IntermediateFrequency),
            "range_compressed" => Ok(DataKind::RangeCompressed),
            other => Err(Error::Format(format!("unknown data kind `{other}`"))),
        }
    }
}

/// Column-major complex matrix with one column per pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub kind: DataKind,
    pub rows: usize,
    /// `rows * pulse_azimuths.len()` samples, column-major.
    pub data: Vec<Complex64>,
    /// Actual azimuth of each pulse, radians (jittered when simulated with jitter).
    pub pulse_azimuths: Vec<f64>,
}

impl DataMatrix {
    pub fn new(kind: DataKind, rows: usize, data: Vec<Complex64>, pulse_azimuths: Vec<f64>) -> Result<Self> {
        if data.len() != rows * pulse_azimuths.len() {
            return Err(Error::Dimension(format!(
                "{} samples for {rows} rows x {} pulses",
                data.len(),
                pulse_azimuths.len()
            )));
        }
        Ok(Self {
            kind,
            rows,
            data,
            pulse_azimuths,
        })
    }

    pub fn pulses(&self) -> usize {
        self.pulse_azimuths.len()
    }

    #[inline]
    pub fn column(&self, n: usize) -> &[Complex64] {
        &self.data[n * self.rows..(n + 1) * self.rows]
    }

    pub fn expect_kind(&self, kind: DataKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch {
                expected: kind.name(),
                found: self.kind.name(),
            });
        }
        Ok(())
    }

    /// Checks that the row count matches what `cfg` prescribes for the kind.
    pub fn check_against(&self, cfg: &RadarConfig) -> Result<()> {
        let expected = match self.kind {
            DataKind::IntermediateFrequency => cfg.samples,
            DataKind::RangeCompressed => cfg.range_bins,
        };
        if self.rows != expected {
            return Err(Error::Dimension(format!(
                "{} data has {} rows, configuration expects {expected}",
                self.kind.name(),
                self.rows
            )));
        }
        Ok(())
    }
}

/// Simulates one full revolution (`N` pulses) of deramped IF samples.
///
/// Sample `(m, n)` is `sum_t alpha_n exp(j 2 pi [tau_n K (m t_s + T_start) + f_c tau_n])`
/// plus noise, with `alpha_n = p(theta_n) * reflectivity`, `tau_n = 2 R_n / c`
/// and `R_n` taken from the jittered pulse azimuth. The residual video phase
/// is not modeled.
pub fn simulate_if(cfg: &RadarConfig, scene: &PointScene, jitter: &JitterModel) -> Result<DataMatrix> {
    cfg.validate()?;
    scene.validate()?;
    jitter.validate()?;
    let m_count = cfg.samples;
    let step = cfg.angular_step();
    let azimuths: Vec<f64> = (0..cfg.pulses)
        .map(|n| {
            let nominal = n as f64 * step;
            if jitter.sigma > 0.0 {
                let z: f64 = substream(jitter.seed, "pulse-jitter", n as u64).sample(StandardNormal);
                nominal + jitter.sigma * z
            } else {
                nominal
            }
        })
        .collect();

    let ts = cfg.sample_interval();
    let noise_scale = (scene.noise_power / 2.0).sqrt();
    let mut data = vec![Complex64::new(0.0, 0.0); m_count * cfg.pulses];
    data.par_chunks_mut(m_count)
        .zip(azimuths.par_iter())
        .enumerate()
        .for_each(|(n, (col, &phi_n))| {
            for target in &scene.targets {
                let (dist, theta) =
                    range_angle_from(cfg.radius, phi_n, target.position.azimuth, target.position.range);
                let gain = cfg.antenna.gain(theta);
                if gain == 0.0 {
                    continue;
                }
                let alpha = target.reflectivity * gain;
                let tau = 2.0 * dist / cfg.c;
                for (m, sample) in col.iter_mut().enumerate() {
                    let phase = 2.0 * PI * tau * (cfg.slope * (m as f64 * ts + cfg.t_start) + cfg.carrier);
                    *sample += alpha * Complex64::from_polar(1.0, phase);
                }
            }
            if scene.noise_power > 0.0 {
                let mut rng = substream(scene.noise_seed, "receiver-noise", n as u64);
                for sample in col.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *sample += Complex64::new(re, im) * noise_scale;
                }
            }
        });
    DataMatrix::new(DataKind::IntermediateFrequency, m_count, data, azimuths)
}

/// `L`-point range FFT of every column, zero-padding when `L > M`.
pub fn range_fft(matrix: &DataMatrix, cfg: &RadarConfig) -> Result<DataMatrix> {
    matrix.expect_kind(DataKind::IntermediateFrequency)?;
    let l_count = cfg.range_bins;
    if l_count < matrix.rows {
        return Err(Error::Dimension(format!(
            "range-FFT length {l_count} shorter than {} samples",
            matrix.rows
        )));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(l_count);
    let mut out = vec![Complex64::new(0.0, 0.0); l_count * matrix.pulses()];
    out.par_chunks_mut(l_count).enumerate().for_each(|(n, col)| {
        col[..matrix.rows].copy_from_slice(matrix.column(n));
        fft.process(col);
    });
    DataMatrix::new(DataKind::RangeCompressed, l_count, out, matrix.pulse_azimuths.clone())
}

/// FFT bin at which a return from range `range` peaks,
/// `round(2 R K t_s L / c)`.
pub fn range_bin_of(cfg: &RadarConfig, range: f64) -> Result<usize> {
    let max = cfg.unambiguous_range();
    if !(range >= 0.0 && range < max) {
        return Err(Error::BeyondUnambiguousRange { range, max });
    }
    Ok(fractional_bin(cfg, range).round() as usize)
}

/// Unrounded bin position `2 R K t_s L / c`.
#[inline]
pub fn fractional_bin(cfg: &RadarConfig, range: f64) -> f64 {
    2.0 * range * cfg.slope * cfg.sample_interval() * cfg.range_bins as f64 / cfg.c
}

/// Steering-vector error `a_hat - a` for draw `draw` of the jitter model,
/// at the boresight direction and range `range` (canonical window).
pub fn steering_error(cfg: &RadarConfig, jitter: &JitterModel, range: f64, draw: u64) -> Result<Vec<Complex64>> {
    jitter.validate()?;
    let window = window_for_range(cfg, range)?;
    let nominal = steering_vector(cfg, FRAC_PI_2, range, &window)?;
    Ok(error_against(cfg, jitter, range, &window, &nominal.entries, draw))
}

fn error_against(
    cfg: &RadarConfig,
    jitter: &JitterModel,
    range: f64,
    window: &ApertureWindow,
    nominal: &[Complex64],
    draw: u64,
) -> Vec<Complex64> {
    if jitter.sigma == 0.0 {
        return vec![Complex64::new(0.0, 0.0); nominal.len()];
    }
    let step = cfg.angular_step();
    let mut rng = substream(jitter.seed, "phase-error", draw);
    let perturbed = steering_entries(
        cfg,
        FRAC_PI_2,
        range,
        window.indices().map(|n| {
            let z: f64 = rng.sample(StandardNormal);
            n as f64 * step + jitter.sigma * z
        }),
    );
    perturbed.iter().zip(nominal).map(|(p, a)| p - a).collect()
}

/// Norms `||a_hat - a||` of the steering-vector error under azimuth jitter,
/// one per draw, for the boresight direction at range `range`.
pub fn sample_phase_errors(cfg: &RadarConfig, jitter: &JitterModel, range: f64, draws: usize) -> Result<Vec<f64>> {
    jitter.validate()?;
    if draws == 0 {
        return Err(Error::InvalidConfig("at least one draw is required".into()));
    }
    let window = window_for_range(cfg, range)?;
    let nominal = steering_vector(cfg, FRAC_PI_2, range, &window)?;
    Ok((0..draws as u64)
        .into_par_iter()
        .map(|d| {
            error_against(cfg, jitter, range, &window, &nominal.entries, d)
                .iter()
                .map(|e| e.norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}
