//! Physical and waveform constants of the rotating radar, plus the synthesis
//! and jitter parameter sets that travel with them.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Element radiation pattern in azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Antenna {
    /// `cos(theta)` inside the open field of view `(-pi/2, pi/2)`, zero outside.
    #[default]
    Cosine,
}

impl Antenna {
    #[inline]
    pub fn gain(self, theta: f64) -> f64 {
        match self {
            Antenna::Cosine => {
                if theta.abs() < PI / 2.0 {
                    theta.cos()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Antenna::Cosine => "cosine",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Antenna::Cosine),
            other => Err(Error::InvalidConfig(format!("unknown antenna pattern `{other}`"))),
        }
    }
}

/// Radar geometry and FMCW waveform.
///
/// Derived quantities (`sample_interval`, `angular_step`, `wavenumber`, ...)
/// are recomputed from the fields on every call, so a config can be edited
/// freely and never carries stale caches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarConfig {
    /// Rotation radius in meters.
    pub radius: f64,
    /// Pulses (phase centers) per revolution.
    pub pulses: usize,
    /// Carrier (chirp start) frequency in Hz.
    pub carrier: f64,
    /// Chirp slope in Hz/s.
    pub slope: f64,
    /// ADC sampling rate in Hz.
    pub sample_rate: f64,
    /// Fast-time samples per pulse.
    pub samples: usize,
    /// Range-FFT length.
    pub range_bins: usize,
    /// Sampling start offset within the chirp, seconds.
    pub t_start: f64,
    /// Propagation speed in m/s.
    pub c: f64,
    pub antenna: Antenna,
}

impl Default for RadarConfig {
    /// IWR6843-class settings: 0.145 m rotor, 800 pulses per turn, 60 GHz start,
    /// 68 MHz/us slope, 4.5 MHz ADC, 225 samples.
    fn default() -> Self {
        Self {
            radius: 0.145,
            pulses: 800,
            carrier: 60e9,
            slope: 6.8e13,
            sample_rate: 4.5e6,
            samples: 225,
            range_bins: 225,
            t_start: 7e-6,
            c: 3e8,
            antenna: Antenna::Cosine,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad("radius must be positive");
        }
        if self.pulses < 3 {
            return bad("pulses per revolution must be at least 3");
        }
        if self.samples < 1 {
            return bad("samples per pulse must be at least 1");
        }
        if self.range_bins < 1 {
            return bad("range bins must be at least 1");
        }
        if self.range_bins < self.samples {
            return bad("range-FFT length must not be shorter than the sample count");
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad("sample rate must be positive");
        }
        if !(self.slope > 0.0 && self.slope.is_finite()) {
            return bad("chirp slope must be positive");
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("propagation speed must be positive");
        }
        if !(self.carrier.is_finite() && self.t_start.is_finite()) {
            return bad("carrier and sampling start must be finite");
        }
        Ok(())
    }

    /// `t_s = 1 / F_s`.
    #[inline]
    pub fn sample_interval(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Angular spacing between consecutive phase centers, `2 pi / N`.
    #[inline]
    pub fn angular_step(&self) -> f64 {
        2.0 * PI / self.pulses as f64
    }

    /// `k = 2 pi (K T_start + f_c) / c`; the two-way phase of a return is `2 k R`.
    #[inline]
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI * (self.slope * self.t_start + self.carrier) / self.c
    }

    /// Bandwidth swept while the ADC is sampling, `K M t_s`.
    #[inline]
    pub fn sampled_bandwidth(&self) -> f64 {
        self.slope * self.samples as f64 * self.sample_interval()
    }

    /// Range resolution `c / (2 B)` of the sampled chirp.
    #[inline]
    pub fn range_resolution(&self) -> f64 {
        self.c / (2.0 * self.sampled_bandwidth())
    }

    /// Distance between adjacent range-FFT bins, `c / (2 K t_s L)`.
    /// Equals [`Self::range_resolution`] when `L == M`.
    #[inline]
    pub fn range_bin_spacing(&self) -> f64 {
        self.c / (2.0 * self.slope * self.sample_interval() * self.range_bins as f64)
    }

    /// Maximum unambiguous range `c F_s / (4 K)`.
    #[inline]
    pub fn unambiguous_range(&self) -> f64 {
        self.c * self.sample_rate / (4.0 * self.slope)
    }

    /// Center range of range bin `bin`.
    #[inline]
    pub fn bin_range(&self, bin: usize) -> f64 {
        bin as f64 * self.range_bin_spacing()
    }

    /// Range bins whose center lies strictly between the rotor and the
    /// unambiguous range; these are the bins that can be imaged.
    pub fn imageable_bins(&self) -> Vec<usize> {
        let r_max = self.unambiguous_range();
        (0..self.range_bins)
            .filter(|&l| {
                let range = self.bin_range(l);
                range > self.radius && range < r_max
            })
            .collect()
    }
}

/// Per-pulse azimuth jitter of the rotation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterModel {
    /// Standard deviation of the azimuth error, radians.
    pub sigma: f64,
    pub seed: u64,
}

impl JitterModel {
    pub fn none() -> Self {
        Self { sigma: 0.0, seed: 0 }
    }

    /// Jitter with the deviation given in degrees (the unit used at the CLI).
    pub fn from_degrees(sigma_deg: f64, seed: u64) -> Self {
        Self {
            sigma: sigma_deg.to_radians(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig("jitter sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Measured encoder deviation of the rotation stage, degrees.
pub const DEFAULT_JITTER_SIGMA_DEG: f64 = 0.086;

/// Parameters of the robust sparse-array synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisParams {
    /// Half main-lobe width, radians.
    pub mainlobe_half_width: f64,
    /// Allowed sidelobe-to-main-lobe power ratio (linear).
    pub eta: f64,
    /// Sidelobe sampling interval, radians.
    pub grid_step: f64,
    /// Slack penalty weight.
    pub lambda_b: f64,
    /// Minimum main-lobe power `U_min` (the SCA variable is its square root).
    pub u_min: f64,
    /// Hard cap on SCA iterations.
    pub max_iter: usize,
    /// Relative objective change that ends the SCA loop early.
    pub stop_tol: f64,
    /// Relative magnitude below which a weight is zeroed.
    pub zero_threshold: f64,
    /// Slack-sum bound used to verify a solution.
    pub b_min: f64,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            mainlobe_half_width: 1f64.to_radians(),
            eta: 0.0005,
            grid_step: 0.5f64.to_radians(),
            lambda_b: 50.0,
            u_min: 5.0,
            max_iter: 50,
            stop_tol: 1e-3,
            zero_threshold: 1e-3,
            b_min: 1e-5,
        }
    }
}

impl SynthesisParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta must lie in (0, 1)");
        }
        if !(self.grid_step > 0.0) {
            return bad("grid step must be positive");
        }
        if !(self.lambda_b > 0.0) {
            return bad("lambda_b must be positive");
        }
        if !(self.u_min >= 0.0) {
            return bad("U_min must be non-negative");
        }
        if self.max_iter < 1 {
            return bad("ITER must be at least 1");
        }
        if !(self.mainlobe_half_width > 0.0) {
            return bad("main-lobe half width must be positive");
        }
        if !(self.zero_threshold >= 0.0 && self.zero_threshold < 1.0) {
            return bad("zero threshold must lie in [0, 1)");
        }
        if !(self.b_min > 0.0) {
            return bad("b_min must be positive");
        }
        Ok(())
    }

    /// `U'_min = sqrt(U_min)`.
    pub fn u_prime_min(&self) -> f64 {
        self.u_min.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants() {
        let cfg = RadarConfig::default();
        assert!((cfg.sample_interval() - 1.0 / 4.5e6).abs() < 1e-20);
        assert!((cfg.angular_step() - 2.0 * PI / 800.0).abs() < 1e-15);
        let k = 2.0 * PI * (6.8e13 * 7e-6 + 60e9) / 3e8;
        assert!((cfg.wavenumber() - k).abs() < 1e-9);
        // L == M so the FFT bin spacing equals c / 2B
        assert!((cfg.range_bin_spacing() - cfg.range_resolution()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = RadarConfig {
            pulses: 2,
            ..RadarConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RadarConfig {
            range_bins: 100,
            ..RadarConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(RadarConfig::default().validate().is_ok());
    }

    #[test]
    fn imageable_bins_exclude_rotor_and_far_field() {
        let cfg = RadarConfig::default();
        let bins = cfg.imageable_bins();
        assert!(bins.iter().all(|&l| cfg.bin_range(l) > cfg.radius));
        assert!(bins.iter().all(|&l| cfg.bin_range(l) < cfg.unambiguous_range()));
        assert_eq!(*bins.first().unwrap(), 4);
        assert_eq!(*bins.last().unwrap(), 112);
    }
}
