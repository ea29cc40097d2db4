//! Closed-form ROSAR geometry.
//!
//! Phase center `n` sits at angle `2 pi n / N` on a circle of radius `r`
//! with its boresight pointing radially outwards. Synthesis always works in
//! the canonical frame where the target lies at azimuth `pi / 2`; imaging
//! rotates an arbitrary azimuth onto that frame by an integer index shift.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::config::RadarConfig;
use crate::error::{Error, Result};

/// Target position in polar coordinates about the rotation center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPolar {
    /// Azimuth, radians.
    pub azimuth: f64,
    /// Range from the rotation center, meters.
    pub range: f64,
}

impl TargetPolar {
    pub fn new(azimuth: f64, range: f64) -> Self {
        Self { azimuth, range }
    }

    /// Target on the canonical boresight direction.
    pub fn boresight(range: f64) -> Self {
        Self::new(FRAC_PI_2, range)
    }
}

/// Inclusive range of phase-center indices that see a target.
///
/// Indices are signed so that a window can be rotated by an arbitrary index
/// shift; consumers reduce them modulo `N` when addressing pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureWindow {
    pub n_min: i64,
    pub n_max: i64,
    /// Half-angle of visibility, `arccos(r / R)`.
    pub phi_v: f64,
}

impl ApertureWindow {
    pub fn len(&self) -> usize {
        if self.n_max < self.n_min {
            0
        } else {
            (self.n_max - self.n_min + 1) as usize
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        self.n_min..=self.n_max
    }

    pub fn shifted(&self, shift: i64) -> Self {
        Self {
            n_min: self.n_min + shift,
            n_max: self.n_max + shift,
            phi_v: self.phi_v,
        }
    }

    /// Azimuths of the first and last phase centers in the window.
    pub fn angular_extent(&self, cfg: &RadarConfig) -> (f64, f64) {
        let step = cfg.angular_step();
        (self.n_min as f64 * step, self.n_max as f64 * step)
    }
}

/// Near-field array response toward `(phi, R)` over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub window: ApertureWindow,
    pub azimuth: f64,
    pub range: f64,
    pub entries: Vec<Complex64>,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Wraps an angle difference into `(-pi, pi]`.
#[inline]
pub fn wrap_angle(mut a: f64) -> f64 {
    if a > PI || a <= -PI {
        a = (a + PI).rem_euclid(2.0 * PI) - PI;
        if a <= -PI {
            a += 2.0 * PI;
        }
    }
    a
}

/// Boresight direction of phase center `n`, `2 pi n / N`.
pub fn phase_center_direction(cfg: &RadarConfig, n: usize) -> Result<f64> {
    if n >= cfg.pulses {
        return Err(Error::IndexOutOfRange {
            index: n,
            count: cfg.pulses,
        });
    }
    Ok(n as f64 * cfg.angular_step())
}

/// Range and off-boresight angle from a phase center at azimuth
/// `center_azimuth` to the point `(azimuth, range)`.
///
/// The angle uses a two-argument arctangent so that phase centers facing
/// away from the point report `|theta| > pi/2` and receive zero gain.
#[inline]
pub fn range_angle_from(radius: f64, center_azimuth: f64, azimuth: f64, range: f64) -> (f64, f64) {
    let delta = wrap_angle(center_azimuth - azimuth);
    let (sin_d, cos_d) = delta.abs().sin_cos();
    let dist = (range * range + radius * radius - 2.0 * radius * range * cos_d).max(0.0).sqrt();
    let theta = (range * sin_d).atan2(range * cos_d - radius);
    (dist, theta)
}

/// `(R_n, theta_n)` for phase center `n` and a target.
pub fn target_range_angle(cfg: &RadarConfig, target: &TargetPolar, n: usize) -> Result<(f64, f64)> {
    let phi_n = phase_center_direction(cfg, n)?;
    Ok(range_angle_from(cfg.radius, phi_n, target.azimuth, target.range))
}

/// Phase centers that see a target at `target.range`, in the canonical frame
/// (target at `pi / 2`).
pub fn visibility_window(cfg: &RadarConfig, target: &TargetPolar) -> Result<ApertureWindow> {
    window_for_range(cfg, target.range)
}

/// Canonical visibility window for range `range`.
pub fn window_for_range(cfg: &RadarConfig, range: f64) -> Result<ApertureWindow> {
    if !(range > cfg.radius) {
        return Err(Error::TargetInsideRotor {
            range,
            radius: cfg.radius,
        });
    }
    let phi_v = (cfg.radius / range).acos();
    let step = cfg.angular_step();
    let n_min = ((FRAC_PI_2 - phi_v) / step).ceil() as i64;
    let n_max = ((FRAC_PI_2 + phi_v) / step).floor() as i64;
    Ok(ApertureWindow { n_min, n_max, phi_v })
}

/// Phase centers that see the point `(azimuth, range)`, as unwrapped indices
/// (reduce modulo `N` to address pulses). Equals [`window_for_range`] at
/// `azimuth = pi / 2`.
pub fn window_at(cfg: &RadarConfig, azimuth: f64, range: f64) -> Result<ApertureWindow> {
    if !(range > cfg.radius) {
        return Err(Error::TargetInsideRotor {
            range,
            radius: cfg.radius,
        });
    }
    let phi_v = (cfg.radius / range).acos();
    let step = cfg.angular_step();
    Ok(ApertureWindow {
        n_min: ((azimuth - phi_v) / step).ceil() as i64,
        n_max: ((azimuth + phi_v) / step).floor() as i64,
        phi_v,
    })
}

/// Steering vector `a(phi; R)` over `window`, with the nominal phase-center
/// azimuths `2 pi n / N`.
pub fn steering_vector(
    cfg: &RadarConfig,
    azimuth: f64,
    range: f64,
    window: &ApertureWindow,
) -> Result<SteeringVector> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let step = cfg.angular_step();
    let entries = steering_entries(cfg, azimuth, range, window.indices().map(|n| n as f64 * step));
    Ok(SteeringVector {
        window: *window,
        azimuth,
        range,
        entries,
    })
}

/// Steering entries for arbitrary (for example jittered) phase-center azimuths.
pub fn steering_entries(
    cfg: &RadarConfig,
    azimuth: f64,
    range: f64,
    center_azimuths: impl Iterator<Item = f64>,
) -> Vec<Complex64> {
    let two_k = 2.0 * cfg.wavenumber();
    center_azimuths
        .map(|phi_n| {
            let (dist, theta) = range_angle_from(cfg.radius, phi_n, azimuth, range);
            Complex64::from_polar(cfg.antenna.gain(theta), two_k * dist)
        })
        .collect()
}
