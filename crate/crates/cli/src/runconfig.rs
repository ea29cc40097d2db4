//! Run configuration: one `key = value` text file covering the radar, the
//! synthesis, the jitter model, the scene, the image grid, the seed and the
//! output paths. Angles are in degrees here and radians everywhere else.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rosar_core::io::parse_key_values;
use rosar_core::{
    Antenna, Error, ImageGrid, JitterModel, PointScene, PointTarget, RadarConfig, Result, SynthesisParams, TargetPolar,
    Complex64, DEFAULT_JITTER_SIGMA_DEG,
};

/// Cartesian grid side used by the imaging comparison, meters.
pub const SCENE_EXTENT_M: f64 = 9.8756;

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Cartesian { extent_m: f64, step_m: f64 },
    /// Every phase-center azimuth over an inclusive range-bin span.
    Polar { first_bin: usize, last_bin: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub radar: RadarConfig,
    pub synth: SynthesisParams,
    pub jitter_sigma_deg: f64,
    pub calib_percentile: f64,
    pub calib_draws: usize,
    /// `(azimuth deg, range m, amplitude)`.
    pub targets: Vec<(f64, f64, f64)>,
    pub noise_power: f64,
    pub grid: GridSpec,
    pub floor_db: f64,
    pub threads: usize,
    pub seed: u64,
    pub data_path: PathBuf,
    pub deltas_path: PathBuf,
    pub table_path: PathBuf,
    pub image_dir: PathBuf,
    pub report_path: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            radar: RadarConfig::default(),
            synth: SynthesisParams::default(),
            jitter_sigma_deg: DEFAULT_JITTER_SIGMA_DEG,
            calib_percentile: 0.99,
            calib_draws: 10_000,
            targets: vec![(90.0, 2.0, 1.0)],
            noise_power: 0.0,
            grid: GridSpec::Cartesian {
                extent_m: SCENE_EXTENT_M,
                step_m: 0.04,
            },
            floor_db: -40.0,
            threads: 0,
            seed: 1,
            data_path: "data.rif".into(),
            deltas_path: "deltas.txt".into(),
            table_path: "table.wgt".into(),
            image_dir: "images".into(),
            report_path: "report".into(),
        }
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {v:?}")))
}

/// `az_deg:range_m[:amplitude]` items separated by `;`.
pub fn parse_targets(spec: &str) -> Result<Vec<(f64, f64, f64)>> {
    spec.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            if !(2..=3).contains(&parts.len()) {
                return Err(Error::InvalidConfig(format!(
                    "target {item:?}: expected azimuth_deg:range_m[:amplitude]"
                )));
            }
            let amp = parts.get(2).map(|a| parse_num("amplitude", a)).transpose()?.unwrap_or(1.0);
            Ok((parse_num("azimuth", parts[0])?, parse_num("range", parts[1])?, amp))
        })
        .collect()
}

fn render_targets(t: &[(f64, f64, f64)]) -> String {
    t.iter()
        .map(|(a, r, m)| format!("{}:{}:{}", fmt_f(*a), fmt_f(*r), fmt_f(*m)))
        .collect::<Vec<_>>()
        .join(";")
}

/// Inclusive span `a-b`, or a single bin.
pub fn parse_span(spec: &str) -> Result<(usize, usize)> {
    let (a, b) = match spec.split_once('-') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (spec.trim(), spec.trim()),
    };
    let (a, b) = (parse_num("bin", a)?, parse_num("bin", b)?);
    if a > b {
        return Err(Error::InvalidConfig(format!("empty bin span {spec:?}")));
    }
    Ok((a, b))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = parse_key_values(text)?;
        let mut c = RunConfig::default();
        let mut take = |key: &str| map.remove(key);
        macro_rules! set {
            ($key:literal, $dst:expr) => {
                if let Some(v) = take($key) {
                    $dst = parse_num($key, &v)?;
                }
            };
            ($key:literal, $dst:expr, deg) => {
                if let Some(v) = take($key) {
                    $dst = parse_num::<f64>($key, &v)?.to_radians();
                }
            };
        }
        set!("radar.radius_m", c.radar.radius);
        set!("radar.pulses", c.radar.pulses);
        set!("radar.carrier_hz", c.radar.carrier);
        set!("radar.slope_hz_per_s", c.radar.slope);
        set!("radar.sample_rate_hz", c.radar.sample_rate);
        set!("radar.samples", c.radar.samples);
        set!("radar.range_bins", c.radar.range_bins);
        set!("radar.t_start_s", c.radar.t_start);
        set!("radar.c_m_per_s", c.radar.c);
        if let Some(v) = take("radar.antenna") {
            c.radar.antenna = Antenna::parse(&v)?;
        }
        set!("synth.mainlobe_half_width_deg", c.synth.mainlobe_half_width, deg);
        set!("synth.eta", c.synth.eta);
        set!("synth.grid_step_deg", c.synth.grid_step, deg);
        set!("synth.lambda_b", c.synth.lambda_b);
        set!("synth.u_min", c.synth.u_min);
        set!("synth.max_iter", c.synth.max_iter);
        set!("synth.stop_tol", c.synth.stop_tol);
        set!("synth.zero_threshold", c.synth.zero_threshold);
        set!("synth.b_min", c.synth.b_min);
        set!("jitter.sigma_deg", c.jitter_sigma_deg);
        set!("calibrate.percentile", c.calib_percentile);
        set!("calibrate.draws", c.calib_draws);
        if let Some(v) = take("scene.targets") {
            c.targets = parse_targets(&v)?;
        }
        set!("scene.noise_power", c.noise_power);
        let mode = take("image.grid");
        let extent = take("image.extent_m");
        let step = take("image.step_m");
        let bins = take("image.polar_bins");
        match mode.as_deref().unwrap_or("cartesian") {
            "cartesian" => {
                if bins.is_some() {
                    return Err(Error::InvalidConfig("image.polar_bins needs image.grid = polar".into()));
                }
                c.grid = GridSpec::Cartesian {
                    extent_m: extent.map(|v| parse_num("image.extent_m", &v)).transpose()?.unwrap_or(SCENE_EXTENT_M),
                    step_m: step.map(|v| parse_num("image.step_m", &v)).transpose()?.unwrap_or(0.04),
                };
            }
            "polar" => {
                if extent.is_some() || step.is_some() {
                    return Err(Error::InvalidConfig("image.extent_m and image.step_m need image.grid = cartesian".into()));
                }
                let (first_bin, last_bin) = match bins {
                    Some(b) => parse_span(&b)?,
                    None => {
                        let all = c.radar.imageable_bins();
                        (*all.first().unwrap_or(&0), *all.last().unwrap_or(&0))
                    }
                };
                c.grid = GridSpec::Polar { first_bin, last_bin };
            }
            other => return Err(Error::InvalidConfig(format!("image.grid: unknown mode {other:?}"))),
        }
        set!("image.floor_db", c.floor_db);
        set!("image.threads", c.threads);
        set!("seed", c.seed);
        for (key, dst) in [
            ("paths.data", &mut c.data_path),
            ("paths.deltas", &mut c.deltas_path),
            ("paths.table", &mut c.table_path),
            ("paths.image_dir", &mut c.image_dir),
            ("paths.report", &mut c.report_path),
        ] {
            if let Some(v) = map.remove(key) {
                *dst = v.into();
            }
        }
        if let Some(k) = map.keys().next() {
            return Err(Error::InvalidConfig(format!("unknown configuration key {k:?}")));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.synth.validate()?;
        self.jitter().validate()?;
        if !(self.calib_percentile > 0.0 && self.calib_percentile < 1.0) {
            return Err(Error::InvalidConfig("calibrate.percentile must lie in (0, 1)".into()));
        }
        if !(self.noise_power >= 0.0) {
            return Err(Error::InvalidConfig("scene.noise_power must be non-negative".into()));
        }
        if !(self.floor_db < 0.0) {
            return Err(Error::InvalidConfig("image.floor_db must be negative".into()));
        }
        self.scene().validate()?;
        self.image_grid()?.validate(&self.radar)
    }

    pub fn serialize(&self) -> String {
        let mut s = String::from("# rosar run configuration (angles in degrees)\n");
        let r = &self.radar;
        let p = &self.synth;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("radar.radius_m", fmt_f(r.radius));
        kv("radar.pulses", r.pulses.to_string());
        kv("radar.carrier_hz", fmt_f(r.carrier));
        kv("radar.slope_hz_per_s", fmt_f(r.slope));
        kv("radar.sample_rate_hz", fmt_f(r.sample_rate));
        kv("radar.samples", r.samples.to_string());
        kv("radar.range_bins", r.range_bins.to_string());
        kv("radar.t_start_s", fmt_f(r.t_start));
        kv("radar.c_m_per_s", fmt_f(r.c));
        kv("radar.antenna", r.antenna.name().to_string());
        kv("synth.mainlobe_half_width_deg", fmt_f(p.mainlobe_half_width.to_degrees()));
        kv("synth.eta", fmt_f(p.eta));
        kv("synth.grid_step_deg", fmt_f(p.grid_step.to_degrees()));
        kv("synth.lambda_b", fmt_f(p.lambda_b));
        kv("synth.u_min", fmt_f(p.u_min));
        kv("synth.max_iter", p.max_iter.to_string());
        kv("synth.stop_tol", fmt_f(p.stop_tol));
        kv("synth.zero_threshold", fmt_f(p.zero_threshold));
        kv("synth.b_min", fmt_f(p.b_min));
        kv("jitter.sigma_deg", fmt_f(self.jitter_sigma_deg));
        kv("calibrate.percentile", fmt_f(self.calib_percentile));
        kv("calibrate.draws", self.calib_draws.to_string());
        kv("scene.targets", render_targets(&self.targets));
        kv("scene.noise_power", fmt_f(self.noise_power));
        match &self.grid {
            GridSpec::Cartesian { extent_m, step_m } => {
                kv("image.grid", "cartesian".into());
                kv("image.extent_m", fmt_f(*extent_m));
                kv("image.step_m", fmt_f(*step_m));
            }
            GridSpec::Polar { first_bin, last_bin } => {
                kv("image.grid", "polar".into());
                kv("image.polar_bins", format!("{first_bin}-{last_bin}"));
            }
        }
        kv("image.floor_db", fmt_f(self.floor_db));
        kv("image.threads", self.threads.to_string());
        kv("seed", self.seed.to_string());
        kv("paths.data", self.data_path.display().to_string());
        kv("paths.deltas", self.deltas_path.display().to_string());
        kv("paths.table", self.table_path.display().to_string());
        kv("paths.image_dir", self.image_dir.display().to_string());
        kv("paths.report", self.report_path.display().to_string());
        s
    }

    pub fn jitter(&self) -> JitterModel {
        JitterModel::from_degrees(self.jitter_sigma_deg, rosar_core::rng::derive_seed(self.seed, "jitter"))
    }

    pub fn scene(&self) -> PointScene {
        PointScene {
            targets: self
                .targets
                .iter()
                .map(|&(az, r, amp)| PointTarget {
                    position: TargetPolar::new(az.to_radians(), r),
                    reflectivity: Complex64::new(amp, 0.0),
                })
                .collect(),
            noise_power: self.noise_power,
            noise_seed: rosar_core::rng::derive_seed(self.seed, "noise"),
        }
    }

    pub fn random_seed(&self) -> u64 {
        rosar_core::rng::derive_seed(self.seed, "random-baseline")
    }

    pub fn image_grid(&self) -> Result<ImageGrid> {
        Ok(match &self.grid {
            GridSpec::Cartesian { extent_m, step_m } => ImageGrid::cartesian(*extent_m, *extent_m, *step_m),
            GridSpec::Polar { first_bin, last_bin } => {
                let bins: Vec<usize> = (*first_bin..=*last_bin).collect();
                ImageGrid::polar_bins(&self.radar, &bins)
            }
        })
    }
}

/// Per-bin `Delta_R` values, one `bin range_m delta` line each.
pub fn render_deltas(rows: &[(usize, f64, f64)]) -> String {
    let mut s = String::from("# bin range_m delta\n");
    for (bin, r, d) in rows {
        let _ = writeln!(s, "{bin} {} {}", fmt_f(*r), fmt_f(*d));
    }
    s
}

pub fn parse_deltas(text: &str) -> Result<BTreeMap<usize, f64>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Format(format!("deltas line {}: expected `bin range delta`", i + 1)));
        }
        let bin: usize = parse_num("bin", f[0])?;
        let delta: f64 = parse_num("delta", f[2])?;
        if !(delta >= 0.0) {
            return Err(Error::Format(format!("deltas line {}: negative delta", i + 1)));
        }
        out.insert(bin, delta);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let text = c.serialize();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.serialize(), text);
    }

    #[test]
    fn degrees_convert_at_the_boundary() {
        let c = RunConfig::parse("synth.grid_step_deg = 1\nsynth.mainlobe_half_width_deg=2").unwrap();
        assert!((c.synth.grid_step - 1f64.to_radians()).abs() < 1e-15);
        assert!((c.synth.mainlobe_half_width - 2f64.to_radians()).abs() < 1e-15);
        assert!((c.jitter().sigma - 0.086f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn unknown_and_conflicting_keys_are_rejected() {
        assert!(RunConfig::parse("radar.pulse = 10").is_err());
        assert!(RunConfig::parse("image.polar_bins = 3-5").is_err());
        assert!(RunConfig::parse("image.grid = polar\nimage.step_m = 0.1").is_err());
        assert!(RunConfig::parse("synth.eta = 2").is_err());
    }

    #[test]
    fn polar_round_trip_and_scene() {
        let c = RunConfig::parse("image.grid = polar\nimage.polar_bins = 40-50\nscene.targets = 90:2; 45:1.5:0.5").unwrap();
        assert_eq!(c.grid, GridSpec::Polar { first_bin: 40, last_bin: 50 });
        assert_eq!(RunConfig::parse(&c.serialize()).unwrap(), c);
        assert_eq!(c.scene().targets.len(), 2);
        assert_eq!(c.image_grid().unwrap().shape(), (11, 800));
    }

    #[test]
    fn deltas_round_trip() {
        let rows = vec![(4, 0.17647, 0.5), (45, 1.985, 0.035)];
        let m = parse_deltas(&render_deltas(&rows)).unwrap();
        assert_eq!(m[&45], 0.035);
        assert_eq!(m.len(), 2);
        assert!(parse_deltas("1 2").is_err());
    }
}
