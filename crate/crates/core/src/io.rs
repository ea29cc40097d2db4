//! On-disk formats.
//!
//! Every file starts with a magic line (`RIF1`, `WGT1`, `IMG1`), then
//! `key=value` header lines, then one blank line, then a little-endian
//! binary payload. Angles in headers are radians; the key names carry units
//! where they are not SI base units. Floats are written in shortest
//! round-trip form, so header values survive a write/read cycle exactly.
//!
//! * `RIF1` payload: `rows * pulses` complex samples as interleaved
//!   `(re, im)` float64 in column-major order, then `pulses` float64 pulse
//!   azimuths.
//! * `WGT1` payload, per entry: `bin` u64, `range` f64, `delta` f64,
//!   `u_prime` f64, `slack_sum` f64, `verified` u64 (0 or 1), `n_min` i64,
//!   `n_max` i64, `iterations` u64, `pre_threshold_norm` f64, `nnz` u64, then
//!   `nnz` records of (window-relative index, re, im) as float64.
//! * `IMG1` payload: `rows * cols` complex pixels, row-major, interleaved
//!   `(re, im)` float64; polar grids append their azimuths then ranges.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::config::{Antenna, RadarConfig, SynthesisParams};
use crate::error::{Error, Result};
use crate::geometry::{window_for_range, ApertureWindow};
use crate::imaging::{Backend, ImageGrid, SarImage};
use crate::signal::{DataKind, DataMatrix};
use crate::synthesis::{WeightEntry, WeightTable};

pub const VERSION: u32 = 1;

/// Writes `bytes` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Format(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Ordered `key=value` header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    pairs: Vec<(String, String)>,
}

impl Header {
    fn push(&mut self, key: &str, value: impl ToString) {
        self.pairs.push((key.to_string(), value.to_string()));
    }

    fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, format!("{value:?}"));
    }

    fn render(&self, magic: &str) -> Vec<u8> {
        let mut s = format!("{magic}\n");
        for (k, v) in &self.pairs {
            s.push_str(&format!("{k}={v}\n"));
        }
        s.push('\n');
        s.into_bytes()
    }

    /// Splits `bytes` into the header and the payload that follows the
    /// blank line, checking the magic line and the version.
    fn split<'a>(bytes: &'a [u8], magic: &str) -> Result<(Header, &'a [u8])> {
        let end = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| Error::Format(format!("{magic}: missing blank line after header")))?;
        let text = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Format(format!("{magic}: header is not UTF-8")))?;
        let mut lines = text.lines();
        if lines.next() != Some(magic) {
            return Err(Error::Format(format!("not a {magic} file")));
        }
        let mut h = Header::default();
        for line in lines {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("{magic}: malformed header line {line:?}")))?;
            if h.pairs.iter().any(|(key, _)| key == k) {
                return Err(Error::Format(format!("{magic}: duplicate header key {k}")));
            }
            h.push(k.trim(), v.trim());
        }
        let version: u32 = h.parse("version")?;
        if version != VERSION {
            return Err(Error::Format(format!("{magic}: unsupported version {version}")));
        }
        Ok((h, &bytes[end + 2..]))
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Format(format!("missing header key {key}")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::Format(format!("header key {key}: cannot parse {v:?}")))
    }

    /// Rejects keys outside `known`.
    fn only(&self, known: &[&str]) -> Result<()> {
        match self.pairs.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            Some((k, _)) => Err(Error::Format(format!("unknown header key {k}"))),
            None => Ok(()),
        }
    }
}

const CFG_KEYS: [&str; 10] = [
    "radius_m",
    "pulses_per_turn",
    "carrier_hz",
    "slope_hz_per_s",
    "sample_rate_hz",
    "samples",
    "range_bins",
    "t_start_s",
    "c_m_per_s",
    "antenna",
];

fn push_cfg(h: &mut Header, cfg: &RadarConfig) {
    h.push_f64("radius_m", cfg.radius);
    h.push("pulses_per_turn", cfg.pulses);
    h.push_f64("carrier_hz", cfg.carrier);
    h.push_f64("slope_hz_per_s", cfg.slope);
    h.push_f64("sample_rate_hz", cfg.sample_rate);
    h.push("samples", cfg.samples);
    h.push("range_bins", cfg.range_bins);
    h.push_f64("t_start_s", cfg.t_start);
    h.push_f64("c_m_per_s", cfg.c);
    h.push("antenna", cfg.antenna.name());
}

fn read_cfg(h: &Header) -> Result<RadarConfig> {
    let cfg = RadarConfig {
        radius: h.parse("radius_m")?,
        pulses: h.parse("pulses_per_turn")?,
        carrier: h.parse("carrier_hz")?,
        slope: h.parse("slope_hz_per_s")?,
        sample_rate: h.parse("sample_rate_hz")?,
        samples: h.parse("samples")?,
        range_bins: h.parse("range_bins")?,
        t_start: h.parse("t_start_s")?,
        c: h.parse("c_m_per_s")?,
        antenna: Antenna::parse(h.get("antenna")?)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn known<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut k: Vec<&str> = vec!["version"];
    k.extend(CFG_KEYS);
    k.extend_from_slice(extra);
    k
}

/// Little-endian payload reader.
struct Reader<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Format(format!("{}: payload truncated", self.what)));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn complex(&mut self) -> Result<Complex64> {
        Ok(Complex64::new(self.f64()?, self.f64()?))
    }

    fn finish(&self) -> Result<()> {
        if !self.buf.is_empty() {
            return Err(Error::Format(format!("{}: {} trailing bytes", self.what, self.buf.len())));
        }
        Ok(())
    }
}

fn put_complex(out: &mut Vec<u8>, z: Complex64) {
    out.extend_from_slice(&z.re.to_le_bytes());
    out.extend_from_slice(&z.im.to_le_bytes());
}

/// Serializes a data matrix together with the configuration it belongs to.
pub fn encode_rif(data: &DataMatrix, cfg: &RadarConfig) -> Vec<u8> {
    let mut h = Header::default();
    h.push("version", VERSION);
    h.push("kind", data.kind.name());
    h.push("rows", data.rows);
    h.push("pulses", data.pulses());
    push_cfg(&mut h, cfg);
    let mut out = h.render("RIF1");
    out.reserve(16 * data.data.len() + 8 * data.pulses());
    for &z in &data.data {
        put_complex(&mut out, z);
    }
    for a in &data.pulse_azimuths {
        out.extend_from_slice(&a.to_le_bytes());
    }
    out
}

pub fn decode_rif(bytes: &[u8]) -> Result<(DataMatrix, RadarConfig)> {
    let (h, payload) = Header::split(bytes, "RIF1")?;
    h.only(&known(&["kind", "rows", "pulses"]))?;
    let cfg = read_cfg(&h)?;
    let kind = DataKind::parse(h.get("kind")?)?;
    let rows: usize = h.parse("rows")?;
    let pulses: usize = h.parse("pulses")?;
    let expected = rows
        .checked_mul(pulses)
        .and_then(|n| n.checked_mul(16))
        .and_then(|n| n.checked_add(8 * pulses))
        .ok_or_else(|| Error::Format("RIF1: dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "RIF1: payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let mut r = Reader { buf: payload, what: "RIF1" };
    let data = (0..rows * pulses).map(|_| r.complex()).collect::<Result<Vec<_>>>()?;
    let az = (0..pulses).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    let m = DataMatrix::new(kind, rows, data, az)?;
    m.check_against(&cfg)?;
    Ok((m, cfg))
}

const PARAM_KEYS: [&str; 9] = [
    "mainlobe_half_width_rad",
    "eta",
    "grid_step_rad",
    "lambda_b",
    "u_min",
    "max_iter",
    "stop_tol",
    "zero_threshold",
    "b_min",
];

pub fn encode_wgt(table: &WeightTable) -> Vec<u8> {
    let p = &table.params;
    let mut h = Header::default();
    h.push("version", VERSION);
    push_cfg(&mut h, &table.cfg);
    h.push_f64("mainlobe_half_width_rad", p.mainlobe_half_width);
    h.push_f64("eta", p.eta);
    h.push_f64("grid_step_rad", p.grid_step);
    h.push_f64("lambda_b", p.lambda_b);
    h.push_f64("u_min", p.u_min);
    h.push("max_iter", p.max_iter);
    h.push_f64("stop_tol", p.stop_tol);
    h.push_f64("zero_threshold", p.zero_threshold);
    h.push_f64("b_min", p.b_min);
    h.push("entries", table.entries.len());
    let mut out = h.render("WGT1");
    for e in table.entries.values() {
        let nz = e.nonzeros();
        out.extend_from_slice(&(e.bin as u64).to_le_bytes());
        for v in [e.range, e.delta, e.u_prime, e.slack_sum] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(e.verified as u64).to_le_bytes());
        out.extend_from_slice(&e.window.n_min.to_le_bytes());
        out.extend_from_slice(&e.window.n_max.to_le_bytes());
        out.extend_from_slice(&(e.iterations as u64).to_le_bytes());
        out.extend_from_slice(&e.pre_threshold_norm.to_le_bytes());
        out.extend_from_slice(&(nz.len() as u64).to_le_bytes());
        for (k, w) in nz {
            out.extend_from_slice(&(k as f64).to_le_bytes());
            put_complex(&mut out, w);
        }
    }
    out
}

pub fn decode_wgt(bytes: &[u8]) -> Result<WeightTable> {
    let (h, payload) = Header::split(bytes, "WGT1")?;
    let mut extra = PARAM_KEYS.to_vec();
    extra.push("entries");
    h.only(&known(&extra))?;
    let cfg = read_cfg(&h)?;
    let params = SynthesisParams {
        mainlobe_half_width: h.parse("mainlobe_half_width_rad")?,
        eta: h.parse("eta")?,
        grid_step: h.parse("grid_step_rad")?,
        lambda_b: h.parse("lambda_b")?,
        u_min: h.parse("u_min")?,
        max_iter: h.parse("max_iter")?,
        stop_tol: h.parse("stop_tol")?,
        zero_threshold: h.parse("zero_threshold")?,
        b_min: h.parse("b_min")?,
    };
    params.validate()?;
    let count: usize = h.parse("entries")?;
    let mut table = WeightTable::new(cfg, params);
    let mut r = Reader { buf: payload, what: "WGT1" };
    for _ in 0..count {
        let bin = r.u64()? as usize;
        let (range, delta, u_prime, slack_sum) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let verified = match r.u64()? {
            0 => false,
            1 => true,
            v => return Err(Error::Format(format!("WGT1: bin {bin}: verified flag {v}"))),
        };
        let (n_min, n_max) = (r.i64()?, r.i64()?);
        let iterations = r.u64()? as usize;
        let pre_threshold_norm = r.f64()?;
        let nnz = r.u64()? as usize;
        let canonical = window_for_range(&cfg, range)?;
        let window = ApertureWindow {
            n_min,
            n_max,
            phi_v: canonical.phi_v,
        };
        if window.is_empty() || nnz > window.len() {
            return Err(Error::Format(format!("WGT1: bin {bin}: {nnz} weights for window [{n_min}, {n_max}]")));
        }
        let mut weights = vec![Complex64::new(0.0, 0.0); window.len()];
        for _ in 0..nnz {
            let k = r.f64()?;
            let w = r.complex()?;
            if !(k >= 0.0 && k.fract() == 0.0 && (k as usize) < weights.len()) {
                return Err(Error::Format(format!("WGT1: bin {bin}: weight index {k}")));
            }
            weights[k as usize] = w;
        }
        table.insert(WeightEntry {
            bin,
            range,
            delta,
            u_prime,
            slack_sum,
            verified,
            window,
            weights,
            pre_threshold_norm,
            iterations,
        });
    }
    r.finish()?;
    if table.entries.len() != count {
        return Err(Error::Format("WGT1: duplicate bins".into()));
    }
    Ok(table)
}

/// Serializes an image with the configuration used to form it.
pub fn encode_img(img: &SarImage, cfg: &RadarConfig) -> Vec<u8> {
    let (rows, cols) = img.shape();
    let mut h = Header::default();
    h.push("version", VERSION);
    push_cfg(&mut h, cfg);
    h.push("backend", img.backend.name());
    h.push_f64("seconds", img.seconds);
    h.push("threads", img.threads);
    h.push("table_hash", img.table_hash.as_deref().unwrap_or("none"));
    h.push("rows", rows);
    h.push("cols", cols);
    match &img.grid {
        ImageGrid::Polar { .. } => h.push("grid", "polar"),
        ImageGrid::Cartesian {
            extent_x,
            extent_y,
            step,
        } => {
            h.push("grid", "cartesian");
            h.push_f64("extent_x_m", *extent_x);
            h.push_f64("extent_y_m", *extent_y);
            h.push_f64("step_m", *step);
        }
    }
    let mut out = h.render("IMG1");
    for &p in &img.pixels {
        put_complex(&mut out, p);
    }
    if let ImageGrid::Polar { azimuths, ranges } = &img.grid {
        for v in azimuths.iter().chain(ranges) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_img(bytes: &[u8]) -> Result<(SarImage, RadarConfig)> {
    let (h, payload) = Header::split(bytes, "IMG1")?;
    h.only(&known(&[
        "backend",
        "seconds",
        "threads",
        "table_hash",
        "rows",
        "cols",
        "grid",
        "extent_x_m",
        "extent_y_m",
        "step_m",
    ]))?;
    let cfg = read_cfg(&h)?;
    let rows: usize = h.parse("rows")?;
    let cols: usize = h.parse("cols")?;
    let mut r = Reader { buf: payload, what: "IMG1" };
    if payload.len() < rows.saturating_mul(cols).saturating_mul(16) {
        return Err(Error::Format("IMG1: payload truncated".into()));
    }
    let pixels = (0..rows * cols).map(|_| r.complex()).collect::<Result<Vec<_>>>()?;
    let grid = match h.get("grid")? {
        "polar" => {
            let azimuths = (0..cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let ranges = (0..rows).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            ImageGrid::Polar { azimuths, ranges }
        }
        "cartesian" => ImageGrid::Cartesian {
            extent_x: h.parse("extent_x_m")?,
            extent_y: h.parse("extent_y_m")?,
            step: h.parse("step_m")?,
        },
        other => return Err(Error::Format(format!("IMG1: unknown grid {other:?}"))),
    };
    r.finish()?;
    if grid.shape() != (rows, cols) {
        return Err(Error::Format(format!(
            "IMG1: grid shape {:?} disagrees with {rows}x{cols}",
            grid.shape()
        )));
    }
    let seconds: f64 = h.parse("seconds")?;
    if !(seconds >= 0.0) {
        return Err(Error::Format("IMG1: negative wall-clock".into()));
    }
    let hash = h.get("table_hash")?;
    Ok((
        SarImage {
            grid,
            pixels,
            backend: Backend::parse(h.get("backend")?)?,
            seconds,
            table_hash: (hash != "none").then(|| hash.to_string()),
            threads: h.parse("threads")?,
        },
        cfg,
    ))
}

/// Binary graymap (`P5`) of `20 log10(|I| / max |I|)`, mapping
/// `[floor_db, 0]` linearly onto `[0, 255]`.
pub fn encode_pgm(img: &SarImage, floor_db: f64) -> Result<Vec<u8>> {
    if !(floor_db < 0.0) {
        return Err(Error::InvalidConfig("dynamic-range floor must be negative dB".into()));
    }
    let (rows, cols) = img.shape();
    let peak = img.pixels.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(img.pixels.iter().map(|p| {
        if peak == 0.0 || p.norm() == 0.0 {
            return 0u8;
        }
        let db = 20.0 * (p.norm() / peak).log10();
        (255.0 * (1.0 - db / floor_db)).round().clamp(0.0, 255.0) as u8
    }));
    Ok(out)
}

/// Key/value text files in the header syntax (no magic, no payload), used
/// for run configurations and delta vectors.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key=value, found {raw:?}", i + 1)))?;
        let k = k.trim().to_string();
        if map.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Format(format!("line {}: duplicate key {k}", i + 1)));
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::JitterModel;
    use crate::imaging::{image, ImageOptions};
    use crate::signal::{simulate_if, PointScene};
    use std::f64::consts::FRAC_PI_2;

    fn cfg() -> RadarConfig {
        RadarConfig {
            pulses: 60,
            samples: 16,
            range_bins: 32,
            ..RadarConfig::default()
        }
    }

    #[test]
    fn rif_round_trip_and_rejections() {
        let c = cfg();
        let data = simulate_if(&c, &PointScene::single(1.0, 1.0), &JitterModel::from_degrees(0.1, 3)).unwrap();
        let bytes = encode_rif(&data, &c);
        let (back, c2) = decode_rif(&bytes).unwrap();
        assert_eq!(back, data);
        assert_eq!(c2, c);

        let text = String::from_utf8_lossy(&bytes[..64]).to_string();
        assert!(text.starts_with("RIF1\nversion=1\n"));
        let mut v2 = bytes.clone();
        v2[13] = b'2';
        assert!(matches!(decode_rif(&v2), Err(Error::Format(m)) if m.contains("version")));
        assert!(decode_rif(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_wgt(&bytes).is_err());
    }

    #[test]
    fn wgt_round_trip_preserves_digest() {
        let c = RadarConfig::default();
        let mut table = WeightTable::new(c, SynthesisParams::default());
        for bin in [30usize, 45] {
            let win = window_for_range(&c, c.bin_range(bin)).unwrap();
            let mut w: Vec<Complex64> = (0..win.len()).map(|k| Complex64::new(k as f64, -0.5)).collect();
            w[3] = Complex64::new(0.0, 0.0);
            let mut e = WeightEntry::from_weights(&c, bin, w).unwrap();
            e.verified = bin == 45;
            e.delta = 0.035;
            e.iterations = 7;
            table.insert(e);
        }
        let back = decode_wgt(&encode_wgt(&table)).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.digest(), table.digest());
    }

    #[test]
    fn img_round_trip_both_grids() {
        let c = cfg();
        let data = simulate_if(&c, &PointScene::single(FRAC_PI_2, 1.0), &JitterModel::none()).unwrap();
        for grid in [
            ImageGrid::cartesian(2.0, 1.0, 0.25),
            ImageGrid::polar(vec![1.0, 1.5, 2.0], vec![0.8, 1.0]),
        ] {
            let img = image(Backend::Bpa, &data, &c, &grid, None, None, &ImageOptions::default()).unwrap();
            let (back, c2) = decode_img(&encode_img(&img, &c)).unwrap();
            assert_eq!(back, img);
            assert_eq!(c2, c);
        }
    }

    #[test]
    fn pgm_maps_peak_to_white_and_floor_to_black() {
        let grid = ImageGrid::polar(vec![0.0, 1.0, 2.0], vec![1.0]);
        let img = SarImage {
            grid,
            pixels: vec![Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0), Complex64::new(1e-3, 0.0)],
            backend: Backend::Bpa,
            seconds: 0.0,
            table_hash: None,
            threads: 1,
        };
        let pgm = encode_pgm(&img, -40.0).unwrap();
        assert!(pgm.starts_with(b"P5\n3 1\n255\n"));
        assert_eq!(&pgm[pgm.len() - 3..], &[255, 128, 0]);
        assert!(encode_pgm(&img, 0.0).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("rosar-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.bin");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn key_values_skip_comments_and_reject_duplicates() {
        let m = parse_key_values("# c\na = 1\n\nb=x # tail\n").unwrap();
        assert_eq!(m["a"], "1");
        assert_eq!(m["b"], "x");
        assert!(parse_key_values("a=1\na=2").is_err());
        assert!(parse_key_values("novalue").is_err());
    }
}
