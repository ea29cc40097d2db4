use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rosar_core::io::{decode_img, decode_rif, decode_wgt, encode_rif};
use rosar_core::signal::range_fft;
use rosar_core::RadarConfig;
use tempfile::TempDir;

fn rosar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rosar"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = rosar(dir, args);
    assert!(
        out.status.success(),
        "rosar {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

/// Bin 4 is the nearest imageable bin and synthesizes in about a second.
fn near_bin_range() -> f64 {
    RadarConfig::default().bin_range(4)
}

#[test]
fn simulate_writes_a_full_revolution() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--out", "a.rif"]);
    let (data, cfg) = decode_rif(&fs::read(dir.path().join("a.rif")).unwrap()).unwrap();
    assert_eq!(data.pulses(), 800);
    assert_eq!(cfg, RadarConfig::default());
    assert!(data.data.iter().any(|v| v.norm() > 0.0));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "run.cfg", "scene.noise_power = 0.01\nseed = 7\n");
    let cfg = cfg.to_str().unwrap();
    ok(dir.path(), &["simulate", "-c", cfg, "--out", "a.rif"]);
    ok(dir.path(), &["simulate", "-c", cfg, "--out", "b.rif"]);
    assert_eq!(
        fs::read(dir.path().join("a.rif")).unwrap(),
        fs::read(dir.path().join("b.rif")).unwrap()
    );
}

#[test]
fn empty_scene_without_noise_is_all_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "run.cfg", "scene.targets =\nscene.noise_power = 0\n");
    ok(dir.path(), &["simulate", "-c", cfg.to_str().unwrap(), "--out", "z.rif"]);
    let (data, _) = decode_rif(&fs::read(dir.path().join("z.rif")).unwrap()).unwrap();
    assert!(data.data.iter().all(|v| v.re == 0.0 && v.im == 0.0));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "run.cfg", "radar.colour = red\n");
    let out = rosar(dir.path(), &["simulate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("radar.colour"));
}

#[test]
fn bad_arguments_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&rosar(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&rosar(dir.path(), &["image", "--backend", "XYZ"])), 1);
    assert_eq!(code(&rosar(dir.path(), &["synth", "--delta", "-1", "--bins", "4"])), 1);
    assert_eq!(code(&rosar(dir.path(), &["synth", "--delta", "0", "--bins", "2"])), 1);
    assert_eq!(code(&rosar(dir.path(), &["eval"])), 1);
    assert!(rosar(dir.path(), &["--help"]).status.success());
}

#[test]
fn missing_or_mismatched_inputs_are_data_errors() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&rosar(d, &["image", "--backend", "BPA", "--data", "nope.rif"])), 2);

    ok(d, &["simulate", "--out", "a.rif"]);
    let out = rosar(d, &["image", "--backend", "SAS", "--data", "a.rif", "--table", "nope.wgt"]);
    assert_eq!(code(&out), 2);

    let (data, cfg) = decode_rif(&fs::read(d.join("a.rif")).unwrap()).unwrap();
    fs::write(d.join("rc.rif"), encode_rif(&range_fft(&data, &cfg).unwrap(), &cfg)).unwrap();
    let out = rosar(d, &["image", "--backend", "BPA", "--data", "rc.rif"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("IF"));

    fs::write(d.join("junk.rif"), b"not a radar file").unwrap();
    assert_eq!(code(&rosar(d, &["image", "--backend", "BPA", "--data", "junk.rif"])), 2);
}

#[test]
fn config_round_trips_through_the_printer() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        "run.cfg",
        "synth.grid_step_deg = 0.25\nscene.targets = 45:1.5:0.5;120:3\nimage.grid = polar\nimage.polar_bins = 10-20\nseed = 42\n",
    );
    let first = ok(dir.path(), &["config", "-c", cfg.to_str().unwrap()]).stdout;
    let again = config(dir.path(), "again.cfg", &String::from_utf8(first.clone()).unwrap());
    let second = ok(dir.path(), &["config", "-c", again.to_str().unwrap()]).stdout;
    assert_eq!(first, second);
}

#[test]
fn calibration_without_jitter_is_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "run.cfg", "jitter.sigma_deg = 0\ncalibrate.draws = 200\n");
    ok(
        dir.path(),
        &["calibrate", "-c", cfg.to_str().unwrap(), "--bins", "40-42", "--out", "d.txt"],
    );
    let text = fs::read_to_string(dir.path().join("d.txt")).unwrap();
    let rows: Vec<_> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let delta: f64 = row.split_whitespace().nth(2).unwrap().parse().unwrap();
        assert_eq!(delta, 0.0, "{row}");
    }
}

/// One near-field scene, one synthesized bin: exercises synth, image and eval end to end.
#[test]
fn near_bin_pipeline() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let r = near_bin_range();
    let cfg = config(
        d,
        "run.cfg",
        &format!("scene.targets = 90:{r}\nimage.grid = polar\nimage.polar_bins = 4-4\nimage.threads = 2\n"),
    );
    let cfg = cfg.to_str().unwrap();
    ok(d, &["simulate", "-c", cfg, "--out", "scene.rif"]);
    ok(d, &["synth", "-c", cfg, "--delta", "0", "--bins", "4", "--out", "t1.wgt"]);
    ok(d, &["synth", "-c", cfg, "--delta", "0", "--bins", "4", "--out", "t2.wgt"]);
    let t1 = fs::read(d.join("t1.wgt")).unwrap();
    assert_eq!(t1, fs::read(d.join("t2.wgt")).unwrap(), "synthesis is deterministic");
    let table = decode_wgt(&t1).unwrap();
    assert_eq!(table.entries.keys().copied().collect::<Vec<_>>(), vec![4]);

    // A resumed run keeps the finished bin untouched.
    let resumed = ok(d, &["synth", "-c", cfg, "--delta", "0", "--bins", "4", "--resume", "--out", "t1.wgt"]);
    assert!(String::from_utf8_lossy(&resumed.stderr).is_empty());
    assert_eq!(fs::read(d.join("t1.wgt")).unwrap(), t1);
    // Settings must agree with the checkpoint.
    let out = rosar(d, &["synth", "-c", cfg, "--delta", "0.01", "--bins", "4", "--resume", "--out", "t1.wgt"]);
    assert!(out.status.success(), "delta is per entry, not a table setting");
    let other = config(d, "other.cfg", &format!("synth.eta = 0.001\nscene.targets = 90:{r}\n"));
    let out = rosar(
        d,
        &["synth", "-c", other.to_str().unwrap(), "--delta", "0", "--bins", "4", "--resume", "--out", "t1.wgt"],
    );
    assert_eq!(code(&out), 1);

    let mut peaks = Vec::new();
    for backend in ["BPA", "SAS", "FFT_BPA", "FFT_SAS", "RBPA", "FFT_RBPA"] {
        let img = format!("{backend}.img");
        ok(
            d,
            &["image", "-c", cfg, "--backend", backend, "--data", "scene.rif", "--table", "t2.wgt", "--out", &img],
        );
        assert!(d.join(format!("{backend}.pgm")).exists());
        let (image, _) = decode_img(&fs::read(d.join(&img)).unwrap()).unwrap();
        assert_eq!(image.threads, 2);
        peaks.push((backend, image.peak()));
    }
    let bpa = peaks[0].1;
    for (backend, peak) in &peaks[..4] {
        assert_eq!(*peak, bpa, "{backend} peak differs from BPA");
    }

    let (bpa_img, _) = decode_img(&fs::read(d.join("BPA.img")).unwrap()).unwrap();
    let (phi, _) = bpa_img.grid.polar_of(bpa.0, bpa.1);
    assert!((phi.to_degrees() - 90.0).abs() < 1.0, "BPA peak at {} deg", phi.to_degrees());

    let images: Vec<String> = peaks.iter().map(|(b, _)| format!("{b}.img")).collect();
    let mut args = vec!["eval", "-c", cfg, "--out", "report", "--pattern-table", "t2.wgt", "--bin", "4"];
    args.extend(images.iter().map(String::as_str));
    let out = ok(d, &args);
    let table_text = String::from_utf8(out.stdout).unwrap();
    for backend in ["BPA", "SAS", "FFT_BPA", "FFT_SAS", "RBPA", "FFT_RBPA"] {
        assert!(table_text.contains(backend), "{backend} missing from\n{table_text}");
    }
    let csv = fs::read_to_string(d.join("report.csv")).unwrap();
    assert!(csv.lines().count() > 6 * 4);
    let pattern = fs::read_to_string(d.join("report.bin4.pattern.csv")).unwrap();
    let peak = pattern
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!((peak.0 - 90.0).abs() < 0.5, "pattern peak at {} deg", peak.0);
}

#[test]
fn imaging_is_deterministic_apart_from_timing() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = config(d, "run.cfg", "image.grid = polar\nimage.polar_bins = 44-46\n");
    let cfg = cfg.to_str().unwrap();
    ok(d, &["simulate", "-c", cfg, "--out", "s.rif"]);
    ok(d, &["image", "-c", cfg, "--backend", "BPA", "--data", "s.rif", "--out", "a.img"]);
    ok(d, &["image", "-c", cfg, "--backend", "BPA", "--data", "s.rif", "--out", "b.img", "--threads", "1"]);
    let (a, _) = decode_img(&fs::read(d.join("a.img")).unwrap()).unwrap();
    let (b, _) = decode_img(&fs::read(d.join("b.img")).unwrap()).unwrap();
    assert_eq!(a.pixels, b.pixels);
    assert_eq!(fs::read(d.join("a.pgm")).unwrap(), fs::read(d.join("b.pgm")).unwrap());
}
