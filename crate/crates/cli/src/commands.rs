use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use rosar_core::imaging::{image, Backend, ImageOptions, SarImage};
use rosar_core::io::{
    decode_img, decode_rif, decode_wgt, encode_img, encode_pgm, encode_rif, encode_wgt, write_atomic,
};
use rosar_core::metrics::{
    array_pattern, boresight_angles, format_csv, format_table, half_mainlobe_width, image_entropy, image_pisr,
    pattern_pisr, MetricRecord,
};
use rosar_core::signal::{range_fft, simulate_if};
use rosar_core::synthesis::{calibrate_delta, sca_solve, WeightTable};
use rosar_core::{DataKind, DataMatrix, Error, RadarConfig};

use crate::runconfig::{parse_deltas, parse_span, parse_targets, render_deltas, RunConfig};
use crate::{Command, Common};

/// A failed command: exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidConfig(_) => 1,
            Error::Solver { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn read(path: &Path) -> Outcome<Vec<u8>> {
    fs::read(path).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure {
            code: 2,
            message: format!("{}: {e}", dir.display()),
        })?;
    }
    write_atomic(path, bytes).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn load_config(common: &Common) -> Outcome<RunConfig> {
    let mut rc = match &common.config {
        Some(p) => {
            let text = String::from_utf8(read(p)?).map_err(|_| usage(format!("{}: not UTF-8", p.display())))?;
            RunConfig::parse(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(t) = common.threads {
        rc.threads = t;
    }
    Ok(rc)
}

fn bins_of(spec: &Option<String>, cfg: &RadarConfig) -> Outcome<Vec<usize>> {
    let all = cfg.imageable_bins();
    match spec {
        None => Ok(all),
        Some(s) => {
            let (a, b) = parse_span(s).map_err(|e| usage(e.to_string()))?;
            if let Some(bad) = (a..=b).find(|x| !all.contains(x)) {
                return Err(usage(format!(
                    "bin {bad} is not imageable (range {:.4} m)",
                    cfg.bin_range(bad)
                )));
            }
            Ok((a..=b).collect())
        }
    }
}

fn pool(threads: usize) -> Outcome<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| usage(format!("thread pool: {e}")))
}

fn load_table(path: &Path) -> Outcome<WeightTable> {
    decode_wgt(&read(path)?).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn load_data(path: &Path) -> Outcome<(DataMatrix, RadarConfig)> {
    decode_rif(&read(path)?).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

pub fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Config { common } => {
            print!("{}", load_config(&common)?.serialize());
            Ok(())
        }
        Command::Simulate { common, scene, out } => simulate(&common, scene, out),
        Command::Calibrate { common, bins, out } => calibrate(&common, bins, out),
        Command::Synth {
            common,
            deltas,
            delta,
            bins,
            resume,
            out,
        } => synth(&common, deltas, delta, bins, resume, out),
        Command::Image {
            common,
            data,
            backend,
            table,
            strict,
            out,
        } => image_cmd(&common, data, &backend, table, strict, out),
        Command::Eval {
            common,
            images,
            mainlobe_deg,
            pattern_table,
            bin,
            out,
        } => eval(&common, &images, mainlobe_deg, pattern_table, bin, out),
        Command::Bench {
            common,
            data,
            table,
            out,
        } => bench(&common, data, table, out),
    }
}

fn simulate(common: &Common, scene: Option<String>, out: Option<PathBuf>) -> Outcome {
    let mut rc = load_config(common)?;
    if let Some(s) = scene {
        rc.targets = parse_targets(&s).map_err(|e| usage(e.to_string()))?;
    }
    let data = pool(rc.threads)?.install(|| simulate_if(&rc.radar, &rc.scene(), &rc.jitter()))?;
    let out = out.unwrap_or(rc.data_path.clone());
    write(&out, &encode_rif(&data, &rc.radar))?;
    println!(
        "wrote {} ({} samples x {} pulses, {} targets)",
        out.display(),
        data.rows,
        data.pulses(),
        rc.targets.len()
    );
    Ok(())
}

fn calibrate(common: &Common, bins: Option<String>, out: Option<PathBuf>) -> Outcome {
    let rc = load_config(common)?;
    let bins = bins_of(&bins, &rc.radar)?;
    let jitter = rc.jitter();
    let rows = pool(rc.threads)?.install(|| {
        bins.iter()
            .map(|&bin| {
                let range = rc.radar.bin_range(bin);
                let d = calibrate_delta(&rc.radar, &jitter, range, rc.calib_percentile, rc.calib_draws)?;
                Ok((bin, range, d))
            })
            .collect::<rosar_core::Result<Vec<_>>>()
    })?;
    let out = out.unwrap_or(rc.deltas_path.clone());
    write(&out, render_deltas(&rows).as_bytes())?;
    println!("wrote {} ({} bins)", out.display(), rows.len());
    Ok(())
}

fn synth(
    common: &Common,
    deltas: Option<PathBuf>,
    delta: Option<f64>,
    bins: Option<String>,
    resume: bool,
    out: Option<PathBuf>,
) -> Outcome {
    let rc = load_config(common)?;
    let bins = bins_of(&bins, &rc.radar)?;
    let radii: BTreeMap<usize, f64> = match delta {
        Some(d) if d >= 0.0 => bins.iter().map(|&b| (b, d)).collect(),
        Some(_) => return Err(usage("--delta must be non-negative")),
        None => {
            let path = deltas.unwrap_or(rc.deltas_path.clone());
            let text = String::from_utf8(read(&path)?).map_err(|_| usage("deltas file is not UTF-8"))?;
            parse_deltas(&text)?
        }
    };
    if let Some(b) = bins.iter().find(|b| !radii.contains_key(b)) {
        return Err(Failure {
            code: 2,
            message: format!("no Delta_R for bin {b}"),
        });
    }
    let out = out.unwrap_or(rc.table_path.clone());
    let mut table = WeightTable::new(rc.radar, rc.synth.clone());
    if resume && out.exists() {
        let old = load_table(&out)?;
        if old.cfg != table.cfg || old.params != table.params {
            return Err(usage(format!("{} was synthesized with different settings", out.display())));
        }
        table = old;
    }
    let todo: Vec<usize> = bins.into_iter().filter(|b| !table.entries.contains_key(b)).collect();
    let shared = Mutex::new((table, Vec::<(usize, Error)>::new()));
    pool(rc.threads)?.install(|| {
        todo.par_iter().for_each(|&bin| {
            let started = Instant::now();
            let result = sca_solve(&rc.radar, &rc.synth, bin, radii[&bin]);
            let mut guard = shared.lock().expect("no panics while holding the lock");
            match result {
                Ok((entry, _)) => {
                    eprintln!(
                        "bin {bin:3}  R {:.4} m  nnz {:3}/{:3}  U' {:.4}  slack {:.2e}  verified {}  {:.1} s",
                        entry.range,
                        entry.nnz(),
                        entry.weights.len(),
                        entry.u_prime,
                        entry.slack_sum,
                        entry.verified,
                        started.elapsed().as_secs_f64()
                    );
                    guard.0.insert(entry);
                    if resume {
                        if let Err(e) = write(&out, &encode_wgt(&guard.0)) {
                            eprintln!("checkpoint failed: {}", e.message);
                        }
                    }
                }
                Err(e) => {
                    eprintln!("bin {bin:3}  failed: {e}");
                    guard.1.push((bin, e));
                }
            }
        })
    });
    let (table, failures) = shared.into_inner().expect("lock not poisoned");
    write(&out, &encode_wgt(&table))?;
    let verified = table.entries.values().filter(|e| e.verified).count();
    println!(
        "wrote {} ({} entries, {verified} verified, digest {})",
        out.display(),
        table.entries.len(),
        &table.digest()[..16]
    );
    if !failures.is_empty() {
        let solver = failures.iter().any(|(_, e)| matches!(e, Error::Solver { .. }));
        let list: Vec<String> = failures.iter().map(|(b, _)| b.to_string()).collect();
        return Err(Failure {
            code: if solver { 3 } else { 2 },
            message: format!("{} bins failed: {}", failures.len(), list.join(", ")),
        });
    }
    Ok(())
}

/// Data in the layout `backend` consumes, with the preprocessing time.
fn prepare(data: &DataMatrix, cfg: &RadarConfig, backend: Backend) -> Outcome<(Option<DataMatrix>, f64)> {
    match (backend.uses_fft(), data.kind) {
        (true, DataKind::IntermediateFrequency) => {
            let t = Instant::now();
            let compressed = range_fft(data, cfg)?;
            Ok((Some(compressed), t.elapsed().as_secs_f64()))
        }
        (false, DataKind::RangeCompressed) => Err(Failure {
            code: 2,
            message: format!("backend {backend} needs IF data, the file holds range-compressed data"),
        }),
        _ => Ok((None, 0.0)),
    }
}

fn image_cmd(
    common: &Common,
    data: Option<PathBuf>,
    backend: &str,
    table: Option<PathBuf>,
    strict: bool,
    out: Option<PathBuf>,
) -> Outcome {
    let rc = load_config(common)?;
    let backend = Backend::parse(backend).map_err(|e| usage(e.to_string()))?;
    let (data, cfg) = load_data(&data.unwrap_or(rc.data_path.clone()))?;
    let table = if backend.needs_table() {
        Some(load_table(&table.unwrap_or(rc.table_path.clone()))?)
    } else {
        None
    };
    let (compressed, pre_seconds) = prepare(&data, &cfg, backend)?;
    let opts = ImageOptions {
        threads: rc.threads,
        require_verified: strict,
    };
    let grid = rc.image_grid()?;
    let img = image(
        backend,
        compressed.as_ref().unwrap_or(&data),
        &cfg,
        &grid,
        table.as_ref(),
        backend.needs_seed().then(|| rc.random_seed()),
        &opts,
    )?;
    let out = out.unwrap_or_else(|| rc.image_dir.join(format!("{}.img", backend.name().to_ascii_lowercase())));
    write(&out, &encode_img(&img, &cfg))?;
    let pgm = out.with_extension("pgm");
    write(&pgm, &encode_pgm(&img, rc.floor_db)?)?;
    let (row, col) = img.peak();
    let (phi, r) = img.grid.polar_of(row, col);
    println!(
        "{backend}: {:.3} s filtering, {pre_seconds:.3} s preprocessing, {} threads, peak at {:.2} deg / {:.4} m -> {}",
        img.seconds,
        img.threads,
        phi.to_degrees(),
        r,
        out.display()
    );
    Ok(())
}

fn image_records(img: &SarImage, cfg: &RadarConfig, mainlobe: f64, label: &str) -> Outcome<Vec<MetricRecord>> {
    let (row, col) = img.peak();
    let (phi, r) = img.grid.polar_of(row, col);
    let pisr = image_pisr(img, cfg, mainlobe)?;
    Ok(vec![
        MetricRecord::new("entropy", label, image_entropy(img)?, "nats"),
        MetricRecord::new("pisr", label, pisr, "ratio"),
        MetricRecord::new("pisr_db", label, 10.0 * pisr.log10(), "dB"),
        MetricRecord::new("time", label, img.seconds, "s"),
        MetricRecord::new("peak_azimuth", label, phi.to_degrees(), "deg"),
        MetricRecord::new("peak_range", label, r, "m"),
    ])
}

fn emit(records: &[MetricRecord], out: Option<&Path>) -> Outcome {
    print!("{}", format_table(records));
    if let Some(prefix) = out {
        write(&prefix.with_extension("txt"), format_table(records).as_bytes())?;
        write(&prefix.with_extension("csv"), format_csv(records).as_bytes())?;
    }
    Ok(())
}

fn eval(
    common: &Common,
    images: &[PathBuf],
    mainlobe_deg: Option<f64>,
    pattern_table: Option<PathBuf>,
    bin: Option<usize>,
    out: Option<PathBuf>,
) -> Outcome {
    let rc = load_config(common)?;
    if images.is_empty() && pattern_table.is_none() {
        return Err(usage("nothing to evaluate: give IMG1 files or --pattern-table"));
    }
    let mainlobe = mainlobe_deg.map(f64::to_radians).unwrap_or(rc.synth.mainlobe_half_width);
    let mut records = Vec::new();
    for path in images {
        let (img, cfg) = decode_img(&read(path)?).map_err(|e| Failure {
            code: 2,
            message: format!("{}: {e}", path.display()),
        })?;
        records.extend(image_records(&img, &cfg, mainlobe, img.backend.name())?);
    }
    if let Some(path) = pattern_table {
        let table = load_table(&path)?;
        let bin = bin.expect("clap enforces --bin");
        let entry = table.get(bin)?;
        let cfg = table.cfg;
        let span = entry.window.phi_v.min(60f64.to_radians());
        let angles = boresight_angles(span, table.params.grid_step / 4.0);
        let trace = array_pattern(&cfg, &entry.weights, entry.range, &angles, None)?;
        let label = format!("bin{bin}");
        if let Ok(w) = half_mainlobe_width(&trace) {
            records.push(MetricRecord::new("half_mainlobe_width", &label, w.to_degrees(), "deg"));
        }
        records.push(MetricRecord::new("pattern_pisr", &label, pattern_pisr(&trace, mainlobe)?, "ratio"));
        records.push(MetricRecord::new("nnz", &label, entry.nnz() as f64, "count"));
        let peak = trace.angles[trace.peak_index().unwrap_or(0)];
        records.push(MetricRecord::new("pattern_peak", &label, peak.to_degrees(), "deg"));
        let mut csv = String::from("angle_deg,magnitude,level_db\n");
        for ((a, m), db) in trace.angles.iter().zip(trace.magnitudes()).zip(trace.db()) {
            csv.push_str(&format!("{:.6},{m:.9e},{db:.4}\n", a.to_degrees()));
        }
        let prefix = out.clone().unwrap_or(rc.report_path.clone());
        let pattern_path = prefix.with_extension(format!("bin{bin}.pattern.csv"));
        write(&pattern_path, csv.as_bytes())?;
        eprintln!("pattern trace -> {}", pattern_path.display());
    }
    emit(&records, out.as_deref())
}

fn bench(common: &Common, data: Option<PathBuf>, table: Option<PathBuf>, out: Option<PathBuf>) -> Outcome {
    let rc = load_config(common)?;
    let (data, cfg) = load_data(&data.unwrap_or(rc.data_path.clone()))?;
    let table = load_table(&table.unwrap_or(rc.table_path.clone()))?;
    data.expect_kind(DataKind::IntermediateFrequency)?;
    let grid = rc.image_grid()?;
    let t = Instant::now();
    let compressed = range_fft(&data, &cfg)?;
    let fft_seconds = t.elapsed().as_secs_f64();
    let max_threads = pool(0)?.current_num_threads();
    let mut thread_counts = vec![1];
    if max_threads > 1 {
        thread_counts.push(max_threads);
    }
    let mean_nnz = table.entries.values().map(|e| e.nnz() as f64).sum::<f64>() / table.entries.len().max(1) as f64;
    let mean_window = table.entries.values().map(|e| e.weights.len() as f64).sum::<f64>()
        / table.entries.len().max(1) as f64;
    let mut records = vec![MetricRecord::new("range_fft", "all", fft_seconds, "s")];
    for &threads in &thread_counts {
        let mut bpa_time = None;
        for backend in Backend::ALL {
            let input = if backend.uses_fft() { &compressed } else { &data };
            let img = image(
                backend,
                input,
                &cfg,
                &grid,
                backend.needs_table().then_some(&table),
                backend.needs_seed().then(|| rc.random_seed()),
                &ImageOptions {
                    threads,
                    require_verified: false,
                },
            )?;
            let label = format!("{}@{threads}", backend.name());
            if backend == Backend::Bpa {
                bpa_time = Some(img.seconds);
            }
            records.push(MetricRecord::new("time", &label, img.seconds, "s"));
            records.push(MetricRecord::new("entropy", &label, image_entropy(&img)?, "nats"));
            if let Some(b) = bpa_time {
                records.push(MetricRecord::new("speedup_vs_bpa", &label, b / img.seconds, "ratio"));
            }
            let taps = if backend.needs_table() { mean_nnz } else { mean_window };
            records.push(MetricRecord::new("mean_taps", &label, taps, "count"));
            eprintln!("{label}: {:.3} s", img.seconds);
        }
    }
    emit(&records, Some(&out.unwrap_or(rc.report_path.clone())))
}
