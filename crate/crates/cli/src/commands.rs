//! Command implementations. Each returns a [`CliError`] carrying the exit
//! code of the contract: 2 configuration, 3 data, 4 semantic.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;

use flownav::eval::{align, evaluate, ExperimentReport, RunMetrics, TrackPoint, Window};
use flownav::fusion::{run_fusion, FusionConfig, NavLog, SensorTimeline};
use flownav::io::{
    self, config_hash, read_bundle, read_config, read_pgm, read_track, write_bundle,
    write_flow_csv, write_innovations_csv, write_navlog_csv, CONFIG_FILE, TRUTH_FILE,
};
use flownav::optflow::{farneback_flow, median_displacement, FlowParams};
use flownav::sim::{generate, ScenarioConfig};
use flownav::Error;

use crate::plots;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_SEMANTIC: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// Default classification: bad parameters are configuration errors,
/// unreadable or malformed files are data errors, everything else is
/// semantic.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::InvalidMission(_) => EXIT_CONFIG,
            Error::Io { .. } | Error::Parse { .. } => EXIT_DATA,
            _ => EXIT_SEMANTIC,
        };
        Self::new(code, e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Hover,
    Mission,
}

impl Preset {
    fn config(self) -> ScenarioConfig {
        match self {
            Preset::Hover => ScenarioConfig::hover(),
            Preset::Mission => ScenarioConfig::mission(),
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::new(EXIT_DATA, format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::new(EXIT_DATA, format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::new(EXIT_SEMANTIC, e.to_string()))
}

pub fn print_config(preset: Preset) -> Result<()> {
    print!("{}", to_json(&preset.config())?);
    Ok(())
}

/// Any failure to obtain a valid configuration is a configuration error.
fn load_config(path: Option<&Path>, preset: Preset) -> Result<ScenarioConfig> {
    match path {
        Some(p) => read_config(p).map_err(|e| CliError::new(EXIT_CONFIG, e.to_string())),
        None => Ok(preset.config()),
    }
}

pub fn simulate(
    config: Option<&Path>,
    preset: Preset,
    seed: Option<u64>,
    runs: u64,
    out: &Path,
) -> Result<()> {
    let mut config = load_config(config, preset)?;
    if runs == 0 {
        return Err(CliError::new(EXIT_CONFIG, "--runs must be at least 1"));
    }
    let first = seed.unwrap_or(config.seed);
    for k in 0..runs {
        config.seed = first
            .checked_add(k)
            .ok_or_else(|| CliError::new(EXIT_CONFIG, "seed range overflows"))?;
        let dir = if runs == 1 {
            out.to_path_buf()
        } else {
            out.join(format!("seed_{}", config.seed))
        };
        let scenario = generate(&config).map_err(|e| match e {
            Error::Io { .. } | Error::Parse { .. } => CliError::from(e),
            e => CliError::new(EXIT_CONFIG, e.to_string()),
        })?;
        let hash = write_bundle(&dir, &scenario)?;
        println!(
            "{}: {} sensor samples, {} frames, {:.1} s, seed {}, config {hash}",
            dir.display(),
            scenario.samples.len(),
            scenario.frames.len(),
            scenario.truth.duration(),
            config.seed
        );
    }
    Ok(())
}

fn final_error(truth: &[TrackPoint], log: &NavLog) -> Result<f64> {
    let last = log
        .records
        .last()
        .ok_or_else(|| CliError::new(EXIT_SEMANTIC, "navigation log is empty"))?;
    let pairs = align(truth, &[TrackPoint::from(last)])?;
    Ok((pairs[0].1.p - pairs[0].0.p).norm())
}

pub fn fuse(scenarios: &[PathBuf], use_flow: bool, out: Option<&Path>) -> Result<()> {
    let tag = if use_flow { "flow" } else { "noflow" };
    for dir in scenarios {
        let bundle = read_bundle(dir)?;
        let (truth, _) = read_track(dir.join(TRUTH_FILE))?;
        let config = FusionConfig::for_scenario(&bundle.config, use_flow)?;
        let timeline = SensorTimeline::from_samples(bundle.samples)?;
        let log = run_fusion(&timeline, &bundle.frames, &config)?;
        let target = match out {
            Some(o) if scenarios.len() == 1 => o.to_path_buf(),
            Some(o) => o.join(dir.file_name().unwrap_or(dir.as_os_str())),
            None => dir.join(tag),
        };
        create_dir(&target)?;
        write_navlog_csv(target.join("navlog.csv"), &bundle.config_hash, &log.records)?;
        write_innovations_csv(
            target.join("innovations.csv"),
            &bundle.config_hash,
            &log.innovations,
        )?;
        let rejected = log.innovations.iter().filter(|r| !r.accepted).count();
        println!(
            "{}: {tag}, {} records, {} updates ({rejected} rejected), {} flow updates, final position error {:.6e} m",
            target.display(),
            log.records.len(),
            log.innovations.len(),
            log.flow.updates,
            final_error(&truth, &log)?
        );
    }
    Ok(())
}

/// A run label: the directory holding `navlog.csv`, else the file stem.
fn label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    match (stem.as_deref(), path.parent().and_then(|p| p.file_name())) {
        (Some("navlog"), Some(parent)) => parent.to_string_lossy().into_owned(),
        (Some(s), _) => s.to_string(),
        _ => path.display().to_string(),
    }
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    window: &'a Window,
    reference_path: &'a [[f64; 2]],
    #[serde(flatten)]
    report: &'a ExperimentReport,
}

pub fn eval(
    truth_path: &Path,
    navlogs: &[PathBuf],
    config: Option<&Path>,
    window: &Window,
    out: &Path,
) -> Result<()> {
    let config_path = config.map(Path::to_path_buf).unwrap_or_else(|| {
        truth_path
            .parent()
            .unwrap_or(Path::new("."))
            .join(CONFIG_FILE)
    });
    let scenario = read_config(&config_path).map_err(|e| match e {
        Error::Io { .. } => CliError::new(
            EXIT_DATA,
            format!("{e} (the scenario config supplies the reference path; pass --config)"),
        ),
        e => CliError::new(EXIT_CONFIG, e.to_string()),
    })?;
    let expected_hash = config_hash(&scenario)?;
    let (truth, truth_hash) = read_track(truth_path)?;
    if truth_hash.as_deref().is_some_and(|h| h != expected_hash) {
        return Err(CliError::new(
            EXIT_SEMANTIC,
            format!(
                "{} was not produced from {}",
                truth_path.display(),
                config_path.display()
            ),
        ));
    }
    let path = scenario.reference_path();
    let runs: Vec<(RunMetrics, Vec<TrackPoint>)> = navlogs
        .par_iter()
        .map(|p| -> Result<_> {
            let (est, hash) = read_track(p)?;
            if hash.is_some() && truth_hash.is_some() && hash != truth_hash {
                return Err(CliError::new(
                    EXIT_SEMANTIC,
                    format!(
                        "{} comes from a different scenario than the truth",
                        p.display()
                    ),
                ));
            }
            let metrics = evaluate(&label(p), Some(scenario.seed), &truth, &est, &path, window)?;
            Ok((metrics, est))
        })
        .collect::<Result<_>>()?;
    let (metrics, tracks): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let report = ExperimentReport::new(&scenario.name, &expected_hash, metrics);
    create_dir(out)?;
    let output = EvalOutput {
        window,
        reference_path: &path,
        report: &report,
    };
    write_text(&out.join("report.json"), &to_json(&output)?)?;
    let named: Vec<(&str, &[TrackPoint])> = report
        .runs
        .iter()
        .zip(&tracks)
        .map(|(m, t)| (m.label.as_str(), t.as_slice()))
        .collect();
    for (file, svg) in plots::figures(&truth, &named, &path, &expected_hash) {
        write_text(&out.join(file), &svg)?;
    }
    for m in &report.runs {
        println!(
            "{}: scatter {:.3} m, box {:.3} m, max cross-track {:.3} m, mean cross-track {:.3} m, rmse N/E/D {:.3}/{:.3}/{:.3} m{}",
            m.label,
            m.scatter_std,
            m.box_half_width,
            m.max_cross_track,
            m.mean_cross_track,
            m.rmse_north,
            m.rmse_east,
            m.rmse_down,
            m.cruise_jitter
                .map(|j| format!(", cruise jitter {j:.3e} rad"))
                .unwrap_or_default()
        );
    }
    for c in &report.comparisons {
        println!(
            "{} vs {}: scatter ratio {:.3}, max cross-track ratio {:.3}",
            c.candidate, c.baseline, c.scatter_ratio, c.max_cross_track_ratio
        );
    }
    Ok(())
}

pub fn flow(
    a: &Path,
    b: &Path,
    params: Option<&Path>,
    step: usize,
    margin: usize,
    out: &Path,
) -> Result<()> {
    let params: FlowParams = match params {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", p.display())))?
        }
        None => FlowParams::default(),
    };
    params
        .validate()
        .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
    // unreadable files are data errors; anything that is not a usable
    // P5 image is an input configuration error
    let frame = |p: &Path, t: f64| {
        read_pgm(p, t).map_err(|e| match e {
            Error::Io { .. } => CliError::from(e),
            e => CliError::new(EXIT_CONFIG, e.to_string()),
        })
    };
    let (fa, fb) = (frame(a, 0.0)?, frame(b, 1.0)?);
    if (fa.width(), fa.height()) != (fb.width(), fb.height()) {
        return Err(CliError::new(
            EXIT_CONFIG,
            format!(
                "frame sizes differ: {}x{} vs {}x{}",
                fa.width(),
                fa.height(),
                fb.width(),
                fb.height()
            ),
        ));
    }
    let field = farneback_flow(&fa, &fb, &params)?;
    let median = median_displacement(&field, margin)
        .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
    create_dir(out)?;
    let hash = config_hash(&params)?;
    write_flow_csv(out.join("flow.csv"), &hash, &field)?;
    let svg = io::render_quiver(&field, step, 1.0);
    write_text(
        &out.join("quiver.svg"),
        &svg.replacen("<svg", &format!("<!-- config_hash: {hash} -->\n<svg"), 1),
    )?;
    println!("median flow {} {} px/frame", median.x, median.y);
    Ok(())
}
