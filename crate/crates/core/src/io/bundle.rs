//! A simulation output directory:
//!
//! - `config.json`: the scenario configuration
//! - `truth.csv`: truth at the IMU rate
//! - `sensors.jsonl`: the merged sensor stream
//! - `frames/NNNNNN.pgm`: camera frames, named by the index the camera
//!   samples refer to

use std::path::{Path, PathBuf};

use super::jsonl::{read_samples_file, write_samples_file};
use super::pgm::{read_pgm, write_pgm};
use super::tables::{config_hash, write_truth_csv};
use crate::error::{Error, Result};
use crate::fusion::FrameSource;
use crate::optflow::ImageFrame;
use crate::sim::{Scenario, ScenarioConfig, SensorSample};

pub const CONFIG_FILE: &str = "config.json";
pub const TRUTH_FILE: &str = "truth.csv";
pub const SENSORS_FILE: &str = "sensors.jsonl";
pub const FRAMES_DIR: &str = "frames";

pub fn frame_path(dir: impl AsRef<Path>, index: usize) -> PathBuf {
    dir.as_ref().join(format!("{index:06}.pgm"))
}

/// Parses and validates a scenario configuration file.
pub fn read_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

pub fn write_config(path: impl AsRef<Path>, config: &ScenarioConfig) -> Result<()> {
    let path = path.as_ref();
    let mut text =
        serde_json::to_string_pretty(config).map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a scenario into `dir` and returns its config hash.
pub fn write_bundle(dir: impl AsRef<Path>, scenario: &Scenario) -> Result<String> {
    let dir = dir.as_ref();
    let frames = dir.join(FRAMES_DIR);
    std::fs::create_dir_all(&frames).map_err(|e| Error::io(&frames, e))?;
    let hash = config_hash(&scenario.config)?;
    write_config(dir.join(CONFIG_FILE), &scenario.config)?;
    write_truth_csv(dir.join(TRUTH_FILE), &hash, &scenario.truth.samples)?;
    write_samples_file(dir.join(SENSORS_FILE), &scenario.samples)?;
    for (i, f) in scenario.frames.iter().enumerate() {
        write_pgm(frame_path(&frames, i), &f.frame)?;
    }
    Ok(hash)
}

/// Inputs needed to replay a flight through the filter.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub samples: Vec<SensorSample>,
    pub frames: PgmDir,
}

/// Reads `config.json`, `sensors.jsonl` and locates `frames/` in `dir`.
pub fn read_bundle(dir: impl AsRef<Path>) -> Result<Bundle> {
    let dir = dir.as_ref();
    let config = read_config(dir.join(CONFIG_FILE))?;
    let samples = read_samples_file(dir.join(SENSORS_FILE))?;
    Ok(Bundle {
        config_hash: config_hash(&config)?,
        config,
        samples,
        frames: PgmDir::new(dir.join(FRAMES_DIR)),
    })
}

/// Camera frames loaded lazily from a directory of PGM files.
#[derive(Debug, Clone, PartialEq)]
pub struct PgmDir {
    pub dir: PathBuf,
}

impl PgmDir {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl FrameSource for PgmDir {
    fn frame(&self, index: usize) -> Result<ImageFrame> {
        // the runtime stamps frames with the camera sample time
        read_pgm(frame_path(&self.dir, index), 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate, HoverConfig, TrajectoryConfig};

    #[test]
    fn bundle_round_trip() {
        let mut config = ScenarioConfig::hover();
        config.trajectory = TrajectoryConfig::Hover(HoverConfig {
            duration: 3.0,
            ..HoverConfig::default()
        });
        let scenario = generate(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let hash = write_bundle(dir.path(), &scenario).unwrap();
        let bundle = read_bundle(dir.path()).unwrap();
        assert_eq!(bundle.config, config);
        assert_eq!(bundle.config_hash, hash);
        assert_eq!(bundle.samples, scenario.samples);
        assert!(!scenario.frames.is_empty());
        for (i, f) in scenario.frames.iter().enumerate() {
            let back = bundle.frames.frame(i).unwrap();
            assert_eq!(back.data(), f.frame.data());
        }
        assert!(bundle.frames.frame(scenario.frames.len()).is_err());
    }

    #[test]
    fn bad_config_is_a_parameter_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": "x"}"#).unwrap();
        assert!(matches!(
            read_config(&path),
            Err(Error::InvalidParameter(_))
        ));
        std::fs::write(&path, r#"{"noise": {"gps_h_std": -1.0}}"#).unwrap();
        assert!(read_config(&path).is_err());
    }
}
