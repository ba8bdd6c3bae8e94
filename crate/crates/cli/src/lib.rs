//! Batch front end for the motion detector, the fuzzy threshold, the
//! scenario simulator and the fusion replay.
//!
//! Exit statuses:
//!
//! | status | meaning |
//! |-------:|---------|
//! | 0 | success |
//! | 1 | output could not be written |
//! | 2 | usage error (bad flag, non-empty output directory) |
//! | 3 | no input, or too few frames |
//! | 4 | frame dimensions differ |
//! | 5 | unreadable or undecodable input |
//! | 6 | the image has no two separated histogram peaks |
//! | 7 | invalid scenario configuration |
//! | 8 | PIR and camera logs do not share ticks |

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use motionfuse_core::frame::SequenceError;
use motionfuse_core::sim::{ScenarioConfig, SimError, ThresholdMode};
use thiserror::Error;

pub mod detect;
pub mod fuse;
pub mod simulate;
pub mod threshold;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NoInput(String),
    #[error("{0}")]
    DimensionMismatch(String),
    #[error("{0}")]
    Unreadable(String),
    #[error("no contrast: {0}")]
    NoContrast(String),
    #[error("{0}")]
    ConfigInvalid(String),
    #[error("{0}")]
    MisalignedTicks(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Output { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::NoInput(_) => 3,
            CliError::DimensionMismatch(_) => 4,
            CliError::Unreadable(_) => 5,
            CliError::NoContrast(_) => 6,
            CliError::ConfigInvalid(_) => 7,
            CliError::MisalignedTicks(_) => 8,
        }
    }
}

impl From<SequenceError> for CliError {
    fn from(e: SequenceError) -> Self {
        match e {
            SequenceError::Pattern { .. } => CliError::Usage(e.to_string()),
            SequenceError::DimensionMismatch { .. } => CliError::DimensionMismatch(e.to_string()),
            SequenceError::Io { .. } | SequenceError::Decode { .. } => {
                CliError::Unreadable(e.to_string())
            }
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io { .. } => CliError::Unreadable(e.to_string()),
            SimError::ConfigInvalid(_) | SimError::Parse(_) => CliError::ConfigInvalid(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "motionfuse", version, about = "Moving-object detection and PIR/camera fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Three-frame motion detection over a PGM sequence.
    Detect(detect::DetectArgs),
    /// Fuzziness-curve threshold of a single PGM image.
    Threshold(threshold::ThresholdArgs),
    /// Run a scenario file through the closed-loop simulator.
    Simulate(simulate::SimulateArgs),
    /// Replay the fusion rules over PIR and camera logs.
    Fuse(fuse::FuseArgs),
}

/// Detector tunables shared by `detect` and `simulate`. Flags override the
/// values from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct DetectorFlags {
    /// Fixed difference threshold; also the fallback of the fuzzy mode.
    #[arg(long)]
    pub threshold: Option<u8>,
    /// Choose the difference threshold per frame with the fuzziness curves.
    #[arg(long)]
    pub fuzzy: bool,
    /// Reuse the first fuzzy threshold for the whole sequence.
    #[arg(long)]
    pub freeze: bool,
    #[arg(long)]
    pub k_order: Option<u32>,
    /// Weight fuzziness terms by histogram counts.
    #[arg(long)]
    pub weighted: bool,
    /// Blobs smaller than this are dropped.
    #[arg(long)]
    pub min_area: Option<usize>,
    /// 4 or 8.
    #[arg(long)]
    pub connectivity: Option<u8>,
}

impl DetectorFlags {
    pub fn apply(&self, config: &mut ScenarioConfig) -> Result<(), CliError> {
        let ctl = &mut config.controller;
        if let Some(th) = self.threshold {
            ctl.threshold.value = th;
        }
        if self.fuzzy {
            ctl.threshold.mode = ThresholdMode::Fuzzy;
        }
        if self.freeze {
            ctl.threshold.freeze = true;
        }
        if let Some(k) = self.k_order {
            if k == 0 {
                return Err(CliError::Usage("--k-order must be at least 1".into()));
            }
            ctl.threshold.k_order = k;
        }
        if self.weighted {
            ctl.threshold.weighted = true;
        }
        if let Some(a) = self.min_area {
            ctl.min_area = a;
        }
        if let Some(c) = self.connectivity {
            if c != 4 && c != 8 {
                return Err(CliError::Usage(format!("--connectivity must be 4 or 8, got {c}")));
            }
            ctl.connectivity = c;
        }
        Ok(())
    }
}

pub fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    match path {
        Some(p) => Ok(ScenarioConfig::load(p)?),
        None => Ok(ScenarioConfig::default()),
    }
}

/// Creates `dir`, refusing to reuse a non-empty directory unless
/// `overwrite` is set.
pub fn prepare_output_dir(dir: &Path, overwrite: bool) -> Result<(), CliError> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
        }
        let non_empty = fs::read_dir(dir)
            .map_err(|source| CliError::Output {
                path: dir.to_path_buf(),
                source,
            })?
            .next()
            .is_some();
        if non_empty && !overwrite {
            return Err(CliError::Usage(format!(
                "{} is not empty; pass --overwrite to reuse it",
                dir.display()
            )));
        }
    }
    create_dir(dir)
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs one subcommand and returns its stdout summary.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Detect(args) => detect::run(&args).map(|s| s.to_string()),
        Command::Threshold(args) => threshold::run(&args).map(|s| s.to_string()),
        Command::Simulate(args) => simulate::run(&args).map(|s| s.to_string()),
        Command::Fuse(args) => fuse::run(&args).map(|s| s.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let errors = [
            CliError::Usage(String::new()),
            CliError::NoInput(String::new()),
            CliError::DimensionMismatch(String::new()),
            CliError::Unreadable(String::new()),
            CliError::NoContrast(String::new()),
            CliError::ConfigInvalid(String::new()),
            CliError::MisalignedTicks(String::new()),
        ];
        let codes: Vec<i32> = errors.iter().map(CliError::exit_code).collect();
        assert_eq!(codes, vec![2, 3, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn output_dir_guard() {
        let tmp = std::env::temp_dir().join(format!("motionfuse-guard-{}", std::process::id()));
        let _ = fs::remove_dir_all(&tmp);
        prepare_output_dir(&tmp, false).unwrap();
        prepare_output_dir(&tmp, false).unwrap();
        fs::write(tmp.join("x"), "1").unwrap();
        assert!(matches!(prepare_output_dir(&tmp, false), Err(CliError::Usage(_))));
        prepare_output_dir(&tmp, true).unwrap();
        fs::remove_dir_all(&tmp).unwrap();
    }

    #[test]
    fn flags_override_config() {
        let mut config = ScenarioConfig::default();
        let flags = DetectorFlags {
            threshold: Some(40),
            fuzzy: true,
            min_area: Some(3),
            connectivity: Some(4),
            ..Default::default()
        };
        flags.apply(&mut config).unwrap();
        let ctl = &config.controller;
        assert_eq!((ctl.threshold.value, ctl.threshold.mode, ctl.min_area, ctl.connectivity), (40, ThresholdMode::Fuzzy, 3, 4));
        let bad = DetectorFlags {
            k_order: Some(0),
            ..Default::default()
        };
        assert!(bad.apply(&mut config).is_err());
    }
}
