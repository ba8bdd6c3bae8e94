use std::path::PathBuf;

use clap::Args;
use motionfuse_core::blobs::{primary_target, Blob};
use motionfuse_core::frame::Frame;
use motionfuse_core::pgm::encode_pgm;
use motionfuse_core::sim::{run_scenario_observed, ScenarioConfig, SimSummary, TickArtifacts};
use motionfuse_core::temporal::MotionMask;

use crate::{create_dir, prepare_output_dir, write_file, CliError, DetectorFlags};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file.
    #[arg(long)]
    pub config: PathBuf,
    /// Run directory for the logs and optional frame dumps.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub overwrite: bool,
    /// Overrides the noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the tick count.
    #[arg(long)]
    pub ticks: Option<usize>,
    /// Write every frame, motion mask and overlay as PGM.
    #[arg(long)]
    pub dump_frames: bool,
    #[arg(long)]
    pub kp: Option<f64>,
    #[arg(long)]
    pub deadband_px: Option<f64>,
    /// Pan slew rate, degrees per second.
    #[arg(long)]
    pub rate_limit: Option<f64>,
    #[command(flatten)]
    pub detector: DetectorFlags,
}

/// Camera frame with motion pixels painted white and the target box black.
pub fn overlay(frame: &Frame, motion: Option<&MotionMask>, blobs: &[Blob]) -> Frame {
    let (w, h) = frame.dims();
    let mut px = frame.pixels().to_vec();
    if let Some(m) = motion {
        for (p, &bit) in px.iter_mut().zip(m.grid.bits()) {
            if bit != 0 {
                *p = 255;
            }
        }
    }
    if let Some(b) = primary_target(blobs) {
        let (x0, y0) = (b.bbox.x, b.bbox.y);
        let (x1, y1) = (x0 + b.bbox.w - 1, y0 + b.bbox.h - 1);
        for x in x0..=x1 {
            px[y0 * w + x] = 0;
            px[y1 * w + x] = 0;
        }
        for y in y0..=y1 {
            px[y * w + x0] = 0;
            px[y * w + x1] = 0;
        }
    }
    Frame::new(w, h, px).expect("same dimensions")
}

pub fn scenario_from_args(args: &SimulateArgs) -> Result<ScenarioConfig, CliError> {
    let mut config = ScenarioConfig::load(&args.config)?;
    args.detector.apply(&mut config)?;
    if let Some(seed) = args.seed {
        config.noise.seed = seed;
    }
    if let Some(ticks) = args.ticks {
        config.ticks = ticks;
    }
    let ctl = &mut config.controller;
    if let Some(kp) = args.kp {
        ctl.kp = kp;
    }
    if let Some(d) = args.deadband_px {
        ctl.deadband_px = d;
    }
    if let Some(r) = args.rate_limit {
        ctl.rate_limit_dps = r;
    }
    Ok(config)
}

pub fn run(args: &SimulateArgs) -> Result<String, CliError> {
    let config = scenario_from_args(args)?;
    config.validate()?;
    if let Some(dir) = &args.out {
        prepare_output_dir(dir, args.overwrite)?;
    }
    let dump_dir = args.out.as_ref().filter(|_| args.dump_frames);
    if let Some(dir) = dump_dir {
        for sub in ["frames", "masks", "overlays"] {
            create_dir(&dir.join(sub))?;
        }
    }

    let mut dump_error = None;
    let log = run_scenario_observed(&config, |t: &TickArtifacts<'_>| {
        let Some(dir) = dump_dir else { return };
        if dump_error.is_some() {
            return;
        }
        let name = format!("{:06}.pgm", t.record.tick);
        let mut result = write_file(&dir.join("frames").join(&name), encode_pgm(t.frame));
        if let Some(m) = t.motion {
            result = result.and_then(|_| write_file(&dir.join("masks").join(&name), encode_pgm(&m.grid.to_frame())));
        }
        result = result.and_then(|_| {
            write_file(
                &dir.join("overlays").join(&name),
                encode_pgm(&overlay(t.frame, t.motion, t.blobs)),
            )
        });
        dump_error = result.err();
    })?;
    if let Some(e) = dump_error {
        return Err(e);
    }

    let summary = summary_line(&config, &log.summary);
    if let Some(dir) = &args.out {
        write_file(&dir.join("sim.csv"), log.to_csv())?;
        write_file(&dir.join("pir.csv"), log.pir_csv())?;
        write_file(&dir.join("camera.csv"), log.camera_csv())?;
        write_file(&dir.join("decisions.csv"), log.decision_csv())?;
        write_file(&dir.join("summary.txt"), format!("{summary}\n"))?;
    }
    Ok(summary)
}

fn summary_line(config: &ScenarioConfig, summary: &SimSummary) -> String {
    format!("scenario={} {}", config.name, summary.to_kv())
}
