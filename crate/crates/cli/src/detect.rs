use std::fmt;
use std::path::PathBuf;
use std::thread;
use std::time::Instant;

use clap::Args;
use motionfuse_core::blobs::{label_components, suppress_small, Blob, Connectivity};
use motionfuse_core::frame::{read_frame, sequence_paths, Frame};
use motionfuse_core::pgm::encode_pgm;
use motionfuse_core::temporal::{DiffWindow, MotionMask, ThresholdPolicy};

use crate::{load_config, prepare_output_dir, write_file, CliError, DetectorFlags};

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Glob pattern of PGM frames, taken in lexicographic order.
    #[arg(long)]
    pub input: String,
    /// Directory for masks and CSV files. Without it nothing is written.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub overwrite: bool,
    /// Scenario file supplying detector defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Threads for the per-frame stages. Ignored with --freeze.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub detector: DetectorFlags,
}

/// Detector output for one frame from the third on.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub index: u64,
    pub threshold: u8,
    pub motion: MotionMask,
    pub blobs: Vec<Blob>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectSummary {
    pub frames: usize,
    pub masks: usize,
    pub mean_motion_pixels: f64,
    /// Frames through difference, threshold and labeling per wall-clock
    /// second, excluding file I/O.
    pub fps: f64,
}

impl fmt::Display for DetectSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "frames={} masks={} mean_motion_pixels={:.3} fps={:.1}",
            self.frames, self.masks, self.mean_motion_pixels, self.fps
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DetectorSettings {
    pub policy: ThresholdPolicy,
    pub min_area: usize,
    pub connectivity: Connectivity,
}

fn process_range(frames: &[Frame], start: usize, end: usize, settings: DetectorSettings) -> Vec<FrameResult> {
    let mut window = DiffWindow::new(settings.policy);
    let mut out = Vec::with_capacity(end - start);
    for frame in &frames[start.saturating_sub(2)..end] {
        let index = frame.index();
        let pushed = window
            .push_detailed(frame.clone())
            .expect("sequence frames share dimensions and increase in index");
        if let Some(w) = pushed {
            let blobs = suppress_small(label_components(&w.motion.grid, settings.connectivity), settings.min_area);
            out.push(FrameResult {
                index,
                threshold: w.diff.threshold,
                motion: w.motion,
                blobs,
            });
        }
    }
    out
}

/// Runs the detector over an in-memory sequence. With more than one worker
/// the frames are split into contiguous chunks; each chunk re-reads the two
/// frames before it, so the result equals the single-threaded run as long
/// as the threshold policy keeps no state across frames.
pub fn detect_frames(frames: &[Frame], settings: DetectorSettings, workers: usize) -> Vec<FrameResult> {
    let stateful = matches!(settings.policy, ThresholdPolicy::Fuzzy { freeze: true, .. });
    let workers = if stateful { 1 } else { workers.max(1) };
    if frames.len() < 3 {
        return Vec::new();
    }
    if workers == 1 {
        return process_range(frames, 0, frames.len(), settings);
    }
    let first = 2;
    let chunk = (frames.len() - first).div_ceil(workers);
    thread::scope(|s| {
        let handles: Vec<_> = (first..frames.len())
            .step_by(chunk)
            .map(|start| {
                let end = (start + chunk).min(frames.len());
                s.spawn(move || process_range(frames, start, end, settings))
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("detector worker panicked"))
            .collect()
    })
}

pub fn blobs_csv(results: &[FrameResult]) -> String {
    let mut out = String::from("frame,blob,area,bbox_x,bbox_y,bbox_w,bbox_h,centroid_x,centroid_y\n");
    for r in results {
        for (i, b) in r.blobs.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.4},{:.4}\n",
                r.index, i, b.area, b.bbox.x, b.bbox.y, b.bbox.w, b.bbox.h, b.centroid.0, b.centroid.1
            ));
        }
    }
    out
}

pub fn motion_csv(results: &[FrameResult]) -> String {
    let mut out = String::from("frame,threshold,motion_pixels,blobs\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.index,
            r.threshold,
            r.motion.grid.count_ones(),
            r.blobs.len()
        ));
    }
    out
}

pub fn mask_file_name(index: u64) -> String {
    format!("mask_{index:06}.pgm")
}

pub fn run(args: &DetectArgs) -> Result<DetectSummary, CliError> {
    let mut config = load_config(args.config.as_deref())?;
    args.detector.apply(&mut config)?;
    let ctl = &config.controller;
    let settings = DetectorSettings {
        policy: ctl.threshold.policy(),
        min_area: ctl.min_area,
        connectivity: ctl.connectivity(),
    };

    let paths = sequence_paths(&args.input)?;
    if paths.len() < 3 {
        return Err(CliError::NoInput(format!(
            "{:?} matched {} frame(s); at least 3 are needed",
            args.input,
            paths.len()
        )));
    }
    let mut frames = Vec::with_capacity(paths.len());
    for (k, path) in paths.iter().enumerate() {
        let frame = read_frame(path)?.with_index(k as u64);
        if let Some(first) = frames.first() {
            let first: &Frame = first;
            if first.dims() != frame.dims() {
                return Err(CliError::DimensionMismatch(format!(
                    "{} is {}x{} but the sequence is {}x{}",
                    path.display(),
                    frame.width(),
                    frame.height(),
                    first.width(),
                    first.height()
                )));
            }
        }
        frames.push(frame);
    }
    if let Some(dir) = &args.out {
        prepare_output_dir(dir, args.overwrite)?;
    }

    let started = Instant::now();
    let results = detect_frames(&frames, settings, args.workers);
    let elapsed = started.elapsed().as_secs_f64();

    if let Some(dir) = &args.out {
        let masks = dir.join("masks");
        crate::create_dir(&masks)?;
        for r in &results {
            write_file(&masks.join(mask_file_name(r.index)), encode_pgm(&r.motion.grid.to_frame()))?;
        }
        write_file(&dir.join("blobs.csv"), blobs_csv(&results))?;
        write_file(&dir.join("motion.csv"), motion_csv(&results))?;
    }

    let total: usize = results.iter().map(|r| r.motion.grid.count_ones()).sum();
    Ok(DetectSummary {
        frames: frames.len(),
        masks: results.len(),
        mean_motion_pixels: if results.is_empty() {
            0.0
        } else {
            total as f64 / results.len() as f64
        },
        fps: if elapsed > 0.0 {
            frames.len() as f64 / elapsed
        } else {
            f64::INFINITY
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use motionfuse_core::fuzzy::ThresholdOptions;

    fn sequence(n: usize, w: usize, h: usize) -> Vec<Frame> {
        let mut state = 1u32;
        let background: Vec<u8> = (0..w * h)
            .map(|_| {
                state = state.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
                60 + (state >> 24) as u8 % 120
            })
            .collect();
        (0..n)
            .map(|k| {
                let mut px = background.clone();
                for y in 4..12 {
                    for x in 0..6 {
                        px[y * w + (x + 2 * k) % w] = 10;
                    }
                }
                Frame::new(w, h, px).unwrap().with_index(k as u64)
            })
            .collect()
    }

    fn settings(policy: ThresholdPolicy) -> DetectorSettings {
        DetectorSettings {
            policy,
            min_area: 1,
            connectivity: Connectivity::Eight,
        }
    }

    fn key(results: &[FrameResult]) -> Vec<(u64, u8, Vec<u8>, usize)> {
        results
            .iter()
            .map(|r| (r.index, r.threshold, r.motion.grid.bits().to_vec(), r.blobs.len()))
            .collect()
    }

    #[test]
    fn chunked_runs_equal_the_serial_run() {
        let frames = sequence(23, 24, 16);
        let fuzzy = ThresholdPolicy::Fuzzy {
            options: ThresholdOptions::default(),
            fallback: 25,
            freeze: false,
        };
        for policy in [ThresholdPolicy::Fixed(25), fuzzy] {
            let serial = detect_frames(&frames, settings(policy), 1);
            assert_eq!(serial.len(), 21);
            for workers in [2, 3, 7, 40] {
                assert_eq!(key(&detect_frames(&frames, settings(policy), workers)), key(&serial));
            }
        }
    }

    #[test]
    fn short_sequences_give_nothing() {
        assert!(detect_frames(&sequence(2, 24, 16), settings(ThresholdPolicy::Fixed(25)), 4).is_empty());
    }

    #[test]
    fn csv_layout() {
        let results = detect_frames(&sequence(4, 24, 16), settings(ThresholdPolicy::Fixed(25)), 1);
        let motion = motion_csv(&results);
        assert_eq!(motion.lines().next(), Some("frame,threshold,motion_pixels,blobs"));
        assert_eq!(motion.lines().count(), 3);
        assert!(blobs_csv(&results).starts_with("frame,blob,area,"));
        assert_eq!(mask_file_name(7), "mask_000007.pgm");
    }
}
