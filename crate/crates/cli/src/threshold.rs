use std::fmt;
use std::path::PathBuf;

use clap::Args;
use motionfuse_core::frame::{histogram, read_frame, Frame};
use motionfuse_core::fuzzy::{compute_threshold, FuzzinessCurve, FuzzyError, ThresholdOptions};
use motionfuse_core::pgm::encode_pgm;

use crate::{load_config, prepare_output_dir, write_file, CliError};

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// PGM image to threshold.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for the curve CSV and the binarized image.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub overwrite: bool,
    /// Scenario file supplying `k_order` and `weighted`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k_order: Option<u32>,
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSummary {
    pub threshold: u8,
    pub x_j: u8,
    pub x_r: u8,
    pub alpha: f64,
}

impl fmt::Display for ThresholdSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "threshold={} x_j={} x_r={} alpha={:.6}",
            self.threshold, self.x_j, self.x_r, self.alpha
        )
    }
}

/// `t,psi_b,psi_w,alpha_psi_b`, one row per candidate level.
pub fn curve_csv(curve: &FuzzinessCurve) -> String {
    let mut out = String::from("t,psi_b,psi_w,alpha_psi_b\n");
    for (((t, b), w), nb) in curve
        .levels
        .iter()
        .zip(&curve.psi_b)
        .zip(&curve.psi_w)
        .zip(curve.normalized_psi_b())
    {
        out.push_str(&format!("{t},{b:.9},{w:.9},{nb:.9}\n"));
    }
    out
}

/// Levels above `threshold` become 255, the rest 0.
pub fn binarize_image(frame: &Frame, threshold: u8) -> Frame {
    let pixels = frame
        .pixels()
        .iter()
        .map(|&p| if p > threshold { 255 } else { 0 })
        .collect();
    Frame::new(frame.width(), frame.height(), pixels).expect("same dimensions")
}

pub fn run(args: &ThresholdArgs) -> Result<ThresholdSummary, CliError> {
    let config = load_config(args.config.as_deref())?;
    let mut opts = ThresholdOptions {
        k_order: config.controller.threshold.k_order,
        weighted: config.controller.threshold.weighted || args.weighted,
    };
    if let Some(k) = args.k_order {
        opts.k_order = k;
    }
    if opts.k_order == 0 {
        return Err(CliError::Usage("--k-order must be at least 1".into()));
    }
    let frame = read_frame(&args.input)?;
    let (threshold, curve) = compute_threshold(&histogram(&frame), opts).map_err(|e| match e {
        FuzzyError::InvalidOrder => CliError::Usage(e.to_string()),
        other => CliError::NoContrast(other.to_string()),
    })?;
    if let Some(dir) = &args.out {
        prepare_output_dir(dir, args.overwrite)?;
        write_file(&dir.join("curve.csv"), curve_csv(&curve))?;
        write_file(&dir.join("binarized.pgm"), encode_pgm(&binarize_image(&frame, threshold)))?;
    }
    Ok(ThresholdSummary {
        threshold,
        x_j: curve.region.x_j,
        x_r: curve.region.x_r,
        alpha: curve.alpha,
    })
}
