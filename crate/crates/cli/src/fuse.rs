use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::Args;
use motionfuse_core::fusion::{
    apply_command, decide, tracking_command, Action, CameraObservation, HeadCommand, PanTiltState,
    TrackingGains,
};
use motionfuse_core::pir::PirState;
use motionfuse_core::sim::{decision_csv, DecisionRow};

use crate::{load_config, prepare_output_dir, write_file, CliError};

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// CSV with columns tick,infer1,infer2,infer3.
    #[arg(long)]
    pub pir: PathBuf,
    /// CSV with columns tick,cam_found,centroid_x,centroid_y,image_width,
    /// image_height and optionally alpha_deg.
    #[arg(long)]
    pub camera: PathBuf,
    /// Directory for decisions.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub overwrite: bool,
    /// Scenario file supplying gains, limits and the frame rate.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Integrate the pan angle from the commands even when the camera log
    /// records it.
    #[arg(long)]
    pub integrate: bool,
    #[arg(long)]
    pub initial_pan: Option<f64>,
    /// Ticks per second.
    #[arg(long)]
    pub frame_rate: Option<f64>,
    #[arg(long)]
    pub kp: Option<f64>,
    #[arg(long)]
    pub deadband_px: Option<f64>,
    #[arg(long)]
    pub rate_limit: Option<f64>,
    /// Drive tilt from the tracking law as well.
    #[arg(long)]
    pub track_tilt: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PirRow {
    pub tick: u64,
    pub state: PirState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRow {
    pub tick: u64,
    pub observation: CameraObservation,
    pub alpha_deg: Option<f64>,
}

struct Table {
    path: PathBuf,
    columns: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, CliError> {
        let unreadable = |e: csv::Error| CliError::Unreadable(format!("{}: {e}", path.display()));
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(unreadable)?;
        let columns = reader
            .headers()
            .map_err(unreadable)?
            .iter()
            .enumerate()
            .map(|(i, name)| (name.to_string(), i))
            .collect();
        let rows = reader.records().collect::<Result<Vec<_>, _>>().map_err(unreadable)?;
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn require(&self, name: &str) -> Result<usize, CliError> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| CliError::Unreadable(format!("{}: missing column {name:?}", self.path.display())))
    }

    fn bad(&self, row: usize, name: &str, value: &str) -> CliError {
        CliError::Unreadable(format!(
            "{}: row {}: cannot parse {name} = {value:?}",
            self.path.display(),
            row + 1
        ))
    }

    fn field<'a>(&self, rec: &'a csv::StringRecord, col: usize) -> &'a str {
        rec.get(col).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, rec: &csv::StringRecord, row: usize, col: usize, name: &str) -> Result<T, CliError> {
        let v = self.field(rec, col);
        v.parse().map_err(|_| self.bad(row, name, v))
    }

    fn parse_opt_f64(&self, rec: &csv::StringRecord, row: usize, col: usize, name: &str) -> Result<Option<f64>, CliError> {
        let v = self.field(rec, col);
        if v.is_empty() {
            Ok(None)
        } else {
            v.parse().map(Some).map_err(|_| self.bad(row, name, v))
        }
    }

    fn parse_bool(&self, rec: &csv::StringRecord, row: usize, col: usize, name: &str) -> Result<bool, CliError> {
        match self.field(rec, col) {
            "1" | "true" | "TRUE" | "True" => Ok(true),
            "0" | "false" | "FALSE" | "False" => Ok(false),
            other => Err(self.bad(row, name, other)),
        }
    }
}

pub fn read_pir_log(path: &Path) -> Result<Vec<PirRow>, CliError> {
    let t = Table::read(path)?;
    let cols = [t.require("tick")?, t.require("infer1")?, t.require("infer2")?, t.require("infer3")?];
    t.rows
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            Ok(PirRow {
                tick: t.parse(rec, i, cols[0], "tick")?,
                state: PirState::new(
                    t.parse_bool(rec, i, cols[1], "infer1")?,
                    t.parse_bool(rec, i, cols[2], "infer2")?,
                    t.parse_bool(rec, i, cols[3], "infer3")?,
                ),
            })
        })
        .collect()
}

pub fn read_camera_log(path: &Path) -> Result<Vec<CameraRow>, CliError> {
    let t = Table::read(path)?;
    let tick = t.require("tick")?;
    let found = t.require("cam_found")?;
    let cx = t.require("centroid_x")?;
    let cy = t.require("centroid_y")?;
    let w = t.require("image_width")?;
    let h = t.require("image_height")?;
    let alpha = t.columns.get("alpha_deg").copied();
    t.rows
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let width: usize = t.parse(rec, i, w, "image_width")?;
            let height: usize = t.parse(rec, i, h, "image_height")?;
            let observation = if t.parse_bool(rec, i, found, "cam_found")? {
                let x: f64 = t.parse(rec, i, cx, "centroid_x")?;
                let y: f64 = t.parse(rec, i, cy, "centroid_y")?;
                if !(0.0..width as f64).contains(&x) || !(0.0..height as f64).contains(&y) {
                    return Err(CliError::Unreadable(format!(
                        "{}: row {}: centroid ({x}, {y}) outside the {width}x{height} image",
                        path.display(),
                        i + 1
                    )));
                }
                CameraObservation::at(x, y, width, height)
            } else {
                CameraObservation::not_found(width, height)
            };
            Ok(CameraRow {
                tick: t.parse(rec, i, tick, "tick")?,
                observation,
                alpha_deg: match alpha {
                    Some(col) => t.parse_opt_f64(rec, i, col, "alpha_deg")?,
                    None => None,
                },
            })
        })
        .collect()
}

/// Row-by-row tick agreement with strictly increasing ticks.
pub fn check_alignment(pir: &[PirRow], camera: &[CameraRow]) -> Result<(), CliError> {
    if pir.len() != camera.len() {
        return Err(CliError::MisalignedTicks(format!(
            "PIR log has {} rows, camera log has {}",
            pir.len(),
            camera.len()
        )));
    }
    let mut last = None;
    for (p, c) in pir.iter().zip(camera) {
        if p.tick != c.tick {
            return Err(CliError::MisalignedTicks(format!(
                "PIR tick {} lines up with camera tick {}",
                p.tick, c.tick
            )));
        }
        if last.is_some_and(|l| p.tick <= l) {
            return Err(CliError::MisalignedTicks(format!("tick {} does not increase", p.tick)));
        }
        last = Some(p.tick);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct ReplaySettings {
    pub initial: PanTiltState,
    pub gains: TrackingGains,
    pub dt: f64,
    /// Ignore logged pan angles and integrate from `initial`.
    pub integrate: bool,
    pub track_tilt: bool,
}

/// Replays the fusion rules tick by tick. When a row carries the logged pan
/// angle it is used for that tick's decision; otherwise the angle follows
/// from integrating the previous commands.
pub fn replay(pir: &[PirRow], camera: &[CameraRow], settings: &ReplaySettings) -> Vec<DecisionRow> {
    let mut head = settings.initial;
    let mut rows = Vec::with_capacity(pir.len());
    for (p, c) in pir.iter().zip(camera) {
        if let (Some(alpha), false) = (c.alpha_deg, settings.integrate) {
            head.pan_deg = alpha;
        }
        let command = decide(&p.state, &c.observation, &head);
        rows.push(DecisionRow {
            tick: p.tick,
            pir: p.state,
            cam_found: c.observation.found,
            alpha_deg: head.pan_deg,
            command,
        });
        let next: HeadCommand = match command.action {
            Action::CameraTracking => {
                let mut rate = tracking_command(&c.observation, &head, &settings.gains).unwrap_or_default();
                if !settings.track_tilt {
                    rate.tilt_dps = 0.0;
                }
                rate.into()
            }
            other => other.into(),
        };
        head = apply_command(&head, next, settings.dt);
    }
    rows
}

pub fn run(args: &FuseArgs) -> Result<String, CliError> {
    let config = load_config(args.config.as_deref())?;
    let ctl = &config.controller;
    let mut initial = ctl.initial_head();
    if let Some(p) = args.initial_pan {
        initial.pan_deg = p;
    }
    if let Some(r) = args.rate_limit {
        initial.rate_limit_dps = r;
    }
    let mut gains = ctl.gains();
    if let Some(kp) = args.kp {
        gains.kp = kp;
    }
    if let Some(d) = args.deadband_px {
        gains.deadband_px = d;
    }
    let frame_rate = args.frame_rate.unwrap_or(config.camera.frame_rate);
    if !(frame_rate > 0.0) {
        return Err(CliError::Usage("--frame-rate must be positive".into()));
    }

    let pir = read_pir_log(&args.pir)?;
    let camera = read_camera_log(&args.camera)?;
    if pir.is_empty() {
        return Err(CliError::NoInput(format!("{} has no rows", args.pir.display())));
    }
    check_alignment(&pir, &camera)?;
    let rows = replay(
        &pir,
        &camera,
        &ReplaySettings {
            initial,
            gains,
            dt: 1.0 / frame_rate,
            integrate: args.integrate,
            track_tilt: args.track_tilt || ctl.track_tilt,
        },
    );
    if let Some(dir) = &args.out {
        prepare_output_dir(dir, args.overwrite)?;
        write_file(&dir.join("decisions.csv"), decision_csv(rows.iter().copied()))?;
    }

    let count = |a: Action| rows.iter().filter(|r| r.command.action == a).count();
    Ok(format!(
        "rows={} camera_tracking={} turn_right={} turn_left={} turn_to_zero={} unlisted_rule={}",
        rows.len(),
        count(Action::CameraTracking),
        count(Action::TurnRight),
        count(Action::TurnLeft),
        count(Action::TurnToZero),
        rows.iter().filter(|r| r.command.rule == 0).count()
    ))
}
