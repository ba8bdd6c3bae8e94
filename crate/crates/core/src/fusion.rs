//! Rule-based fusion of the PIR array with the camera detector, and the
//! pan-tilt head it drives.
//!
//! Pan angle convention: degrees, positive = panned right; `TurnRight`
//! increases the angle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pir::PirState;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FusionError {
    #[error("camera observation has no target")]
    NoTarget,
    #[error("unknown command {0:?}")]
    UnknownCommand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    CameraTracking,
    TurnRight,
    TurnLeft,
    TurnToZero,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::CameraTracking => "CameraTracking",
            Action::TurnRight => "TurnRight",
            Action::TurnLeft => "TurnLeft",
            Action::TurnToZero => "TurnToZero",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CameraTracking" => Ok(Action::CameraTracking),
            "TurnRight" => Ok(Action::TurnRight),
            "TurnLeft" => Ok(Action::TurnLeft),
            "TurnToZero" => Ok(Action::TurnToZero),
            other => Err(FusionError::UnknownCommand(other.to_string())),
        }
    }
}

/// A decision plus the rule that produced it. Rules 1-7 are the published
/// table; 0 marks the two sensor combinations the table does not cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionCommand {
    pub action: Action,
    pub rule: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraObservation {
    pub found: bool,
    pub centroid: Option<(f64, f64)>,
    pub width: usize,
    pub height: usize,
}

impl CameraObservation {
    pub fn not_found(width: usize, height: usize) -> Self {
        Self {
            found: false,
            centroid: None,
            width,
            height,
        }
    }

    pub fn at(cx: f64, cy: f64, width: usize, height: usize) -> Self {
        Self {
            found: true,
            centroid: Some((cx, cy)),
            width,
            height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanTiltState {
    pub pan_deg: f64,
    pub tilt_deg: f64,
    /// Fixed slew speed for turn commands and the ceiling for rate commands.
    pub rate_limit_dps: f64,
    pub pan_limits: (f64, f64),
    pub tilt_limits: (f64, f64),
}

impl Default for PanTiltState {
    fn default() -> Self {
        Self {
            pan_deg: 0.0,
            tilt_deg: 0.0,
            rate_limit_dps: 45.0,
            pan_limits: (-150.0, 150.0),
            tilt_limits: (-45.0, 45.0),
        }
    }
}

impl PanTiltState {
    pub fn at(pan_deg: f64) -> Self {
        Self {
            pan_deg,
            ..Self::default()
        }
    }
}

/// Right / left / track decision from a pan angle, given the two band edges
/// and whether the edges themselves trigger a turn.
fn band(alpha: f64, right_at: f64, left_at: f64, inclusive: bool) -> Action {
    let (turn_right, turn_left) = if inclusive {
        (alpha <= right_at, alpha >= left_at)
    } else {
        (alpha < right_at, alpha > left_at)
    };
    if turn_right {
        Action::TurnRight
    } else if turn_left {
        Action::TurnLeft
    } else {
        Action::CameraTracking
    }
}

fn front_band(alpha: f64) -> Action {
    band(alpha, -45.0, 45.0, true)
}

fn left_band(alpha: f64) -> Action {
    band(alpha, -120.0, -60.0, true)
}

fn right_band(alpha: f64) -> Action {
    band(alpha, 60.0, 120.0, true)
}

/// Applies the fusion rules, first match wins, in the order
/// 1 (camera), 5 (front+left), 6 (front+right), 2 (front), 3 (left),
/// 4 (right), 7 (nothing).
///
/// All three sensors firing uses the front band; left and right together
/// steer into whichever side band is nearer. Both report rule 0.
pub fn decide(pir: &PirState, cam: &CameraObservation, state: &PanTiltState) -> FusionCommand {
    let alpha = state.pan_deg;
    let cmd = |action, rule| FusionCommand { action, rule };
    if cam.found {
        return cmd(Action::CameraTracking, 1);
    }
    match (pir.infer1, pir.infer2, pir.infer3) {
        (true, true, true) => cmd(front_band(alpha), 0),
        (true, true, false) => cmd(band(alpha, -90.0, 0.0, false), 5),
        (true, false, true) => cmd(band(alpha, 0.0, 120.0, false), 6),
        (true, false, false) => cmd(front_band(alpha), 2),
        (false, true, true) => {
            let action = if alpha < 0.0 {
                left_band(alpha)
            } else {
                right_band(alpha)
            };
            cmd(action, 0)
        }
        (false, true, false) => cmd(left_band(alpha), 3),
        (false, false, true) => cmd(right_band(alpha), 4),
        (false, false, false) => cmd(Action::TurnToZero, 7),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingGains {
    pub kp: f64,
    pub deadband_px: f64,
}

impl Default for TrackingGains {
    fn default() -> Self {
        Self {
            kp: 1.0,
            deadband_px: 10.0,
        }
    }
}

/// Pan and tilt rates in degrees per second.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateCommand {
    pub pan_dps: f64,
    pub tilt_dps: f64,
}

/// Proportional rates that bring the target centroid to the image center.
/// The center is `((W-1)/2, (H-1)/2)`, so a centroid on the last column
/// saturates at the rate limit when `kp = 1`.
pub fn tracking_command(
    cam: &CameraObservation,
    state: &PanTiltState,
    gains: &TrackingGains,
) -> Result<RateCommand, FusionError> {
    let (cx, cy) = match (cam.found, cam.centroid) {
        (true, Some(c)) => c,
        _ => return Err(FusionError::NoTarget),
    };
    let limit = state.rate_limit_dps;
    let axis = |pos: f64, extent: usize| {
        let center = (extent as f64 - 1.0) / 2.0;
        let err = pos - center;
        if err.abs() <= gains.deadband_px || center <= 0.0 {
            0.0
        } else {
            (gains.kp * err / center * limit).clamp(-limit, limit)
        }
    };
    Ok(RateCommand {
        pan_dps: axis(cx, cam.width),
        // image rows grow downward, tilt grows upward
        tilt_dps: -axis(cy, cam.height),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadCommand {
    Fusion(Action),
    Rate(RateCommand),
}

impl From<Action> for HeadCommand {
    fn from(a: Action) -> Self {
        HeadCommand::Fusion(a)
    }
}

impl From<RateCommand> for HeadCommand {
    fn from(r: RateCommand) -> Self {
        HeadCommand::Rate(r)
    }
}

/// Integrates a command over `dt` seconds. Turn commands move at the fixed
/// slew rate; `TurnToZero` stops at zero; `CameraTracking` on its own holds
/// still. The result is clamped to the pan and tilt limits.
pub fn apply_command(state: &PanTiltState, cmd: impl Into<HeadCommand>, dt: f64) -> PanTiltState {
    assert!(dt > 0.0, "dt must be positive");
    let mut next = *state;
    let step = state.rate_limit_dps * dt;
    match cmd.into() {
        HeadCommand::Fusion(Action::TurnRight) => next.pan_deg += step,
        HeadCommand::Fusion(Action::TurnLeft) => next.pan_deg -= step,
        HeadCommand::Fusion(Action::TurnToZero) => {
            let p = state.pan_deg;
            next.pan_deg = if p.abs() <= step { 0.0 } else { p - step * p.signum() };
        }
        HeadCommand::Fusion(Action::CameraTracking) => {}
        HeadCommand::Rate(r) => {
            let limit = state.rate_limit_dps;
            next.pan_deg += r.pan_dps.clamp(-limit, limit) * dt;
            next.tilt_deg += r.tilt_dps.clamp(-limit, limit) * dt;
        }
    }
    next.pan_deg = next.pan_deg.clamp(state.pan_limits.0, state.pan_limits.1);
    next.tilt_deg = next.tilt_deg.clamp(state.tilt_limits.0, state.tilt_limits.1);
    next
}
