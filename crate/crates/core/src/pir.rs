//! Geometric model of a three-sensor passive-infrared array.
//!
//! Positions are in the robot frame: `x` forward, `y` to the right, meters.
//! Bearings are degrees, positive to the right, in `[-180, 180)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PirError {
    #[error("a PIR array needs exactly 3 sensors, got {0}")]
    BadArraySize(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Zone {
    A,
    B,
    C,
}

/// Distance/height region in which a sensor responds.
///
/// Zone C is the near box, zone A the long low box. Zone B fills the space
/// above A and beyond C, under a height limit that falls linearly from C's
/// height at C's distance to A's height at A's distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoneEnvelope {
    pub near_distance: f64,
    pub near_height: f64,
    pub far_distance: f64,
    pub far_height: f64,
}

impl Default for ZoneEnvelope {
    fn default() -> Self {
        Self {
            near_distance: 3.0,
            near_height: 2.5,
            far_distance: 12.0,
            far_height: 1.5,
        }
    }
}

impl ZoneEnvelope {
    pub fn zone_of(&self, distance: f64, height: f64) -> Option<Zone> {
        if distance < 0.0 || height < 0.0 {
            return None;
        }
        if distance <= self.near_distance && height <= self.near_height {
            return Some(Zone::C);
        }
        if distance > self.far_distance {
            return None;
        }
        if height <= self.far_height {
            return Some(Zone::A);
        }
        let span = self.far_distance - self.near_distance;
        let frac = if span > 0.0 {
            (distance - self.near_distance) / span
        } else {
            1.0
        };
        let limit = self.near_height + frac * (self.far_height - self.near_height);
        (distance > self.near_distance && height <= limit).then_some(Zone::B)
    }
}

/// Zone lookup with the default envelope.
pub fn zone_of(distance: f64, height: f64) -> Option<Zone> {
    ZoneEnvelope::default().zone_of(distance, height)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PirSensorConfig {
    /// Sector axis bearing, degrees.
    pub axis_deg: f64,
    pub half_angle_deg: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub envelope: ZoneEnvelope,
    /// Probability that a detection is dropped on its way to the host.
    pub false_negative_prob: f64,
}

impl Default for PirSensorConfig {
    fn default() -> Self {
        Self {
            axis_deg: 0.0,
            half_angle_deg: 60.0,
            min_speed: 0.1,
            max_speed: 4.0,
            envelope: ZoneEnvelope::default(),
            false_negative_prob: 0.0,
        }
    }
}

impl PirSensorConfig {
    pub fn with_axis(axis_deg: f64) -> Self {
        Self {
            axis_deg,
            ..Self::default()
        }
    }

    pub fn max_range(&self) -> f64 {
        self.envelope.far_distance
    }

    /// Problems with this configuration, one message per bad field.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.half_angle_deg > 0.0 && self.half_angle_deg <= 90.0) {
            errs.push(format!("half_angle_deg {} not in (0, 90]", self.half_angle_deg));
        }
        if !(self.envelope.far_distance > 0.0) {
            errs.push("envelope.far_distance must be > 0".into());
        }
        if !(self.min_speed >= 0.0 && self.min_speed < self.max_speed) {
            errs.push(format!(
                "speed gate [{}, {}] must satisfy 0 <= min < max",
                self.min_speed, self.max_speed
            ));
        }
        if !(0.0..=1.0).contains(&self.false_negative_prob) {
            errs.push("false_negative_prob must be in [0, 1]".into());
        }
        errs
    }

    /// Half-open sector test: `[axis - half, axis + half)`.
    pub fn covers_bearing(&self, bearing_deg: f64) -> bool {
        let lo = self.axis_deg - self.half_angle_deg;
        let offset = (bearing_deg - lo).rem_euclid(360.0);
        offset < 2.0 * self.half_angle_deg
    }
}

/// The front / left / right layout: sectors `[-60, 60)`, `[-180, -60)` and
/// `[60, 180)`, which tile the full circle.
pub fn default_layout() -> [PirSensorConfig; 3] {
    [
        PirSensorConfig::with_axis(0.0),
        PirSensorConfig::with_axis(-120.0),
        PirSensorConfig::with_axis(120.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub x: f64,
    pub y: f64,
    pub height: f64,
    pub speed: f64,
}

impl ObjectState {
    pub fn distance(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn bearing_deg(&self) -> f64 {
        normalize_deg(self.y.atan2(self.x).to_degrees())
    }
}

/// Wraps an angle into `[-180, 180)`.
pub fn normalize_deg(deg: f64) -> f64 {
    (deg + 180.0).rem_euclid(360.0) - 180.0
}

pub fn pir_detect(cfg: &PirSensorConfig, obj: &ObjectState) -> bool {
    cfg.covers_bearing(obj.bearing_deg())
        && cfg.envelope.zone_of(obj.distance(), obj.height).is_some()
        && obj.speed >= cfg.min_speed
        && obj.speed <= cfg.max_speed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedColor {
    Red,
    Blue,
}

impl LedColor {
    pub fn from_detected(detected: bool) -> Self {
        if detected {
            LedColor::Red
        } else {
            LedColor::Blue
        }
    }

    pub fn detected(self) -> bool {
        self == LedColor::Red
    }
}

/// One sample of the three sensors. `infer1` is the front sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PirState {
    pub infer1: bool,
    pub infer2: bool,
    pub infer3: bool,
}

impl PirState {
    pub fn new(infer1: bool, infer2: bool, infer3: bool) -> Self {
        Self {
            infer1,
            infer2,
            infer3,
        }
    }

    pub fn any(&self) -> bool {
        self.infer1 || self.infer2 || self.infer3
    }

    pub fn leds(&self) -> [LedColor; 3] {
        [self.infer1, self.infer2, self.infer3].map(LedColor::from_detected)
    }
}

fn check_size(configs: &[PirSensorConfig]) -> Result<(), PirError> {
    if configs.len() != 3 {
        return Err(PirError::BadArraySize(configs.len()));
    }
    Ok(())
}

/// Each sensor reports whether any object triggers it.
pub fn sample_array(configs: &[PirSensorConfig], objects: &[ObjectState]) -> Result<PirState, PirError> {
    check_size(configs)?;
    let fired = |cfg: &PirSensorConfig| objects.iter().any(|o| pir_detect(cfg, o));
    Ok(PirState::new(
        fired(&configs[0]),
        fired(&configs[1]),
        fired(&configs[2]),
    ))
}

/// Like [`sample_array`], then drops each positive reading with the sensor's
/// `false_negative_prob`. Exactly one random draw is made per sensor so the
/// random stream does not depend on the scene.
pub fn sample_array_noisy<R: Rng>(
    configs: &[PirSensorConfig],
    objects: &[ObjectState],
    rng: &mut R,
) -> Result<PirState, PirError> {
    let clean = sample_array(configs, objects)?;
    let mut keep = [true; 3];
    for (slot, cfg) in keep.iter_mut().zip(configs) {
        let draw: f64 = rng.gen();
        *slot = draw >= cfg.false_negative_prob;
    }
    Ok(PirState::new(
        clean.infer1 && keep[0],
        clean.infer2 && keep[1],
        clean.infer3 && keep[2],
    ))
}
