//! Deterministic 2D scenario simulator.
//!
//! A single person walks scripted waypoints around a stationary robot that
//! carries the PIR array and a pan-tilt camera. Each tick renders a
//! synthetic frame, runs the detector, fuses it with the PIR sample and
//! moves the head. Everything is a pure function of the [`ScenarioConfig`].

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blobs::{label_components, primary_target, suppress_small, Blob, Connectivity};
use crate::frame::Frame;
use crate::fusion::{
    apply_command, decide, tracking_command, Action, CameraObservation, FusionCommand,
    HeadCommand, PanTiltState, RateCommand, TrackingGains,
};
use crate::fuzzy::ThresholdOptions;
use crate::pir::{default_layout, normalize_deg, sample_array_noisy, ObjectState, PirSensorConfig, PirState};
use crate::temporal::{DiffWindow, MotionMask, ThresholdPolicy};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario config:\n  {}", .0.join("\n  "))]
    ConfigInvalid(Vec<String>),
    #[error("cannot parse scenario config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot read scenario config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Half-width of the square world, meters. Waypoints must lie inside.
    pub extent_m: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { extent_m: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonConfig {
    /// Path in robot-centred world coordinates `[x forward, y right]`.
    pub waypoints: Vec<[f64; 2]>,
    /// Walking speed, m/s, used for every segment without its own entry.
    pub speed: f64,
    /// Optional per-segment speeds overriding `speed`.
    pub segment_speeds: Vec<f64>,
    /// Walk back to the first waypoint and repeat.
    pub closed: bool,
    pub width_m: f64,
    pub height_m: f64,
    pub intensity: u8,
}

impl Default for PersonConfig {
    fn default() -> Self {
        Self {
            waypoints: vec![[5.0, 0.0]],
            speed: 1.0,
            segment_speeds: Vec::new(),
            closed: false,
            width_m: 0.48,
            height_m: 1.7,
            intensity: 30,
        }
    }
}

impl PersonConfig {
    fn segment_count(&self) -> usize {
        match self.waypoints.len() {
            0 | 1 => 0,
            n if self.closed => n,
            n => n - 1,
        }
    }

    fn segment(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let n = self.waypoints.len();
        (self.waypoints[i], self.waypoints[(i + 1) % n])
    }

    fn segment_speed(&self, i: usize) -> f64 {
        self.segment_speeds.get(i).copied().unwrap_or(self.speed)
    }

    fn all_speeds(&self) -> Vec<f64> {
        (0..self.segment_count()).map(|i| self.segment_speed(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
    pub frame_rate: f64,
    pub mount_height_m: f64,
    pub background_seed: u64,
    /// Lattice spacing of the background value noise, degrees.
    pub background_cell_deg: f64,
    pub background_range: [u8; 2],
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            fov_deg: 60.0,
            width: 320,
            height: 240,
            frame_rate: 33.0,
            mount_height_m: 0.8,
            background_seed: 7,
            background_cell_deg: 3.0,
            background_range: [70, 200],
        }
    }
}

impl CameraConfig {
    /// Angular size of one pixel. Columns and rows are equiangular.
    pub fn deg_per_px(&self) -> f64 {
        self.fov_deg / self.width as f64
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    fn center(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Fixed,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub mode: ThresholdMode,
    /// Fixed threshold, and the fallback when the fuzzy one is undefined.
    pub value: u8,
    pub k_order: u32,
    pub weighted: bool,
    pub freeze: bool,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            mode: ThresholdMode::Fixed,
            value: crate::temporal::DEFAULT_THRESHOLD,
            k_order: crate::fuzzy::DEFAULT_K_ORDER,
            weighted: false,
            freeze: false,
        }
    }
}

impl ThresholdConfig {
    pub fn policy(&self) -> ThresholdPolicy {
        match self.mode {
            ThresholdMode::Fixed => ThresholdPolicy::Fixed(self.value),
            ThresholdMode::Fuzzy => ThresholdPolicy::Fuzzy {
                options: ThresholdOptions {
                    k_order: self.k_order,
                    weighted: self.weighted,
                },
                fallback: self.value,
                freeze: self.freeze,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub kp: f64,
    pub deadband_px: f64,
    pub rate_limit_dps: f64,
    pub pan_limits: [f64; 2],
    pub tilt_limits: [f64; 2],
    pub initial_pan_deg: f64,
    /// Drive tilt from the tracking law. Off by default: the window only
    /// compensates pan.
    pub track_tilt: bool,
    pub min_area: usize,
    pub connectivity: u8,
    pub threshold: ThresholdConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            kp: 1.0,
            deadband_px: 10.0,
            rate_limit_dps: 45.0,
            pan_limits: [-150.0, 150.0],
            tilt_limits: [-45.0, 45.0],
            initial_pan_deg: 0.0,
            track_tilt: false,
            min_area: crate::blobs::DEFAULT_MIN_AREA,
            connectivity: 8,
            threshold: ThresholdConfig::default(),
        }
    }
}

impl ControllerConfig {
    pub fn gains(&self) -> TrackingGains {
        TrackingGains {
            kp: self.kp,
            deadband_px: self.deadband_px,
        }
    }

    pub fn connectivity(&self) -> Connectivity {
        Connectivity::from_count(self.connectivity).unwrap_or_default()
    }

    pub fn initial_head(&self) -> PanTiltState {
        PanTiltState {
            pan_deg: self.initial_pan_deg,
            tilt_deg: 0.0,
            rate_limit_dps: self.rate_limit_dps,
            pan_limits: (self.pan_limits[0], self.pan_limits[1]),
            tilt_limits: (self.tilt_limits[0], self.tilt_limits[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Seeds the PIR false-negative draws.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseConfig {
    /// Constant robot base velocity `[forward, right]`, m/s. The base does
    /// not rotate.
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub ticks: usize,
    pub world: WorldConfig,
    /// No person means an empty world.
    pub person: Option<PersonConfig>,
    pub camera: CameraConfig,
    pub sensors: Vec<PirSensorConfig>,
    pub controller: ControllerConfig,
    pub noise: NoiseConfig,
    pub base: BaseConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "unnamed".into(),
            ticks: 330,
            world: WorldConfig::default(),
            person: None,
            camera: CameraConfig::default(),
            sensors: default_layout().to_vec(),
            controller: ControllerConfig::default(),
            noise: NoiseConfig::default(),
            base: BaseConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Whether every scripted walking speed lies in the PIR speed envelope
    /// of 0.1..=4.0 m/s. Speeds outside it are allowed. A person without a
    /// path stands still and is outside the envelope.
    pub fn speeds_in_envelope(&self) -> bool {
        self.person.as_ref().map_or(true, |p| {
            let speeds = p.all_speeds();
            !speeds.is_empty() && speeds.iter().all(|v| (0.1..=4.0).contains(v))
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut errs = Vec::new();
        let cam = &self.camera;
        if self.ticks == 0 {
            errs.push("ticks: must be >= 1".to_string());
        }
        if !(cam.frame_rate > 0.0) {
            errs.push(format!("camera.frame_rate: {} must be > 0", cam.frame_rate));
        }
        if !(cam.fov_deg > 0.0 && cam.fov_deg < 180.0) {
            errs.push(format!("camera.fov_deg: {} not in (0, 180)", cam.fov_deg));
        }
        if cam.width == 0 || cam.height == 0 {
            errs.push("camera.width/height: must be >= 1".to_string());
        }
        if !(cam.background_cell_deg > 0.0) {
            errs.push("camera.background_cell_deg: must be > 0".to_string());
        }
        if cam.background_range[0] > cam.background_range[1] {
            errs.push("camera.background_range: min exceeds max".to_string());
        }
        if !(self.world.extent_m > 0.0) {
            errs.push("world.extent_m: must be > 0".to_string());
        }
        if self.sensors.len() != 3 {
            errs.push(format!("sensors: need exactly 3, got {}", self.sensors.len()));
        }
        for (i, s) in self.sensors.iter().enumerate() {
            errs.extend(s.validate().into_iter().map(|e| format!("sensors[{i}]: {e}")));
        }
        let ctl = &self.controller;
        if !(ctl.rate_limit_dps > 0.0) {
            errs.push("controller.rate_limit_dps: must be > 0".to_string());
        }
        if ctl.pan_limits[0] > ctl.pan_limits[1] {
            errs.push("controller.pan_limits: min exceeds max".to_string());
        }
        if ctl.tilt_limits[0] > ctl.tilt_limits[1] {
            errs.push("controller.tilt_limits: min exceeds max".to_string());
        }
        if !(ctl.pan_limits[0]..=ctl.pan_limits[1]).contains(&ctl.initial_pan_deg) {
            errs.push("controller.initial_pan_deg: outside pan_limits".to_string());
        }
        if Connectivity::from_count(ctl.connectivity).is_none() {
            errs.push(format!("controller.connectivity: {} is not 4 or 8", ctl.connectivity));
        }
        if ctl.threshold.k_order == 0 {
            errs.push("controller.threshold.k_order: must be >= 1".to_string());
        }
        if ctl.deadband_px < 0.0 {
            errs.push("controller.deadband_px: must be >= 0".to_string());
        }
        if let Some(p) = &self.person {
            if p.waypoints.is_empty() {
                errs.push("person.waypoints: need at least one".to_string());
            }
            for (i, w) in p.waypoints.iter().enumerate() {
                if w.iter().any(|c| !c.is_finite() || c.abs() > self.world.extent_m) {
                    errs.push(format!("person.waypoints[{i}]: outside world extent"));
                }
            }
            if p.all_speeds().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || p.speed < 0.0 {
                errs.push("person.speed: speeds must be finite and >= 0".to_string());
            }
            if p.segment_speeds.len() > p.segment_count() {
                errs.push("person.segment_speeds: more entries than segments".to_string());
            }
            if !(p.width_m > 0.0) || !(p.height_m > 0.0) {
                errs.push("person.width_m/height_m: must be > 0".to_string());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SimError::ConfigInvalid(errs))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonState {
    /// World position, meters.
    pub position: [f64; 2],
    pub segment: usize,
    /// Distance already covered along the current segment.
    pub along: f64,
    /// Current velocity, m/s.
    pub velocity: [f64; 2],
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneState {
    pub time: f64,
    pub person: Option<PersonState>,
    /// Robot base position in the world.
    pub base: [f64; 2],
}

impl SceneState {
    pub fn initial(config: &ScenarioConfig) -> Self {
        let person = config.person.as_ref().map(|p| {
            let mut s = PersonState {
                position: p.waypoints[0],
                segment: 0,
                along: 0.0,
                velocity: [0.0; 2],
                finished: p.segment_count() == 0,
            };
            s.velocity = segment_velocity(p, &s);
            s
        });
        Self {
            time: 0.0,
            person,
            base: [0.0; 2],
        }
    }

    /// The person as the robot sees it: position and speed relative to the
    /// base.
    pub fn person_relative(&self, config: &ScenarioConfig) -> Option<ObjectState> {
        let (p, cfg) = (self.person?, config.person.as_ref()?);
        let bv = config.base.velocity;
        Some(ObjectState {
            x: p.position[0] - self.base[0],
            y: p.position[1] - self.base[1],
            height: cfg.height_m,
            speed: (p.velocity[0] - bv[0]).hypot(p.velocity[1] - bv[1]),
        })
    }
}

fn segment_length(cfg: &PersonConfig, i: usize) -> f64 {
    let (a, b) = cfg.segment(i);
    (b[0] - a[0]).hypot(b[1] - a[1])
}

fn segment_velocity(cfg: &PersonConfig, s: &PersonState) -> [f64; 2] {
    if s.finished {
        return [0.0; 2];
    }
    let len = segment_length(cfg, s.segment);
    if len == 0.0 {
        return [0.0; 2];
    }
    let (a, b) = cfg.segment(s.segment);
    let v = cfg.segment_speed(s.segment);
    [(b[0] - a[0]) / len * v, (b[1] - a[1]) / len * v]
}

/// Advances the scene by `dt` seconds. The person follows the piecewise
/// linear path; time left over at a waypoint carries into the next segment.
pub fn step_scene(config: &ScenarioConfig, state: &SceneState, dt: f64) -> SceneState {
    assert!(dt > 0.0, "dt must be positive");
    let mut next = *state;
    next.time += dt;
    let bv = config.base.velocity;
    next.base = [state.base[0] + bv[0] * dt, state.base[1] + bv[1] * dt];
    let (Some(cfg), Some(mut p)) = (config.person.as_ref(), state.person) else {
        return next;
    };
    let segments = cfg.segment_count();
    let path_length: f64 = (0..segments).map(|i| segment_length(cfg, i)).sum();
    let mut remaining = dt;
    while remaining > 0.0 && !p.finished && path_length > 0.0 {
        let len = segment_length(cfg, p.segment);
        let speed = cfg.segment_speed(p.segment);
        if speed <= 0.0 {
            break;
        }
        let to_end = (len - p.along) / speed;
        if to_end > remaining {
            p.along += speed * remaining;
            remaining = 0.0;
        } else {
            remaining -= to_end;
            p.along = 0.0;
            p.segment += 1;
            if p.segment == segments {
                if cfg.closed {
                    p.segment = 0;
                } else {
                    p.segment = segments - 1;
                    p.along = len;
                    p.finished = true;
                }
            }
        }
    }
    let (a, b) = cfg.segment(p.segment.min(segments.saturating_sub(1)));
    if segments > 0 {
        let len = segment_length(cfg, p.segment);
        let t = if len > 0.0 { p.along / len } else { 0.0 };
        p.position = [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t];
    }
    p.velocity = segment_velocity(cfg, &p);
    next.person = Some(p);
    next
}

/// Pixel rectangle covered by the person, inclusive bounds `(x0, y0, x1, y1)`
/// clipped to the image, plus the unclipped center column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Silhouette {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub center_col: f64,
}

impl Silhouette {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }
}

/// Where the person lands in the image for the given head pose, if visible.
pub fn silhouette(
    obj: &ObjectState,
    person: &PersonConfig,
    head: &PanTiltState,
    cam: &CameraConfig,
) -> Option<Silhouette> {
    let range = obj.distance().max(0.3);
    let rel = normalize_deg(obj.bearing_deg() - head.pan_deg);
    if rel.abs() >= 90.0 {
        return None;
    }
    let dpp = cam.deg_per_px();
    let (cx, cy) = cam.center();
    let half_w = (person.width_m / 2.0).atan2(range).to_degrees();
    let top = (person.height_m - cam.mount_height_m).atan2(range).to_degrees() - head.tilt_deg;
    let bottom = (-cam.mount_height_m).atan2(range).to_degrees() - head.tilt_deg;
    let col = |deg: f64| cx + deg / dpp;
    let row = |deg: f64| cy - deg / dpp;
    let (fx0, fx1) = (col(rel - half_w).ceil(), col(rel + half_w).floor());
    let (fy0, fy1) = (row(top).ceil(), row(bottom).floor());
    let (w, h) = (cam.width as f64, cam.height as f64);
    if fx1 < 0.0 || fx0 > w - 1.0 || fy1 < 0.0 || fy0 > h - 1.0 || fx0 > fx1 || fy0 > fy1 {
        return None;
    }
    Some(Silhouette {
        x0: fx0.max(0.0) as usize,
        x1: fx1.min(w - 1.0) as usize,
        y0: fy0.max(0.0) as usize,
        y1: fy1.min(h - 1.0) as usize,
        center_col: col(rel),
    })
}

fn lattice(seed: u64, i: i64, j: i64) -> f64 {
    let mut z = seed
        ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Static background intensity seen in direction (`azimuth`, `elevation`),
/// degrees. Smooth value noise, periodic in azimuth.
pub fn background_at(cam: &CameraConfig, azimuth: f64, elevation: f64) -> u8 {
    let cell = cam.background_cell_deg;
    let wrap = (360.0 / cell).round().max(1.0) as i64;
    let u = azimuth.rem_euclid(360.0) / cell;
    let v = elevation / cell;
    let (i0, j0) = (u.floor() as i64, v.floor() as i64);
    let (fu, fv) = (u - i0 as f64, v - j0 as f64);
    let at = |i: i64, j: i64| lattice(cam.background_seed, i.rem_euclid(wrap), j);
    let top = at(i0, j0) * (1.0 - fu) + at(i0 + 1, j0) * fu;
    let bottom = at(i0, j0 + 1) * (1.0 - fu) + at(i0 + 1, j0 + 1) * fu;
    let n = top * (1.0 - fv) + bottom * fv;
    let [lo, hi] = cam.background_range;
    (f64::from(lo) + n * f64::from(hi - lo)).round() as u8
}

pub fn render_background(head: &PanTiltState, cam: &CameraConfig) -> Frame {
    let dpp = cam.deg_per_px();
    let (cx, cy) = cam.center();
    let mut pixels = Vec::with_capacity(cam.width * cam.height);
    for y in 0..cam.height {
        let elevation = head.tilt_deg - (y as f64 - cy) * dpp;
        for x in 0..cam.width {
            let azimuth = head.pan_deg + (x as f64 - cx) * dpp;
            pixels.push(background_at(cam, azimuth, elevation));
        }
    }
    Frame::new(cam.width, cam.height, pixels).expect("camera dims validated")
}

/// Synthetic camera image: the textured background with the person painted
/// over it as a uniform rectangle.
pub fn render_frame(scene: &SceneState, head: &PanTiltState, config: &ScenarioConfig) -> Frame {
    let cam = &config.camera;
    let background = render_background(head, cam);
    let (Some(person), Some(obj)) = (config.person.as_ref(), scene.person_relative(config)) else {
        return background;
    };
    let Some(sil) = silhouette(&obj, person, head, cam) else {
        return background;
    };
    let mut pixels = background.into_pixels();
    for y in sil.y0..=sil.y1 {
        pixels[y * cam.width + sil.x0..=y * cam.width + sil.x1].fill(person.intensity);
    }
    Frame::new(cam.width, cam.height, pixels).expect("camera dims validated")
}

/// Ground-truth motion pixel count between two silhouettes: the size of
/// their symmetric difference.
pub fn symmetric_difference_area(a: Option<&Silhouette>, b: Option<&Silhouette>) -> usize {
    match (a, b) {
        (None, None) => 0,
        (Some(s), None) | (None, Some(s)) => s.area(),
        (Some(a), Some(b)) => {
            let ix = a.x1.min(b.x1) as i64 - a.x0.max(b.x0) as i64 + 1;
            let iy = a.y1.min(b.y1) as i64 - a.y0.max(b.y0) as i64 + 1;
            let inter = if ix > 0 && iy > 0 { (ix * iy) as usize } else { 0 };
            a.area() + b.area() - 2 * inter
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub tick: usize,
    pub time: f64,
    /// Person relative to the robot.
    pub person: Option<ObjectState>,
    pub pir: PirState,
    /// Head pose when the frame was captured.
    pub pan_deg: f64,
    pub tilt_deg: f64,
    pub command: FusionCommand,
    pub rate: Option<RateCommand>,
    pub cam_found: bool,
    pub centroid: Option<(f64, f64)>,
    /// `None` during warm-up.
    pub motion_pixels: Option<usize>,
    pub gt_motion_pixels: usize,
    pub gt_center_col: Option<f64>,
    /// Person's true center column lies in the central third of the image.
    pub centered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub ticks: usize,
    pub first_pir_tick: Option<usize>,
    pub acquire_tick: Option<usize>,
    /// Seconds from the first PIR trigger to the first tick where the camera
    /// has the person and the person is centered.
    pub time_to_acquire: Option<f64>,
    /// Fraction of ticks from acquisition on with the person centered.
    pub lock_fraction: Option<f64>,
    pub pir_trigger_ticks: usize,
    pub post_warmup_motion_pixels: usize,
    pub speed_in_envelope: bool,
}

impl SimSummary {
    pub fn to_kv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.4}"));
        let opt_u = |v: Option<usize>| v.map_or("none".to_string(), |x| x.to_string());
        format!(
            "ticks={} first_pir_tick={} acquire_tick={} time_to_acquire={} lock_fraction={} pir_trigger_ticks={} post_warmup_motion_pixels={} speed_in_envelope={}",
            self.ticks,
            opt_u(self.first_pir_tick),
            opt_u(self.acquire_tick),
            opt(self.time_to_acquire),
            opt(self.lock_fraction),
            self.pir_trigger_ticks,
            self.post_warmup_motion_pixels,
            self.speed_in_envelope
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub records: Vec<SimRecord>,
    pub summary: SimSummary,
    pub image_dims: (usize, usize),
}

/// Everything produced for one tick, handed to an observer (frame dumps).
pub struct TickArtifacts<'a> {
    pub record: &'a SimRecord,
    pub frame: &'a Frame,
    pub motion: Option<&'a MotionMask>,
    pub blobs: &'a [Blob],
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<SimLog, SimError> {
    run_scenario_observed(config, |_| {})
}

pub fn run_scenario_observed(
    config: &ScenarioConfig,
    mut observe: impl FnMut(&TickArtifacts<'_>),
) -> Result<SimLog, SimError> {
    config.validate()?;
    let cam = &config.camera;
    let ctl = &config.controller;
    let dt = cam.dt();
    let dpp = cam.deg_per_px();
    let gains = ctl.gains();
    let connectivity = ctl.connectivity();
    let (w, h) = (cam.width, cam.height);
    let (third_lo, third_hi) = (w as f64 / 3.0, 2.0 * w as f64 / 3.0);

    let mut rng = ChaCha8Rng::seed_from_u64(config.noise.seed);
    let mut scene = SceneState::initial(config);
    let mut head = ctl.initial_head();
    let mut window = DiffWindow::new(ctl.threshold.policy());
    let mut last_pan: Option<f64> = None;
    let mut last_sil: Option<Silhouette> = None;
    let mut records = Vec::with_capacity(config.ticks);

    for tick in 0..config.ticks {
        if tick > 0 {
            scene = step_scene(config, &scene, dt);
        }
        let obj = scene.person_relative(config);
        let objects: Vec<ObjectState> = obj.into_iter().collect();
        let pir = sample_array_noisy(&config.sensors, &objects, &mut rng)
            .expect("sensor count validated");

        let frame = render_frame(&scene, &head, config).with_index(tick as u64);
        if let Some(prev) = last_pan {
            window.compensate(head.pan_deg - prev, dpp, cam.fov_deg);
        }
        last_pan = Some(head.pan_deg);
        let motion = window
            .push_frame(frame.clone())
            .expect("frames are uniform and ordered");
        let blobs = motion
            .as_ref()
            .map(|m| suppress_small(label_components(&m.grid, connectivity), ctl.min_area))
            .unwrap_or_default();
        let target = primary_target(&blobs);
        let observation = match target {
            Some(b) => CameraObservation::at(b.centroid.0, b.centroid.1, w, h),
            None => CameraObservation::not_found(w, h),
        };

        let sil = match (config.person.as_ref(), obj.as_ref()) {
            (Some(p), Some(o)) => silhouette(o, p, &head, cam),
            _ => None,
        };
        let gt_motion = symmetric_difference_area(sil.as_ref(), last_sil.as_ref());
        last_sil = sil;
        let gt_center_col = sil.map(|s| s.center_col);
        let centered = gt_center_col.is_some_and(|c| c >= third_lo && c < third_hi);

        let command = decide(&pir, &observation, &head);
        let (head_cmd, rate) = match command.action {
            Action::CameraTracking => {
                let mut rate = tracking_command(&observation, &head, &gains).unwrap_or_default();
                if !ctl.track_tilt {
                    rate.tilt_dps = 0.0;
                }
                (HeadCommand::Rate(rate), Some(rate))
            }
            other => (HeadCommand::Fusion(other), None),
        };

        let record = SimRecord {
            tick,
            time: scene.time,
            person: obj,
            pir,
            pan_deg: head.pan_deg,
            tilt_deg: head.tilt_deg,
            command,
            rate,
            cam_found: observation.found,
            centroid: observation.centroid,
            motion_pixels: motion.as_ref().map(|m| m.grid.count_ones()),
            gt_motion_pixels: gt_motion,
            gt_center_col,
            centered,
        };
        observe(&TickArtifacts {
            record: &record,
            frame: &frame,
            motion: motion.as_ref(),
            blobs: &blobs,
        });
        records.push(record);
        head = apply_command(&head, head_cmd, dt);
    }

    let summary = summarize(config, &records);
    Ok(SimLog {
        records,
        summary,
        image_dims: (w, h),
    })
}

fn summarize(config: &ScenarioConfig, records: &[SimRecord]) -> SimSummary {
    let dt = config.camera.dt();
    let first_pir_tick = records.iter().position(|r| r.pir.any());
    let acquire_tick = first_pir_tick.and_then(|start| {
        records[start..]
            .iter()
            .position(|r| r.cam_found && r.centered)
            .map(|i| start + i)
    });
    let time_to_acquire = match (first_pir_tick, acquire_tick) {
        (Some(a), Some(b)) => Some((b - a) as f64 * dt),
        _ => None,
    };
    let lock_fraction = acquire_tick.map(|start| {
        let rest = &records[start..];
        rest.iter().filter(|r| r.centered).count() as f64 / rest.len() as f64
    });
    SimSummary {
        ticks: records.len(),
        first_pir_tick,
        acquire_tick,
        time_to_acquire,
        lock_fraction,
        pir_trigger_ticks: records.iter().filter(|r| r.pir.any()).count(),
        post_warmup_motion_pixels: records.iter().filter_map(|r| r.motion_pixels).sum(),
        speed_in_envelope: config.speeds_in_envelope(),
    }
}

fn b01(b: bool) -> u8 {
    u8::from(b)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl SimLog {
    pub const CSV_HEADER: &'static str = "tick,time_s,person_x,person_y,person_speed,infer1,infer2,infer3,cam_found,centroid_x,centroid_y,pan_deg,tilt_deg,rule_index,command,pan_rate_dps,tilt_rate_dps,motion_pixels,gt_motion_pixels,gt_center_col,centered";

    /// Full per-tick record.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.6},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{},{},{},{},{},{},{},{}",
                r.tick,
                r.time,
                fmt_opt(r.person.map(|p| p.x)),
                fmt_opt(r.person.map(|p| p.y)),
                fmt_opt(r.person.map(|p| p.speed)),
                b01(r.pir.infer1),
                b01(r.pir.infer2),
                b01(r.pir.infer3),
                b01(r.cam_found),
                fmt_opt(r.centroid.map(|c| c.0)),
                fmt_opt(r.centroid.map(|c| c.1)),
                r.pan_deg,
                r.tilt_deg,
                r.command.rule,
                r.command.action,
                fmt_opt(r.rate.map(|x| x.pan_dps)),
                fmt_opt(r.rate.map(|x| x.tilt_dps)),
                r.motion_pixels.map(|m| m.to_string()).unwrap_or_default(),
                r.gt_motion_pixels,
                fmt_opt(r.gt_center_col),
                b01(r.centered),
            );
        }
        out
    }

    /// `tick,infer1,infer2,infer3`
    pub fn pir_csv(&self) -> String {
        let mut out = String::from("tick,infer1,infer2,infer3\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.tick,
                b01(r.pir.infer1),
                b01(r.pir.infer2),
                b01(r.pir.infer3)
            );
        }
        out
    }

    /// `tick,cam_found,centroid_x,centroid_y,image_width,image_height,alpha_deg`
    pub fn camera_csv(&self) -> String {
        let (w, h) = self.image_dims;
        let mut out =
            String::from("tick,cam_found,centroid_x,centroid_y,image_width,image_height,alpha_deg\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.6}",
                r.tick,
                b01(r.cam_found),
                fmt_opt(r.centroid.map(|c| c.0)),
                fmt_opt(r.centroid.map(|c| c.1)),
                w,
                h,
                r.pan_deg
            );
        }
        out
    }

    /// `tick,infer1,infer2,infer3,cam_found,alpha_deg,rule_index,command`
    pub fn decision_csv(&self) -> String {
        let rows = self.records.iter().map(|r| DecisionRow {
            tick: r.tick as u64,
            pir: r.pir,
            cam_found: r.cam_found,
            alpha_deg: r.pan_deg,
            command: r.command,
        });
        decision_csv(rows)
    }
}

/// One line of a decision log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRow {
    pub tick: u64,
    pub pir: PirState,
    pub cam_found: bool,
    pub alpha_deg: f64,
    pub command: FusionCommand,
}

pub const DECISION_CSV_HEADER: &str = "tick,infer1,infer2,infer3,cam_found,alpha_deg,rule_index,command";

pub fn decision_csv(rows: impl IntoIterator<Item = DecisionRow>) -> String {
    let mut out = String::from(DECISION_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6},{},{}",
            r.tick,
            b01(r.pir.infer1),
            b01(r.pir.infer2),
            b01(r.pir.infer3),
            b01(r.cam_found),
            r.alpha_deg,
            r.command.rule,
            r.command.action
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walker(waypoints: Vec<[f64; 2]>, speed: f64, closed: bool) -> ScenarioConfig {
        ScenarioConfig {
            person: Some(PersonConfig {
                waypoints,
                speed,
                closed,
                ..PersonConfig::default()
            }),
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn straight_line_kinematics() {
        let cfg = walker(vec![[0.0, 0.0], [10.0, 0.0]], 1.0, false);
        let s = step_scene(&cfg, &SceneState::initial(&cfg), 0.5);
        let p = s.person.unwrap().position;
        assert!((p[0] - 0.5).abs() < 1e-12 && p[1] == 0.0);
    }

    #[test]
    fn carries_over_waypoints() {
        let cfg = walker(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 5.0]], 1.0, false);
        let s = step_scene(&cfg, &SceneState::initial(&cfg), 1.5);
        let p = s.person.unwrap();
        assert!((p.position[0] - 1.0).abs() < 1e-12 && (p.position[1] - 0.5).abs() < 1e-12);
        assert_eq!(p.segment, 1);
        assert!((p.velocity[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stops_at_last_waypoint() {
        let cfg = walker(vec![[0.0, 0.0], [1.0, 0.0]], 1.0, false);
        let s = step_scene(&cfg, &SceneState::initial(&cfg), 3.0);
        let p = s.person.unwrap();
        assert!(p.finished);
        assert_eq!(p.position, [1.0, 0.0]);
        assert_eq!(p.velocity, [0.0, 0.0]);
    }

    #[test]
    fn closed_square_returns_home() {
        let cfg = walker(vec![[2.0, 2.0], [6.0, 2.0], [6.0, 6.0], [2.0, 6.0]], 1.3, true);
        let dt = 1.0 / 33.0;
        let period: f64 = 16.0 / 1.3;
        let mut s = SceneState::initial(&cfg);
        let steps = (period / dt).floor() as usize;
        for _ in 0..steps {
            s = step_scene(&cfg, &s, dt);
        }
        let rest = period - steps as f64 * dt;
        if rest > 0.0 {
            s = step_scene(&cfg, &s, rest);
        }
        let p = s.person.unwrap().position;
        assert!((p[0] - 2.0).abs() < 1e-6 && (p[1] - 2.0).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn person_behind_camera_is_invisible() {
        let cfg = walker(vec![[-5.0, 0.0]], 0.0, false);
        let scene = SceneState::initial(&cfg);
        let head = PanTiltState::default();
        assert_eq!(render_frame(&scene, &head, &cfg), render_background(&head, &cfg.camera));
        assert_eq!(render_frame(&scene, &head, &cfg), render_frame(&scene, &head, &cfg));
    }

    #[test]
    fn centered_silhouette() {
        for pan in [0.0, 17.3, -42.0] {
            let r = f64::to_radians(pan);
            let cfg = walker(vec![[4.0 * r.cos(), 4.0 * r.sin()]], 0.0, false);
            let scene = SceneState::initial(&cfg);
            let head = PanTiltState::at(pan);
            let frame = render_frame(&scene, &head, &cfg);
            let row = 120;
            let cols: Vec<usize> = (0..320).filter(|&x| frame.get(x, row) == 30).collect();
            let mid = (cols[0] + cols[cols.len() - 1]) as f64 / 2.0;
            assert!((mid - 159.5).abs() <= 1.0, "pan {pan}: mid {mid}");
        }
    }

    #[test]
    fn config_validation_lists_fields() {
        let mut cfg = ScenarioConfig::default();
        cfg.camera.frame_rate = 0.0;
        cfg.controller.connectivity = 6;
        match cfg.validate() {
            Err(SimError::ConfigInvalid(errs)) => {
                assert!(errs.iter().any(|e| e.starts_with("camera.frame_rate")));
                assert!(errs.iter().any(|e| e.starts_with("controller.connectivity")));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ScenarioConfig::from_toml("ticks = \"many\""),
            Err(SimError::Parse(_))
        ));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = walker(vec![[5.0, -2.0], [5.0, 4.0]], 1.0, false);
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn symmetric_difference_of_rects() {
        let a = Silhouette { x0: 0, y0: 0, x1: 3, y1: 3, center_col: 1.5 };
        let b = Silhouette { x0: 2, y0: 0, x1: 5, y1: 3, center_col: 3.5 };
        assert_eq!(symmetric_difference_area(Some(&a), Some(&b)), 16);
        assert_eq!(symmetric_difference_area(Some(&a), None), 16);
        assert_eq!(symmetric_difference_area(Some(&a), Some(&a)), 0);
    }
}
