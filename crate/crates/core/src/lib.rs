//! Moving-object detection for a pan-tilt camera fused with a three-sensor
//! PIR array.
//!
//! The detector is the three-frame temporal difference in [`temporal`],
//! optionally thresholded by the fuzziness-curve method in [`fuzzy`]. Motion
//! masks are reduced to a target blob by [`blobs`], combined with PIR
//! readings ([`pir`]) by the rule table in [`fusion`], and the whole loop is
//! exercised by the simulator in [`sim`].

pub mod blobs;
pub mod frame;
pub mod fusion;
pub mod fuzzy;
pub mod pgm;
pub mod pir;
pub mod sim;
pub mod temporal;

pub use blobs::{label_components, primary_target, suppress_small, Blob, BoundingBox, Connectivity};
pub use frame::{histogram, Frame, FrameError, Histogram};
pub use fusion::{
    apply_command, decide, tracking_command, Action, CameraObservation, FusionCommand,
    PanTiltState, RateCommand, TrackingGains,
};
pub use fuzzy::{compute_threshold, FuzzinessCurve, MembershipParams, ThresholdOptions};
pub use pgm::{decode_pgm, encode_pgm, PgmError};
pub use pir::{pir_detect, sample_array, zone_of, ObjectState, PirSensorConfig, PirState, Zone};
pub use sim::{run_scenario, ScenarioConfig, SimError, SimLog};
pub use temporal::{
    abs_diff, binarize, compensate_pan, intersect, subtract, DiffMask, DiffWindow, MotionMask,
    ThresholdPolicy,
};
