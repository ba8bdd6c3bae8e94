//! Python bindings: frames, the three-frame detector, blob extraction, the
//! fuzzy threshold, the PIR model, the fusion rules and the simulator.

use motionfuse_core::blobs::{self, Connectivity};
use motionfuse_core::frame::{self, Histogram};
use motionfuse_core::fusion::{self, Action};
use motionfuse_core::fuzzy::{self, FuzzyError, ThresholdOptions};
use motionfuse_core::pgm;
use motionfuse_core::pir::{self, default_layout, ObjectState, Zone};
use motionfuse_core::sim::{self, ScenarioConfig};
use motionfuse_core::temporal::{self, BitGrid, ThresholdPolicy};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(motionfuse, NoContrastError, PyValueError);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fuzzy_err(e: FuzzyError) -> PyErr {
    match e {
        FuzzyError::NoContrast(_) => NoContrastError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn connectivity(n: u8) -> PyResult<Connectivity> {
    Connectivity::from_count(n).ok_or_else(|| value_err(format!("connectivity must be 4 or 8, got {n}")))
}

/// 8-bit grayscale image.
#[pyclass(module = "motionfuse")]
#[derive(Clone)]
struct Frame {
    inner: frame::Frame,
}

#[pymethods]
impl Frame {
    #[new]
    #[pyo3(signature = (width, height, pixels, index = 0))]
    fn new(width: usize, height: usize, pixels: Vec<u8>, index: u64) -> PyResult<Self> {
        let inner = frame::Frame::new(width, height, pixels).map_err(value_err)?.with_index(index);
        Ok(Self { inner })
    }

    /// Decodes a P2 or P5 image.
    #[staticmethod]
    #[pyo3(signature = (data, index = 0))]
    fn from_pgm(data: &[u8], index: u64) -> PyResult<Self> {
        let inner = pgm::decode_pgm(data).map_err(value_err)?.with_index(index);
        Ok(Self { inner })
    }

    fn to_pgm<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new_bound(py, &pgm::encode_pgm(&self.inner))
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn index(&self) -> u64 {
        self.inner.index()
    }

    #[getter]
    fn pixels<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new_bound(py, self.inner.pixels())
    }

    fn get(&self, x: usize, y: usize) -> PyResult<u8> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(pyo3::exceptions::PyIndexError::new_err((x, y)));
        }
        Ok(self.inner.get(x, y))
    }

    /// 256 bin counts.
    fn histogram(&self) -> Vec<u64> {
        frame::histogram(&self.inner).bins().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Frame({}x{}, index={})", self.inner.width(), self.inner.height(), self.inner.index())
    }
}

/// Binary mask with one byte per pixel (0 or 1).
#[pyclass(module = "motionfuse")]
#[derive(Clone)]
struct Mask {
    grid: BitGrid,
}

#[pymethods]
impl Mask {
    #[new]
    fn new(width: usize, height: usize, bits: Vec<u8>) -> PyResult<Self> {
        Ok(Self {
            grid: BitGrid::new(width, height, bits).map_err(value_err)?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.grid.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.grid.height()
    }

    #[getter]
    fn bits<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new_bound(py, self.grid.bits())
    }

    fn count(&self) -> usize {
        self.grid.count_ones()
    }

    /// Connected components, largest first.
    #[pyo3(signature = (connectivity = 8, min_area = 0))]
    fn blobs(&self, connectivity: u8, min_area: usize) -> PyResult<Vec<Blob>> {
        label_components(self, connectivity, min_area)
    }

    /// Mask as an image with set pixels at 255.
    fn to_frame(&self) -> Frame {
        Frame {
            inner: self.grid.to_frame(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Mask({}x{}, set={})", self.grid.width(), self.grid.height(), self.grid.count_ones())
    }
}

#[pyclass(module = "motionfuse", get_all)]
#[derive(Clone)]
struct Blob {
    area: usize,
    /// `(x, y, w, h)`
    bbox: (usize, usize, usize, usize),
    centroid: (f64, f64),
}

#[pymethods]
impl Blob {
    fn __repr__(&self) -> String {
        format!("Blob(area={}, bbox={:?}, centroid={:?})", self.area, self.bbox, self.centroid)
    }
}

impl From<&blobs::Blob> for Blob {
    fn from(b: &blobs::Blob) -> Self {
        Self {
            area: b.area,
            bbox: (b.bbox.x, b.bbox.y, b.bbox.w, b.bbox.h),
            centroid: b.centroid,
        }
    }
}

#[pyfunction]
#[pyo3(signature = (mask, connectivity = 8, min_area = 0))]
fn label_components(mask: &Mask, connectivity: u8, min_area: usize) -> PyResult<Vec<Blob>> {
    let found = blobs::label_components(&mask.grid, self::connectivity(connectivity)?);
    Ok(blobs::suppress_small(found, min_area).iter().map(Blob::from).collect())
}

/// Three-frame temporal difference over a stream of frames.
#[pyclass(module = "motionfuse")]
struct DiffWindow {
    inner: temporal::DiffWindow,
}

#[pymethods]
impl DiffWindow {
    /// With `fuzzy`, each difference frame gets its own fuzziness-curve
    /// threshold and `threshold` is the fallback.
    #[new]
    #[pyo3(signature = (threshold = temporal::DEFAULT_THRESHOLD, fuzzy = false, k_order = fuzzy::DEFAULT_K_ORDER, weighted = false, freeze = false))]
    fn new(threshold: u8, fuzzy: bool, k_order: u32, weighted: bool, freeze: bool) -> PyResult<Self> {
        if k_order == 0 {
            return Err(value_err("k_order must be at least 1"));
        }
        let policy = if fuzzy {
            ThresholdPolicy::Fuzzy {
                options: ThresholdOptions { k_order, weighted },
                fallback: threshold,
                freeze,
            }
        } else {
            ThresholdPolicy::Fixed(threshold)
        };
        Ok(Self {
            inner: temporal::DiffWindow::new(policy),
        })
    }

    /// Adds a frame; returns the motion mask of that frame once three frames
    /// have been seen, otherwise `None`. Frame indices must increase.
    fn push(&mut self, frame: &Frame) -> PyResult<Option<Mask>> {
        let out = self.inner.push_frame(frame.inner.clone()).map_err(value_err)?;
        Ok(out.map(|m| Mask { grid: m.grid }))
    }

    /// Re-registers the buffer after a pan of `pan_delta` degrees. Returns
    /// `False` when the pan was too large and the window was cleared.
    fn compensate(&mut self, pan_delta: f64, deg_per_px: f64, fov_deg: f64) -> bool {
        self.inner.compensate(pan_delta, deg_per_px, fov_deg)
    }

    fn reset(&mut self) {
        self.inner.reset();
    }
}

/// `M(k)` for three consecutive frames with a fixed threshold.
#[pyfunction]
#[pyo3(signature = (f0, f1, f2, threshold = temporal::DEFAULT_THRESHOLD))]
fn motion_mask(f0: &Frame, f1: &Frame, f2: &Frame, threshold: u8) -> PyResult<Mask> {
    let d1 = temporal::binarize(&temporal::abs_diff(&f1.inner, &f0.inner).map_err(value_err)?, threshold);
    let d2 = temporal::binarize(&temporal::abs_diff(&f2.inner, &f1.inner).map_err(value_err)?, threshold);
    let prev = temporal::intersect(&d2, &d1).map_err(value_err)?;
    let m = temporal::subtract(&d2, &prev).map_err(value_err)?;
    Ok(Mask { grid: m.grid })
}

fn histogram_from(values: Vec<u64>) -> PyResult<Histogram> {
    let bins: [u64; 256] = values
        .try_into()
        .map_err(|v: Vec<u64>| value_err(format!("expected 256 bins, got {}", v.len())))?;
    Ok(Histogram::from_bins(bins))
}

/// Fuzziness-curve threshold of a 256-bin histogram. Returns the threshold
/// and a dict with the seeds, `alpha`, and the curves over the candidates.
#[pyfunction]
#[pyo3(signature = (histogram, k_order = fuzzy::DEFAULT_K_ORDER, weighted = false))]
fn fuzzy_threshold<'py>(
    py: Python<'py>,
    histogram: Vec<u64>,
    k_order: u32,
    weighted: bool,
) -> PyResult<(u8, Bound<'py, PyDict>)> {
    let hist = histogram_from(histogram)?;
    let (t, curve) = fuzzy::compute_threshold(&hist, ThresholdOptions { k_order, weighted }).map_err(fuzzy_err)?;
    let d = PyDict::new_bound(py);
    d.set_item("x_min", curve.region.x_min)?;
    d.set_item("x_j", curve.region.x_j)?;
    d.set_item("x_r", curve.region.x_r)?;
    d.set_item("x_max", curve.region.x_max)?;
    d.set_item("alpha", curve.alpha)?;
    d.set_item("levels", curve.levels.clone())?;
    d.set_item("psi_b", curve.psi_b.clone())?;
    d.set_item("psi_w", curve.psi_w.clone())?;
    Ok((t, d))
}

/// S-shaped object membership with parameters `a <= b <= c`.
#[pyfunction]
fn mu_b(x: f64, a: f64, b: f64, c: f64) -> f64 {
    fuzzy::mu_b(x, &fuzzy::MembershipParams { a, b, c })
}

#[pyfunction]
#[pyo3(signature = (memberships, k_order = fuzzy::DEFAULT_K_ORDER))]
fn fuzziness_index(memberships: Vec<f64>, k_order: u32) -> PyResult<f64> {
    fuzzy::fuzziness_index(&memberships, k_order).map_err(fuzzy_err)
}

/// `"A"`, `"B"`, `"C"` or `None` for a distance and height in meters.
#[pyfunction]
fn zone_of(distance: f64, height: f64) -> Option<&'static str> {
    pir::zone_of(distance, height).map(|z| match z {
        Zone::A => "A",
        Zone::B => "B",
        Zone::C => "C",
    })
}

/// Readings of the default three-sensor array for one person at `(x, y)`
/// (x forward, y right) with the given height and speed.
#[pyfunction]
fn sample_array(x: f64, y: f64, height: f64, speed: f64) -> (bool, bool, bool) {
    let obj = ObjectState { x, y, height, speed };
    let s = pir::sample_array(&default_layout(), &[obj]).expect("three sensors");
    (s.infer1, s.infer2, s.infer3)
}

/// Camera pan/tilt state with the default limits.
#[pyclass(module = "motionfuse")]
#[derive(Clone)]
struct PanTilt {
    inner: fusion::PanTiltState,
}

#[pymethods]
impl PanTilt {
    #[new]
    #[pyo3(signature = (pan_deg = 0.0, tilt_deg = 0.0, rate_limit_dps = 45.0))]
    fn new(pan_deg: f64, tilt_deg: f64, rate_limit_dps: f64) -> Self {
        let mut inner = fusion::PanTiltState::at(pan_deg);
        inner.tilt_deg = tilt_deg;
        inner.rate_limit_dps = rate_limit_dps;
        Self { inner }
    }

    #[getter]
    fn pan_deg(&self) -> f64 {
        self.inner.pan_deg
    }

    #[getter]
    fn tilt_deg(&self) -> f64 {
        self.inner.tilt_deg
    }

    /// Integrates a command name (`"TurnRight"`, `"TurnLeft"`,
    /// `"TurnToZero"`, `"CameraTracking"`) over `dt` seconds.
    fn apply(&self, command: &str, dt: f64) -> PyResult<Self> {
        if !(dt > 0.0) {
            return Err(value_err("dt must be positive"));
        }
        let action: Action = command.parse().map_err(value_err)?;
        Ok(Self {
            inner: fusion::apply_command(&self.inner, action, dt),
        })
    }

    /// Integrates pan and tilt rates in degrees per second.
    fn apply_rates(&self, pan_dps: f64, tilt_dps: f64, dt: f64) -> PyResult<Self> {
        if !(dt > 0.0) {
            return Err(value_err("dt must be positive"));
        }
        let rate = fusion::RateCommand { pan_dps, tilt_dps };
        Ok(Self {
            inner: fusion::apply_command(&self.inner, rate, dt),
        })
    }

    fn __repr__(&self) -> String {
        format!("PanTilt(pan_deg={}, tilt_deg={})", self.inner.pan_deg, self.inner.tilt_deg)
    }
}

fn observation(centroid: Option<(f64, f64)>, width: usize, height: usize) -> fusion::CameraObservation {
    match centroid {
        Some((x, y)) => fusion::CameraObservation::at(x, y, width, height),
        None => fusion::CameraObservation::not_found(width, height),
    }
}

/// Fusion decision. `centroid` is the camera target or `None`. Returns the
/// command name and the index of the rule that fired (0 for combinations
/// the rule list does not cover).
#[pyfunction]
#[pyo3(signature = (infer1, infer2, infer3, pan_deg, centroid = None, width = 320, height = 240))]
fn decide(
    infer1: bool,
    infer2: bool,
    infer3: bool,
    pan_deg: f64,
    centroid: Option<(f64, f64)>,
    width: usize,
    height: usize,
) -> (&'static str, u8) {
    let cmd = fusion::decide(
        &pir::PirState::new(infer1, infer2, infer3),
        &observation(centroid, width, height),
        &fusion::PanTiltState::at(pan_deg),
    );
    (cmd.action.as_str(), cmd.rule)
}

/// Pan and tilt rates that center the target.
#[pyfunction]
#[pyo3(signature = (centroid, width = 320, height = 240, kp = 1.0, deadband_px = 10.0, rate_limit_dps = 45.0))]
fn tracking_command(
    centroid: (f64, f64),
    width: usize,
    height: usize,
    kp: f64,
    deadband_px: f64,
    rate_limit_dps: f64,
) -> PyResult<(f64, f64)> {
    let mut state = fusion::PanTiltState::default();
    state.rate_limit_dps = rate_limit_dps;
    let r = fusion::tracking_command(
        &observation(Some(centroid), width, height),
        &state,
        &fusion::TrackingGains { kp, deadband_px },
    )
    .map_err(value_err)?;
    Ok((r.pan_dps, r.tilt_dps))
}

/// Runs a scenario given as TOML text. Returns a dict with the summary
/// fields and the CSV logs.
#[pyfunction]
#[pyo3(signature = (config_toml, seed = None, ticks = None))]
fn run_scenario<'py>(
    py: Python<'py>,
    config_toml: &str,
    seed: Option<u64>,
    ticks: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut config = ScenarioConfig::from_toml(config_toml).map_err(value_err)?;
    if let Some(s) = seed {
        config.noise.seed = s;
    }
    if let Some(t) = ticks {
        config.ticks = t;
    }
    let log = py.allow_threads(|| sim::run_scenario(&config)).map_err(value_err)?;
    let s = &log.summary;
    let d = PyDict::new_bound(py);
    d.set_item("name", &config.name)?;
    d.set_item("ticks", s.ticks)?;
    d.set_item("first_pir_tick", s.first_pir_tick)?;
    d.set_item("acquire_tick", s.acquire_tick)?;
    d.set_item("time_to_acquire", s.time_to_acquire)?;
    d.set_item("lock_fraction", s.lock_fraction)?;
    d.set_item("pir_trigger_ticks", s.pir_trigger_ticks)?;
    d.set_item("post_warmup_motion_pixels", s.post_warmup_motion_pixels)?;
    d.set_item("speed_in_envelope", s.speed_in_envelope)?;
    d.set_item("log_csv", log.to_csv())?;
    d.set_item("decisions_csv", log.decision_csv())?;
    Ok(d)
}

#[pymodule]
fn motionfuse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NoContrastError", m.py().get_type_bound::<NoContrastError>())?;
    m.add_class::<Frame>()?;
    m.add_class::<Mask>()?;
    m.add_class::<Blob>()?;
    m.add_class::<DiffWindow>()?;
    m.add_class::<PanTilt>()?;
    m.add_function(wrap_pyfunction!(motion_mask, m)?)?;
    m.add_function(wrap_pyfunction!(label_components, m)?)?;
    m.add_function(wrap_pyfunction!(fuzzy_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(mu_b, m)?)?;
    m.add_function(wrap_pyfunction!(fuzziness_index, m)?)?;
    m.add_function(wrap_pyfunction!(zone_of, m)?)?;
    m.add_function(wrap_pyfunction!(sample_array, m)?)?;
    m.add_function(wrap_pyfunction!(decide, m)?)?;
    m.add_function(wrap_pyfunction!(tracking_command, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
