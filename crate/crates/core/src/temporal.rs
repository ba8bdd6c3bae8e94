//! Three-frame consecutive temporal difference.
//!
//! `D(k)` marks pixels that changed between frames `k-1` and `k`. Pixels
//! moving in frame `k-1` appear in both `D(k)` and `D(k-1)`, so their
//! intersection isolates the motion of frame `k-1`, and removing that from
//! `D(k)` leaves the motion of frame `k`.

use std::collections::VecDeque;

use thiserror::Error;

use crate::frame::{histogram, Frame, FrameError};
use crate::fuzzy::{compute_threshold, ThresholdOptions};

pub const DEFAULT_THRESHOLD: u8 = 25;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("frame ordinal {got} does not follow {last}")]
    OutOfOrder { last: u64, got: u64 },
}

/// Row-major binary grid with values in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitGrid {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BitGrid {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::EmptyDimensions { width, height });
        }
        if bits.len() != width * height {
            return Err(FrameError::LengthMismatch {
                width,
                height,
                expected: width * height,
                actual: bits.len(),
            });
        }
        let bits = bits.into_iter().map(|b| u8::from(b != 0)).collect();
        Ok(Self { width, height, bits })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    /// Smallest rectangle `(x, y, w, h)` containing every set bit.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bounds: Option<(usize, usize, usize, usize)> = None;
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b != 0) {
            let (x, y) = (i % self.width, i / self.width);
            bounds = Some(match bounds {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bounds.map(|(x0, y0, x1, y1)| (x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    /// Mask rendered as an image: 0 stays 0, 1 becomes 255.
    pub fn to_frame(&self) -> Frame {
        let pixels = self.bits.iter().map(|&b| b * 255).collect();
        Frame::new(self.width, self.height, pixels).expect("grid shape already validated")
    }

    fn ensure_same_dims(&self, other: &BitGrid) -> Result<(), FrameError> {
        if self.dims() != other.dims() {
            return Err(FrameError::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &BitGrid, op: impl Fn(u8, u8) -> u8) -> Result<BitGrid, FrameError> {
        self.ensure_same_dims(other)?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Ok(BitGrid {
            width: self.width,
            height: self.height,
            bits,
        })
    }

    /// Clears the `dx` leftmost columns when `dx > 0`, the `-dx` rightmost
    /// when `dx < 0`.
    pub fn clear_edge_columns(&mut self, dx: i64) {
        let n = (dx.unsigned_abs() as usize).min(self.width);
        if n == 0 {
            return;
        }
        let w = self.width;
        for row in self.bits.chunks_exact_mut(w) {
            let cols = if dx > 0 { 0..n } else { w - n..w };
            row[cols].iter_mut().for_each(|b| *b = 0);
        }
    }

    /// Horizontal shift by `dx` columns (positive moves content right);
    /// vacated columns are cleared.
    pub fn shifted(&self, dx: i64) -> BitGrid {
        let w = self.width as i64;
        let mut bits = vec![0; self.bits.len()];
        for (src, dst) in self.bits.chunks_exact(self.width).zip(bits.chunks_exact_mut(self.width)) {
            for (x, slot) in dst.iter_mut().enumerate() {
                let sx = x as i64 - dx;
                if (0..w).contains(&sx) {
                    *slot = src[sx as usize];
                }
            }
        }
        BitGrid {
            width: self.width,
            height: self.height,
            bits,
        }
    }
}

/// Binarized difference between frames `pair.0` and `pair.1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffMask {
    pub grid: BitGrid,
    pub pair: (u64, u64),
    pub threshold: u8,
}

/// Pixels judged to be moving in frame `frame`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionMask {
    pub grid: BitGrid,
    pub frame: u64,
}

/// Per-pixel absolute difference. The result carries `current`'s ordinal.
pub fn abs_diff(current: &Frame, previous: &Frame) -> Result<Frame, FrameError> {
    current.ensure_same_dims(previous)?;
    let pixels = current
        .pixels()
        .iter()
        .zip(previous.pixels())
        .map(|(&a, &b)| a.abs_diff(b))
        .collect();
    Ok(Frame::new(current.width(), current.height(), pixels)?.with_index(current.index()))
}

/// Values at or below `th` become 0, everything above becomes 1.
pub fn binarize(diff: &Frame, th: u8) -> DiffMask {
    let bits = diff.pixels().iter().map(|&v| u8::from(v > th)).collect();
    let k = diff.index();
    DiffMask {
        grid: BitGrid {
            width: diff.width(),
            height: diff.height(),
            bits,
        },
        pair: (k.saturating_sub(1), k),
        threshold: th,
    }
}

/// `D(k) AND D(k-1)`: the motion of frame `k-1`.
pub fn intersect(d_k: &DiffMask, d_k1: &DiffMask) -> Result<MotionMask, FrameError> {
    Ok(MotionMask {
        grid: d_k.grid.zip_with(&d_k1.grid, |a, b| a & b)?,
        frame: d_k.pair.0,
    })
}

/// `D(k) AND NOT M(k-1)`: the motion of frame `k`.
pub fn subtract(d_k: &DiffMask, m_k1: &MotionMask) -> Result<MotionMask, FrameError> {
    Ok(MotionMask {
        grid: d_k.grid.zip_with(&m_k1.grid, |a, b| a & (1 - b))?,
        frame: d_k.pair.1,
    })
}

/// Shifts `frame` right by `round(pan_delta / deg_per_px)` columns (left when
/// negative). Vacated columns repeat the nearest valid column.
pub fn compensate_pan(frame: &Frame, pan_delta: f64, deg_per_px: f64) -> Frame {
    assert!(deg_per_px > 0.0, "deg_per_px must be positive");
    shift_columns(frame, (pan_delta / deg_per_px).round() as i64)
}

pub fn shift_columns(frame: &Frame, dx: i64) -> Frame {
    if dx == 0 {
        return frame.clone();
    }
    let w = frame.width() as i64;
    let mut pixels = Vec::with_capacity(frame.pixels().len());
    for row in frame.rows() {
        pixels.extend((0..w).map(|x| row[(x - dx).clamp(0, w - 1) as usize]));
    }
    Frame::new(frame.width(), frame.height(), pixels)
        .expect("shape preserved")
        .with_index(frame.index())
}

/// How `Th` is chosen for each new difference frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdPolicy {
    Fixed(u8),
    /// Fuzziness-curve threshold on each difference frame's histogram.
    /// `fallback` applies when that histogram lacks two separated peaks;
    /// with `freeze` the first successful threshold is reused for the rest
    /// of the sequence.
    Fuzzy {
        options: ThresholdOptions,
        fallback: u8,
        freeze: bool,
    },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Fixed(DEFAULT_THRESHOLD)
    }
}

/// Result of one [`DiffWindow::push_frame`] call once the window is warm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowOutput {
    pub diff: DiffMask,
    /// `M(k-1)`, the intersection of the last two difference masks.
    pub previous_motion: MotionMask,
    /// `M(k)`.
    pub motion: MotionMask,
}

/// Rolling state for the three-frame method: the latest frames, the last
/// difference mask, and the last `M(k-1)`.
#[derive(Debug, Clone)]
pub struct DiffWindow {
    policy: ThresholdPolicy,
    frames: VecDeque<Frame>,
    last_diff: Option<DiffMask>,
    last_previous_motion: Option<MotionMask>,
    frozen: Option<u8>,
    // columns vacated by the last compensation shift; excluded from the next D(k)
    vacated: i64,
}

impl DiffWindow {
    pub fn new(policy: ThresholdPolicy) -> Self {
        Self {
            policy,
            frames: VecDeque::with_capacity(3),
            last_diff: None,
            last_previous_motion: None,
            frozen: None,
            vacated: 0,
        }
    }

    pub fn policy(&self) -> ThresholdPolicy {
        self.policy
    }

    pub fn buffered(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter()
    }

    /// The most recent `M(k-1)`, if any.
    pub fn previous_motion(&self) -> Option<&MotionMask> {
        self.last_previous_motion.as_ref()
    }

    pub fn reset(&mut self) {
        self.frames.clear();
        self.last_diff = None;
        self.last_previous_motion = None;
        self.vacated = 0;
    }

    fn threshold_for(&mut self, diff: &Frame) -> u8 {
        match self.policy {
            ThresholdPolicy::Fixed(th) => th,
            ThresholdPolicy::Fuzzy {
                options,
                fallback,
                freeze,
            } => {
                if let Some(th) = self.frozen {
                    return th;
                }
                match compute_threshold(&histogram(diff), options) {
                    Ok((th, _)) => {
                        if freeze {
                            self.frozen = Some(th);
                        }
                        th
                    }
                    Err(_) => fallback,
                }
            }
        }
    }

    /// Adds the next frame. Returns `M(k)` from the third frame on.
    pub fn push_frame(&mut self, frame: Frame) -> Result<Option<MotionMask>, DiffError> {
        Ok(self.push_detailed(frame)?.map(|out| out.motion))
    }

    /// Like [`push_frame`](Self::push_frame) but also returns `D(k)` and
    /// `M(k-1)`.
    pub fn push_detailed(&mut self, frame: Frame) -> Result<Option<WindowOutput>, DiffError> {
        if let Some(last) = self.frames.back() {
            last.ensure_same_dims(&frame)?;
            if frame.index() <= last.index() {
                return Err(DiffError::OutOfOrder {
                    last: last.index(),
                    got: frame.index(),
                });
            }
        }
        let diff = match self.frames.back() {
            Some(prev) => {
                let prev_index = prev.index();
                let delta = abs_diff(&frame, prev)?;
                let th = self.threshold_for(&delta);
                let mut mask = binarize(&delta, th);
                mask.pair = (prev_index, frame.index());
                mask.grid.clear_edge_columns(self.vacated);
                Some(mask)
            }
            None => None,
        };
        self.vacated = 0;
        if self.frames.len() == 3 {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);

        let Some(d_k) = diff else {
            return Ok(None);
        };
        let out = match self.last_diff.take() {
            Some(d_k1) => {
                let previous_motion = intersect(&d_k, &d_k1)?;
                let motion = subtract(&d_k, &previous_motion)?;
                self.last_previous_motion = Some(previous_motion.clone());
                Some(WindowOutput {
                    diff: d_k.clone(),
                    previous_motion,
                    motion,
                })
            }
            None => None,
        };
        self.last_diff = Some(d_k);
        Ok(out)
    }

    /// Re-registers the buffered state after the camera panned by
    /// `pan_delta` degrees (positive = right) so that it lines up with the
    /// next frame. Scene content moves left in the image when the camera pans
    /// right. A pan larger than half the field of view clears the window.
    /// Columns uncovered by the shift hold no comparable content and are
    /// left out of the next difference mask.
    /// Returns `false` when the window was reset.
    pub fn compensate(&mut self, pan_delta: f64, deg_per_px: f64, fov_deg: f64) -> bool {
        if pan_delta.abs() > fov_deg / 2.0 {
            self.reset();
            return false;
        }
        let dx = -(pan_delta / deg_per_px).round() as i64;
        self.vacated = dx;
        if dx != 0 {
            for f in self.frames.iter_mut() {
                *f = shift_columns(f, dx);
            }
            if let Some(d) = self.last_diff.as_mut() {
                d.grid = d.grid.shifted(dx);
            }
        }
        true
    }
}
