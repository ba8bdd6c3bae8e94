//! Grayscale frames and gray-level histograms.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::pgm::{self, PgmError};

/// Number of gray levels in an 8-bit frame.
pub const LEVELS: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer holds {actual} values but {width}x{height} needs {expected}")]
    LengthMismatch {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
}

/// A single 8-bit grayscale image, row-major, top row first.
///
/// `index` is the frame ordinal within its sequence. It is assigned by the
/// sequence reader and is not part of any file format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    index: u64,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::EmptyDimensions { width, height });
        }
        let expected = width * height;
        if pixels.len() != expected {
            return Err(FrameError::LengthMismatch {
                width,
                height,
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
            index: 0,
        })
    }

    /// A frame with every pixel set to `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, FrameError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.index = index;
        self
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

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Pixel at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.pixels.chunks_exact(self.width)
    }

    pub(crate) fn ensure_same_dims(&self, other: &Frame) -> Result<(), FrameError> {
        if self.dims() != other.dims() {
            return Err(FrameError::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}

/// Gray-level occupancy counts of a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: [u64; LEVELS],
    total: u64,
}

impl Histogram {
    pub fn from_bins(bins: [u64; LEVELS]) -> Self {
        let total = bins.iter().sum();
        Self { bins, total }
    }

    pub fn bins(&self) -> &[u64; LEVELS] {
        &self.bins
    }

    pub fn count(&self, level: u8) -> u64 {
        self.bins[level as usize]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Gray levels with a nonzero count, ascending.
    pub fn occupied_levels(&self) -> impl Iterator<Item = u8> + '_ {
        (0..LEVELS)
            .filter(|&v| self.bins[v] > 0)
            .map(|v| v as u8)
    }

    pub fn min_level(&self) -> Option<u8> {
        self.occupied_levels().next()
    }

    pub fn max_level(&self) -> Option<u8> {
        (0..LEVELS).rev().find(|&v| self.bins[v] > 0).map(|v| v as u8)
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        let mut bins = self.bins;
        bins.iter_mut().for_each(|b| *b *= factor);
        Self::from_bins(bins)
    }
}

pub fn histogram(frame: &Frame) -> Histogram {
    let mut bins = [0u64; LEVELS];
    for &p in frame.pixels() {
        bins[p as usize] += 1;
    }
    Histogram {
        bins,
        total: frame.pixels().len() as u64,
    }
}

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("invalid file pattern {pattern:?}: {source}")]
    Pattern {
        pattern: String,
        source: glob::PatternError,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot decode {path}: {source}")]
    Decode { path: PathBuf, source: PgmError },
    #[error("{path} is {found:?} but the sequence started at {expected:?}")]
    DimensionMismatch {
        path: PathBuf,
        expected: (usize, usize),
        found: (usize, usize),
    },
}

/// Paths matching a glob pattern, sorted lexicographically.
pub fn sequence_paths(pattern: &str) -> Result<Vec<PathBuf>, SequenceError> {
    let paths = glob::glob(pattern).map_err(|source| SequenceError::Pattern {
        pattern: pattern.to_string(),
        source,
    })?;
    let mut out: Vec<PathBuf> = paths.filter_map(Result::ok).filter(|p| p.is_file()).collect();
    out.sort();
    Ok(out)
}

pub fn read_frame(path: &Path) -> Result<Frame, SequenceError> {
    let bytes = std::fs::read(path).map_err(|source| SequenceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    pgm::decode_pgm(&bytes).map_err(|source| SequenceError::Decode {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads every frame matching `pattern` in lexicographic order, numbering
/// them 0, 1, 2, ... All frames must share the dimensions of the first.
pub fn read_sequence(pattern: &str) -> Result<Vec<Frame>, SequenceError> {
    let paths = sequence_paths(pattern)?;
    let mut frames = Vec::with_capacity(paths.len());
    for (k, path) in paths.iter().enumerate() {
        let frame = read_frame(path)?.with_index(k as u64);
        if let Some(first) = frames.first() {
            let first: &Frame = first;
            if first.dims() != frame.dims() {
                return Err(SequenceError::DimensionMismatch {
                    path: path.clone(),
                    expected: first.dims(),
                    found: frame.dims(),
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}
