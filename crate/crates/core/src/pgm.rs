//! Netpbm grayscale (P2 plain / P5 raw) codec, 8-bit only.

use thiserror::Error;

use crate::frame::Frame;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("{magic} images are not grayscale; only P2 and P5 are accepted")]
    UnsupportedFormat { magic: String },
    #[error("maxval {0} is not supported (must be 1..=255)")]
    UnsupportedMaxval(u32),
    #[error("pixel data truncated: expected {expected} samples, found {found}")]
    TruncatedPixelData { expected: usize, found: usize },
    #[error("sample {value} at position {position} exceeds maxval {maxval}")]
    SampleOutOfRange {
        position: usize,
        value: u32,
        maxval: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Plain,
    Raw,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Option<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

/// Decodes a P2 or P5 image. Sample values are kept as stored; they are not
/// rescaled when maxval is below 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<Frame, PgmError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(PgmError::MalformedHeader("missing P magic".into()));
    }
    let encoding = match bytes[1] {
        b'2' => Encoding::Plain,
        b'5' => Encoding::Raw,
        b'1' | b'3' | b'4' | b'6' | b'7' => {
            return Err(PgmError::UnsupportedFormat {
                magic: String::from_utf8_lossy(&bytes[..2]).into_owned(),
            })
        }
        _ => return Err(PgmError::MalformedHeader("unknown magic".into())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(PgmError::MalformedHeader("no separator after magic".into()));
    }
    let width = cur
        .number()
        .ok_or_else(|| PgmError::MalformedHeader("bad width".into()))? as usize;
    let height = cur
        .number()
        .ok_or_else(|| PgmError::MalformedHeader("bad height".into()))? as usize;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    let maxval = cur
        .number()
        .ok_or_else(|| PgmError::MalformedHeader("bad maxval".into()))?;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| PgmError::MalformedHeader("dimensions overflow".into()))?;

    let pixels = match encoding {
        Encoding::Raw => {
            // exactly one whitespace byte separates maxval from the raster
            if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
                return Err(PgmError::MalformedHeader("no separator after maxval".into()));
            }
            let data = &bytes[cur.pos + 1..];
            if data.len() < expected {
                return Err(PgmError::TruncatedPixelData {
                    expected,
                    found: data.len(),
                });
            }
            let data = &data[..expected];
            if let Some(position) = data.iter().position(|&v| u32::from(v) > maxval) {
                return Err(PgmError::SampleOutOfRange {
                    position,
                    value: data[position].into(),
                    maxval,
                });
            }
            data.to_vec()
        }
        Encoding::Plain => {
            let mut out = Vec::with_capacity(expected);
            while out.len() < expected {
                match cur.number() {
                    Some(value) if value <= maxval => out.push(value as u8),
                    Some(value) => {
                        return Err(PgmError::SampleOutOfRange {
                            position: out.len(),
                            value,
                            maxval,
                        })
                    }
                    None => {
                        return Err(PgmError::TruncatedPixelData {
                            expected,
                            found: out.len(),
                        })
                    }
                }
            }
            out
        }
    };
    Frame::new(width, height, pixels).map_err(|e| PgmError::MalformedHeader(e.to_string()))
}

/// Encodes as raw P5 with maxval 255.
pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(frame.pixels());
    out
}

/// Encodes as plain P2 with maxval 255, one image row per line.
pub fn encode_pgm_plain(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", frame.width(), frame.height());
    for row in frame.rows() {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}
