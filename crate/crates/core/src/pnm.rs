//! Netpbm codec for 8-bit rasters.
//!
//! Reads P2/P5 (gray) and P3/P6 (RGB) with `maxval <= 255`; header comments
//! are accepted. Writes binary P5/P6 with `maxval` 255, single-space
//! separators and no comments. Sample values are never rescaled.
//!
//! Binary masks are stored as gray images with values `{0, 255}` and read
//! back by thresholding at 128.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::raster::{BinaryMask, GrayImage, Image, RasterError, RgbImage};

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unrecognized magic number at byte 0")]
    BadMagic,
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: &'static str },
    #[error("maxval {maxval} at byte {offset} is not supported (must be 1..=255)")]
    MaxvalUnsupported { offset: usize, maxval: u64 },
    #[error("truncated payload at byte {offset}: expected {expected} samples, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("sample {value} at byte {offset} exceeds maxval {maxval}")]
    SampleOutOfRange { offset: usize, value: u64, maxval: u64 },
    #[error("expected a {expected} file, found {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Magic {
    P2,
    P3,
    P5,
    P6,
}

impl Magic {
    fn channels(self) -> usize {
        match self {
            Magic::P2 | Magic::P5 => 1,
            Magic::P3 | Magic::P6 => 3,
        }
    }

    fn kind(self) -> &'static str {
        match self {
            Magic::P2 | Magic::P5 => "PGM",
            Magic::P3 | Magic::P6 => "PPM",
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// Next unsigned decimal token; `None` at end of input.
    fn number(&mut self) -> Result<Option<(usize, u64)>, PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        if start >= self.bytes.len() {
            return Ok(None);
        }
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u64::from(b - b'0')))
                .ok_or(PnmError::MalformedHeader {
                    offset: start,
                    reason: "number overflows",
                })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(PnmError::MalformedHeader {
                offset: start,
                reason: "expected a decimal number",
            });
        }
        if let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_whitespace() && b != b'#' {
                return Err(PnmError::MalformedHeader {
                    offset: self.pos,
                    reason: "number not followed by whitespace",
                });
            }
        }
        Ok(Some((start, value)))
    }

    fn header_field(&mut self, what: &'static str) -> Result<(usize, u64), PnmError> {
        let offset = self.pos;
        self.number()?.ok_or(PnmError::MalformedHeader { offset, reason: what })
    }
}

struct Decoded {
    magic: Magic,
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

fn decode(bytes: &[u8]) -> Result<Decoded, PnmError> {
    let magic = match bytes.get(..2) {
        Some(b"P2") => Magic::P2,
        Some(b"P3") => Magic::P3,
        Some(b"P5") => Magic::P5,
        Some(b"P6") => Magic::P6,
        _ => return Err(PnmError::BadMagic),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    match cur.bytes.get(2) {
        Some(b) if b.is_ascii_whitespace() || *b == b'#' => {}
        _ => {
            return Err(PnmError::MalformedHeader {
                offset: 2,
                reason: "magic number not followed by whitespace",
            })
        }
    }
    let (w_off, width) = cur.header_field("missing width")?;
    let (h_off, height) = cur.header_field("missing height")?;
    let (m_off, maxval) = cur.header_field("missing maxval")?;
    if width == 0 {
        return Err(PnmError::MalformedHeader {
            offset: w_off,
            reason: "width is zero",
        });
    }
    if height == 0 {
        return Err(PnmError::MalformedHeader {
            offset: h_off,
            reason: "height is zero",
        });
    }
    if maxval == 0 || maxval > 255 {
        return Err(PnmError::MaxvalUnsupported { offset: m_off, maxval });
    }
    let width = usize::try_from(width).map_err(|_| PnmError::MalformedHeader {
        offset: w_off,
        reason: "width too large",
    })?;
    let height = usize::try_from(height).map_err(|_| PnmError::MalformedHeader {
        offset: h_off,
        reason: "height too large",
    })?;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(magic.channels()))
        .ok_or(PnmError::MalformedHeader {
            offset: w_off,
            reason: "dimensions too large",
        })?;

    let samples = match magic {
        Magic::P5 | Magic::P6 => {
            // Exactly one whitespace byte separates maxval from the payload.
            let sep = cur.pos;
            match bytes.get(sep) {
                Some(b) if b.is_ascii_whitespace() => {}
                _ => {
                    return Err(PnmError::MalformedHeader {
                        offset: sep,
                        reason: "missing whitespace before raster data",
                    })
                }
            }
            let start = sep + 1;
            let payload = &bytes[start.min(bytes.len())..];
            if payload.len() < expected {
                return Err(PnmError::Truncated {
                    offset: bytes.len(),
                    expected,
                    found: payload.len(),
                });
            }
            let samples = payload[..expected].to_vec();
            if let Some(i) = samples.iter().position(|&v| u64::from(v) > maxval) {
                return Err(PnmError::SampleOutOfRange {
                    offset: start + i,
                    value: u64::from(samples[i]),
                    maxval,
                });
            }
            samples
        }
        Magic::P2 | Magic::P3 => {
            let mut samples = Vec::with_capacity(expected);
            while samples.len() < expected {
                match cur.number()? {
                    Some((offset, value)) if value > maxval => {
                        return Err(PnmError::SampleOutOfRange { offset, value, maxval })
                    }
                    Some((_, value)) => samples.push(value as u8),
                    None => {
                        return Err(PnmError::Truncated {
                            offset: bytes.len(),
                            expected,
                            found: samples.len(),
                        })
                    }
                }
            }
            samples
        }
    };
    Ok(Decoded {
        magic,
        width,
        height,
        samples,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, PnmError> {
    fs::read(path).map_err(|source| PnmError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), PnmError> {
    fs::write(path, bytes).map_err(|source| PnmError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Decodes an in-memory PGM (P2 or P5).
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, PnmError> {
    let d = decode(bytes)?;
    if d.magic.channels() != 1 {
        return Err(PnmError::WrongKind {
            expected: "PGM",
            found: d.magic.kind(),
        });
    }
    Ok(GrayImage::new(d.width, d.height, d.samples)?)
}

/// Decodes an in-memory PGM or PPM into an [`Image`].
pub fn decode_image(bytes: &[u8]) -> Result<Image, PnmError> {
    let d = decode(bytes)?;
    Ok(match d.magic.channels() {
        1 => Image::Gray(GrayImage::new(d.width, d.height, d.samples)?),
        _ => Image::Rgb(RgbImage::new(d.width, d.height, d.samples)?),
    })
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage, PnmError> {
    decode_pgm(&read_bytes(path.as_ref())?)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage, PnmError> {
    let d = decode(&read_bytes(path.as_ref())?)?;
    if d.magic.channels() != 3 {
        return Err(PnmError::WrongKind {
            expected: "PPM",
            found: d.magic.kind(),
        });
    }
    Ok(RgbImage::new(d.width, d.height, d.samples)?)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image, PnmError> {
    decode_image(&read_bytes(path.as_ref())?)
}

/// Reads a mask PGM; samples `>= 128` are foreground.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask, PnmError> {
    let gray = read_pgm(path)?;
    let bits = gray.values().iter().map(|&v| u8::from(v >= 128)).collect();
    Ok(BinaryMask::new(gray.width(), gray.height(), bits)?)
}

fn encode(magic: &str, width: usize, height: usize, samples: &[u8]) -> Vec<u8> {
    let header = format!("{magic}\n{width} {height}\n255\n");
    let mut out = Vec::with_capacity(header.len() + samples.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(samples);
    out
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    encode("P5", image.width(), image.height(), image.values())
}

pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    let samples: Vec<u8> = mask.values().iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    encode("P5", mask.width(), mask.height(), &samples)
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    encode("P6", image.width(), image.height(), image.values())
}

pub fn write_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<(), PnmError> {
    write_bytes(path.as_ref(), &encode_pgm(image))
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<(), PnmError> {
    write_bytes(path.as_ref(), &encode_mask(mask))
}

pub fn write_ppm(image: &RgbImage, path: impl AsRef<Path>) -> Result<(), PnmError> {
    write_bytes(path.as_ref(), &encode_ppm(image))
}

pub fn write_image(image: &Image, path: impl AsRef<Path>) -> Result<(), PnmError> {
    match image {
        Image::Gray(g) => write_pgm(g, path),
        Image::Rgb(c) => write_ppm(c, path),
    }
}
