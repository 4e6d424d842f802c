//! Binary portable graymap (P5) and pixmap (P6) files.

use std::fmt;

/// Decoded raster with samples in `0..=maxval`, row-major, interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pnm {
    pub width: usize,
    pub height: usize,
    /// 1 for P5, 3 for P6.
    pub channels: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PnmError(pub String);

impl fmt::Display for PnmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for PnmError {}

fn err<T>(msg: impl Into<String>) -> Result<T, PnmError> {
    Err(PnmError(msg.into()))
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
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

    fn number(&mut self, what: &str) -> Result<usize, PnmError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return err(format!("expected {what} in header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError(format!("{what} out of range")))
    }
}

impl Pnm {
    pub fn decode(bytes: &[u8]) -> Result<Self, PnmError> {
        let channels = match bytes.get(..2) {
            Some(b"P5") => 1,
            Some(b"P6") => 3,
            _ => return err("not a binary PGM/PPM file (expected P5 or P6)"),
        };
        let mut h = Header { bytes, pos: 2 };
        let width = h.number("width")?;
        let height = h.number("height")?;
        let maxval = h.number("maxval")?;
        if width == 0 || height == 0 {
            return err("empty image");
        }
        if maxval == 0 || maxval > 65535 {
            return err(format!("maxval {maxval} outside 1..=65535"));
        }
        // exactly one whitespace byte separates the header from the raster
        if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
            return err("missing whitespace after maxval");
        }
        let raster = &bytes[h.pos + 1..];
        let count = width * height * channels;
        let wide = maxval > 255;
        let needed = if wide { 2 * count } else { count };
        if raster.len() < needed {
            return err(format!("raster has {} bytes, expected {needed}", raster.len()));
        }
        let samples: Vec<u16> = if wide {
            raster[..needed].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        } else {
            raster[..needed].iter().map(|&b| b as u16).collect()
        };
        if samples.iter().any(|&s| s as usize > maxval) {
            return err("sample exceeds maxval");
        }
        Ok(Pnm { width, height, channels, maxval: maxval as u16, samples })
    }

    pub fn encode(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval > 255 {
            out.extend(self.samples.iter().flat_map(|s| s.to_be_bytes()));
        } else {
            out.extend(self.samples.iter().map(|&s| s as u8));
        }
        out
    }

    /// 8-bit raster from intensities in `[0,1]` (clamped, rounded to nearest).
    pub fn from_unit(width: usize, height: usize, channels: usize, values: &[f64]) -> Self {
        assert!(channels == 1 || channels == 3);
        assert_eq!(values.len(), width * height * channels);
        let samples = values.iter().map(|&v| quantize(v)).collect();
        Pnm { width, height, channels, maxval: 255, samples }
    }

    /// Sample `i` mapped linearly to `[0,1]`.
    pub fn unit(&self, i: usize) -> f64 {
        self.samples[i] as f64 / self.maxval as f64
    }
}

pub fn quantize(v: f64) -> u16 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0).round() as u16
}
