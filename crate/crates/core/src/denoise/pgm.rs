use std::fs;
use std::path::Path;

use super::GrayImage;
use crate::error::{Error, Result};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(format!("byte {}", self.pos), message)
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::parse(format!("byte {start}"), format!("{what} out of range")))
    }
}

/// Decodes a binary (P5) or ASCII (P2) graymap, scaling samples by maxval.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(cur.err("missing P2/P5 magic number")),
    };
    cur.pos = 2;
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval_pos = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(
            format!("byte {maxval_pos}"),
            format!("maxval {maxval} outside 1..=65535"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(cur.err("image has zero size"));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let scale = 1.0 / f64::from(maxval);
    let mut pixels = Vec::with_capacity(count);
    if binary {
        if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(cur.err("expected a single whitespace byte after maxval"));
        }
        cur.pos += 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let payload = &bytes[cur.pos..];
        if payload.len() < need {
            return Err(Error::parse(
                format!("byte {}", bytes.len()),
                format!("truncated payload: {} of {need} bytes", payload.len()),
            ));
        }
        for k in 0..count {
            let v = if wide {
                u32::from(u16::from_be_bytes([payload[2 * k], payload[2 * k + 1]]))
            } else {
                u32::from(payload[k])
            };
            if v > maxval {
                let at = cur.pos + if wide { 2 * k } else { k };
                return Err(Error::parse(format!("byte {at}"), format!("sample {v} exceeds maxval")));
            }
            pixels.push(f64::from(v) * scale);
        }
    } else {
        for _ in 0..count {
            let at = cur.pos;
            let v = cur.number("pixel value").map_err(|e| match e {
                Error::Parse { location, .. } if cur.pos >= bytes.len() => {
                    Error::parse(location, "truncated payload")
                }
                other => other,
            })?;
            if v > maxval {
                return Err(Error::parse(format!("byte {at}"), format!("sample {v} exceeds maxval")));
            }
            pixels.push(f64::from(v) * scale);
        }
    }
    GrayImage::new(height, width, pixels)
}

/// Encodes as P5 with maxval 255; values are clamped to `[0, 1]` and rounded
/// half up.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.pixels()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8),
    );
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    parse_pgm(&fs::read(path)?)
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}
