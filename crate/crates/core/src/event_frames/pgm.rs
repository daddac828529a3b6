//! Binary PGM (`P5`, maxval 255) reader and writer.

use super::GrayFrame;
use crate::error::{Error, Result};

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::decode(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::decode(start, format!("{what} out of range")))
    }
}

pub fn load_pgm(bytes: &[u8]) -> Result<GrayFrame> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::decode(0, "missing P5 magic"));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width_at = cur.pos;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::decode(width_at, format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::decode(maxval_at, format!("maxval {maxval} unsupported (need 255)")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::decode(cur.pos, "expected single whitespace before raster")),
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::decode(width_at, "dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < n {
        return Err(Error::decode(
            bytes.len(),
            format!("truncated raster: {} of {n} bytes", payload.len()),
        ));
    }
    GrayFrame::new(width, height, payload[..n].to_vec())
}

pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.pixels());
    out
}
