//! EVF event-frame codec.
//!
//! Layout (little-endian): `"EVF1"`, u16 width, u16 height, u8 threshold,
//! u8 mode, then the mask bit-packed MSB-first row by row, each row padded
//! to a whole byte.

use super::{EventFrame, EventMode, Threshold};
use crate::error::{Error, Result};

pub const EVF_MAGIC: &[u8; 4] = b"EVF1";
const HEADER_LEN: usize = 10;

fn row_bytes(width: usize) -> usize {
    width.div_ceil(8)
}

pub fn encode_evf(frame: &EventFrame) -> Result<Vec<u8>> {
    let (w, h) = (frame.width(), frame.height());
    if w > u16::MAX as usize || h > u16::MAX as usize {
        return Err(Error::Dimension(format!("{w}x{h} exceeds the EVF u16 dimension limit")));
    }
    let stride = row_bytes(w);
    let mut out = Vec::with_capacity(HEADER_LEN + stride * h);
    out.extend_from_slice(EVF_MAGIC);
    out.extend_from_slice(&(w as u16).to_le_bytes());
    out.extend_from_slice(&(h as u16).to_le_bytes());
    out.push(frame.threshold().get());
    out.push(frame.mode().code());
    for row in frame.mask().chunks(w) {
        let mut packed = vec![0u8; stride];
        for (x, _) in row.iter().enumerate().filter(|(_, &bit)| bit) {
            packed[x / 8] |= 0x80 >> (x % 8);
        }
        out.extend_from_slice(&packed);
    }
    Ok(out)
}

pub fn decode_evf(bytes: &[u8]) -> Result<EventFrame> {
    if bytes.len() < 4 || &bytes[..4] != EVF_MAGIC {
        return Err(Error::decode(0, "bad EVF magic"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::decode(bytes.len(), "truncated EVF header"));
    }
    let w = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let h = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    if w == 0 || h == 0 {
        return Err(Error::decode(4, format!("zero dimension {w}x{h}")));
    }
    let threshold = Threshold::new(bytes[8] as u32).map_err(|_| Error::decode(8, "threshold 0"))?;
    let mode = EventMode::from_code(bytes[9]).ok_or_else(|| Error::decode(9, format!("unknown mode {}", bytes[9])))?;
    let stride = row_bytes(w);
    let need = HEADER_LEN + stride * h;
    if bytes.len() < need {
        return Err(Error::decode(bytes.len(), format!("truncated mask: expected {need} bytes")));
    }
    if bytes.len() > need {
        return Err(Error::decode(need, "trailing bytes after mask"));
    }
    let pad_bits = stride * 8 - w;
    let pad_mask = if pad_bits == 0 { 0 } else { (1u8 << pad_bits) - 1 };
    let mut mask = Vec::with_capacity(w * h);
    for y in 0..h {
        let row_at = HEADER_LEN + y * stride;
        let row = &bytes[row_at..row_at + stride];
        if row[stride - 1] & pad_mask != 0 {
            return Err(Error::decode(row_at + stride - 1, format!("padding bits set in row {y}")));
        }
        mask.extend((0..w).map(|x| row[x / 8] & (0x80 >> (x % 8)) != 0));
    }
    EventFrame::new(w, h, mask, threshold, mode)
}
