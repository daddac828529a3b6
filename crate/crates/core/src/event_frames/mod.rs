//! Intensity frames, thresholded event synthesis and event-frame storage.

mod dataset;
mod evf;
mod pgm;

pub use dataset::{
    build_dataset, expand_sequence_dirs, list_frame_files, load_sequence, BuildSummary, DatasetManifest, Label,
    ManifestEntry, SequenceDir, Split,
};
pub use evf::{decode_evf, encode_evf, EVF_MAGIC};
pub use pgm::{encode_pgm, load_pgm};

use crate::error::{Error, Result};

/// 8-bit luminance raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("zero-sized frame {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} pixels for a {width}x{height} frame",
                pixels.len()
            )));
        }
        Ok(GrayFrame { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    fn same_dims(&self, other: &GrayFrame) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// How the comparison frame for event synthesis was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventMode {
    /// Difference between successive frames.
    Successive,
    /// Difference against a fixed reference frame.
    Reference,
}

impl EventMode {
    pub fn code(self) -> u8 {
        match self {
            EventMode::Successive => 0,
            EventMode::Reference => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EventMode::Successive),
            1 => Some(EventMode::Reference),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventMode::Successive => "successive",
            EventMode::Reference => "reference",
        }
    }
}

impl std::str::FromStr for EventMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "successive" => Ok(EventMode::Successive),
            "reference" => Ok(EventMode::Reference),
            other => Err(Error::InvalidArgument(format!(
                "unknown event mode `{other}` (expected successive or reference)"
            ))),
        }
    }
}

/// Minimum absolute intensity change that fires an event, in `[1, 255]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Threshold(u8);

impl Threshold {
    pub fn new(th: u32) -> Result<Self> {
        if (1..=255).contains(&th) {
            Ok(Threshold(th as u8))
        } else {
            Err(Error::InvalidArgument(format!("threshold {th} outside [1, 255]")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl std::fmt::Display for Threshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Binary per-pixel event mask.
///
/// `source_index` is the ordinal of the frame that produced it; it is not
/// part of the EVF encoding and decodes as 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFrame {
    width: usize,
    height: usize,
    mask: Vec<bool>,
    threshold: Threshold,
    mode: EventMode,
    source_index: usize,
}

impl EventFrame {
    pub fn new(width: usize, height: usize, mask: Vec<bool>, threshold: Threshold, mode: EventMode) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("zero-sized event frame {width}x{height}")));
        }
        if mask.len() != width * height {
            return Err(Error::Dimension(format!(
                "mask of {} values for a {width}x{height} frame",
                mask.len()
            )));
        }
        Ok(EventFrame {
            width,
            height,
            mask,
            threshold,
            mode,
            source_index: 0,
        })
    }

    pub fn with_source_index(mut self, index: usize) -> Self {
        self.source_index = index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    pub fn mode(&self) -> EventMode {
        self.mode
    }

    pub fn source_index(&self) -> usize {
        self.source_index
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    pub fn event_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Nearest-neighbour resample of the mask to `size × size`, as 0/1 values.
    pub fn resized_values(&self, size: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(size * size);
        for y in 0..size {
            let sy = y * self.height / size;
            for x in 0..size {
                let sx = x * self.width / size;
                out.push(if self.mask[sy * self.width + sx] { 1.0 } else { 0.0 });
            }
        }
        out
    }
}

/// Fraction of pixels carrying an event.
pub fn event_density(frame: &EventFrame) -> f64 {
    frame.event_count() as f64 / frame.mask.len() as f64
}

fn threshold_mask(a: &GrayFrame, b: &GrayFrame, th: Threshold) -> Result<Vec<bool>> {
    a.same_dims(b)?;
    let th = th.get();
    Ok(a.pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&p, &q)| p.abs_diff(q) >= th)
        .collect())
}

/// Events between successive frames: fires where `|curr - prev| >= th`.
pub fn diff_events(prev: &GrayFrame, curr: &GrayFrame, th: Threshold) -> Result<EventFrame> {
    let mask = threshold_mask(prev, curr, th)?;
    EventFrame::new(curr.width, curr.height, mask, th, EventMode::Successive)
}

/// Events of `curr` against a fixed reference frame.
pub fn ref_events(reference: &GrayFrame, curr: &GrayFrame, th: Threshold) -> Result<EventFrame> {
    let mask = threshold_mask(reference, curr, th)?;
    EventFrame::new(curr.width, curr.height, mask, th, EventMode::Reference)
}

/// Event frames for a whole sequence: one per consecutive pair in
/// successive mode, one per frame after the first in reference mode (the
/// first frame is the reference). Both yield `len - 1` frames, indexed by
/// the ordinal of the frame that produced them.
pub fn sequence_events(frames: &[GrayFrame], th: Threshold, mode: EventMode) -> Result<Vec<EventFrame>> {
    let Some(first) = frames.first() else {
        return Err(Error::Data("empty frame sequence".into()));
    };
    frames
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, curr)| {
            let ev = match mode {
                EventMode::Successive => diff_events(&frames[i - 1], curr, th)?,
                EventMode::Reference => ref_events(first, curr, th)?,
            };
            Ok(ev.with_source_index(i))
        })
        .collect()
}

/// BT.601 luma with round-half-up.
pub fn to_grayscale(width: usize, height: usize, r: &[u8], g: &[u8], b: &[u8]) -> Result<GrayFrame> {
    let n = width * height;
    if r.len() != n || g.len() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "channel lengths {}/{}/{} for a {width}x{height} frame",
            r.len(),
            g.len(),
            b.len()
        )));
    }
    // Integer weights scaled by 1000 keep the rounding exact.
    let pixels = (0..n)
        .map(|i| {
            let y = 299 * r[i] as u32 + 587 * g[i] as u32 + 114 * b[i] as u32;
            ((y + 500) / 1000).min(255) as u8
        })
        .collect();
    GrayFrame::new(width, height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn th(v: u32) -> Threshold {
        Threshold::new(v).unwrap()
    }

    fn random_frame(rng: &mut Rng, w: usize, h: usize) -> GrayFrame {
        GrayFrame::new(w, h, (0..w * h).map(|_| rng.below(256) as u8).collect()).unwrap()
    }

    #[test]
    fn grayscale_conversion() {
        let g = to_grayscale(3, 1, &[255, 0, 255], &[255, 0, 0], &[255, 0, 0]).unwrap();
        assert_eq!(g.pixels(), &[255, 0, 76]);
        assert!(to_grayscale(2, 1, &[0, 0], &[0], &[0, 0]).is_err());
    }

    #[test]
    fn identical_frames_yield_no_events() {
        let f = GrayFrame::filled(4, 3, 77).unwrap();
        for t in [1, 4, 255] {
            let e = diff_events(&f, &f, th(t)).unwrap();
            assert_eq!(event_density(&e), 0.0);
            assert_eq!(e.mode(), EventMode::Successive);
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        let prev = GrayFrame::filled(1, 1, 100).unwrap();
        let curr = GrayFrame::filled(1, 1, 104).unwrap();
        assert!(diff_events(&prev, &curr, th(4)).unwrap().get(0, 0));
        assert!(!diff_events(&prev, &curr, th(5)).unwrap().get(0, 0));
    }

    #[test]
    fn random_pairs_match_per_pixel_scan() {
        let mut rng = Rng::new(11);
        for _ in 0..20 {
            let a = random_frame(&mut rng, 8, 8);
            let b = random_frame(&mut rng, 8, 8);
            let d = diff_events(&a, &b, th(8)).unwrap();
            let r = ref_events(&a, &b, th(8)).unwrap();
            for y in 0..8 {
                for x in 0..8 {
                    let delta = (a.get(x, y) as i32 - b.get(x, y) as i32).abs();
                    assert_eq!(d.get(x, y), delta >= 8);
                    assert_eq!(r.get(x, y), delta >= 8);
                }
            }
            assert_eq!(r.mode(), EventMode::Reference);
        }
    }

    #[test]
    fn reference_uniform_boundary() {
        let zero = GrayFrame::filled(5, 5, 0).unwrap();
        let sixteen = GrayFrame::filled(5, 5, 16).unwrap();
        assert_eq!(event_density(&ref_events(&zero, &sixteen, th(16)).unwrap()), 1.0);
        assert_eq!(event_density(&ref_events(&sixteen, &sixteen, th(16)).unwrap()), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = GrayFrame::filled(2, 2, 0).unwrap();
        let b = GrayFrame::filled(2, 3, 0).unwrap();
        assert!(matches!(diff_events(&a, &b, th(4)), Err(Error::Dimension(_))));
    }

    #[test]
    fn density_counts_events() {
        let mut mask = vec![false; 64];
        for m in mask.iter_mut().step_by(4) {
            *m = true;
        }
        let e = EventFrame::new(8, 8, mask, th(4), EventMode::Successive).unwrap();
        assert_eq!(e.event_count(), 16);
        assert_eq!(event_density(&e), 0.25);
    }

    #[test]
    fn threshold_bounds() {
        assert!(Threshold::new(0).is_err());
        assert!(Threshold::new(256).is_err());
        assert_eq!(Threshold::new(255).unwrap().get(), 255);
    }

    #[test]
    fn sequence_pairing_counts() {
        let frames: Vec<_> = (0..5).map(|i| GrayFrame::filled(2, 2, i * 10).unwrap()).collect();
        let s = sequence_events(&frames, th(8), EventMode::Successive).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s[3].source_index(), 4);
        let r = sequence_events(&frames, th(25), EventMode::Reference).unwrap();
        // 10 and 20 stay below 25 against the first frame; 30 and 40 fire.
        let fired: Vec<_> = r.iter().map(|e| e.event_count() > 0).collect();
        assert_eq!(fired, [false, false, true, true]);
    }

    #[test]
    fn resize_nearest_neighbour() {
        let e = EventFrame::new(2, 2, vec![true, false, false, true], th(1), EventMode::Successive).unwrap();
        let v = e.resized_values(4);
        assert_eq!(&v[..4], &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(&v[12..], &[0.0, 0.0, 1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn diff_is_symmetric(a in proptest::collection::vec(any::<u8>(), 16), b in proptest::collection::vec(any::<u8>(), 16), t in 1u32..=255) {
            let fa = GrayFrame::new(4, 4, a).unwrap();
            let fb = GrayFrame::new(4, 4, b).unwrap();
            prop_assert_eq!(diff_events(&fa, &fb, th(t)).unwrap(), diff_events(&fb, &fa, th(t)).unwrap());
        }

        #[test]
        fn raising_threshold_only_removes_events(a in proptest::collection::vec(any::<u8>(), 25), b in proptest::collection::vec(any::<u8>(), 25), t1 in 1u32..=255, t2 in 1u32..=255) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let fa = GrayFrame::new(5, 5, a).unwrap();
            let fb = GrayFrame::new(5, 5, b).unwrap();
            let m_lo = diff_events(&fa, &fb, th(lo)).unwrap();
            let m_hi = diff_events(&fa, &fb, th(hi)).unwrap();
            for (h, l) in m_hi.mask().iter().zip(m_lo.mask()) {
                prop_assert!(!h || *l);
            }
        }
    }
}
