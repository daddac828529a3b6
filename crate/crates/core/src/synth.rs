//! Synthetic intensity-frame corpus with a known separable structure.
//!
//! Positive sequences show a ring or filled blob drifting across a noisy
//! background; negative sequences show the same background with speckles at
//! fresh uniformly random positions in every frame. Thresholded differencing
//! turns the first into coherent edge arcs and the second into scattered
//! dots of similar density.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::event_frames::{encode_pgm, GrayFrame, Label};
use crate::fsutil;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub size: usize,
    pub frames: usize,
    /// Per-pixel sensor noise amplitude (uniform ±).
    pub noise: u8,
    /// Object / speckle contrast range, inclusive.
    pub contrast: (u8, u8),
    pub radius: (u8, u8),
    /// Object speed in pixels per frame, inclusive range.
    pub speed: (u8, u8),
    /// Speckles per negative frame, inclusive range.
    pub speckles: (u16, u16),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            size: 64,
            frames: 2,
            noise: 2,
            contrast: (24, 64),
            radius: (6, 14),
            speed: (2, 4),
            speckles: (30, 70),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub label: Label,
    pub frames: Vec<GrayFrame>,
}

fn render(size: usize, background: f64, noise: u8, rng: &mut Rng, overlay: impl Fn(usize, usize) -> f64) -> GrayFrame {
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let n = rng.range_inclusive(-(noise as i64), noise as i64) as f64;
            pixels.push((background + n + overlay(x, y)).round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayFrame::new(size, size, pixels).expect("size > 0")
}

fn signed_contrast(rng: &mut Rng, range: (u8, u8)) -> f64 {
    let c = rng.range_inclusive(range.0 as i64, range.1 as i64) as f64;
    if rng.coin() {
        c
    } else {
        -c
    }
}

pub fn positive_sequence(rng: &mut Rng, cfg: &SynthConfig) -> Vec<GrayFrame> {
    let size = cfg.size as f64;
    let background = rng.uniform(70.0, 180.0);
    let contrast = signed_contrast(rng, cfg.contrast);
    let radius = rng.range_inclusive(cfg.radius.0 as i64, cfg.radius.1 as i64) as f64;
    let ring = rng.coin();
    let thickness = rng.uniform(2.0, 4.0);
    let speed = rng.range_inclusive(cfg.speed.0 as i64, cfg.speed.1 as i64) as f64;
    let angle = rng.uniform(0.0, std::f64::consts::TAU);
    let (vx, vy) = (speed * angle.cos(), speed * angle.sin());
    let span = cfg.frames as f64 * speed;
    let margin = (radius + 2.0).min(size / 2.0);
    let lo = margin + span.min(size / 4.0);
    let hi = (size - lo).max(lo + 1.0);
    let (mut cx, mut cy) = (rng.uniform(lo, hi), rng.uniform(lo, hi));
    let mut frames = Vec::with_capacity(cfg.frames);
    for _ in 0..cfg.frames {
        let (ox, oy) = (cx, cy);
        frames.push(render(cfg.size, background, cfg.noise, rng, |x, y| {
            let d = ((x as f64 + 0.5 - ox).powi(2) + (y as f64 + 0.5 - oy).powi(2)).sqrt();
            let inside = if ring { (d - radius).abs() <= thickness / 2.0 } else { d <= radius };
            if inside {
                contrast
            } else {
                0.0
            }
        }));
        cx += vx;
        cy += vy;
    }
    frames
}

pub fn negative_sequence(rng: &mut Rng, cfg: &SynthConfig) -> Vec<GrayFrame> {
    let background = rng.uniform(70.0, 180.0);
    let n = cfg.size * cfg.size;
    let mut frames = Vec::with_capacity(cfg.frames);
    for _ in 0..cfg.frames {
        let count = rng.range_inclusive(cfg.speckles.0 as i64, cfg.speckles.1 as i64) as usize;
        let mut overlay = vec![0.0; n];
        for _ in 0..count {
            overlay[rng.below(n)] = signed_contrast(rng, cfg.contrast);
        }
        frames.push(render(cfg.size, background, cfg.noise, rng, |x, y| overlay[y * cfg.size + x]));
    }
    frames
}

/// `positives` positive then `negatives` negative sequences; sequence `i`
/// of each class draws from its own split of `seed`.
pub fn corpus(seed: u64, positives: usize, negatives: usize, cfg: &SynthConfig) -> Vec<LabeledSequence> {
    let root = Rng::new(seed);
    let mut out = Vec::with_capacity(positives + negatives);
    for i in 0..positives {
        let mut rng = root.split(2 * i as u64);
        out.push(LabeledSequence {
            label: Label::Positive,
            frames: positive_sequence(&mut rng, cfg),
        });
    }
    for i in 0..negatives {
        let mut rng = root.split(2 * i as u64 + 1);
        out.push(LabeledSequence {
            label: Label::Negative,
            frames: negative_sequence(&mut rng, cfg),
        });
    }
    out
}

/// Writes `<dir>/<label>/seqNNNNN/frameNNN.pgm`; returns the positive and
/// negative parent directories.
pub fn write_corpus(dir: &Path, sequences: &[LabeledSequence]) -> Result<(PathBuf, PathBuf)> {
    let pos = dir.join(Label::Positive.as_str());
    let neg = dir.join(Label::Negative.as_str());
    let mut counters = [0usize; 2];
    for seq in sequences {
        let (parent, counter) = match seq.label {
            Label::Positive => (&pos, &mut counters[0]),
            Label::Negative => (&neg, &mut counters[1]),
        };
        let seq_dir = parent.join(format!("seq{:05}", *counter));
        *counter += 1;
        for (i, f) in seq.frames.iter().enumerate() {
            fsutil::write_atomic(&seq_dir.join(format!("frame{i:03}.pgm")), &encode_pgm(f))?;
        }
    }
    std::fs::create_dir_all(&pos).map_err(|e| crate::Error::io(&pos, e))?;
    std::fs::create_dir_all(&neg).map_err(|e| crate::Error::io(&neg, e))?;
    Ok((pos, neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_frames::{event_density, sequence_events, EventMode, Threshold};

    #[test]
    fn corpus_is_deterministic() {
        let cfg = SynthConfig::default();
        assert_eq!(corpus(3, 2, 2, &cfg), corpus(3, 2, 2, &cfg));
        assert_ne!(corpus(3, 2, 2, &cfg), corpus(4, 2, 2, &cfg));
    }

    #[test]
    fn both_classes_produce_sparse_events() {
        let cfg = SynthConfig::default();
        let th = Threshold::new(8).unwrap();
        for seq in corpus(1, 10, 10, &cfg) {
            let ev = sequence_events(&seq.frames, th, EventMode::Successive).unwrap();
            let d = event_density(&ev[0]);
            assert!(d > 0.003 && d < 0.15, "{:?} density {d}", seq.label);
        }
    }

    #[test]
    fn sensor_noise_stays_below_moderate_thresholds() {
        let cfg = SynthConfig {
            speckles: (0, 0),
            ..SynthConfig::default()
        };
        let mut rng = Rng::new(2);
        let frames = negative_sequence(&mut rng, &cfg);
        let ev = sequence_events(&frames, Threshold::new(8).unwrap(), EventMode::Successive).unwrap();
        assert_eq!(ev[0].event_count(), 0);
    }
}
