//! Layer-wise mutual information between a model's input and its hidden
//! representations, with histogram binning and the plug-in estimator.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::event_frames::EventFrame;
use crate::models::{batch_tensor, ModelKind, ParameterSet, Plan};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_BINS: usize = 8;
const PROBE_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMode {
    /// Each layer's code is a function of the previous layer's code, so the
    /// estimates are non-increasing along each chain.
    Coarsening,
    /// Layers binned independently. Diagnostic only.
    Raw,
}

impl ProbeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeMode::Coarsening => "coarsening",
            ProbeMode::Raw => "raw",
        }
    }
}

impl FromStr for ProbeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarsening" => Ok(ProbeMode::Coarsening),
            "raw" => Ok(ProbeMode::Raw),
            _ => Err(Error::InvalidArgument(format!("unknown probe mode `{s}` (coarsening|raw)"))),
        }
    }
}

fn intern<K: std::hash::Hash + Eq>(keys: impl Iterator<Item = K>) -> Vec<u32> {
    let mut table = HashMap::new();
    keys.map(|k| {
        let next = table.len() as u32;
        *table.entry(k).or_insert(next)
    })
    .collect()
}

/// Uniform per-dimension bin indices over the batch range of each dimension.
fn bin_rows<T: Scalar>(rows: &[&[T]], bins: usize) -> Vec<Vec<u16>> {
    let dims = rows.first().map_or(0, |r| r.len());
    let mut lo = vec![f64::INFINITY; dims];
    let mut hi = vec![f64::NEG_INFINITY; dims];
    for row in rows {
        for (d, v) in row.iter().enumerate() {
            let v = v.to_f64().unwrap_or(0.0);
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    rows.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(d, v)| {
                    let span = hi[d] - lo[d];
                    if span <= 0.0 || !span.is_finite() {
                        return 0;
                    }
                    let t = (v.to_f64().unwrap_or(0.0) - lo[d]) / span;
                    ((t * bins as f64) as usize).min(bins - 1) as u16
                })
                .collect()
        })
        .collect()
}

fn sample_rows<T: Scalar>(batch: &Tensor<T>) -> Result<Vec<&[T]>> {
    let n = *batch.shape().first().ok_or_else(|| Error::Shape("empty activation batch shape".into()))?;
    if n == 0 {
        return Err(Error::InvalidArgument("activation batch has no samples".into()));
    }
    Ok(batch.data().chunks(batch.len() / n).collect())
}

/// One discrete code per sample (first dimension of `batch`). Codes are
/// numbered in order of first appearance.
pub fn quantize<T: Scalar>(batch: &Tensor<T>, bins: usize) -> Result<Vec<u32>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    Ok(intern(bin_rows(&sample_rows(batch)?, bins).into_iter()))
}

/// Re-expresses `next` so that it depends on a sample only through its
/// `prev` code: every sample takes the `next` code of the first sample that
/// shares its `prev` code.
pub fn coarsen(prev: &[u32], next: &[u32]) -> Result<Vec<u32>> {
    if prev.len() != next.len() {
        return Err(Error::Dimension(format!("{} vs {} codes", prev.len(), next.len())));
    }
    let mut rep: HashMap<u32, usize> = HashMap::new();
    Ok(intern(prev.iter().enumerate().map(|(s, p)| next[*rep.entry(*p).or_insert(s)])))
}

/// Sorting the terms makes the sum independent of how the counts were
/// enumerated.
fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

fn counts<K: Ord + Copy>(keys: impl Iterator<Item = K>) -> Vec<(K, u64)> {
    let mut keys: Vec<K> = keys.collect();
    keys.sort_unstable();
    let mut out: Vec<(K, u64)> = Vec::new();
    for k in keys {
        match out.last_mut() {
            Some((last, c)) if *last == k => *c += 1,
            _ => out.push((k, 1)),
        }
    }
    out
}

/// Empirical entropy in bits.
pub fn entropy(codes: &[u32]) -> Result<f64> {
    if codes.is_empty() {
        return Err(Error::InvalidArgument("entropy of an empty sample".into()));
    }
    let n = codes.len() as u64;
    let terms = counts(codes.iter().copied())
        .into_iter()
        .map(|(_, c)| c as f64 / n as f64 * ((n * c) as f64 / (c * c) as f64).log2())
        .collect();
    Ok(sorted_sum(terms))
}

/// Plug-in estimate of I(X;T) in bits.
pub fn mi_plugin(x: &[u32], t: &[u32]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("mutual information of an empty sample".into()));
    }
    if x.len() != t.len() {
        return Err(Error::Dimension(format!("{} vs {} codes", x.len(), t.len())));
    }
    let n = x.len() as u64;
    let cx: HashMap<u32, u64> = counts(x.iter().copied()).into_iter().collect();
    let ct: HashMap<u32, u64> = counts(t.iter().copied()).into_iter().collect();
    let terms = counts(x.iter().copied().zip(t.iter().copied()))
        .into_iter()
        .map(|((a, b), c)| c as f64 / n as f64 * ((n * c) as f64 / (cx[&a] * ct[&b]) as f64).log2())
        .collect();
    // Rounding can push an independent pair a hair below zero.
    Ok(sorted_sum(terms).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiReport {
    pub mode: ProbeMode,
    /// Encoder levels first (`enc1` nearest the input), then decoder hidden
    /// layers with `dec1` nearest the output.
    pub layers: Vec<String>,
    pub mi_bits: Vec<f64>,
    pub bins: usize,
    pub samples: usize,
}

impl MiReport {
    pub fn to_csv(&self) -> String {
        let tag = match self.mode {
            ProbeMode::Coarsening => "# mode=coarsening",
            ProbeMode::Raw => "# mode=raw (diagnostic)",
        };
        let mut out = format!("{tag} bins={} samples={}\nlayer,mi_bits\n", self.bins, self.samples);
        for (l, v) in self.layers.iter().zip(&self.mi_bits) {
            out.push_str(&format!("{l},{v}\n"));
        }
        out
    }

    /// Values for layers whose name starts with `prefix`, in report order.
    pub fn chain(&self, prefix: &str) -> Vec<f64> {
        self.layers
            .iter()
            .zip(&self.mi_bits)
            .filter(|(l, _)| l.starts_with(prefix))
            .map(|(_, v)| *v)
            .collect()
    }
}

impl fmt::Display for MiReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv())
    }
}

fn chain_mi(reference: &[u32], layers: Vec<Vec<u32>>, mode: ProbeMode) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(layers.len());
    let mut prev: Option<Vec<u32>> = None;
    for codes in layers {
        let codes = match (mode, &prev) {
            (ProbeMode::Coarsening, Some(p)) => coarsen(p, &codes)?,
            _ => codes,
        };
        out.push(mi_plugin(reference, &codes)?);
        prev = Some(codes);
    }
    Ok(out)
}

/// Runs `frames` through the model and estimates I(X;T_i) for the encoder
/// levels and, for autoencoders, I(X';T_i') for the decoder hidden layers
/// against the reconstruction X'.
pub fn dpi_chain<T: Scalar>(
    params: &ParameterSet<T>,
    frames: &[EventFrame],
    bins: usize,
    mode: ProbeMode,
) -> Result<MiReport> {
    if frames.len() < 2 {
        return Err(Error::InvalidArgument(format!("MI probe needs at least 2 samples, got {}", frames.len())));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    let plan = Plan::for_params(params)?;
    let size = params.config().input_size;
    let is_ae = params.kind() == ModelKind::Autoencoder;
    let mut taps: Vec<usize> = plan.encoder_taps.clone();
    // Output-nearest decoder layer first.
    taps.extend(plan.decoder_taps.iter().rev());
    let last_op = plan.ops.len() - 1;

    let mut acts: Vec<Vec<T>> = vec![Vec::new(); taps.len()];
    let mut input = Vec::new();
    let mut output = Vec::new();
    for chunk in frames.chunks(PROBE_CHUNK) {
        let refs: Vec<&EventFrame> = chunk.iter().collect();
        let x = batch_tensor::<T>(&refs, size);
        input.extend_from_slice(x.data());
        let range = if is_ae { plan.all() } else { plan.encoder() };
        let outs = plan.forward_taps(params, x, range)?;
        for (a, &op) in acts.iter_mut().zip(&taps) {
            a.extend_from_slice(outs[op].data());
        }
        if is_ae {
            output.extend_from_slice(outs[last_op].data());
        }
    }
    let n = frames.len();
    let as_batch = |v: Vec<T>| {
        let per = v.len() / n;
        Tensor::new([n, per], v)
    };
    let codes: Vec<Vec<u32>> = acts.into_iter().map(|a| quantize(&as_batch(a)?, bins)).collect::<Result<_>>()?;
    let x_codes = quantize(&as_batch(input)?, bins)?;

    let levels = plan.encoder_taps.len();
    let mut layers: Vec<String> = (1..=levels).map(|i| format!("enc{i}")).collect();
    let mut codes = codes.into_iter();
    let mut mi_bits = chain_mi(&x_codes, codes.by_ref().take(levels).collect(), mode)?;
    if is_ae {
        let xp_codes = quantize(&as_batch(output)?, bins)?;
        layers.extend((1..=plan.decoder_taps.len()).map(|i| format!("dec{i}")));
        mi_bits.extend(chain_mi(&xp_codes, codes.collect(), mode)?);
    }
    Ok(MiReport { mode, layers, mi_bits, bins, samples: n })
}
