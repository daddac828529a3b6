//! Dataset-level event threshold selection by sweeping candidates.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event_frames::{event_density, sequence_events, EventFrame, EventMode, Label, Threshold};
use crate::fsutil;
use crate::metrics::roc_curve;
use crate::models::{build_autoencoder, build_classifier, predict_batch, train_autoencoder, train_classifier, ModelConfig, TrainOptions};
use crate::synth::LabeledSequence;

pub const DEFAULT_TARGET_DENSITY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// AUROC of a budget-limited classifier on a held-out split.
    ValidationAuroc,
    /// `-|mean density - target|`; trains nothing.
    DensityBand { target: f64 },
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::ValidationAuroc => "validation_auroc",
            Criterion::DensityBand { .. } => "density_band",
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "validation_auroc" => Ok(Criterion::ValidationAuroc),
            "density_band" => Ok(Criterion::DensityBand { target: DEFAULT_TARGET_DENSITY }),
            _ => Err(Error::InvalidArgument(format!(
                "unknown criterion `{s}` (validation_auroc|density_band)"
            ))),
        }
    }
}

/// Training allowance for each candidate under [`Criterion::ValidationAuroc`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepBudget {
    pub model: ModelConfig,
    /// Autoencoder epochs before the encoder is frozen; 0 keeps the random
    /// initialisation.
    pub ae_epochs: usize,
    pub clf_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Every `holdout_every`-th sequence of each class is held out.
    pub holdout_every: usize,
    pub mode: EventMode,
}

impl Default for SweepBudget {
    fn default() -> Self {
        SweepBudget {
            model: ModelConfig::default().with_width(0.5),
            ae_epochs: 2,
            clf_epochs: 10,
            batch_size: 16,
            lr: 1e-3,
            seed: 0,
            holdout_every: 5,
            mode: EventMode::Successive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub criterion: Criterion,
    pub candidates: Vec<Threshold>,
    pub values: Vec<f64>,
    pub chosen: Threshold,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,criterion,value\n");
        for (th, v) in self.candidates.iter().zip(&self.values) {
            out.push_str(&format!("{th},{},{v}\n", self.criterion.name()));
        }
        out
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_csv().as_bytes())
    }
}

impl fmt::Display for SweepResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chosen_threshold={} criterion={}", self.chosen, self.criterion.name())
    }
}

/// Largest score wins; equal scores go to the smaller threshold. NaN never
/// wins over a number.
pub fn argmax_threshold(result: &SweepResult) -> Result<Threshold> {
    pick(&result.candidates, &result.values)
}

fn pick(candidates: &[Threshold], values: &[f64]) -> Result<Threshold> {
    if candidates.is_empty() || candidates.len() != values.len() {
        return Err(Error::InvalidArgument("sweep needs one value per candidate".into()));
    }
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let mut best = 0;
    for i in 1..candidates.len() {
        let (vi, vb) = (key(values[i]), key(values[best]));
        if vi > vb || (vi == vb && candidates[i] < candidates[best]) {
            best = i;
        }
    }
    Ok(candidates[best])
}

fn events_for(seq: &LabeledSequence, th: Threshold, mode: EventMode) -> Result<Vec<(EventFrame, Label)>> {
    Ok(sequence_events(&seq.frames, th, mode)?.into_iter().map(|f| (f, seq.label)).collect())
}

fn density_score(sequences: &[LabeledSequence], th: Threshold, mode: EventMode, target: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for seq in sequences {
        for f in sequence_events(&seq.frames, th, mode)? {
            sum += event_density(&f);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Data("no event frames to measure density on".into()));
    }
    Ok(-(sum / n as f64 - target).abs())
}

fn auroc_score(sequences: &[LabeledSequence], th: Threshold, budget: &SweepBudget) -> Result<f64> {
    let every = budget.holdout_every.max(2);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    let (mut seen_pos, mut seen_neg) = (0usize, 0usize);
    for seq in sequences {
        let seen = if seq.label.is_positive() { &mut seen_pos } else { &mut seen_neg };
        let dest = if *seen % every == every - 1 { &mut val } else { &mut train };
        *seen += 1;
        dest.extend(events_for(seq, th, budget.mode)?);
    }
    for (name, split) in [("training", &train), ("validation", &val)] {
        let pos = split.iter().filter(|(_, l)| l.is_positive()).count();
        if pos == 0 || pos == split.len() {
            return Err(Error::SingleClass(format!("threshold {th}: {name} split is single-class")));
        }
    }
    let opts = |epochs| TrainOptions { epochs, batch_size: budget.batch_size, lr: budget.lr, seed: budget.seed };
    let frames: Vec<EventFrame> = train.iter().map(|(f, _)| f.clone()).collect();
    let ae = if budget.ae_epochs > 0 {
        train_autoencoder::<f32>(&budget.model, &frames, &opts(budget.ae_epochs))?.0
    } else {
        build_autoencoder::<f32>(&budget.model)?
    };
    let clf = build_classifier(&ae, &budget.model)?;
    let (clf, _) = train_classifier(clf, &train, &opts(budget.clf_epochs))?;
    let val_frames: Vec<EventFrame> = val.iter().map(|(f, _)| f.clone()).collect();
    let scores = predict_batch(&clf, &val_frames)?;
    let labels: Vec<bool> = val.iter().map(|(_, l)| l.is_positive()).collect();
    Ok(*roc_curve::<f64>(&scores, &labels)?.auroc())
}

/// Scores every candidate and picks the best. Candidates are evaluated
/// independently, in parallel unless deterministic mode is on.
pub fn sweep_thresholds(
    sequences: &[LabeledSequence],
    candidates: &[Threshold],
    criterion: Criterion,
    budget: &SweepBudget,
) -> Result<SweepResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate thresholds".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("duplicate candidate thresholds".into()));
    }
    if sequences.is_empty() {
        return Err(Error::InvalidArgument("no sequences to sweep over".into()));
    }
    budget.model.validate()?;
    let score = |&th: &Threshold| match criterion {
        Criterion::ValidationAuroc => auroc_score(sequences, th, budget),
        Criterion::DensityBand { target } => density_score(sequences, th, budget.mode, target),
    };
    let values: Vec<f64> = if fsutil::deterministic_mode() {
        candidates.iter().map(score).collect::<Result<_>>()?
    } else {
        candidates.par_iter().map(score).collect::<Result<_>>()?
    };
    let chosen = pick(candidates, &values)?;
    Ok(SweepResult { criterion, candidates: candidates.to_vec(), values, chosen })
}
