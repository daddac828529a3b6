use std::path::{Path, PathBuf};

use clap::Args;
use evlab::bench::{bench_model, BenchOptions};
use evlab::event_frames::{
    build_dataset, diff_events, expand_sequence_dirs, load_sequence, DatasetManifest, EventFrame, EventMode, Label,
    SequenceDir, Split, Threshold,
};
use evlab::fsutil::write_atomic;
use evlab::metrics::{export_curve, roc_curve, MetricsSummary};
use evlab::mi_probe::{dpi_chain, ProbeMode};
use evlab::models::{
    build_classifier, load_weights, predict_batch, reconstruction_accuracy, save_weights, train_autoencoder,
    train_classifier, LossKind, ModelConfig, ModelKind, TrainOptions, TrainReport,
};
use evlab::selector::{sweep_thresholds, Criterion, SweepBudget};
use evlab::synth::{corpus, positive_sequence, write_corpus, LabeledSequence, SynthConfig};
use evlab::{Error, Params, Result, Rng};

use crate::ConfigArg;

fn threshold_arg(s: &str) -> std::result::Result<u8, String> {
    let v: u32 = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
    Threshold::new(v).map(|t| t.get()).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct EventsArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Positive sequence directories (comma separated or repeated). A
    /// directory without frames is expanded into its subdirectories.
    #[arg(long, value_delimiter = ',', required_unless_present = "neg")]
    pub pos: Vec<PathBuf>,
    /// Negative sequence directories.
    #[arg(long, value_delimiter = ',')]
    pub neg: Vec<PathBuf>,
    /// Event threshold, 1..=255.
    #[arg(long, default_value = "8", value_parser = threshold_arg)]
    pub th: u8,
    /// successive or reference.
    #[arg(long, default_value = "successive")]
    pub mode: EventMode,
    /// train or test; names the manifest file.
    #[arg(long, default_value = "train")]
    pub split: Split,
    /// Output directory for event files and the manifest.
    #[arg(long)]
    pub out: PathBuf,
}

fn sequence_dirs(pos: &[PathBuf], neg: &[PathBuf]) -> Result<Vec<SequenceDir>> {
    let mut out = Vec::new();
    for (dirs, label) in [(pos, Label::Positive), (neg, Label::Negative)] {
        for d in dirs {
            out.extend(expand_sequence_dirs(d, label)?);
        }
    }
    Ok(out)
}

pub fn events(a: EventsArgs) -> Result<()> {
    let seqs = sequence_dirs(&a.pos, &a.neg)?;
    let s = build_dataset(&seqs, Threshold::new(a.th as u32)?, a.mode, a.split, &a.out)?;
    println!(
        "manifest={} entries={} positives={} negatives={}",
        s.manifest_path.display(),
        s.manifest.len(),
        s.positives,
        s.negatives
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainAeArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Manifest (`train.tsv` / `test.tsv`) written by `events`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output weight file.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss CSV; defaults to the weight path with `.loss.csv`.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub width_mult: f64,
    #[arg(long, default_value_t = 64)]
    pub input_size: usize,
    /// bce or mse.
    #[arg(long, default_value = "bce")]
    pub loss: LossKind,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn load_manifest_frames(path: &Path) -> Result<Vec<(EventFrame, Label)>> {
    let m = DatasetManifest::load(path)?;
    let root = path.parent().unwrap_or(Path::new("."));
    m.load_frames(root)
}

fn finish_training(params: &Params, report: &TrainReport, out: &Path, loss_csv: Option<PathBuf>) -> Result<()> {
    save_weights(params, out)?;
    let csv = loss_csv.unwrap_or_else(|| out.with_extension("loss.csv"));
    write_atomic(&csv, report.to_csv().as_bytes())?;
    let last = report.final_loss().map_or("none".to_string(), |l| format!("{l:.6}"));
    println!(
        "weights={} loss_csv={} epochs={} final_loss={last} seconds={:.1}",
        out.display(),
        csv.display(),
        report.epochs,
        report.wall_time.as_secs_f64()
    );
    Ok(())
}

pub fn train_ae(a: TrainAeArgs) -> Result<()> {
    let frames: Vec<EventFrame> = load_manifest_frames(&a.manifest)?.into_iter().map(|(f, _)| f).collect();
    let cfg = ModelConfig { input_size: a.input_size, loss: a.loss, seed: a.seed, ..ModelConfig::default() }
        .with_width(a.width_mult);
    let opts = TrainOptions { epochs: a.epochs, batch_size: a.batch, lr: a.lr, seed: a.seed };
    let (params, report) = train_autoencoder::<f32>(&cfg, &frames, &opts)?;
    finish_training(&params, &report, &a.out, a.loss_csv)
}

#[derive(Debug, Args)]
pub struct TrainClfArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Trained autoencoder weights; its encoder is copied and frozen.
    #[arg(long)]
    pub encoder: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    /// Hidden units of the head before width scaling.
    #[arg(long, default_value_t = 200)]
    pub hidden: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn train_clf(a: TrainClfArgs) -> Result<()> {
    let encoder = load_weights(&a.encoder)?;
    if encoder.kind() != ModelKind::Autoencoder {
        return Err(Error::Config(format!("{} is not an autoencoder weight file", a.encoder.display())));
    }
    let samples = load_manifest_frames(&a.manifest)?;
    let cfg = ModelConfig { fc_hidden: a.hidden, seed: a.seed, ..encoder.config().clone() };
    let clf = build_classifier(&encoder, &cfg)?;
    let opts = TrainOptions { epochs: a.epochs, batch_size: a.batch, lr: a.lr, seed: a.seed };
    let (params, report) = train_classifier(clf, &samples, &opts)?;
    finish_training(&params, &report, &a.out, a.loss_csv)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// ROC curve CSV output (classifier weights only).
    #[arg(long)]
    pub roc: Option<PathBuf>,
}

fn pct(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let params = load_weights(&a.weights)?;
    let samples = load_manifest_frames(&a.manifest)?;
    let frames: Vec<EventFrame> = samples.iter().map(|(f, _)| f.clone()).collect();
    match params.kind() {
        ModelKind::Autoencoder => {
            let acc = reconstruction_accuracy(&params, &frames)?;
            println!("reconstruction_accuracy={} frames={}", pct(acc), frames.len());
        }
        ModelKind::Classifier => {
            let scores = predict_batch(&params, &frames)?;
            let labels: Vec<bool> = samples.iter().map(|(_, l)| l.is_positive()).collect();
            let curve = roc_curve::<f64>(&scores, &labels)?;
            let summary = MetricsSummary::evaluate(&scores, &labels, 0.5)?;
            println!("{}", summary.line(true));
            if let Some(path) = &a.roc {
                export_curve(&curve, path)?;
                println!("roc={}", path.display());
            }
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Histogram bins per dimension.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u16).range(1..))]
    pub bins: u16,
    /// coarsening (monotone chain) or raw (diagnostic).
    #[arg(long, default_value = "coarsening")]
    pub mode: ProbeMode,
    /// Use at most this many frames, evenly spaced through the manifest.
    #[arg(long)]
    pub max_samples: Option<usize>,
    /// MI CSV output; the report is printed either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn probe(a: ProbeArgs) -> Result<()> {
    let params = load_weights(&a.weights)?;
    let mut frames: Vec<EventFrame> = load_manifest_frames(&a.manifest)?.into_iter().map(|(f, _)| f).collect();
    if let Some(max) = a.max_samples.filter(|&m| m > 0 && m < frames.len()) {
        let n = frames.len();
        frames = (0..max).map(|i| frames[i * n / max].clone()).collect();
    }
    let report = dpi_chain(&params, &frames, a.bins as usize, a.mode)?;
    let csv = report.to_csv();
    print!("{csv}");
    if let Some(path) = &a.out {
        write_atomic(path, csv.as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Positive raw intensity sequence directories.
    #[arg(long, value_delimiter = ',', required = true)]
    pub pos: Vec<PathBuf>,
    /// Negative raw intensity sequence directories.
    #[arg(long, value_delimiter = ',', required = true)]
    pub neg: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "4,8,12,16", value_parser = threshold_arg)]
    pub candidates: Vec<u8>,
    /// validation_auroc or density_band.
    #[arg(long, default_value = "validation_auroc")]
    pub criterion: String,
    /// Target mean event density for density_band.
    #[arg(long, default_value_t = evlab::selector::DEFAULT_TARGET_DENSITY)]
    pub target_density: f64,
    #[arg(long, default_value = "successive")]
    pub mode: EventMode,
    #[arg(long, default_value_t = 0.5)]
    pub width_mult: f64,
    #[arg(long, default_value_t = 64)]
    pub input_size: usize,
    /// Autoencoder epochs per candidate before the encoder is frozen.
    #[arg(long, default_value_t = 2)]
    pub ae_epochs: usize,
    /// Classifier epochs per candidate.
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Every n-th sequence of each class is held out for validation.
    #[arg(long, default_value_t = 5)]
    pub holdout_every: usize,
    /// Sweep table CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn select(a: SelectArgs) -> Result<()> {
    let criterion = match a.criterion.parse()? {
        Criterion::DensityBand { .. } => Criterion::DensityBand { target: a.target_density },
        c => c,
    };
    let mut sequences = Vec::new();
    for dir in sequence_dirs(&a.pos, &a.neg)? {
        sequences.push(LabeledSequence { label: dir.label, frames: load_sequence(&dir.path)? });
    }
    let candidates = a.candidates.iter().map(|&t| Threshold::new(t as u32)).collect::<Result<Vec<_>>>()?;
    let budget = SweepBudget {
        model: ModelConfig { input_size: a.input_size, seed: a.seed, ..ModelConfig::default() }.with_width(a.width_mult),
        ae_epochs: a.ae_epochs,
        clf_epochs: a.epochs,
        batch_size: a.batch,
        lr: a.lr,
        seed: a.seed,
        holdout_every: a.holdout_every,
        mode: a.mode,
    };
    let result = sweep_thresholds(&sequences, &candidates, criterion, &budget)?;
    print!("{}", result.to_csv());
    println!("{result}");
    if let Some(path) = &a.out {
        result.save_csv(path)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub warmup: usize,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    /// Measured runs; the median-fps run is reported.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Seed of the synthetic input frame.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-iteration latency CSV output.
    #[arg(long)]
    pub latency_csv: Option<PathBuf>,
}

/// A representative event frame: one step of a moving synthetic object.
fn bench_frame(size: usize, seed: u64) -> Result<EventFrame> {
    let cfg = SynthConfig { size, ..SynthConfig::default() };
    let frames = positive_sequence(&mut Rng::new(seed), &cfg);
    diff_events(&frames[0], &frames[1], Threshold::new(8)?)
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let params = load_weights(&a.weights)?;
    let frame = bench_frame(params.config().input_size, a.seed)?;
    let opts = BenchOptions { warmup: a.warmup, iters: a.iters, repeats: a.repeats };
    let report = bench_model(&params, &frame, &opts)?;
    println!("{}", report.line());
    if let Some(path) = &a.latency_csv {
        write_atomic(path, report.latency_csv().as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub weights: PathBuf,
}

pub fn params(a: ParamsArgs) -> Result<()> {
    let p = load_weights(&a.weights)?;
    println!(
        "kind={} width_mult={} total={} trainable={}",
        p.kind().as_str(),
        p.config().width_mult,
        p.param_count(false),
        p.param_count(true)
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Output root; sequences go to `<out>/train/<label>/…` and
    /// `<out>/test/<label>/…`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 400)]
    pub positives: usize,
    #[arg(long, default_value_t = 400)]
    pub negatives: usize,
    /// Every n-th sequence of each class goes to the test split; 0 puts
    /// everything in train.
    #[arg(long, default_value_t = 5)]
    pub test_every: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Intensity frames per sequence.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u16).range(2..))]
    pub frames: u16,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    if a.size < 8 {
        return Err(Error::InvalidArgument("size must be at least 8".into()));
    }
    let cfg = SynthConfig { size: a.size, frames: a.frames as usize, ..SynthConfig::default() };
    let all = corpus(a.seed, a.positives, a.negatives, &cfg);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let mut seen = [0usize; 2];
    for seq in all {
        let k = &mut seen[seq.label.is_positive() as usize];
        let held = a.test_every > 0 && *k % a.test_every == a.test_every - 1;
        *k += 1;
        if held {
            test.push(seq);
        } else {
            train.push(seq);
        }
    }
    for (name, seqs) in [("train", &train), ("test", &test)] {
        if seqs.is_empty() {
            continue;
        }
        let (pos, neg) = write_corpus(&a.out.join(name), seqs)?;
        println!("{name}: sequences={} pos={} neg={}", seqs.len(), pos.display(), neg.display());
    }
    Ok(())
}

