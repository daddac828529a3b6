use std::ops::{ControlFlow, Range};
use std::time::{Duration, Instant};

use super::build::build_autoencoder;
use super::config::{LossKind, ModelConfig};
use super::infer::batch_tensor;
use super::network::Plan;
use super::params::{ModelKind, ParameterSet};
use crate::error::{Error, Result};
use crate::event_frames::{EventFrame, Label};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{adam_step, bce_loss, mse_loss, AdamConfig, AdamState, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Drives sample shuffling only; initialization uses the model seed.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 10,
            batch_size: 16,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Sample-weighted mean loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub wall_time: Duration,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }

    /// `epoch,loss` with a header row, one line per epoch.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (i, l) in self.epoch_losses.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, l));
        }
        s
    }
}

/// State handed to per-epoch callbacks.
pub struct EpochEnd<'a, T> {
    pub epoch: usize,
    pub loss: f64,
    pub params: &'a ParameterSet<T>,
}

struct Samples<T> {
    inputs: Vec<Vec<T>>,
    input_shape: Vec<usize>,
    targets: Vec<Vec<T>>,
    target_shape: Vec<usize>,
}

impl<T: Scalar> Samples<T> {
    fn batch(&self, idx: &[usize]) -> Result<(Tensor<T>, Tensor<T>)> {
        let gather = |rows: &[Vec<T>], shape: &[usize]| {
            let mut data = Vec::with_capacity(idx.len() * rows[0].len());
            for &i in idx {
                data.extend_from_slice(&rows[i]);
            }
            let mut full = vec![idx.len()];
            full.extend_from_slice(shape);
            Tensor::new(full, data)
        };
        Ok((gather(&self.inputs, &self.input_shape)?, gather(&self.targets, &self.target_shape)?))
    }
}

fn check_options(opts: &TrainOptions) -> Result<()> {
    if opts.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if !(opts.lr.is_finite() && opts.lr > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate {} must be positive", opts.lr)));
    }
    Ok(())
}

fn fit<T: Scalar>(
    params: &mut ParameterSet<T>,
    plan: &Plan,
    range: Range<usize>,
    samples: &Samples<T>,
    loss: LossKind,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochEnd<'_, T>) -> ControlFlow<()>,
) -> Result<TrainReport> {
    check_options(opts)?;
    let start = Instant::now();
    let n = samples.inputs.len();
    let mut rng = Rng::new(opts.seed);
    let adam = AdamConfig::with_lr(opts.lr);
    let mut states: Vec<Option<AdamState<T>>> = params
        .params()
        .iter()
        .map(|p| (!p.frozen).then(|| AdamState::new(p.value.len())))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for (b, idx) in order.chunks(opts.batch_size).enumerate() {
            let (x, target) = samples.batch(idx)?;
            let (pred, saved) = plan.forward(params, x, range.clone(), true)?;
            let (value, grad) = match loss {
                LossKind::Bce => bce_loss(&pred, &target)?,
                LossKind::Mse => mse_loss(&pred, &target)?,
            };
            let value = value.to_f64().unwrap_or(f64::NAN);
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch: epoch + 1, batch: b });
            }
            total += value * idx.len() as f64;
            let grads = plan.backward(params, saved, grad, range.clone())?;
            for (i, g) in grads {
                let p = &mut params.params_mut()[i];
                if p.frozen {
                    continue;
                }
                p.value.zero_grad();
                for (acc, &v) in p.value.grad_mut().iter_mut().zip(g.data()) {
                    *acc = *acc + v;
                }
                let state = states[i].as_mut().expect("trainable tensors have optimizer state");
                let (values, grad) = p.value.data_and_grad_mut();
                adam_step(values, grad, state, &adam);
            }
        }
        let mean = total / n as f64;
        epoch_losses.push(mean);
        if on_epoch(&EpochEnd { epoch: epoch + 1, loss: mean, params }).is_break() {
            break;
        }
    }
    for p in params.params_mut() {
        p.value.clear_grad();
    }
    Ok(TrainReport {
        epochs: epoch_losses.len(),
        epoch_losses,
        seed: opts.seed,
        wall_time: start.elapsed(),
    })
}

/// Builds an autoencoder from `config` and trains it to reconstruct
/// `frames` under `config.loss`.
pub fn train_autoencoder<T: Scalar>(
    config: &ModelConfig,
    frames: &[EventFrame],
    opts: &TrainOptions,
) -> Result<(ParameterSet<T>, TrainReport)> {
    train_autoencoder_with(build_autoencoder(config)?, frames, opts, |_| ControlFlow::Continue(()))
}

/// Continues training `params`; `on_epoch` may stop early.
pub fn train_autoencoder_with<T: Scalar>(
    mut params: ParameterSet<T>,
    frames: &[EventFrame],
    opts: &TrainOptions,
    on_epoch: impl FnMut(&EpochEnd<'_, T>) -> ControlFlow<()>,
) -> Result<(ParameterSet<T>, TrainReport)> {
    if params.kind() != ModelKind::Autoencoder {
        return Err(Error::InvalidArgument("train_autoencoder needs an autoencoder".into()));
    }
    if frames.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let size = params.config().input_size;
    let inputs: Vec<Vec<T>> = frames
        .iter()
        .map(|f| f.resized_values(size).into_iter().map(|v| T::of(v as f64)).collect())
        .collect();
    let samples = Samples {
        targets: inputs.clone(),
        inputs,
        input_shape: vec![1, size, size],
        target_shape: vec![1, size, size],
    };
    let plan = Plan::for_params(&params)?;
    let loss = params.config().loss;
    let report = fit(&mut params, &plan, plan.all(), &samples, loss, opts, on_epoch)?;
    Ok((params, report))
}

/// Trains only the `clf.*` head with BCE on the labels. The frozen encoder
/// is evaluated once per sample; its tensors are verified bit-identical
/// afterwards.
pub fn train_classifier<T: Scalar>(
    mut classifier: ParameterSet<T>,
    samples: &[(EventFrame, Label)],
    opts: &TrainOptions,
) -> Result<(ParameterSet<T>, TrainReport)> {
    if classifier.kind() != ModelKind::Classifier {
        return Err(Error::InvalidArgument("train_classifier needs a classifier".into()));
    }
    let positives = samples.iter().filter(|(_, l)| l.is_positive()).count();
    if positives == 0 || positives == samples.len() {
        let missing = if positives == 0 { "positive" } else { "negative" };
        return Err(Error::SingleClass(format!("training set has no {missing} samples")));
    }
    check_options(opts)?;
    let before = classifier.snapshot_bits("enc.");
    let plan = Plan::for_params(&classifier)?;
    let size = classifier.config().input_size;
    let latent = classifier.config().latent_shape();

    let mut inputs = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(32) {
        let frames: Vec<&EventFrame> = chunk.iter().map(|(f, _)| f).collect();
        let z = plan.forward(&classifier, batch_tensor(&frames, size), plan.encoder(), false)?.0;
        let per = z.len() / chunk.len();
        inputs.extend(z.data().chunks(per).map(<[T]>::to_vec));
    }
    let targets = samples
        .iter()
        .map(|(_, l)| vec![if l.is_positive() { T::one() } else { T::zero() }])
        .collect();
    let data = Samples {
        inputs,
        input_shape: latent.to_vec(),
        targets,
        target_shape: vec![1],
    };
    let report = fit(&mut classifier, &plan, plan.head(), &data, LossKind::Bce, opts, |_| ControlFlow::Continue(()))?;

    let after = classifier.snapshot_bits("enc.");
    if let Some(((name, _), _)) = before.iter().zip(&after).find(|(a, b)| a != b) {
        return Err(Error::FrozenViolated(name.clone()));
    }
    Ok((classifier, report))
}
