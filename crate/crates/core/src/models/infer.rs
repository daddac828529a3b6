use super::network::Plan;
use super::params::{ModelKind, ParameterSet};
use crate::error::{Error, Result};
use crate::event_frames::EventFrame;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Anything that maps an event frame to a `size × size` reconstruction.
pub trait Reconstructor {
    fn input_size(&self) -> usize;
    fn reconstruct_values(&self, frame: &EventFrame) -> Result<Vec<f32>>;
}

/// Binary mask resampled to the network input, as a `[1, 1, s, s]` tensor.
pub fn frame_tensor<T: Scalar>(frame: &EventFrame, size: usize) -> Tensor<T> {
    let v = frame.resized_values(size);
    Tensor::new([1, 1, size, size], v.into_iter().map(|x| T::of(x as f64)).collect()).expect("size² values")
}

pub(crate) fn batch_tensor<T: Scalar>(frames: &[&EventFrame], size: usize) -> Tensor<T> {
    let mut data = Vec::with_capacity(frames.len() * size * size);
    for f in frames {
        data.extend(f.resized_values(size).into_iter().map(|x| T::of(x as f64)));
    }
    Tensor::new([frames.len(), 1, size, size], data).expect("consistent batch")
}

fn require_kind<T: Scalar>(params: &ParameterSet<T>, kind: ModelKind) -> Result<()> {
    if params.kind() != kind {
        return Err(Error::InvalidArgument(format!(
            "operation needs a {} model, got a {}",
            kind.as_str(),
            params.kind().as_str()
        )));
    }
    Ok(())
}

/// Full autoencoder pass; output `[1, 1, s, s]` in `[0, 1]`.
pub fn reconstruct<T: Scalar>(params: &ParameterSet<T>, frame: &EventFrame) -> Result<Tensor<T>> {
    require_kind(params, ModelKind::Autoencoder)?;
    let plan = Plan::for_params(params)?;
    let x = frame_tensor(frame, params.config().input_size);
    Ok(plan.forward(params, x, plan.all(), false)?.0)
}

/// Latent code `(channels, s/2^L, s/2^L)`. Works for both model kinds.
pub fn encode<T: Scalar>(params: &ParameterSet<T>, frame: &EventFrame) -> Result<Tensor<T>> {
    let plan = Plan::for_params(params)?;
    let x = frame_tensor(frame, params.config().input_size);
    let z = plan.forward(params, x, plan.encoder(), false)?.0;
    z.reshape(params.config().latent_shape().to_vec())
}

/// Decoder half of the autoencoder applied to a latent from [`encode`].
pub fn decode<T: Scalar>(params: &ParameterSet<T>, latent: &Tensor<T>) -> Result<Tensor<T>> {
    require_kind(params, ModelKind::Autoencoder)?;
    let plan = Plan::for_params(params)?;
    let [c, s, _] = params.config().latent_shape();
    let z = latent.clone().reshape([1, c, s, s])?;
    Ok(plan.forward(params, z, plan.head(), false)?.0)
}

/// Face probability in `(0, 1)`.
pub fn predict<T: Scalar>(params: &ParameterSet<T>, frame: &EventFrame) -> Result<f64> {
    Ok(predict_batch(params, std::slice::from_ref(frame))?[0])
}

pub fn predict_batch<T: Scalar>(params: &ParameterSet<T>, frames: &[EventFrame]) -> Result<Vec<f64>> {
    require_kind(params, ModelKind::Classifier)?;
    let plan = Plan::for_params(params)?;
    let size = params.config().input_size;
    let mut out = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(32) {
        let refs: Vec<&EventFrame> = chunk.iter().collect();
        let y = plan.forward(params, batch_tensor(&refs, size), plan.all(), false)?.0;
        out.extend(y.data().iter().map(|v| v.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(out)
}

pub fn classify(probability: f64) -> bool {
    probability >= 0.5
}

impl<T: Scalar> Reconstructor for ParameterSet<T> {
    fn input_size(&self) -> usize {
        self.config().input_size
    }

    fn reconstruct_values(&self, frame: &EventFrame) -> Result<Vec<f32>> {
        Ok(reconstruct(self, frame)?.data().iter().map(|v| v.to_f32_lossy()).collect())
    }
}

/// Mean over frames of the fraction of pixels where `reconstruction ≥ 0.5`
/// agrees with the (resampled) input mask.
pub fn reconstruction_accuracy<R: Reconstructor + ?Sized>(model: &R, frames: &[EventFrame]) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::Data("no frames to score".into()));
    }
    let size = model.input_size();
    let mut total = 0.0;
    for frame in frames {
        let target = frame.resized_values(size);
        let recon = model.reconstruct_values(frame)?;
        if recon.len() != target.len() {
            return Err(Error::Shape(format!("reconstruction has {} values, expected {}", recon.len(), target.len())));
        }
        let agree = recon.iter().zip(&target).filter(|(&r, &t)| (r >= 0.5) == (t >= 0.5)).count();
        total += agree as f64 / target.len() as f64;
    }
    Ok(total / frames.len() as f64)
}
