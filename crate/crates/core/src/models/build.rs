use super::config::ModelConfig;
use super::params::{expected_shapes, ModelKind, Param, ParameterSet};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{kaiming_uniform, Tensor};

fn fan_in(shape: &[usize]) -> usize {
    shape[1..].iter().product()
}

fn init_tensor<T: Scalar>(rng: &mut Rng, name: &str, shape: &[usize]) -> Tensor<T> {
    if name.ends_with(".b") {
        Tensor::zeros(shape.to_vec())
    } else {
        kaiming_uniform(rng, shape, fan_in(shape))
    }
}

/// Fresh autoencoder: `levels × [conv, relu, pool]` encoder and a mirrored
/// `[conv, relu, upsample]` decoder ending in a one-channel conv + sigmoid.
/// Weights are Kaiming-uniform from `config.seed`, biases zero.
pub fn build_autoencoder<T: Scalar>(config: &ModelConfig) -> Result<ParameterSet<T>> {
    config.validate()?;
    let mut rng = Rng::new(config.seed);
    let params = expected_shapes(config, ModelKind::Autoencoder)
        .into_iter()
        .map(|(name, shape)| Param {
            value: init_tensor(&mut rng, &name, &shape),
            name,
            frozen: false,
        })
        .collect();
    ParameterSet::from_parts(config.clone(), ModelKind::Autoencoder, params)
}

/// Classifier on top of a trained encoder: the `enc.*` tensors are copied and
/// frozen, then `flatten → fc(hidden) → relu → fc(1) → sigmoid` is appended.
///
/// `config.fc_hidden` (scaled by the width multiplier) sizes the hidden
/// layer; every other architectural field must match the encoder's config.
pub fn build_classifier<T: Scalar>(encoder: &ParameterSet<T>, config: &ModelConfig) -> Result<ParameterSet<T>> {
    config.validate()?;
    if !encoder.config().encoder_compatible(config) || encoder.config().base_channels.len() != config.base_channels.len() {
        return Err(Error::Config(format!(
            "encoder was built for input {} with channels {:?}, classifier config wants input {} with channels {:?}",
            encoder.config().input_size,
            encoder.config().channels(),
            config.input_size,
            config.channels()
        )));
    }
    let mut rng = Rng::new(config.seed).split(0x636c66);
    let mut params = Vec::new();
    for (name, shape) in expected_shapes(config, ModelKind::Classifier) {
        let param = if name.starts_with("enc.") {
            let src = encoder
                .get(&name)
                .ok_or_else(|| Error::Shape(format!("encoder lacks `{name}`")))?;
            Param {
                name,
                value: src.value.clone(),
                frozen: true,
            }
        } else {
            Param {
                value: init_tensor(&mut rng, &name, &shape),
                name,
                frozen: false,
            }
        };
        params.push(param);
    }
    ParameterSet::from_parts(config.clone(), ModelKind::Classifier, params)
}
