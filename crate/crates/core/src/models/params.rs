use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Autoencoder,
    Classifier,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Autoencoder => "autoencoder",
            ModelKind::Classifier => "classifier",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub frozen: bool,
}

/// Named weight tensors of one model plus the config that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<T> {
    config: ModelConfig,
    kind: ModelKind,
    params: Vec<Param<T>>,
}

/// Expected `(name, shape)` table for a model, in storage order.
pub fn expected_shapes(config: &ModelConfig, kind: ModelKind) -> Vec<(String, Vec<usize>)> {
    let ch = config.channels();
    let mut out = Vec::new();
    let conv = |prefix: &str, idx: usize, cin: usize, cout: usize, out: &mut Vec<_>| {
        out.push((format!("{prefix}.conv{idx}.w"), vec![cout, cin, 3, 3]));
        out.push((format!("{prefix}.conv{idx}.b"), vec![cout]));
    };
    let mut cin = 1;
    for (i, &c) in ch.iter().enumerate() {
        conv("enc", i + 1, cin, c, &mut out);
        cin = c;
    }
    match kind {
        ModelKind::Autoencoder => {
            // Decoder: top width once more, then back down the pyramid, then one channel.
            let mut widths: Vec<usize> = vec![*ch.last().expect("validated")];
            widths.extend(ch.iter().rev().skip(1));
            widths.push(1);
            let mut cin = widths[0];
            for (i, &c) in widths.iter().enumerate() {
                conv("dec", i + 1, cin, c, &mut out);
                cin = c;
            }
        }
        ModelKind::Classifier => {
            let [c, s, _] = config.latent_shape();
            let hidden = config.hidden_units();
            out.push(("clf.fc1.w".into(), vec![hidden, c * s * s]));
            out.push(("clf.fc1.b".into(), vec![hidden]));
            out.push(("clf.fc2.w".into(), vec![1, hidden]));
            out.push(("clf.fc2.b".into(), vec![1]));
        }
    }
    out
}

impl<T: Scalar> ParameterSet<T> {
    /// Assembles a parameter set, checking names and shapes against the
    /// table derived from `config`.
    pub fn from_parts(config: ModelConfig, kind: ModelKind, params: Vec<Param<T>>) -> Result<Self> {
        config.validate()?;
        let expected = expected_shapes(&config, kind);
        if expected.len() != params.len() {
            return Err(Error::Shape(format!(
                "{} model needs {} tensors, got {}",
                kind.as_str(),
                expected.len(),
                params.len()
            )));
        }
        for ((name, shape), p) in expected.iter().zip(&params) {
            if &p.name != name {
                return Err(Error::Shape(format!("expected tensor `{name}`, found `{}`", p.name)));
            }
            if p.value.shape() != &shape[..] {
                return Err(Error::Shape(format!(
                    "tensor `{name}` has shape {:?}, config implies {shape:?}",
                    p.value.shape()
                )));
            }
        }
        Ok(ParameterSet { config, kind, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub(crate) fn index_of(&self, name: &str) -> Result<usize> {
        self.params
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::Shape(format!("missing tensor `{name}`")))
    }

    pub fn tensor(&self, index: usize) -> &Tensor<T> {
        &self.params[index].value
    }

    pub fn param_count(&self, trainable_only: bool) -> usize {
        self.params
            .iter()
            .filter(|p| !trainable_only || !p.frozen)
            .map(|p| p.value.len())
            .sum()
    }

    /// Every value of every tensor whose name starts with `prefix`, as bits.
    pub fn snapshot_bits(&self, prefix: &str) -> Vec<(String, Vec<u64>)> {
        self.params
            .iter()
            .filter(|p| p.name.starts_with(prefix))
            .map(|p| {
                let bits = p.value.data().iter().map(|v| v.to_f64().unwrap_or(f64::NAN).to_bits()).collect();
                (p.name.clone(), bits)
            })
            .collect()
    }

    /// FNV-1a over names, frozen flags and value bits of tensors matching
    /// `prefix`.
    pub fn fingerprint(&self, prefix: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for p in self.params.iter().filter(|p| p.name.starts_with(prefix)) {
            feed(p.name.as_bytes());
            feed(&[p.frozen as u8]);
            for v in p.value.data() {
                feed(&v.to_f64().unwrap_or(f64::NAN).to_bits().to_le_bytes());
            }
        }
        h
    }

    pub fn cast<U: Scalar>(&self) -> ParameterSet<U> {
        ParameterSet {
            config: self.config.clone(),
            kind: self.kind,
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    frozen: p.frozen,
                })
                .collect(),
        }
    }
}
