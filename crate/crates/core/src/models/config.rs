use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Bce,
    Mse,
}

impl LossKind {
    pub fn code(self) -> u8 {
        match self {
            LossKind::Bce => 0,
            LossKind::Mse => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(LossKind::Bce),
            1 => Some(LossKind::Mse),
            _ => None,
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bce" => Ok(LossKind::Bce),
            "mse" => Ok(LossKind::Mse),
            other => Err(Error::Config(format!("unknown loss `{other}` (expected bce or mse)"))),
        }
    }
}

/// Architecture description. Every tensor shape in a model is derived from
/// this; `width_mult` scales every conv layer and the hidden FC layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Side of the square network input, in pixels.
    pub input_size: usize,
    /// Encoder channel widths before scaling, one per pooling level.
    pub base_channels: Vec<usize>,
    pub width_mult: f64,
    pub fc_hidden: usize,
    pub loss: LossKind,
    /// Seed for weight initialization.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_size: 64,
            base_channels: vec![32, 64, 128],
            width_mult: 1.0,
            fc_hidden: 200,
            loss: LossKind::Bce,
            seed: 0,
        }
    }
}

fn scaled(base: usize, mult: f64) -> usize {
    ((base as f64 * mult + 0.5).floor() as usize).max(1)
}

impl ModelConfig {
    pub fn with_width(mut self, width_mult: f64) -> Self {
        self.width_mult = width_mult;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_channels.is_empty() {
            return Err(Error::Config("at least one encoder level is required".into()));
        }
        if self.base_channels.contains(&0) {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        if !(self.width_mult > 0.0 && self.width_mult <= 1.0) {
            return Err(Error::Config(format!("width_mult {} outside (0, 1]", self.width_mult)));
        }
        if self.fc_hidden == 0 {
            return Err(Error::Config("fc_hidden must be positive".into()));
        }
        let factor = 1usize << self.base_channels.len();
        if self.input_size == 0 || !self.input_size.is_multiple_of(factor) {
            return Err(Error::Config(format!(
                "input_size {} must be a positive multiple of {factor}",
                self.input_size
            )));
        }
        if self.input_size > u16::MAX as usize || self.base_channels.iter().any(|&c| c > u16::MAX as usize) {
            return Err(Error::Config("sizes must fit in 16 bits".into()));
        }
        Ok(())
    }

    /// `max(1, round(base × width_mult))` per level, rounding halves up.
    pub fn channels(&self) -> Vec<usize> {
        self.base_channels.iter().map(|&c| scaled(c, self.width_mult)).collect()
    }

    pub fn hidden_units(&self) -> usize {
        scaled(self.fc_hidden, self.width_mult)
    }

    /// Side of the latent feature map.
    pub fn latent_size(&self) -> usize {
        self.input_size >> self.base_channels.len()
    }

    /// `(channels, side, side)` of the latent code.
    pub fn latent_shape(&self) -> [usize; 3] {
        let c = *self.channels().last().expect("validated config has levels");
        [c, self.latent_size(), self.latent_size()]
    }

    /// Same layer widths, i.e. weights of one fit the other's encoder.
    pub fn encoder_compatible(&self, other: &ModelConfig) -> bool {
        self.input_size == other.input_size && self.channels() == other.channels()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_width_rounds_up() {
        let c = ModelConfig::default().with_width(0.5);
        assert_eq!(c.channels(), [16, 32, 64]);
        assert_eq!(c.hidden_units(), 100);
        let odd = ModelConfig {
            base_channels: vec![3, 5],
            fc_hidden: 7,
            ..ModelConfig::default()
        }
        .with_width(0.5);
        assert_eq!(odd.channels(), [2, 3]);
        assert_eq!(odd.hidden_units(), 4);
        assert_eq!(ModelConfig::default().with_width(0.001).channels(), [1, 1, 1]);
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig { input_size: 60, ..Default::default() }.validate().is_err());
        assert!(ModelConfig::default().with_width(0.0).validate().is_err());
        assert!(ModelConfig::default().with_width(1.5).validate().is_err());
        assert!(ModelConfig { base_channels: vec![], ..Default::default() }.validate().is_err());
        assert!(ModelConfig { input_size: 8, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn latent_geometry() {
        assert_eq!(ModelConfig::default().latent_shape(), [128, 8, 8]);
        assert_eq!(ModelConfig::default().with_width(0.5).latent_shape(), [64, 8, 8]);
    }
}
