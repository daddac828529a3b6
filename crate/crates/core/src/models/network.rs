//! Fixed-topology executor: turns a [`ParameterSet`] into an op list and runs
//! forward (optionally saving what backward needs) and backward passes over
//! any contiguous range of it.

use std::ops::Range;

use super::params::{ModelKind, ParameterSet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{
    conv2d_bwd, conv2d_fwd, fc_bwd, fc_fwd, maxpool2_bwd, maxpool2_fwd, relu_bwd, relu_fwd, sigmoid_bwd,
    sigmoid_fwd, upsample2_bwd, upsample2_fwd, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    /// Index of the weight tensor; the bias follows it.
    Conv(usize),
    Relu,
    Pool,
    Up,
    Sigmoid,
    Flatten,
    Fc(usize),
}

pub(crate) enum Saved<T> {
    Input(Tensor<T>),
    Output(Tensor<T>),
    Argmax(Vec<u8>),
    InShape(Vec<usize>),
    Nothing,
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub ops: Vec<Op>,
    /// Ops `[0, encoder_len)` form the encoder.
    pub encoder_len: usize,
    /// Op index after which each encoder level's output is available.
    pub encoder_taps: Vec<usize>,
    /// Op index after which each decoder hidden layer's output is available,
    /// latent side first.
    pub decoder_taps: Vec<usize>,
}

impl Plan {
    pub fn for_params<T: Scalar>(params: &ParameterSet<T>) -> Result<Plan> {
        let levels = params.config().base_channels.len();
        let mut ops = Vec::new();
        let mut encoder_taps = Vec::new();
        for i in 1..=levels {
            ops.push(Op::Conv(params.index_of(&format!("enc.conv{i}.w"))?));
            ops.push(Op::Relu);
            ops.push(Op::Pool);
            encoder_taps.push(ops.len() - 1);
        }
        let encoder_len = ops.len();
        let mut decoder_taps = Vec::new();
        match params.kind() {
            ModelKind::Autoencoder => {
                for i in 1..=levels {
                    ops.push(Op::Conv(params.index_of(&format!("dec.conv{i}.w"))?));
                    ops.push(Op::Relu);
                    decoder_taps.push(ops.len() - 1);
                    ops.push(Op::Up);
                }
                ops.push(Op::Conv(params.index_of(&format!("dec.conv{}.w", levels + 1))?));
                ops.push(Op::Sigmoid);
            }
            ModelKind::Classifier => {
                ops.push(Op::Flatten);
                ops.push(Op::Fc(params.index_of("clf.fc1.w")?));
                ops.push(Op::Relu);
                ops.push(Op::Fc(params.index_of("clf.fc2.w")?));
                ops.push(Op::Sigmoid);
            }
        }
        Ok(Plan {
            ops,
            encoder_len,
            encoder_taps,
            decoder_taps,
        })
    }

    pub fn all(&self) -> Range<usize> {
        0..self.ops.len()
    }

    pub fn encoder(&self) -> Range<usize> {
        0..self.encoder_len
    }

    pub fn head(&self) -> Range<usize> {
        self.encoder_len..self.ops.len()
    }

    fn forward_op<T: Scalar>(&self, op: Op, params: &ParameterSet<T>, x: Tensor<T>, keep: bool) -> Result<(Tensor<T>, Saved<T>)> {
        Ok(match op {
            Op::Conv(i) => {
                let y = conv2d_fwd(&x, params.tensor(i), params.tensor(i + 1))?;
                (y, if keep { Saved::Input(x) } else { Saved::Nothing })
            }
            Op::Fc(i) => {
                let y = fc_fwd(&x, params.tensor(i), params.tensor(i + 1))?;
                (y, if keep { Saved::Input(x) } else { Saved::Nothing })
            }
            Op::Relu => {
                let y = relu_fwd(&x);
                let s = if keep { Saved::Output(y.clone()) } else { Saved::Nothing };
                (y, s)
            }
            Op::Sigmoid => {
                let y = sigmoid_fwd(&x);
                let s = if keep { Saved::Output(y.clone()) } else { Saved::Nothing };
                (y, s)
            }
            Op::Pool => {
                let p = maxpool2_fwd(&x)?;
                (p.output, if keep { Saved::Argmax(p.argmax) } else { Saved::Nothing })
            }
            Op::Up => (upsample2_fwd(&x)?, Saved::Nothing),
            Op::Flatten => {
                let shape = x.shape().to_vec();
                let n = shape[0];
                let rest = x.len() / n.max(1);
                (x.reshape([n, rest])?, Saved::InShape(shape))
            }
        })
    }

    /// Runs `range`; with `keep`, returns what [`Plan::backward`] needs.
    pub fn forward<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        mut x: Tensor<T>,
        range: Range<usize>,
        keep: bool,
    ) -> Result<(Tensor<T>, Vec<Saved<T>>)> {
        let mut saved = Vec::with_capacity(if keep { range.len() } else { 0 });
        for &op in &self.ops[range] {
            let (y, s) = self.forward_op(op, params, x, keep)?;
            if keep {
                saved.push(s);
            }
            x = y;
        }
        Ok((x, saved))
    }

    /// Output after every op in `range`.
    pub fn forward_taps<T: Scalar>(&self, params: &ParameterSet<T>, mut x: Tensor<T>, range: Range<usize>) -> Result<Vec<Tensor<T>>> {
        let mut taps = Vec::with_capacity(range.len());
        for &op in &self.ops[range] {
            x = self.forward_op(op, params, x, false)?.0;
            taps.push(x.clone());
        }
        Ok(taps)
    }

    /// Backpropagates `grad` through `range` (which must match the forward
    /// call that produced `saved`). Returns `(weight index, gradient)` pairs
    /// for every weight and bias tensor in the range.
    pub fn backward<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        saved: Vec<Saved<T>>,
        mut grad: Tensor<T>,
        range: Range<usize>,
    ) -> Result<Vec<(usize, Tensor<T>)>> {
        if saved.len() != range.len() {
            return Err(Error::Shape("backward range does not match saved forward context".into()));
        }
        let mut out = Vec::new();
        for (pos, (op, s)) in self.ops[range].iter().zip(saved).enumerate().rev() {
            let need_input = pos > 0;
            grad = match (*op, s) {
                (Op::Conv(i), Saved::Input(x)) => {
                    let g = conv2d_bwd(&grad, &x, params.tensor(i), need_input)?;
                    out.push((i, g.weight));
                    out.push((i + 1, g.bias));
                    match g.input {
                        Some(gi) => gi,
                        None => break,
                    }
                }
                (Op::Fc(i), Saved::Input(x)) => {
                    let g = fc_bwd(&grad, &x, params.tensor(i), need_input)?;
                    out.push((i, g.weight));
                    out.push((i + 1, g.bias));
                    match g.input {
                        Some(gi) => gi,
                        None => break,
                    }
                }
                (Op::Relu, Saved::Output(y)) => relu_bwd(&grad, &y)?,
                (Op::Sigmoid, Saved::Output(y)) => sigmoid_bwd(&grad, &y)?,
                (Op::Pool, Saved::Argmax(a)) => maxpool2_bwd(&grad, &a)?,
                (Op::Up, Saved::Nothing) => upsample2_bwd(&grad)?,
                (Op::Flatten, Saved::InShape(shape)) => grad.reshape(shape)?,
                _ => return Err(Error::Shape("saved context does not match op".into())),
            };
        }
        Ok(out)
    }
}
