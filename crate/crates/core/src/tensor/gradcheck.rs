//! Central finite-difference gradient checking in `f64`.
//!
//! [`grad_check`] compares an analytic gradient against
//! `(f(x+ε) − f(x−ε)) / 2ε` per coordinate. [`check_layer`] wires up a
//! randomized probe for every layer kernel: the probe loss is a fixed random
//! projection `Σ r·layer(x)` (or the loss value itself for loss kernels), and
//! all differentiable inputs are flattened into one vector.

use super::{
    bce_loss, conv2d_bwd, conv2d_fwd, fc_bwd, fc_fwd, maxpool2_bwd, maxpool2_fwd, mse_loss, relu_bwd, relu_fwd,
    sigmoid_bwd, sigmoid_fwd, upsample2_bwd, upsample2_fwd, Tensor,
};
use crate::error::Result;
use crate::rng::Rng;

pub const DEFAULT_EPS: f64 = 1e-5;

/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

pub fn numeric_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64, eps: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let up = f(&probe);
            probe[i] = orig - eps;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

pub fn grad_check(x: &[f64], analytic: &[f64], f: impl FnMut(&[f64]) -> f64, eps: f64) -> GradCheck {
    assert_eq!(x.len(), analytic.len(), "gradient length must match parameter length");
    let numeric = numeric_gradient(x, f, eps);
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: x.len(),
    };
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = relative_error(a, n);
        if e > report.max_rel_error || e.is_nan() {
            report.max_rel_error = e;
            report.worst_index = i;
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerProbe {
    Conv,
    MaxPool,
    Upsample,
    Relu,
    Sigmoid,
    Fc,
    Bce,
    Mse,
}

impl LayerProbe {
    pub const ALL: [LayerProbe; 8] = [
        LayerProbe::Conv,
        LayerProbe::MaxPool,
        LayerProbe::Upsample,
        LayerProbe::Relu,
        LayerProbe::Sigmoid,
        LayerProbe::Fc,
        LayerProbe::Bce,
        LayerProbe::Mse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerProbe::Conv => "conv2d",
            LayerProbe::MaxPool => "maxpool2",
            LayerProbe::Upsample => "upsample2",
            LayerProbe::Relu => "relu",
            LayerProbe::Sigmoid => "sigmoid",
            LayerProbe::Fc => "fc",
            LayerProbe::Bce => "bce",
            LayerProbe::Mse => "mse",
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rand_tensor(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.uniform(lo, hi))
}

/// Values spaced at least 0.05 apart, so no ±ε perturbation flips a max.
fn distinct_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    Tensor::from_fn(shape.to_vec(), |i| order[i] as f64 * 0.1 + rng.uniform(-0.02, 0.02) - n as f64 * 0.05)
}

/// Values bounded away from zero, so ReLU's kink is never crossed.
fn off_zero_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| {
        let m = rng.uniform(0.1, 1.0);
        if rng.coin() {
            m
        } else {
            -m
        }
    })
}

fn split<'a>(flat: &'a [f64], lens: &[usize]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(lens.len());
    let mut at = 0;
    for &l in lens {
        out.push(&flat[at..at + l]);
        at += l;
    }
    out
}

fn with_data(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::new(shape.to_vec(), data.to_vec()).expect("probe shapes are consistent")
}

/// Randomized gradient check of one kernel. Shapes and values derive from
/// `seed`. With `zero_input`, the conv probe uses an all-zero input.
pub fn check_layer(probe: LayerProbe, seed: u64, eps: f64, zero_input: bool) -> Result<GradCheck> {
    let mut rng = Rng::new(seed);
    let n = 1 + rng.below(2);
    let c = 1 + rng.below(3);
    let h = 2 * (1 + rng.below(3));
    let w = 2 * (1 + rng.below(3));
    let xs = [n, c, h, w];
    Ok(match probe {
        LayerProbe::Conv => {
            let co = 1 + rng.below(3);
            let x = if zero_input { Tensor::zeros(xs) } else { rand_tensor(&mut rng, &xs, -1.0, 1.0) };
            let wt = rand_tensor(&mut rng, &[co, c, 3, 3], -1.0, 1.0);
            let b = rand_tensor(&mut rng, &[co], -1.0, 1.0);
            let r = rand_tensor(&mut rng, &[n, co, h, w], -1.0, 1.0);
            let g = conv2d_bwd(&r, &x, &wt, true)?;
            let lens = [x.len(), wt.len(), b.len()];
            let flat: Vec<f64> = [x.data(), wt.data(), b.data()].concat();
            let analytic = [g.input.expect("requested").data(), g.weight.data(), g.bias.data()].concat();
            grad_check(
                &flat,
                &analytic,
                |p| {
                    let parts = split(p, &lens);
                    let y = conv2d_fwd(&with_data(&xs, parts[0]), &with_data(wt.shape(), parts[1]), &with_data(&[co], parts[2]))
                        .expect("shapes fixed");
                    dot(y.data(), r.data())
                },
                eps,
            )
        }
        LayerProbe::MaxPool => {
            let x = distinct_tensor(&mut rng, &xs);
            let pooled = maxpool2_fwd(&x)?;
            let r = rand_tensor(&mut rng, pooled.output.shape(), -1.0, 1.0);
            let g = maxpool2_bwd(&r, &pooled.argmax)?;
            grad_check(
                x.data(),
                g.data(),
                |p| dot(maxpool2_fwd(&with_data(&xs, p)).expect("even").output.data(), r.data()),
                eps,
            )
        }
        LayerProbe::Upsample => {
            let x = rand_tensor(&mut rng, &xs, -1.0, 1.0);
            let r = rand_tensor(&mut rng, &[n, c, 2 * h, 2 * w], -1.0, 1.0);
            let g = upsample2_bwd(&r)?;
            grad_check(
                x.data(),
                g.data(),
                |p| dot(upsample2_fwd(&with_data(&xs, p)).expect("rank 4").data(), r.data()),
                eps,
            )
        }
        LayerProbe::Relu => {
            let x = off_zero_tensor(&mut rng, &xs);
            let r = rand_tensor(&mut rng, &xs, -1.0, 1.0);
            let g = relu_bwd(&r, &x)?;
            grad_check(x.data(), g.data(), |p| dot(relu_fwd(&with_data(&xs, p)).data(), r.data()), eps)
        }
        LayerProbe::Sigmoid => {
            let x = rand_tensor(&mut rng, &xs, -4.0, 4.0);
            let r = rand_tensor(&mut rng, &xs, -1.0, 1.0);
            let g = sigmoid_bwd(&r, &sigmoid_fwd(&x))?;
            grad_check(x.data(), g.data(), |p| dot(sigmoid_fwd(&with_data(&xs, p)).data(), r.data()), eps)
        }
        LayerProbe::Fc => {
            let f = 1 + rng.below(12);
            let o = 1 + rng.below(6);
            let x = rand_tensor(&mut rng, &[n, f], -1.0, 1.0);
            let wt = rand_tensor(&mut rng, &[o, f], -1.0, 1.0);
            let b = rand_tensor(&mut rng, &[o], -1.0, 1.0);
            let r = rand_tensor(&mut rng, &[n, o], -1.0, 1.0);
            let g = fc_bwd(&r, &x, &wt, true)?;
            let lens = [x.len(), wt.len(), b.len()];
            let flat: Vec<f64> = [x.data(), wt.data(), b.data()].concat();
            let analytic = [g.input.expect("requested").data(), g.weight.data(), g.bias.data()].concat();
            grad_check(
                &flat,
                &analytic,
                |p| {
                    let parts = split(p, &lens);
                    let y = fc_fwd(&with_data(&[n, f], parts[0]), &with_data(&[o, f], parts[1]), &with_data(&[o], parts[2]))
                        .expect("shapes fixed");
                    dot(y.data(), r.data())
                },
                eps,
            )
        }
        LayerProbe::Bce | LayerProbe::Mse => {
            let pred = rand_tensor(&mut rng, &xs, 0.05, 0.95);
            let target = Tensor::from_fn(xs.to_vec(), |_| if rng.coin() { 1.0 } else { 0.0 });
            let loss = |p: &Tensor<f64>| -> (f64, Tensor<f64>) {
                if probe == LayerProbe::Bce {
                    bce_loss(p, &target).expect("same shape")
                } else {
                    mse_loss(p, &target).expect("same shape")
                }
            };
            let (_, g) = loss(&pred);
            grad_check(pred.data(), g.data(), |p| loss(&with_data(&xs, p)).0, eps)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_layer_passes() {
        for probe in LayerProbe::ALL {
            for seed in 0..5 {
                let r = check_layer(probe, seed, DEFAULT_EPS, false).unwrap();
                assert!(r.passes(1e-4), "{} seed {seed}: {r:?}", probe.name());
            }
        }
    }

    #[test]
    fn zero_input_conv_passes() {
        let r = check_layer(LayerProbe::Conv, 3, DEFAULT_EPS, true).unwrap();
        assert!(r.passes(1e-4), "{r:?}");
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        let x = [0.3, -1.2, 2.0];
        let f = |p: &[f64]| p.iter().map(|v| v * v * v).sum::<f64>();
        let mut analytic: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        assert!(grad_check(&x, &analytic, f, DEFAULT_EPS).passes(1e-4));
        analytic[1] *= 1.1;
        let r = grad_check(&x, &analytic, f, DEFAULT_EPS);
        assert!(r.max_rel_error >= 1e-2);
        assert_eq!(r.worst_index, 1);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(1.0, 3.0) - 0.5).abs() < 1e-15);
    }
}
