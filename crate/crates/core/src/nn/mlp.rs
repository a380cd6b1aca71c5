//! Explicit forward and backward passes for the MLP learner.
//!
//! Hidden layers apply ReLU; the output layer is linear. `backward`
//! returns the gradient of the mean softmax cross-entropy over the batch,
//! laid out identically to the parameter vector.

use crate::error::{Error, Result};
use crate::nn::arch::MlpArchitecture;
use crate::nn::batch::{Matrix, MiniBatch};
use crate::nn::loss::{sample_cost, softmax_cross_entropy};
use crate::nn::params::{ParamLayout, ParamVector};

/// Reusable per-sample activation and delta buffers.
pub struct Scratch {
    /// Post-activation outputs per layer.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Scratch {
    pub fn new(arch: &MlpArchitecture) -> Self {
        let dims: Vec<usize> = arch.layer_dims().iter().map(|&(_, o)| o).collect();
        Self {
            acts: dims.iter().map(|&d| vec![0.0; d]).collect(),
            deltas: dims.iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    pub fn logits(&self) -> &[f64] {
        self.acts.last().expect("at least one layer")
    }
}

#[inline]
fn dot(weights_row: &[f64], x: &[f64]) -> f64 {
    // Four independent accumulators keep the FP dependency chain short and
    // let the loop vectorize. Plain multiply-add (no fused rounding) keeps
    // results identical across targets.
    let mut acc = [0.0f64; 4];
    let chunks = x.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += weights_row[i] * x[i];
        acc[1] += weights_row[i + 1] * x[i + 1];
        acc[2] += weights_row[i + 2] * x[i + 2];
        acc[3] += weights_row[i + 3] * x[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..x.len() {
        tail += weights_row[i] * x[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn check_batch(arch: &MlpArchitecture, params: &ParamVector, batch: &MiniBatch) -> Result<()> {
    if batch.input_dim() != arch.input_dim {
        return Err(Error::config(format!(
            "batch input width {} does not match architecture input {}",
            batch.input_dim(),
            arch.input_dim
        )));
    }
    if params.len() != arch.param_count() {
        return Err(Error::config(format!(
            "parameter vector length {} does not match architecture ({})",
            params.len(),
            arch.param_count()
        )));
    }
    Ok(())
}

/// Runs one input through the network, filling `scratch.acts`.
pub(crate) fn forward_sample(params: &ParamVector, x: &[f64], scratch: &mut Scratch) {
    let n_layers = scratch.acts.len();
    for layer in 0..n_layers {
        let seg = params.layout().segment(layer);
        let weights = params.weights(layer);
        let biases = params.biases(layer);
        let last = layer == n_layers - 1;
        // Split borrow: activations of the previous layer feed this one.
        let (prev_slice, out) = if layer == 0 {
            (x, &mut scratch.acts[0])
        } else {
            let (a, b) = scratch.acts.split_at_mut(layer);
            (&a[layer - 1][..], &mut b[0])
        };
        for o in 0..seg.rows {
            let z = biases[o] + dot(&weights[o * seg.cols..(o + 1) * seg.cols], prev_slice);
            out[o] = if last { z } else { z.max(0.0) };
        }
    }
}

/// Logits for every row of the batch.
pub fn forward(
    params: &ParamVector,
    arch: &MlpArchitecture,
    batch: &MiniBatch,
) -> Result<Matrix> {
    check_batch(arch, params, batch)?;
    let mut scratch = Scratch::new(arch);
    let mut logits = Matrix::zeros(batch.len(), arch.output_dim);
    for i in 0..batch.len() {
        forward_sample(params, batch.input(i), &mut scratch);
        logits.row_mut(i).copy_from_slice(scratch.logits());
    }
    Ok(logits)
}

/// Mean loss over the batch and its gradient with respect to the parameters.
pub fn backward(
    params: &ParamVector,
    arch: &MlpArchitecture,
    batch: &MiniBatch,
) -> Result<(f64, ParamVector)> {
    check_batch(arch, params, batch)?;
    if batch.is_empty() {
        return Err(Error::config("backward on an empty batch"));
    }
    let mut scratch = Scratch::new(arch);
    let mut grad = ParamVector::zeros(params.layout().clone());
    let n_layers = arch.n_layers();
    let inv_n = 1.0 / batch.len() as f64;
    let mut total = 0.0;

    for i in 0..batch.len() {
        let x = batch.input(i);
        forward_sample(params, x, &mut scratch);
        total += sample_cost(
            &scratch.acts[n_layers - 1],
            batch.label(i),
            &mut scratch.deltas[n_layers - 1],
        );

        for layer in (0..n_layers).rev() {
            let seg = params.layout().segment(layer);
            let prev: &[f64] = if layer == 0 { x } else { &scratch.acts[layer - 1] };
            // dW[o][c] += delta[o] * prev[c]; db[o] += delta[o]
            {
                let gw = grad.weights_mut(layer);
                for o in 0..seg.rows {
                    let d = scratch.deltas[layer][o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut gw[o * seg.cols..(o + 1) * seg.cols];
                    for (g, &p) in row.iter_mut().zip(prev) {
                        *g += d * p;
                    }
                }
            }
            {
                let gb = grad.biases_mut(layer);
                for (g, &d) in gb.iter_mut().zip(&scratch.deltas[layer]) {
                    *g += d;
                }
            }
            if layer > 0 {
                // delta_prev[c] = sum_o W[o][c] * delta[o], gated by ReLU.
                let weights = params.weights(layer);
                let (lower, upper) = scratch.deltas.split_at_mut(layer);
                let delta_prev = &mut lower[layer - 1];
                let delta = &upper[0];
                delta_prev.iter_mut().for_each(|d| *d = 0.0);
                for o in 0..seg.rows {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &weights[o * seg.cols..(o + 1) * seg.cols];
                    for (dp, &w) in delta_prev.iter_mut().zip(row) {
                        *dp += w * d;
                    }
                }
                for (dp, &a) in delta_prev.iter_mut().zip(&scratch.acts[layer - 1]) {
                    if a <= 0.0 {
                        *dp = 0.0;
                    }
                }
            }
        }
    }

    for g in grad.values_mut() {
        *g *= inv_n;
    }
    Ok((total * inv_n, grad))
}

/// Loss of the batch without computing gradients.
pub fn batch_loss(
    params: &ParamVector,
    arch: &MlpArchitecture,
    batch: &MiniBatch,
) -> Result<f64> {
    let logits = forward(params, arch, batch)?;
    let (loss, _) = softmax_cross_entropy(&logits, batch.labels())?;
    Ok(loss)
}

/// Identity layout helper used by gradient-check tooling.
pub fn layout_of(arch: &MlpArchitecture) -> ParamLayout {
    ParamLayout::from_arch(arch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::init_params;

    fn batch_from(rows: &[(Vec<f64>, usize)], dim: usize) -> MiniBatch {
        let mut b = MiniBatch::new(dim);
        for (x, y) in rows {
            b.push(x, *y, 1);
        }
        b
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let arch = MlpArchitecture::new(4, vec![3], 2).unwrap();
        let params = ParamVector::zeros(ParamLayout::from_arch(&arch));
        let batch = batch_from(&[(vec![0.2, 0.9, 0.1, 0.5], 0)], 4);
        let logits = forward(&params, &arch, &batch).unwrap();
        assert!(logits.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        // One affine layer, identity weights, zero bias: the output layer is
        // linear, so logits equal the inputs.
        let arch = MlpArchitecture::new(3, vec![], 3).unwrap();
        let mut params = ParamVector::zeros(ParamLayout::from_arch(&arch));
        for i in 0..3 {
            params.weights_mut(0)[i * 3 + i] = 1.0;
        }
        let x = vec![0.3, 0.7, 0.1];
        let batch = batch_from(&[(x.clone(), 0)], 3);
        let logits = forward(&params, &arch, &batch).unwrap();
        assert_eq!(logits.row(0), &x[..]);
    }

    #[test]
    fn forward_matches_hand_computed_chain() {
        // 4-2-3 net evaluated by hand for one input.
        let arch = MlpArchitecture::new(4, vec![2], 3).unwrap();
        let mut params = ParamVector::zeros(ParamLayout::from_arch(&arch));
        params
            .weights_mut(0)
            .copy_from_slice(&[0.5, -1.0, 0.25, 0.0, -0.5, 0.5, 1.0, -0.25]);
        params.biases_mut(0).copy_from_slice(&[0.1, -0.2]);
        params
            .weights_mut(1)
            .copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 0.5, -0.5]);
        params.biases_mut(1).copy_from_slice(&[0.0, 0.05, -0.1]);

        let x = [0.8, 0.2, 1.0, 0.4];
        // h1_pre = 0.5*0.8 - 1.0*0.2 + 0.25*1.0 + 0*0.4 + 0.1 = 0.55
        // h2_pre = -0.5*0.8 + 0.5*0.2 + 1.0*1.0 - 0.25*0.4 - 0.2 = 0.4
        // relu keeps both; logits:
        //   l0 = 1.0*0.55 + 0.0*0.4 + 0.0   = 0.55
        //   l1 = 0.0*0.55 + 1.0*0.4 + 0.05  = 0.45
        //   l2 = 0.5*0.55 - 0.5*0.4 - 0.1   = -0.025
        let batch = batch_from(&[(x.to_vec(), 0)], 4);
        let logits = forward(&params, &arch, &batch).unwrap();
        let expect = [0.55, 0.45, -0.025];
        for (got, want) in logits.row(0).iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_input_zeroes_first_layer_weight_grads() {
        let arch = MlpArchitecture::new(4, vec![3], 2).unwrap();
        let params = init_params(&arch, 3);
        let batch = batch_from(&[(vec![0.0; 4], 1)], 4);
        let (_, grad) = backward(&params, &arch, &batch).unwrap();
        assert!(grad.weights(0).iter().all(|&g| g == 0.0));
        // Bias gradients at the output layer stay generally nonzero.
        assert!(grad.biases(1).iter().any(|&g| g != 0.0));
    }

    #[test]
    fn duplicated_sample_matches_single_sample_grad() {
        let arch = MlpArchitecture::new(3, vec![4], 2).unwrap();
        let params = init_params(&arch, 11);
        let x = vec![0.4, 0.1, 0.8];
        let single = batch_from(&[(x.clone(), 1)], 3);
        let double = batch_from(&[(x.clone(), 1), (x, 1)], 3);
        let (l1, g1) = backward(&params, &arch, &single).unwrap();
        let (l2, g2) = backward(&params, &arch, &double).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.values().iter().zip(g2.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Central finite differences over every parameter.
    fn finite_difference_grad(
        params: &ParamVector,
        arch: &MlpArchitecture,
        batch: &MiniBatch,
        h: f64,
    ) -> Vec<f64> {
        let mut fd = Vec::with_capacity(params.len());
        let mut probe = params.clone();
        for k in 0..params.len() {
            let orig = probe.values()[k];
            probe.values_mut()[k] = orig + h;
            let lp = batch_loss(&probe, arch, batch).unwrap();
            probe.values_mut()[k] = orig - h;
            let lm = batch_loss(&probe, arch, batch).unwrap();
            probe.values_mut()[k] = orig;
            fd.push((lp - lm) / (2.0 * h));
        }
        fd
    }

    #[test]
    fn backward_matches_finite_differences() {
        let arch = MlpArchitecture::new(6, vec![4], 3).unwrap();
        let params = init_params(&arch, 99);
        let mut batch = MiniBatch::new(6);
        let inputs = [
            [0.9, 0.1, 0.4, 0.7, 0.2, 0.5],
            [0.3, 0.8, 0.6, 0.0, 1.0, 0.2],
            [0.5, 0.5, 0.1, 0.9, 0.3, 0.6],
        ];
        for (i, x) in inputs.iter().enumerate() {
            batch.push(x, i % 3, 1);
        }
        let (_, grad) = backward(&params, &arch, &batch).unwrap();
        let fd = finite_difference_grad(&params, &arch, &batch, 1e-5);
        let mut worst = 0.0f64;
        for (a, n) in grad.values().iter().zip(&fd) {
            let denom = a.abs().max(n.abs()).max(1e-8);
            worst = worst.max((a - n).abs() / denom);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
