//! MLP architecture description.

use crate::error::{Error, Result};

/// Fully-connected network shape: `input -> hidden... -> output`.
///
/// Hidden layers use ReLU; the output layer is linear and feeds the
/// softmax cross-entropy loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::config("all layer dimensions must be > 0"));
        }
        Ok(Self {
            input_dim,
            hidden_dims,
            output_dim,
        })
    }

    /// `(in_dim, out_dim)` for each affine layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    pub fn n_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }

    /// Total number of weights and biases.
    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(i, o)| i * o + o)
            .sum()
    }
}

impl Default for MlpArchitecture {
    /// The 784-100-100-10 learner used throughout the benchmark protocol.
    fn default() -> Self {
        Self {
            input_dim: 784,
            hidden_dims: vec![100, 100],
            output_dim: 10,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_param_count() {
        // 784*100 + 100 + 100*100 + 100 + 100*10 + 10
        assert_eq!(MlpArchitecture::default().param_count(), 89_610);
    }

    #[test]
    fn layer_dims_chain() {
        let arch = MlpArchitecture::new(4, vec![2], 3).unwrap();
        assert_eq!(arch.layer_dims(), vec![(4, 2), (2, 3)]);
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(MlpArchitecture::new(0, vec![2], 3).is_err());
        assert!(MlpArchitecture::new(4, vec![0], 3).is_err());
    }
}
