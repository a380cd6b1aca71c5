//! Flat parameter vectors with a per-layer shape map.
//!
//! The same representation carries weights, gradients, and per-parameter
//! learning-rate vectors: anything indexed by parameter coordinate.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::nn::arch::MlpArchitecture;

/// Location of one affine layer inside a flat parameter vector.
///
/// Weights are row-major `(rows = out_dim, cols = in_dim)` and are followed
/// immediately by the `rows` bias entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSegment {
    pub rows: usize,
    pub cols: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerSegment {
    /// Coordinate range covered by this layer (weights and bias).
    pub fn range(&self) -> std::ops::Range<usize> {
        self.weight_offset..self.bias_offset + self.rows
    }
}

/// Shape map shared by every vector with parameter layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    segments: Vec<LayerSegment>,
    len: usize,
}

impl ParamLayout {
    pub fn from_arch(arch: &MlpArchitecture) -> Self {
        let mut segments = Vec::with_capacity(arch.n_layers());
        let mut offset = 0;
        for (in_dim, out_dim) in arch.layer_dims() {
            segments.push(LayerSegment {
                rows: out_dim,
                cols: in_dim,
                weight_offset: offset,
                bias_offset: offset + in_dim * out_dim,
            });
            offset += in_dim * out_dim + out_dim;
        }
        Self {
            segments,
            len: offset,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_layers(&self) -> usize {
        self.segments.len()
    }

    pub fn segment(&self, layer: usize) -> LayerSegment {
        self.segments[layer]
    }

    pub fn segments(&self) -> &[LayerSegment] {
        &self.segments
    }
}

/// Flat view of learner parameters (or any parameter-shaped quantity).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: ParamLayout,
}

impl ParamVector {
    pub fn zeros(layout: ParamLayout) -> Self {
        Self {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn from_values(values: Vec<f64>, layout: ParamLayout) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::config(format!(
                "parameter vector length {} does not match layout length {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let s = self.layout.segment(layer);
        &self.values[s.weight_offset..s.weight_offset + s.rows * s.cols]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let s = self.layout.segment(layer);
        &mut self.values[s.weight_offset..s.weight_offset + s.rows * s.cols]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        let s = self.layout.segment(layer);
        &self.values[s.bias_offset..s.bias_offset + s.rows]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        let s = self.layout.segment(layer);
        &mut self.values[s.bias_offset..s.bias_offset + s.rows]
    }

    /// Errors if any entry is NaN or infinite.
    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }
}

/// Seeded weight initialization: uniform over `[-b, b]` with
/// `b = sqrt(6 / (fan_in + fan_out))`, biases zero.
pub fn init_params(arch: &MlpArchitecture, seed: u64) -> ParamVector {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    init_params_with(arch, &mut rng)
}

/// Same as [`init_params`] but drawing from a caller-owned generator.
pub fn init_params_with<R: Rng>(arch: &MlpArchitecture, rng: &mut R) -> ParamVector {
    let layout = ParamLayout::from_arch(arch);
    let mut params = ParamVector::zeros(layout);
    for layer in 0..params.layout().n_layers() {
        let s = params.layout().segment(layer);
        let bound = (6.0 / (s.cols + s.rows) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        for w in params.weights_mut(layer) {
            *w = dist.sample(rng);
        }
    }
    params
}
