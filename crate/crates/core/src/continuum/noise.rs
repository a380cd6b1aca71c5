//! Noise injection: shuffling a fraction of pixel positions within an image.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Where and how strongly to inject noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Fraction of positions shuffled per image, in `[0, 1]`.
    pub fraction: f64,
    pub apply_to_train: bool,
    pub apply_to_memory: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            fraction: 0.0,
            apply_to_train: true,
            apply_to_memory: true,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::config(format!(
                "noise fraction {} outside [0, 1]",
                self.fraction
            )));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.fraction > 0.0
    }
}

/// Shuffles `floor(fraction * len)` distinct positions among themselves,
/// leaving every other pixel untouched. The multiset of pixel values is
/// preserved exactly.
pub fn apply_noise<R: Rng>(image: &[f64], fraction: f64, rng: &mut R) -> Vec<f64> {
    let mut out = image.to_vec();
    apply_noise_in_place(&mut out, fraction, rng);
    out
}

pub(crate) fn apply_noise_in_place<R: Rng>(image: &mut [f64], fraction: f64, rng: &mut R) {
    let k = (fraction * image.len() as f64).floor() as usize;
    if k < 2 {
        return;
    }
    let positions = rand::seq::index::sample(rng, image.len(), k).into_vec();
    let mut values: Vec<f64> = positions.iter().map(|&p| image[p]).collect();
    values.shuffle(rng);
    for (&p, &v) in positions.iter().zip(&values) {
        image[p] = v;
    }
}
