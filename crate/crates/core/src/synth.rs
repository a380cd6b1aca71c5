//! Procedural digit dataset in the IDX format.
//!
//! Renders the ten digit glyphs from a small stroke font with random
//! affine distortion, stroke jitter, thickness, and pixel noise, then
//! writes the standard four-file IDX set. The result is a deterministic,
//! dependency-free stand-in with MNIST's shape (28x28 grayscale, classes
//! 0-9), difficult enough that a small MLP neither saturates instantly nor
//! fails to learn. Point real MNIST files at the engine instead whenever
//! they are available; nothing downstream distinguishes the two.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::runner::seeding::seed_rng;

pub const SIDE: usize = 28;

/// Polyline strokes per digit, in unit coordinates (x right, y down).
fn glyph_strokes(digit: usize) -> Vec<Vec<(f64, f64)>> {
    let ellipse = |cx: f64, cy: f64, rx: f64, ry: f64, n: usize| -> Vec<(f64, f64)> {
        (0..=n)
            .map(|i| {
                let a = i as f64 / n as f64 * std::f64::consts::TAU;
                (cx + rx * a.cos(), cy + ry * a.sin())
            })
            .collect()
    };
    match digit {
        0 => vec![ellipse(0.5, 0.5, 0.26, 0.38, 14)],
        1 => vec![
            vec![(0.34, 0.28), (0.52, 0.10)],
            vec![(0.52, 0.10), (0.52, 0.92)],
        ],
        2 => vec![
            vec![
                (0.26, 0.30),
                (0.30, 0.16),
                (0.50, 0.10),
                (0.70, 0.16),
                (0.74, 0.32),
                (0.62, 0.52),
                (0.38, 0.70),
                (0.26, 0.90),
            ],
            vec![(0.26, 0.90), (0.76, 0.90)],
        ],
        3 => vec![
            vec![
                (0.28, 0.18),
                (0.46, 0.10),
                (0.66, 0.16),
                (0.71, 0.31),
                (0.58, 0.45),
                (0.44, 0.49),
            ],
            vec![
                (0.44, 0.49),
                (0.64, 0.54),
                (0.73, 0.70),
                (0.64, 0.87),
                (0.42, 0.93),
                (0.27, 0.84),
            ],
        ],
        4 => vec![
            vec![(0.58, 0.08), (0.24, 0.60)],
            vec![(0.24, 0.60), (0.80, 0.60)],
            vec![(0.62, 0.34), (0.62, 0.93)],
        ],
        5 => vec![
            vec![(0.72, 0.10), (0.32, 0.10)],
            vec![(0.32, 0.10), (0.29, 0.46)],
            vec![
                (0.29, 0.46),
                (0.52, 0.41),
                (0.70, 0.50),
                (0.73, 0.68),
                (0.60, 0.88),
                (0.34, 0.89),
                (0.26, 0.78),
            ],
        ],
        6 => vec![vec![
            (0.66, 0.10),
            (0.44, 0.20),
            (0.31, 0.42),
            (0.28, 0.66),
            (0.38, 0.87),
            (0.60, 0.90),
            (0.72, 0.74),
            (0.64, 0.55),
            (0.42, 0.52),
            (0.30, 0.62),
        ]],
        7 => vec![
            vec![(0.24, 0.12), (0.78, 0.12)],
            vec![(0.78, 0.12), (0.44, 0.92)],
        ],
        8 => vec![
            ellipse(0.50, 0.29, 0.19, 0.19, 12),
            ellipse(0.50, 0.68, 0.23, 0.23, 12),
        ],
        9 => vec![
            ellipse(0.48, 0.32, 0.20, 0.22, 12),
            vec![(0.68, 0.36), (0.64, 0.92)],
        ],
        _ => unreachable!("digits are 0-9"),
    }
}

struct Distortion {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    tx: f64,
    ty: f64,
    jitter: f64,
    thickness: f64,
    brightness: f64,
    pixel_noise: f64,
}

fn sample_distortion<R: Rng>(rng: &mut R) -> Distortion {
    let angle: f64 = rng.gen_range(-0.22..0.22);
    let sx: f64 = rng.gen_range(0.72..1.08);
    let sy: f64 = rng.gen_range(0.72..1.08);
    let shear: f64 = rng.gen_range(-0.20..0.20);
    let (sin, cos) = angle.sin_cos();
    Distortion {
        // rotation * shear * scale
        a: cos * sx + -sin * shear * sx,
        b: -sin * sy,
        c: sin * sx + cos * shear * sx,
        d: cos * sy,
        tx: rng.gen_range(-0.07..0.07),
        ty: rng.gen_range(-0.07..0.07),
        jitter: 0.022,
        thickness: rng.gen_range(0.035..0.075),
        brightness: rng.gen_range(0.72..1.0),
        pixel_noise: 0.04,
    }
}

fn point_segment_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let vx = bx - ax;
    let vy = by - ay;
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        (((px - ax) * vx + (py - ay) * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = px - (ax + t * vx);
    let dy = py - (ay + t * vy);
    (dx * dx + dy * dy).sqrt()
}

/// Renders one digit into `SIDE * SIDE` bytes.
pub fn render_digit<R: Rng>(digit: usize, rng: &mut R) -> Vec<u8> {
    let distortion = sample_distortion(rng);
    let mut segments: Vec<(f64, f64, f64, f64)> = Vec::new();
    for stroke in glyph_strokes(digit) {
        let warped: Vec<(f64, f64)> = stroke
            .iter()
            .map(|&(x, y)| {
                // Center, distort, and jitter each control point.
                let cx = x - 0.5;
                let cy = y - 0.5;
                let wx = distortion.a * cx + distortion.b * cy + 0.5 + distortion.tx
                    + rng.gen_range(-distortion.jitter..distortion.jitter);
                let wy = distortion.c * cx + distortion.d * cy + 0.5 + distortion.ty
                    + rng.gen_range(-distortion.jitter..distortion.jitter);
                (wx, wy)
            })
            .collect();
        for pair in warped.windows(2) {
            segments.push((pair[0].0, pair[0].1, pair[1].0, pair[1].1));
        }
    }

    let scale = (SIDE - 4) as f64;
    let aa = 0.65 / scale;
    let mut pixels = Vec::with_capacity(SIDE * SIDE);
    for row in 0..SIDE {
        for col in 0..SIDE {
            let px = (col as f64 - 2.0 + 0.5) / scale;
            let py = (row as f64 - 2.0 + 0.5) / scale;
            let mut dist = f64::INFINITY;
            for &(ax, ay, bx, by) in &segments {
                dist = dist.min(point_segment_distance(px, py, ax, ay, bx, by));
                if dist == 0.0 {
                    break;
                }
            }
            let ink = ((distortion.thickness + aa - dist) / (2.0 * aa)).clamp(0.0, 1.0);
            let noise = rng.gen_range(-distortion.pixel_noise..distortion.pixel_noise);
            let value = (ink * distortion.brightness + noise).clamp(0.0, 1.0);
            pixels.push((value * 255.0).round() as u8);
        }
    }
    pixels
}

/// A labelled image set rendered from one seeded stream.
pub fn render_set(count: usize, rng: &mut ChaCha12Rng) -> (Vec<Vec<u8>>, Vec<u8>) {
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let digit = rng.gen_range(0..10usize);
        images.push(render_digit(digit, rng));
        labels.push(digit as u8);
    }
    (images, labels)
}

/// Renders straight into the loader's sample representation, skipping the
/// IDX round trip.
pub fn render_source(count: usize, rng: &mut ChaCha12Rng) -> crate::continuum::SourceData {
    let (images, labels) = render_set(count, rng);
    let inputs: Vec<Vec<f64>> = images
        .iter()
        .map(|img| img.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    let mut source =
        crate::continuum::SourceData::new(inputs, labels.iter().map(|&l| l as usize).collect())
            .expect("rendered set is well formed");
    source.n_classes = 10;
    source
}

fn idx_images(images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * SIDE * SIDE);
    out.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(SIDE as u32).to_be_bytes());
    out.extend_from_slice(&(SIDE as u32).to_be_bytes());
    for image in images {
        out.extend_from_slice(image);
    }
    out
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Writes the standard four-file IDX set under `dir`.
pub fn write_idx_dataset(dir: &Path, train: usize, test: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut train_rng = seed_rng(seed, "synth/train");
    let (train_images, train_labels) = render_set(train, &mut train_rng);
    let mut test_rng = seed_rng(seed, "synth/test");
    let (test_images, test_labels) = render_set(test, &mut test_rng);
    std::fs::write(
        dir.join(crate::runner::config::IDX_TRAIN_IMAGES),
        idx_images(&train_images),
    )?;
    std::fs::write(
        dir.join(crate::runner::config::IDX_TRAIN_LABELS),
        idx_labels(&train_labels),
    )?;
    std::fs::write(
        dir.join(crate::runner::config::IDX_TEST_IMAGES),
        idx_images(&test_images),
    )?;
    std::fs::write(
        dir.join(crate::runner::config::IDX_TEST_LABELS),
        idx_labels(&test_labels),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::{parse_idx_images, parse_idx_labels};

    #[test]
    fn rendering_is_deterministic_per_stream() {
        let mut a = seed_rng(1, "synth/train");
        let mut b = seed_rng(1, "synth/train");
        let (ia, la) = render_set(20, &mut a);
        let (ib, lb) = render_set(20, &mut b);
        assert_eq!(ia, ib);
        assert_eq!(la, lb);
    }

    #[test]
    fn digits_have_ink_and_background() {
        let mut rng = seed_rng(2, "synth/train");
        for digit in 0..10 {
            let image = render_digit(digit, &mut rng);
            let bright = image.iter().filter(|&&p| p > 128).count();
            assert!(bright > 10, "digit {digit} has almost no ink ({bright} px)");
            assert!(
                bright < SIDE * SIDE / 2,
                "digit {digit} floods the canvas ({bright} px)"
            );
        }
    }

    #[test]
    fn idx_payloads_parse_back() {
        let mut rng = seed_rng(3, "synth/train");
        let (images, labels) = render_set(5, &mut rng);
        let parsed = parse_idx_images(&idx_images(&images)).unwrap();
        assert_eq!(parsed.len(), 5);
        assert_eq!(parsed[0].len(), SIDE * SIDE);
        assert!(parsed[0].iter().all(|&v| (0.0..=1.0).contains(&v)));
        let parsed_labels = parse_idx_labels(&idx_labels(&labels)).unwrap();
        assert_eq!(parsed_labels.len(), 5);
    }
}
