//! Softmax cross-entropy over a logits matrix.

use crate::error::{Error, Result};
use crate::nn::batch::Matrix;

/// Mean cross-entropy loss and its gradient with respect to the logits.
///
/// The loss is the arithmetic mean of per-sample costs; `dlogits` is the
/// gradient of that mean, so accumulating per-row contributions directly
/// yields the mean gradient.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() == 0 {
        return Err(Error::config("softmax_cross_entropy on an empty batch"));
    }
    if logits.rows() != labels.len() {
        return Err(Error::config(format!(
            "logits rows {} != labels {}",
            logits.rows(),
            labels.len()
        )));
    }
    let classes = logits.cols();
    let inv_n = 1.0 / logits.rows() as f64;
    let mut total = 0.0;
    let mut dlogits = Matrix::zeros(logits.rows(), classes);
    for i in 0..logits.rows() {
        let label = labels[i];
        if label >= classes {
            return Err(Error::config(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        total += sample_cost(logits.row(i), label, dlogits.row_mut(i));
        for d in dlogits.row_mut(i) {
            *d *= inv_n;
        }
    }
    Ok((total * inv_n, dlogits))
}

/// Cost of one sample; the gradient of that (unaveraged) cost is written
/// into `drow`. Uses the log-sum-exp form for stability.
pub(crate) fn sample_cost(row: &[f64], label: usize, drow: &mut [f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (d, &z) in drow.iter_mut().zip(row) {
        let e = (z - max).exp();
        *d = e;
        sum += e;
    }
    let inv_sum = 1.0 / sum;
    for d in drow.iter_mut() {
        *d *= inv_sum;
    }
    drow[label] -= 1.0;
    max + sum.ln() - row[label]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_logits_give_ln_k() {
        for k in [2, 5, 10] {
            let logits = Matrix::from_rows(&[vec![0.7; k]]);
            let (loss, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
            assert_relative_eq!(loss, (k as f64).ln(), max_relative = 1e-12);
        }
    }

    #[test]
    fn peaked_logits_drive_loss_to_zero() {
        let mut row = vec![0.0; 4];
        row[2] = 50.0;
        let logits = Matrix::from_rows(&[row]);
        let (loss, _) = softmax_cross_entropy(&logits, &[2]).unwrap();
        assert!(loss < 1e-12, "loss {loss}");
    }

    #[test]
    fn empty_batch_is_an_error() {
        let logits = Matrix::zeros(0, 3);
        assert!(softmax_cross_entropy(&logits, &[]).is_err());
    }

    #[test]
    fn out_of_range_label_is_an_error() {
        let logits = Matrix::zeros(1, 3);
        assert!(softmax_cross_entropy(&logits, &[3]).is_err());
    }

    #[test]
    fn dlogits_matches_finite_differences() {
        // Central finite differences with step 1e-5 on a random-ish batch of 3.
        let rows = vec![
            vec![0.3, -1.2, 0.8, 0.1],
            vec![-0.5, 0.4, 0.0, 1.5],
            vec![2.0, -0.3, 0.7, -0.9],
        ];
        let labels = [2usize, 3, 0];
        let logits = Matrix::from_rows(&rows);
        let (_, dlogits) = softmax_cross_entropy(&logits, &labels).unwrap();

        let h = 1e-5;
        for i in 0..3 {
            for j in 0..4 {
                let mut plus = rows.clone();
                let mut minus = rows.clone();
                plus[i][j] += h;
                minus[i][j] -= h;
                let (lp, _) =
                    softmax_cross_entropy(&Matrix::from_rows(&plus), &labels).unwrap();
                let (lm, _) =
                    softmax_cross_entropy(&Matrix::from_rows(&minus), &labels).unwrap();
                let numeric = (lp - lm) / (2.0 * h);
                assert!(
                    (dlogits.row(i)[j] - numeric).abs() < 1e-6,
                    "({i},{j}): analytic {} vs numeric {numeric}",
                    dlogits.row(i)[j]
                );
            }
        }
    }
}
