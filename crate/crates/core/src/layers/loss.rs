//! Softmax cross-entropy loss head.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over a batch of logits `(N, K)` with integer
/// labels, plus the gradient with respect to the logits.
///
/// Computed in the log-sum-exp form with max subtraction, so arbitrarily
/// large finite logits stay finite. The gradient follows the mean convention:
/// `(softmax − onehot) / N`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[u8]) -> Result<(f64, Tensor)> {
    let s = logits.shape();
    if s.len() != 2 {
        return Err(Error::shape(
            "softmax_cross_entropy",
            format!("need rank-2 logits, got {s:?}"),
        ));
    }
    let (n, k) = (s[0], s[1]);
    if labels.len() != n {
        return Err(Error::shape(
            "softmax_cross_entropy",
            format!("batch size {n} does not match {} labels", labels.len()),
        ));
    }
    if n == 0 {
        return Err(Error::invalid("softmax_cross_entropy", "empty batch"));
    }

    let ld = logits.data();
    let mut grad = Tensor::zeros(&[n, k]);
    let gd = grad.data_mut();
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;

    for i in 0..n {
        let y = labels[i] as usize;
        if y >= k {
            return Err(Error::invalid(
                "softmax_cross_entropy",
                format!("label {y} out of range for {k} classes (row {i})"),
            ));
        }
        let row = &ld[i * k..(i + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &v in row {
            sum += (v - max).exp();
        }
        // loss_i = logsumexp(row) − row[y]
        total += max + sum.ln() - row[y];

        let g = &mut gd[i * k..(i + 1) * k];
        for (j, &v) in row.iter().enumerate() {
            g[j] = (v - max).exp() / sum * inv_n;
        }
        g[y] -= inv_n;
    }

    Ok((total * inv_n, grad))
}
