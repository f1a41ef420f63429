use ndarray::{Array2, Axis};

use super::FeatureSequence;
use crate::error::{Error, Result};

/// Row-wise softmax of `X X^T / sqrt(d)`, the attention weights of a sequence
/// attending to itself with no query/key projections.
pub fn attention_weights(x: &Array2<f64>) -> Result<Array2<f64>> {
    let scale = (x.ncols() as f64).sqrt();
    let mut weights = x.dot(&x.t()) / scale;
    for (r, mut row) in weights.axis_iter_mut(Axis(0)).enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numeric {
                row: r,
                detail: "attention logits overflowed".into(),
            });
        }
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Numeric {
                row: r,
                detail: format!("softmax normalizer is {total}"),
            });
        }
        row /= total;
    }
    Ok(weights)
}

/// `softmax(X X^T / sqrt(d_model)) X`.
pub fn self_attention(x: &FeatureSequence) -> Result<FeatureSequence> {
    let weights = attention_weights(x.rows())?;
    let out = weights.dot(x.rows());
    if let Some((r, _)) = out
        .axis_iter(Axis(0))
        .enumerate()
        .find(|(_, row)| row.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Numeric {
            row: r,
            detail: "attention output is not finite".into(),
        });
    }
    FeatureSequence::new(out, x.mode())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contextualizer::SequenceMode;
    use ndarray::array;

    fn seq(rows: Array2<f64>) -> FeatureSequence {
        FeatureSequence::new(rows, SequenceMode::MultiSegment).unwrap()
    }

    #[test]
    fn single_row_is_identity() {
        let x = seq(array![[0.3, -2.0, 5.0]]);
        assert_eq!(self_attention(&x).unwrap(), x);
    }

    #[test]
    fn identical_rows_fixed_point() {
        let x = seq(array![[1.5, -0.5], [1.5, -0.5], [1.5, -0.5]]);
        let out = self_attention(&x).unwrap();
        for row in out.rows().rows() {
            assert!((row[0] - 1.5).abs() < 1e-15 && (row[1] + 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn orthonormal_pair() {
        // softmax(1/sqrt 2, 0) = e^a / (e^a + 1), a = 0.70710678.
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let w = a.exp() / (a.exp() + 1.0);
        // Reference value from a 30-digit evaluation.
        assert!((w - 0.669_761_549_326_657).abs() < 1e-14);
        let out = self_attention(&seq(array![[1.0, 0.0], [0.0, 1.0]])).unwrap();
        let r = out.rows();
        assert!((r[[0, 0]] - w).abs() < 1e-12 && (r[[0, 1]] - (1.0 - w)).abs() < 1e-12);
        assert!((r[[1, 0]] - (1.0 - w)).abs() < 1e-12 && (r[[1, 1]] - w).abs() < 1e-12);
    }

    #[test]
    fn large_inputs_stay_finite() {
        let x = seq(array![[300.0, 300.0], [-300.0, 290.0]]);
        let out = self_attention(&x).unwrap();
        assert!(out.rows().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn overflow_reports_row() {
        let x = seq(array![[1e155, 0.0], [0.0, 1.0]]);
        match self_attention(&x) {
            Err(Error::Numeric { row, .. }) => assert_eq!(row, 0),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn not_scale_invariant() {
        let x = array![[1.0, 0.2], [0.1, 0.9], [0.5, 0.5]];
        let once = self_attention(&seq(x.clone())).unwrap();
        let doubled = self_attention(&seq(&x * 2.0)).unwrap();
        let rescaled = once.rows() * 2.0;
        let diff: f64 = (&rescaled - doubled.rows()).iter().map(|v| v.abs()).sum();
        assert!(diff > 1e-3);
    }
}
