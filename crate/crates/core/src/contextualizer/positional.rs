use ndarray::Array2;

/// Sinusoidal position table, `seq_len x d_model`.
///
/// Column `2i` holds `sin(pos / 10000^(2i/d_model))` and column `2i + 1` the
/// matching cosine. With an odd `d_model` the last column is unpaired and
/// takes the sine.
pub fn positional_encoding(seq_len: usize, d_model: usize) -> Array2<f64> {
    Array2::from_shape_fn((seq_len, d_model), |(pos, col)| {
        let pair = (col / 2) as f64;
        let angle = pos as f64 / 10_000f64.powf(2.0 * pair / d_model as f64);
        if col % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_row_alternates() {
        let pe = positional_encoding(3, 6);
        assert_eq!(pe.row(0).to_vec(), vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn second_row_leading_pair() {
        for d in [2, 5, 64] {
            let pe = positional_encoding(2, d);
            assert_eq!(pe[[1, 0]], 1f64.sin());
            assert_eq!(pe[[1, 1]], 1f64.cos());
        }
    }

    #[test]
    fn odd_width_last_column_is_sine() {
        let pe = positional_encoding(4, 5);
        let angle = 3.0 / 10_000f64.powf(4.0 / 5.0);
        assert_eq!(pe[[3, 4]], angle.sin());
    }

    #[test]
    fn bounded() {
        let pe = positional_encoding(100, 7);
        assert!(pe.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
