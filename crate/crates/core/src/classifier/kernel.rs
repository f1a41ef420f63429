use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(gamma <x, y> + coef0)^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticKernel {
    pub gamma: f64,
    pub coef0: f64,
}

impl QuadraticKernel {
    #[inline]
    pub fn from_dot(&self, dot: f64) -> f64 {
        let v = self.gamma * dot + self.coef0;
        v * v
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        kernel_quadratic(x, y, self)
    }
}

pub fn kernel_quadratic(x: &[f64], y: &[f64], kernel: &QuadraticKernel) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "kernel inputs have dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(kernel.from_dot(dot))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let k = QuadraticKernel {
            gamma: 0.37,
            coef0: 1.0,
        };
        assert_eq!(kernel_quadratic(&[0.0, 0.0], &[0.0, 0.0], &k).unwrap(), 1.0);
        let k0 = QuadraticKernel {
            gamma: 2.0,
            coef0: 0.0,
        };
        assert_eq!(
            kernel_quadratic(&[1.0, 0.0], &[0.0, 3.0], &k0).unwrap(),
            0.0
        );
        let k1 = QuadraticKernel {
            gamma: 1.0,
            coef0: 1.0,
        };
        assert_eq!(
            kernel_quadratic(&[1.0, 2.0], &[3.0, 4.0], &k1).unwrap(),
            144.0
        );
    }

    #[test]
    fn dimension_mismatch() {
        let k = QuadraticKernel {
            gamma: 1.0,
            coef0: 0.0,
        };
        assert!(matches!(
            kernel_quadratic(&[1.0], &[1.0, 2.0], &k),
            Err(Error::Shape(_))
        ));
    }
}
