use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// A trainable tensor: values plus a gradient buffer of the same shape.
///
/// Shapes are one-dimensional (biases) or two-dimensional (weights). A
/// one-dimensional tensor binds to the tape as a `1 × n` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    #[serde(skip)]
    grads: Vec<f64>,
}

impl ParamTensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.is_empty() || shape.len() > 2 || n != values.len() {
            return Err(Error::dim(
                "ParamTensor::new",
                format!("shape {shape:?}"),
                format!("{} values", values.len()),
            ));
        }
        let grads = vec![0.0; n];
        Ok(Self { shape, values, grads })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n]).expect("zeros shape is consistent")
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        Self::new(vec![m.rows(), m.cols()], m.data().to_vec()).expect("matrix shape is consistent")
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Self::new(vec![values.len()], values).expect("vector shape is consistent")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn zero_grads(&mut self) {
        if self.grads.len() != self.values.len() {
            self.grads = vec![0.0; self.values.len()];
        } else {
            self.grads.fill(0.0);
        }
    }

    pub fn set_grads(&mut self, grads: &[f64]) -> Result<()> {
        if grads.len() != self.values.len() {
            return Err(Error::dim(
                "ParamTensor::set_grads",
                format!("{:?}", self.shape),
                format!("{} grads", grads.len()),
            ));
        }
        self.grads.clear();
        self.grads.extend_from_slice(grads);
        Ok(())
    }

    /// Tape view: `rows × cols` for a weight, `1 × n` for a bias.
    pub fn as_matrix(&self) -> Matrix {
        let (r, c) = match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            _ => unreachable!("shape validated at construction"),
        };
        Matrix::new(r, c, self.values.clone()).expect("shape validated at construction")
    }

    /// Gradient-descent step using the stored gradients.
    pub fn sgd_step(&mut self, learning_rate: f64) {
        if self.grads.len() != self.values.len() {
            self.zero_grads();
        }
        sgd_update(&mut self.values, &self.grads, learning_rate).expect("grads sized to values");
    }

    pub fn same_shape(&self, other: &ParamTensor) -> bool {
        self.shape == other.shape
    }
}

/// `values ← values − η·grads`.
pub fn sgd_update(values: &mut [f64], grads: &[f64], learning_rate: f64) -> Result<()> {
    if values.len() != grads.len() {
        return Err(Error::dim(
            "sgd_update",
            format!("{} values", values.len()),
            format!("{} grads", grads.len()),
        ));
    }
    for (v, g) in values.iter_mut().zip(grads) {
        *v -= learning_rate * g;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_hand_computation() {
        let mut v = [1.0];
        sgd_update(&mut v, &[2.0], 0.5).unwrap();
        assert_eq!(v, [0.0]);
    }

    #[test]
    fn sgd_zero_gradient_is_noop() {
        let mut v = [1.5, -2.0];
        sgd_update(&mut v, &[0.0, 0.0], 0.3).unwrap();
        assert_eq!(v, [1.5, -2.0]);
    }

    #[test]
    fn two_steps_equal_one_double_step() {
        // Dyadic values keep both paths exact.
        let g = [0.25, -0.5, 1.0];
        let mut a = [1.0, 2.0, 3.0];
        let mut b = a;
        sgd_update(&mut a, &g, 0.125).unwrap();
        sgd_update(&mut a, &g, 0.125).unwrap();
        sgd_update(&mut b, &g, 0.25).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sgd_shape_mismatch() {
        let mut v = [1.0, 2.0];
        assert!(matches!(sgd_update(&mut v, &[1.0], 0.1), Err(Error::Dimension { .. })));
    }

    #[test]
    fn bias_binds_as_row() {
        let p = ParamTensor::vector(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.as_matrix().shape(), (1, 3));
    }
}
