//! Forward kernels shared by the tape and by plain evaluation code.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// `x·W + b` with `b` broadcast over rows.
pub fn affine(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    if x.cols() != w.rows() {
        return Err(Error::dim("affine", x.shape_str(), w.shape_str()));
    }
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(Error::dim("affine bias", w.shape_str(), b.shape_str()));
    }
    let mut out = x.matmul(w)?;
    let bias = b.row(0);
    for r in 0..out.rows() {
        for (o, bv) in out.row_mut(r).iter_mut().zip(bias) {
            *o += bv;
        }
    }
    Ok(out)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

pub fn relu(m: &Matrix) -> Matrix {
    m.map(|v| v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(vals: &[f64]) -> Matrix {
        Matrix::row_vector(vals.to_vec())
    }

    #[test]
    fn softmax_uniform_row() {
        let s = softmax_rows(&row(&[0.0, 0.0, 0.0]));
        for &v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_ln2_offset() {
        let c = 0.37;
        let s = softmax_rows(&row(&[c, c + 2f64.ln()]));
        assert!((s.get(0, 0) - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.get(0, 1) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_large_logits_do_not_overflow() {
        let s = softmax_rows(&row(&[1000.0, 0.0]));
        assert!(s.is_finite());
        assert!((s.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(s.get(0, 1) < 1e-300);
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&row(&[-1.0, 0.0, 2.0])).data(), &[0.0, 0.0, 2.0]);
        assert!(relu(&Matrix::filled(2, 3, -0.5)).data().iter().all(|&v| v == 0.0));
        let pos = Matrix::from_rows(&[[0.1, 2.0], [3.0, 4.5]]).unwrap();
        assert_eq!(relu(&pos), pos);
    }
}
