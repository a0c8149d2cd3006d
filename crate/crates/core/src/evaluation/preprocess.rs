use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::ThinSvd;

/// Per column: `x <- log2(x - min + 1)`, so every log argument is at least 1.
pub fn log2_shift(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let min = col.min();
        col.apply(|v: &mut f64| *v = (*v - min + 1.0).log2());
    }
    out
}

/// Centers the columns, then replaces `X = U S V^T` by `U V^T` so every
/// nonzero singular value becomes 1.
pub fn orthonormalize_features(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() < 2 {
        return Err(Error::validation("need at least 2 rows to orthonormalize"));
    }
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let svd = ThinSvd::new(&c).truncated();
    if svd.rank() == 0 {
        return Err(Error::validation("centered design is zero; nothing to orthonormalize"));
    }
    Ok(&svd.u * svd.v.transpose())
}

/// `y = ln(t + 1)`.
pub fn transform_response(times: &[f64]) -> Result<DVector<f64>> {
    if let Some((i, t)) = times.iter().enumerate().find(|(_, t)| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::validation(format!(
            "survival time at position {i} is {t}; times must be finite and nonnegative"
        )));
    }
    Ok(DVector::from_iterator(times.len(), times.iter().map(|t| t.ln_1p())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn log2_examples() {
        let x = DMatrix::from_column_slice(2, 4, &[0.0, 3.0, 5.0, 5.0, -7.0, 0.0, -7.0, 1.0]);
        let t = log2_shift(&x);
        assert_eq!(t.column(0).as_slice(), &[0.0, 2.0]);
        assert_eq!(t.column(1).as_slice(), &[0.0, 0.0]);
        assert_eq!(t.column(2).as_slice(), &[0.0, 3.0]);
        assert_eq!(t.column(3).as_slice(), &[0.0, 9f64.log2()]);
    }

    #[test]
    fn orthonormalized_singular_values_are_one() {
        let x = DMatrix::from_fn(6, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 + 0.1 * (i * j) as f64);
        let o = orthonormalize_features(&x).unwrap();
        let s = ThinSvd::new(&o).truncated();
        assert!(s.singular_values.iter().all(|v| (v - 1.0).abs() < 1e-10));
        let again = orthonormalize_features(&o).unwrap();
        assert!((again - &o).amax() < 1e-10);
    }

    #[test]
    fn rank_one_stays_rank_one() {
        let x = DMatrix::from_fn(5, 3, |i, j| (i as f64) * (j as f64 + 1.0));
        let o = orthonormalize_features(&x).unwrap();
        let s = ThinSvd::new(&o).truncated();
        assert_eq!(s.rank(), 1);
        assert!((s.singular_values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_rejected() {
        assert!(orthonormalize_features(&DMatrix::from_element(3, 2, 4.0)).is_err());
    }

    #[test]
    fn survival_transform() {
        let y = transform_response(&[0.0, E - 1.0, E * E - 1.0]).unwrap();
        for (v, e) in y.iter().zip([0.0, 1.0, 2.0]) {
            assert!((v - e).abs() < 1e-15);
        }
        assert_eq!(transform_response(&[-1.0]).unwrap_err().class(), "validation");
    }
}
