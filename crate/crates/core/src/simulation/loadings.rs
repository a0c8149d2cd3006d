use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Builds a `p x G` loading matrix with orthonormal columns.
///
/// Column `k` starts as the indicator of `blocks[k]` and is orthogonalized
/// against columns `0..k` by sequential projection (two passes), then
/// normalized. Disjoint blocks give `indicator / sqrt(|block|)`; an
/// overlapping block picks up the support of the earlier columns it
/// overlaps, with opposite sign outside its own block.
pub fn build_loadings(p: usize, blocks: &[Vec<usize>]) -> Result<DMatrix<f64>> {
    let g = blocks.len();
    if g == 0 {
        return Err(Error::validation("at least one factor block is required"));
    }
    if g > p {
        return Err(Error::Infeasible(format!("{g} orthogonal factors cannot fit in dimension {p}")));
    }
    let mut v = DMatrix::zeros(p, g);
    for (k, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::validation(format!("factor {k} has an empty support")));
        }
        let mut raw = DVector::zeros(p);
        for &j in block {
            if j >= p {
                return Err(Error::validation(format!("factor {k} support index {j} out of range for p = {p}")));
            }
            raw[j] = 1.0;
        }
        let raw_norm = raw.norm();
        let mut col = raw;
        for _ in 0..2 {
            for prev in 0..k {
                let q = v.column(prev);
                let coef = q.dot(&col);
                col.axpy(-coef, &q, 1.0);
            }
        }
        let norm = col.norm();
        if norm <= 1e-10 * raw_norm {
            return Err(Error::Infeasible(format!(
                "factor {k} support lies in the span of earlier factors"
            )));
        }
        col /= norm;
        // Exact zeros off the combined support, so support tests are crisp.
        col.apply(|x: &mut f64| {
            if x.abs() < 1e-15 {
                *x = 0.0
            }
        });
        v.set_column(k, &col);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_blocks_are_scaled_indicators() {
        let v = build_loadings(20, &[(0..5).collect(), (5..10).collect()]).unwrap();
        let s = 1.0 / 5f64.sqrt();
        for j in 0..20 {
            let e0 = if j < 5 { s } else { 0.0 };
            let e1 = if (5..10).contains(&j) { s } else { 0.0 };
            assert!((v[(j, 0)] - e0).abs() < 1e-15);
            assert!((v[(j, 1)] - e1).abs() < 1e-15);
        }
    }

    #[test]
    fn singleton_is_unit_vector() {
        let v = build_loadings(4, &[vec![0]]).unwrap();
        assert_eq!(v.column(0).as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn overlapping_blocks_are_orthonormal() {
        let v = build_loadings(30, &[(0..5).collect(), (5..15).collect(), (10..15).collect()]).unwrap();
        let gram = v.transpose() * &v;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);
        // Third factor equals the second on its own block and is opposite elsewhere.
        for j in 10..15 {
            assert!((v[(j, 2)] - v[(j, 1)]).abs() < 1e-15);
        }
        for j in 5..10 {
            assert!((v[(j, 2)] + v[(j, 1)]).abs() < 1e-15);
        }
        assert!((15..30).all(|j| v[(j, 2)] == 0.0));
    }

    #[test]
    fn infeasible_specs() {
        assert!(matches!(build_loadings(5, &[vec![2], vec![2]]), Err(Error::Infeasible(_))));
        assert!(matches!(build_loadings(1, &[vec![0], vec![0]]), Err(Error::Infeasible(_))));
        assert!(build_loadings(5, &[vec![7]]).is_err());
        assert!(build_loadings(5, &[vec![]]).is_err());
    }
}
