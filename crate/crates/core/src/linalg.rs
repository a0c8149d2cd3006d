//! Thin wrappers over nalgebra's dense decompositions.

use nalgebra::{DMatrix, DVector, SVD};

/// Reduced SVD `m = u * diag(s) * v^T` with singular values sorted in
/// nonincreasing order.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    /// Decomposes `m` with faer's SVD. Singular values come back
    /// nonincreasing; ties keep faer's order.
    pub fn new(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let k = rows.min(cols);
        if k == 0 {
            return ThinSvd {
                u: DMatrix::zeros(rows, 0),
                singular_values: DVector::zeros(0),
                v: DMatrix::zeros(cols, 0),
            };
        }
        let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
        let svd = match fm.thin_svd() {
            Ok(svd) => svd,
            Err(_) => return Self::fallback(m),
        };
        let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        ThinSvd {
            u: DMatrix::from_fn(rows, k, |i, c| u[(i, order[c])]),
            singular_values: DVector::from_fn(k, |c, _| s[order[c]]),
            v: DMatrix::from_fn(cols, k, |i, c| v[(i, order[c])]),
        }
    }

    /// nalgebra's SVD, used only if faer reports non-convergence.
    fn fallback(m: &DMatrix<f64>) -> Self {
        let svd = SVD::new(m.clone(), true, true);
        let u = svd.u.expect("left singular vectors requested");
        let v_t = svd.v_t.expect("right singular vectors requested");
        let s = svd.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        ThinSvd {
            u: DMatrix::from_fn(m.nrows(), s.len(), |i, c| u[(i, order[c])]),
            singular_values: DVector::from_fn(s.len(), |c, _| s[order[c]]),
            v: DMatrix::from_fn(m.ncols(), s.len(), |i, c| v_t[(order[c], i)]),
        }
    }

    /// Number of singular values above the default cutoff
    /// `max(rows, cols) * eps * s_max`.
    pub fn rank(&self) -> usize {
        let rows = self.u.nrows();
        let cols = self.v.nrows();
        let cutoff = rank_cutoff(rows, cols, self.largest());
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }

    pub fn largest(&self) -> f64 {
        self.singular_values.get(0).copied().unwrap_or(0.0)
    }

    /// Drops singular triples at or below the rank cutoff.
    pub fn truncated(self) -> Self {
        let r = self.rank();
        self.truncate(r)
    }

    pub fn truncate(self, r: usize) -> Self {
        let r = r.min(self.singular_values.len());
        ThinSvd {
            u: self.u.columns(0, r).into_owned(),
            singular_values: self.singular_values.rows(0, r).into_owned(),
            v: self.v.columns(0, r).into_owned(),
        }
    }
}

/// Singular values at or below this are treated as zero.
pub fn rank_cutoff(rows: usize, cols: usize, largest: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * largest
}

/// Moore-Penrose pseudo-inverse using the default rank cutoff.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = ThinSvd::new(m).truncated();
    let inv_s = svd.singular_values.map(|s| 1.0 / s);
    &svd.v * DMatrix::from_diagonal(&inv_s) * svd.u.transpose()
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Returns the columns of `m` listed in `columns`, in that order.
pub fn select_columns(m: &DMatrix<f64>, columns: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), columns.len(), |i, j| m[(i, columns[j])])
}

/// Returns the rows of `m` listed in `rows`, in that order.
pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_of_wide_matrix_reconstructs() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, -1.0, 3.0, 0.5, 2.0, 1.0]);
        let svd = ThinSvd::new(&m);
        assert_eq!(svd.u.shape(), (2, 2));
        assert_eq!(svd.v.shape(), (4, 2));
        assert!(svd.singular_values[0] >= svd.singular_values[1]);
        let back = &svd.u * DMatrix::from_diagonal(&svd.singular_values) * svd.v.transpose();
        assert!((back - m).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_products_reconstruct() {
        use rand::{Rng, SeedableRng};
        use rand_distr::{Distribution, StandardNormal};
        // Low-rank Gram matrices like these once tripped up the SVD backend.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let p = rng.random_range(2..40);
            let r = rng.random_range(1..=p);
            let b = DMatrix::from_fn(p, r, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
            let m = &b * b.transpose();
            let svd = ThinSvd::new(&m);
            let back = &svd.u * DMatrix::from_diagonal(&svd.singular_values) * svd.v.transpose();
            assert!((back - &m).norm() < 1e-12 * m.norm());
            assert_eq!(svd.rank(), r);
        }
    }

    #[test]
    fn rank_of_outer_product_is_one() {
        let a = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let svd = ThinSvd::new(&(&a * b.transpose()));
        assert_eq!(svd.rank(), 1);
        assert_eq!(svd.truncated().singular_values.len(), 1);
    }

    #[test]
    fn pseudo_inverse_of_singular_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let pinv = pseudo_inverse(&m);
        // Moore-Penrose identity M M+ M = M.
        assert!((&m * &pinv * &m - &m).norm() < 1e-12);
        // For a rank-one M = a a^T, M+ = M / |a|^4.
        assert!((pinv - &m / 25.0).norm() < 1e-12);
    }
}
