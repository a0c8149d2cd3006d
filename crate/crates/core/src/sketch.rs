//! Column-sketch (permutation then truncation) approximation of symmetric
//! nonnegative-definite matrices.
//!
//! For a sketch `S` that keeps `width` columns of `M`, the approximation is
//! `(M S) (S^T M S)^+ (M S)^T`. The eigenvectors of `M` are approximated by
//! the left singular vectors of `F = M S`, and its eigenvalues by the
//! singular values of `F`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, ThinSvd};

/// Column selector `S = pi * tau`: a permutation of `0..p` followed by
/// truncation to the first `width` entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SketchSelector {
    permutation: Vec<usize>,
    width: usize,
}

impl SketchSelector {
    pub fn new(permutation: Vec<usize>, width: usize) -> Result<Self> {
        let p = permutation.len();
        if width == 0 {
            return Err(Error::validation("sketch width must be at least 1"));
        }
        if width > p {
            return Err(Error::dimension(format!(
                "sketch width {width} exceeds dimension {p}"
            )));
        }
        let mut seen = vec![false; p];
        for &j in &permutation {
            if j >= p || seen[j] {
                return Err(Error::validation("sketch permutation is not a bijection"));
            }
            seen[j] = true;
        }
        Ok(SketchSelector { permutation, width })
    }

    /// Selector keeping `columns` (in the given order), followed by the
    /// remaining indices in ascending order.
    pub fn from_columns(p: usize, columns: &[usize]) -> Result<Self> {
        if columns.len() > p {
            return Err(Error::dimension(format!(
                "sketch width {} exceeds dimension {p}",
                columns.len()
            )));
        }
        let mut chosen = vec![false; p];
        for &j in columns {
            if j >= p || chosen[j] {
                return Err(Error::validation(format!(
                    "invalid or repeated sketch column {j}"
                )));
            }
            chosen[j] = true;
        }
        let mut permutation = columns.to_vec();
        permutation.extend((0..p).filter(|&j| !chosen[j]));
        SketchSelector::new(permutation, columns.len())
    }

    pub fn dim(&self) -> usize {
        self.permutation.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn selected(&self) -> &[usize] {
        &self.permutation[..self.width]
    }

    /// The explicit `p x width` sketch matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.dim(), self.width);
        for (col, &row) in self.selected().iter().enumerate() {
            s[(row, col)] = 1.0;
        }
        s
    }
}

/// Returns `(M S)(S^T M S)^+ (M S)^T`.
///
/// `m` must be symmetric; nonnegative definiteness is assumed, not checked.
pub fn nystrom_approx(m: &DMatrix<f64>, selector: &SketchSelector) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::dimension(format!("matrix is {rows}x{cols}, not square")));
    }
    if selector.dim() != rows {
        return Err(Error::dimension(format!(
            "selector acts on dimension {} but matrix is {rows}x{rows}",
            selector.dim()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    let scale = linalg::max_abs(m).max(f64::MIN_POSITIVE);
    let asym = linalg::max_abs(&(m - m.transpose()));
    if asym > 1e-10 * scale {
        return Err(Error::validation(format!(
            "matrix is not symmetric (max asymmetry {asym:.3e})"
        )));
    }

    let cols = selector.selected();
    let c = linalg::select_columns(m, cols);
    let w = linalg::select_rows(&c, cols);
    let approx = &c * linalg::pseudo_inverse(&w) * c.transpose();
    Ok((&approx + approx.transpose()) * 0.5)
}

/// SVD of the sketched matrix `F`, truncated to its numerical rank.
#[derive(Clone, Debug)]
pub struct SketchFactorization {
    pub f: DMatrix<f64>,
    /// `U(F)`: approximate eigenvectors of the sketched matrix.
    pub left_vectors: DMatrix<f64>,
    /// `Lambda(F)`: approximate eigenvalues, nonincreasing.
    pub singular_values: DVector<f64>,
    pub right_vectors: DMatrix<f64>,
}

impl SketchFactorization {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

/// Factors `F`, dropping singular values at or below
/// `max(p, width) * eps * s_max`. A zero matrix gives an empty spectrum.
pub fn approx_eigvecs(f: &DMatrix<f64>) -> Result<SketchFactorization> {
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("sketch matrix has non-finite entries"));
    }
    let svd = ThinSvd::new(f).truncated();
    Ok(SketchFactorization {
        f: f.clone(),
        left_vectors: svd.u,
        singular_values: svd.singular_values,
        right_vectors: svd.v,
    })
}
