use nalgebra::{DMatrix, DVector};

use super::{FitResult, HyperParams, Method};
use crate::error::{Error, Result};
use crate::linalg::{self, ThinSvd};
use crate::screening::{marginal_correlations, ExpressionDataset, ScreeningPlan, Selection};

/// Principal components regression coefficients for every `d` from one SVD:
/// `beta(d) = V_[d] Lambda_[d]^{-1} U_[d]^T Y`.
#[derive(Clone, Debug)]
pub struct PcrPath {
    v: DMatrix<f64>,
    gamma: DVector<f64>,
}

impl PcrPath {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let svd = ThinSvd::new(x).truncated();
        let gamma = (svd.u.transpose() * y).component_div(&svd.singular_values);
        PcrPath { v: svd.v, gamma }
    }

    pub fn rank(&self) -> usize {
        self.gamma.len()
    }

    pub fn beta(&self, d: usize) -> Result<DVector<f64>> {
        if d == 0 || d > self.rank() {
            return Err(Error::Rank {
                requested: d,
                available: self.rank(),
            });
        }
        Ok(self.v.columns(0, d) * self.gamma.rows(0, d))
    }
}

pub fn fit_pcr(data: &ExpressionDataset, d: usize) -> Result<FitResult> {
    let beta = PcrPath::new(&data.x, &data.y).beta(d)?;
    Ok(FitResult::new(
        Method::Pcr,
        beta,
        data.centering.clone(),
        HyperParams {
            d: Some(d),
            ..HyperParams::default()
        },
    ))
}

/// Supervised principal components: PCR on the screened columns only.
pub fn fit_spc(data: &ExpressionDataset, selection: &Selection, d: usize) -> Result<FitResult> {
    let plan = selection.plan(&marginal_correlations(data).values)?;
    let beta_a = spc_path(data, &plan).beta(d)?;
    Ok(FitResult::new(
        Method::Spc,
        embed(&beta_a, &plan.selected, data.p()),
        data.centering.clone(),
        HyperParams {
            selection: Some(*selection),
            t_star: Some(plan.threshold),
            ell: Some(plan.ell()),
            d: Some(d),
            ..HyperParams::default()
        },
    ))
}

pub(crate) fn spc_path(data: &ExpressionDataset, plan: &ScreeningPlan) -> PcrPath {
    PcrPath::new(&linalg::select_columns(&data.x, &plan.selected), &data.y)
}

/// Scatters `values` into a zero vector of length `p` at `positions`.
pub(crate) fn embed(values: &DVector<f64>, positions: &[usize], p: usize) -> DVector<f64> {
    let mut out = DVector::zeros(p);
    for (k, &j) in positions.iter().enumerate() {
        out[j] = values[k];
    }
    out
}

/// Least squares of `Y` on the listed columns; the remaining coefficients
/// are zero. Fails if those columns are rank deficient.
pub fn ols(data: &ExpressionDataset, columns: &[usize]) -> Result<DVector<f64>> {
    let path = PcrPath::new(&linalg::select_columns(&data.x, columns), &data.y);
    if path.rank() < columns.len() {
        return Err(Error::Rank {
            requested: columns.len(),
            available: path.rank(),
        });
    }
    Ok(embed(&path.beta(columns.len())?, columns, data.p()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screening::center;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    fn data(n: usize, p: usize, seed: u64) -> ExpressionDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian(n, p, &mut rng);
        let y = x.column(0) - x.column(2) * 0.5 + gaussian(n, 1, &mut rng).column(0) * 0.3;
        center(&x, &y, None).unwrap()
    }

    /// Normal equations solved by LU.
    fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        (x.transpose() * x).lu().solve(&(x.transpose() * y)).unwrap()
    }

    #[test]
    fn full_rank_pcr_is_ols() {
        let d = data(30, 5, 1);
        let fit = fit_pcr(&d, 5).unwrap();
        let oracle = normal_equations(&d.x, &d.y);
        assert!((&fit.beta - oracle).amax() < 1e-10);
    }

    #[test]
    fn response_orthogonal_to_components_gives_zero() {
        let d = data(10, 3, 2);
        // Project Y off the column space of X.
        let q = d.x.clone().qr().q();
        let y = &d.y - &q * (q.transpose() * &d.y);
        let fit = PcrPath::new(&d.x, &y).beta(3).unwrap();
        assert!(fit.amax() < 1e-12);
    }

    #[test]
    fn matches_eigendecomposition_oracle() {
        let d = data(20, 5, 3);
        // Oracle: eigendecompose X^T X, set U = X V Lambda^{-1}.
        let eig = (d.x.transpose() * &d.x).symmetric_eigen();
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut oracle = DVector::zeros(5);
        for &k in order.iter().take(2) {
            let v = eig.eigenvectors.column(k);
            let sigma = eig.eigenvalues[k].sqrt();
            let u = &d.x * v / sigma;
            oracle += v * (u.dot(&d.y) / sigma);
        }
        let fit = fit_pcr(&d, 2).unwrap();
        assert!((&fit.beta - &oracle).amax() < 1e-10);
        assert!(matches!(fit_pcr(&d, 6), Err(Error::Rank { .. })));
    }

    #[test]
    fn spc_on_all_columns_is_pcr() {
        let d = data(20, 6, 4);
        let spc = fit_spc(&d, &Selection::All, 3).unwrap();
        let pcr = fit_pcr(&d, 3).unwrap();
        assert!((&spc.beta - &pcr.beta).amax() < 1e-10);
    }

    #[test]
    fn spc_with_full_components_is_ols_on_screened_set() {
        let d = data(25, 10, 5);
        let spc = fit_spc(&d, &Selection::Count(4), 4).unwrap();
        let plan = Selection::Count(4).plan(&marginal_correlations(&d).values).unwrap();
        let xa = linalg::select_columns(&d.x, &plan.selected);
        let oracle = embed(&normal_equations(&xa, &d.y), &plan.selected, 10);
        assert!((&spc.beta - &oracle).amax() < 1e-10);
        // Support lies inside A.
        assert!(spc.selected_genes.iter().all(|j| plan.selected.contains(j)));
    }
}
