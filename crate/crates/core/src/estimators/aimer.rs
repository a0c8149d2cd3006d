use nalgebra::{DMatrix, DVector};

use super::{hard_threshold, threshold_at_level, FitResult, HyperParams, Method};
use crate::error::{Error, Result};
use crate::linalg;
use crate::screening::{marginal_correlations, ExpressionDataset, ScreeningPlan, Selection};
use crate::sketch::{approx_eigvecs, SketchFactorization};

/// Intermediate quantities of a fit with `d` components, in the permuted
/// column frame `X_new = [X_A, X_{A^c}]`.
#[derive(Clone, Debug)]
pub struct AimerInternals {
    pub plan: ScreeningPlan,
    /// `V_hat = U_[d](F)`, `p x d`.
    pub v_hat: DMatrix<f64>,
    /// `Lambda_hat = Lambda_[d](F)^{1/2}`, strictly positive and nonincreasing.
    pub lambda_hat: DVector<f64>,
    /// `U_hat = X_new V_hat Lambda_hat^{-1}`, `n x d`.
    pub u_hat: DMatrix<f64>,
}

/// Screening plus the factorization of `F = X_new^T X_A`, kept at full rank
/// so that coefficients for every `d` come from a single SVD.
#[derive(Clone, Debug)]
pub struct AimerFactorization {
    plan: ScreeningPlan,
    sketch: SketchFactorization,
    lambda_hat: DVector<f64>,
    u_hat: DMatrix<f64>,
    /// `Gamma = Lambda_hat^{-1} U_hat^T Y`, one entry per component.
    gamma: DVector<f64>,
}

impl AimerFactorization {
    pub fn new(data: &ExpressionDataset, selection: &Selection) -> Result<Self> {
        let t = marginal_correlations(data);
        let plan = selection.plan(&t.values)?;
        Self::from_plan(data, plan)
    }

    pub fn from_plan(data: &ExpressionDataset, plan: ScreeningPlan) -> Result<Self> {
        if plan.p() != data.p() {
            return Err(Error::dimension(format!(
                "screening plan covers {} columns but data has {}",
                plan.p(),
                data.p()
            )));
        }
        let x_new = linalg::select_columns(&data.x, &plan.permutation);
        let ell = plan.ell();
        let x_a = x_new.columns(0, ell);
        let f = x_new.transpose() * x_a;
        let sketch = approx_eigvecs(&f)?;

        let lambda_hat = sketch.singular_values.map(f64::sqrt);
        let inv = lambda_hat.map(|l| 1.0 / l);
        let u_hat = &x_new * &sketch.left_vectors * DMatrix::from_diagonal(&inv);
        let gamma = (u_hat.transpose() * &data.y).component_mul(&inv);
        Ok(AimerFactorization {
            plan,
            sketch,
            lambda_hat,
            u_hat,
            gamma,
        })
    }

    pub fn plan(&self) -> &ScreeningPlan {
        &self.plan
    }

    /// Largest admissible `d`, the numerical rank of `F`.
    pub fn rank(&self) -> usize {
        self.sketch.rank()
    }

    fn check_d(&self, d: usize) -> Result<()> {
        if d == 0 || d > self.rank() {
            return Err(Error::Rank {
                requested: d,
                available: self.rank(),
            });
        }
        Ok(())
    }

    /// `V_hat Lambda_hat^{-1} U_hat^T Y` with `d` components, returned in
    /// original column order.
    pub fn unthresholded_beta(&self, d: usize) -> Result<DVector<f64>> {
        self.check_d(d)?;
        let v = self.sketch.left_vectors.columns(0, d);
        let permuted = v * self.gamma.rows(0, d);
        let mut beta = DVector::zeros(permuted.len());
        for (pos, &j) in self.plan.permutation.iter().enumerate() {
            beta[j] = permuted[pos];
        }
        Ok(beta)
    }

    pub fn internals(&self, d: usize) -> Result<AimerInternals> {
        self.check_d(d)?;
        Ok(AimerInternals {
            plan: self.plan.clone(),
            v_hat: self.sketch.left_vectors.columns(0, d).into_owned(),
            lambda_hat: self.lambda_hat.rows(0, d).into_owned(),
            u_hat: self.u_hat.columns(0, d).into_owned(),
        })
    }

    pub(crate) fn hyperparams(&self, selection: &Selection, d: usize, b: f64) -> HyperParams {
        HyperParams {
            selection: Some(*selection),
            t_star: Some(self.plan.threshold),
            ell: Some(self.plan.ell()),
            b: Some(b),
            d: Some(d),
            ..HyperParams::default()
        }
    }
}

/// Screens with `selection`, regresses on `d` approximate principal
/// components of the sketched Gram matrix, then hard-thresholds at `b`.
pub fn fit_aimer(
    data: &ExpressionDataset,
    selection: &Selection,
    d: usize,
    b: f64,
) -> Result<(FitResult, AimerInternals)> {
    if !(b >= 0.0) {
        return Err(Error::validation(format!("threshold b must be >= 0, got {b}")));
    }
    let fac = AimerFactorization::new(data, selection)?;
    let beta = hard_threshold(&fac.unthresholded_beta(d)?, b);
    let fit = FitResult::new(
        Method::Aimer,
        beta,
        data.centering.clone(),
        fac.hyperparams(selection, d, b),
    );
    Ok((fit, fac.internals(d)?))
}

/// As [`fit_aimer`], with `b` set to the quantile `level` of the
/// unthresholded `|beta|` (level 0 keeps every nonzero coefficient).
pub fn fit_aimer_at_level(data: &ExpressionDataset, selection: &Selection, d: usize, level: f64) -> Result<FitResult> {
    let fac = AimerFactorization::new(data, selection)?;
    let raw = fac.unthresholded_beta(d)?;
    let b = threshold_at_level(&raw, level)?;
    let mut hp = fac.hyperparams(selection, d, b);
    hp.b_quantile = Some(level);
    Ok(FitResult::new(Method::Aimer, hard_threshold(&raw, b), data.centering.clone(), hp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_pcr, fit_spc};
    use crate::screening::center;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_data(n: usize, p: usize, seed: u64) -> ExpressionDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let noise = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let y = x.column(0) * 2.0 - x.column(1) + noise * 0.5;
        center(&x, &y, None).unwrap()
    }

    fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).amax() / b.amax()
    }

    #[test]
    fn quantile_level_thresholds() {
        let data = random_data(30, 12, 5);
        let sel = Selection::Count(8);
        let none = fit_aimer_at_level(&data, &sel, 2, 0.0).unwrap();
        assert_eq!(none.hyperparams.b, Some(0.0));
        assert_eq!(none.selected_genes.len(), 12);
        // Level 0.5 over 12 values sits between the 6th and 7th smallest.
        let half = fit_aimer_at_level(&data, &sel, 2, 0.5).unwrap();
        assert_eq!(half.selected_genes.len(), 6);
        assert!(half.beta.iter().filter(|v| **v != 0.0).all(|v| v.abs() > half.hyperparams.b.unwrap()));
        assert!(fit_aimer_at_level(&data, &sel, 2, 1.0).is_err());
    }

    #[test]
    fn all_columns_reduces_to_pcr() {
        let data = random_data(20, 6, 1);
        for d in 1..=6 {
            let (fit, internals) = fit_aimer(&data, &Selection::Threshold(0.0), d, 0.0).unwrap();
            let pcr = fit_pcr(&data, d).unwrap();
            assert!(rel_err(&fit.beta, &pcr.beta) < 1e-8, "d = {d}");
            // With F = X^T X, U_hat has orthonormal columns.
            let gram = internals.u_hat.transpose() * &internals.u_hat;
            assert!((gram - DMatrix::identity(d, d)).amax() < 1e-8);
        }
    }

    #[test]
    fn large_threshold_gives_zero_vector() {
        let data = random_data(15, 8, 2);
        let (raw, _) = fit_aimer(&data, &Selection::Count(3), 2, 0.0).unwrap();
        let b = raw.beta.amax();
        let (fit, _) = fit_aimer(&data, &Selection::Count(3), 2, b).unwrap();
        assert!(fit.beta.iter().all(|v| *v == 0.0));
        assert!(fit.selected_genes.is_empty());
    }

    #[test]
    fn restricted_columns_reduce_to_spc() {
        let data = random_data(25, 12, 3);
        let selection = Selection::Count(4);
        let spc = fit_spc(&data, &selection, 2).unwrap();
        let plan = selection.plan(&marginal_correlations(&data).values).unwrap();
        let sub = data.select_columns(&plan.selected);
        let (fit, _) = fit_aimer(&sub, &Selection::All, 2, 0.0).unwrap();
        for (k, &j) in plan.selected.iter().enumerate() {
            assert!((fit.beta[k] - spc.beta[j]).abs() < 1e-8 * spc.beta.amax());
        }
    }

    #[test]
    fn internals_follow_definitions() {
        let data = random_data(30, 40, 4);
        let (_, int) = fit_aimer(&data, &Selection::Count(10), 3, 0.0).unwrap();
        assert_eq!(int.v_hat.shape(), (40, 3));
        assert_eq!(int.u_hat.shape(), (30, 3));
        assert!(int.lambda_hat.iter().all(|l| *l > 0.0));
        assert!(int.lambda_hat[0] >= int.lambda_hat[1] && int.lambda_hat[1] >= int.lambda_hat[2]);
        let x_new = linalg::select_columns(&data.x, &int.plan.permutation);
        let expect = &x_new * &int.v_hat * DMatrix::from_diagonal(&int.lambda_hat.map(|l| 1.0 / l));
        assert!((expect - &int.u_hat).amax() < 1e-12);
    }

    #[test]
    fn too_many_components_names_the_maximum() {
        let data = random_data(20, 10, 5);
        match fit_aimer(&data, &Selection::Count(3), 4, 0.0) {
            Err(Error::Rank { requested, available }) => {
                assert_eq!(requested, 4);
                assert_eq!(available, 3);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
        assert!(matches!(
            fit_aimer(&data, &Selection::Threshold(1.0), 1, 0.0),
            Err(Error::EmptyScreen { .. })
        ));
    }
}
