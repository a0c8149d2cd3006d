use nalgebra::DVector;

use super::{FitResult, HyperParams, Method};
use crate::error::{Error, Result};
use crate::linalg::ThinSvd;
use crate::screening::ExpressionDataset;

/// Ridge solutions for any penalty from one SVD:
/// `beta(lambda) = V diag(s / (s^2 + lambda)) U^T Y`.
#[derive(Clone, Debug)]
pub struct RidgePath {
    svd: ThinSvd,
    uty: DVector<f64>,
    p: usize,
}

impl RidgePath {
    pub fn new(data: &ExpressionDataset) -> Self {
        let svd = ThinSvd::new(&data.x).truncated();
        let uty = svd.u.transpose() * &data.y;
        RidgePath {
            svd,
            uty,
            p: data.p(),
        }
    }

    pub fn rank(&self) -> usize {
        self.svd.singular_values.len()
    }

    pub fn largest_singular_value(&self) -> f64 {
        self.svd.largest()
    }

    pub fn beta(&self, lambda: f64) -> Result<DVector<f64>> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::validation(format!("ridge penalty must be finite and >= 0, got {lambda}")));
        }
        if lambda == 0.0 && self.rank() < self.p {
            return Err(Error::validation(format!(
                "ridge with zero penalty needs full column rank, but rank is {} < p = {}",
                self.rank(),
                self.p
            )));
        }
        let s = &self.svd.singular_values;
        let w = DVector::from_fn(s.len(), |k, _| s[k] / (s[k] * s[k] + lambda) * self.uty[k]);
        Ok(&self.svd.v * w)
    }
}

/// Minimizes `|Y - X beta|^2 + lambda |beta|^2`.
pub fn fit_ridge(data: &ExpressionDataset, lambda: f64) -> Result<FitResult> {
    let beta = RidgePath::new(data).beta(lambda)?;
    Ok(FitResult::new(
        Method::Ridge,
        beta,
        data.centering.clone(),
        HyperParams {
            lambda: Some(lambda),
            ..HyperParams::default()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screening::center;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn data(n: usize, p: usize, seed: u64) -> ExpressionDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)) + x.column(0);
        center(&x, &y, None).unwrap()
    }

    fn objective(d: &ExpressionDataset, beta: &DVector<f64>, lambda: f64) -> f64 {
        (&d.y - &d.x * beta).norm_squared() + lambda * beta.norm_squared()
    }

    #[test]
    fn matches_normal_equations() {
        let d = data(10, 4, 1);
        let fit = fit_ridge(&d, 1.0).unwrap();
        let a = d.x.transpose() * &d.x + DMatrix::identity(4, 4);
        let oracle = a.lu().solve(&(d.x.transpose() * &d.y)).unwrap();
        assert!((&fit.beta - oracle).amax() < 1e-10);
    }

    #[test]
    fn stationarity_and_finite_differences() {
        let d = data(12, 6, 2);
        let lambda = 0.7;
        let beta = fit_ridge(&d, lambda).unwrap().beta;
        let grad = d.x.transpose() * (&d.x * &beta - &d.y) + &beta * lambda;
        assert!(grad.amax() < 1e-8);
        let h = 1e-6;
        for j in 0..6 {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (objective(&d, &up, lambda) - objective(&d, &down, lambda)) / (2.0 * h);
            assert!(fd.abs() < 1e-5, "coordinate {j}: {fd}");
        }
    }

    #[test]
    fn norm_shrinks_with_penalty() {
        let d = data(15, 5, 3);
        let path = RidgePath::new(&d);
        let norms: Vec<f64> = [0.1, 1.0, 10.0, 100.0, 1e4, 1e8]
            .iter()
            .map(|&l| path.beta(l).unwrap().norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]));
        assert!(norms[5] < 1e-5);
    }

    #[test]
    fn zero_penalty() {
        // A centered n x n design has rank n - 1, so build the square case
        // directly: square invertible X gives beta = X^{-1} Y.
        let x = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let y = DVector::from_row_slice(&[1.0, -2.0, 0.5]);
        let square = ExpressionDataset {
            x: x.clone(),
            y: y.clone(),
            labels: crate::screening::default_labels(3),
            centering: crate::screening::Centering {
                column_means: vec![0.0; 3],
                response_mean: 0.0,
            },
        };
        let oracle = x.lu().solve(&y).unwrap();
        assert!((fit_ridge(&square, 0.0).unwrap().beta - oracle).amax() < 1e-10);

        let tall = data(8, 3, 5);
        let ols = (tall.x.transpose() * &tall.x).lu().solve(&(tall.x.transpose() * &tall.y)).unwrap();
        assert!((fit_ridge(&tall, 0.0).unwrap().beta - ols).amax() < 1e-10);

        let wide = data(5, 8, 6);
        assert!(matches!(fit_ridge(&wide, 0.0), Err(Error::Validation(_))));
        assert!(matches!(fit_ridge(&tall, -1.0), Err(Error::Validation(_))));
    }
}
