//! Latent factor model: `X = U_G Lambda_G V_G^T + sigma0 E`,
//! `Y = U_K Theta + sigma1 Z`, together with its population quantities and
//! an audit of the screening assumption.

mod audit;
mod loadings;
mod presets;

pub use audit::{
    assumption_fnr, audit, format_audit_table, neighborhood_precision, sparsify_top_k, AuditRow, FnrReport,
    SparsePrecision,
};
pub use loadings::build_loadings;
pub use presets::{simulation_config, SIM4_LAMBDA1_GRID};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::screening::RawDataset;

/// Zero tests on population quantities, which vanish exactly by construction.
pub const POPULATION_ZERO_TOL: f64 = 1e-12;

/// Parameters of the generative model. Indices are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LatentFactorConfig {
    pub n: usize,
    pub p: usize,
    /// Factor strengths `lambda_1 >= ... >= lambda_G > 0`.
    pub lambdas: Vec<f64>,
    /// `K`: the response depends on the first `K` factors.
    pub response_factors: usize,
    /// `Theta`, length `K`.
    pub theta: Vec<f64>,
    pub sigma0: f64,
    pub sigma1: f64,
    /// Support block of each of the `G` factors; see [`build_loadings`].
    pub blocks: Vec<Vec<usize>>,
    pub seed: u64,
}

impl LatentFactorConfig {
    pub fn factors(&self) -> usize {
        self.lambdas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.factors();
        if self.n == 0 || self.p == 0 {
            return Err(Error::validation("n and p must be positive"));
        }
        if g == 0 {
            return Err(Error::validation("at least one factor is required"));
        }
        if g > self.p {
            return Err(Error::validation(format!("G = {g} exceeds p = {}", self.p)));
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::validation("factor strengths must be positive and finite"));
        }
        if self.lambdas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::validation("factor strengths must be nonincreasing"));
        }
        if self.response_factors == 0 || self.response_factors > g {
            return Err(Error::validation(format!(
                "K = {} must lie in 1..={g}",
                self.response_factors
            )));
        }
        if self.theta.len() != self.response_factors {
            return Err(Error::validation(format!(
                "theta has {} entries but K = {}",
                self.theta.len(),
                self.response_factors
            )));
        }
        if !(self.sigma0 > 0.0) || !(self.sigma1 > 0.0) {
            return Err(Error::validation("sigma0 and sigma1 must be positive"));
        }
        if self.blocks.len() != g {
            return Err(Error::validation(format!(
                "{} support blocks for {g} factors",
                self.blocks.len()
            )));
        }
        Ok(())
    }

    /// `V_G`, `p x G` with orthonormal columns.
    pub fn loadings(&self) -> Result<DMatrix<f64>> {
        self.validate()?;
        build_loadings(self.p, &self.blocks)
    }

    /// Population covariance `Sigma_xx = V diag(lambda) V^T + sigma0^2 I`.
    pub fn sigma_xx(&self) -> Result<DMatrix<f64>> {
        let v = self.loadings()?;
        let lam = DVector::from_row_slice(&self.lambdas);
        let mut s = &v * DMatrix::from_diagonal(&lam) * v.transpose();
        for j in 0..self.p {
            s[(j, j)] += self.sigma0 * self.sigma0;
        }
        Ok(s)
    }

    /// Population variance of `y`: `|Theta|^2 + sigma1^2`.
    pub fn response_variance(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum::<f64>() + self.sigma1 * self.sigma1
    }

    /// Irreducible prediction error `Var(y | x) = Var(y) - Sigma_xy^T beta`.
    pub fn noise_floor(&self) -> Result<f64> {
        let sxy = population_marginal_cov(self)?;
        let beta = population_beta(self)?;
        Ok(self.response_variance() - sxy.dot(&beta))
    }
}

/// One draw from the model together with its population truth.
#[derive(Clone, Debug)]
pub struct SimulatedInstance {
    pub config: LatentFactorConfig,
    /// Uncentered design, `n x p`.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub true_beta: DVector<f64>,
    pub true_sigma_xy: DVector<f64>,
    pub loadings: DMatrix<f64>,
    /// `{j : beta_j != 0}`.
    pub support_beta: Vec<usize>,
    /// `{j : (Sigma_xy)_j != 0}`.
    pub support_sigma: Vec<usize>,
}

impl SimulatedInstance {
    pub fn raw(&self) -> RawDataset {
        RawDataset::new(self.x.clone(), self.y.clone(), None).expect("simulated shapes agree")
    }
}

pub fn population_support(v: &DVector<f64>) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.abs() > POPULATION_ZERO_TOL)
        .map(|(j, _)| j)
        .collect()
}

/// Draws `X` and `Y`. Gaussian draws are taken row by row in the order
/// `U` (n x G), `E` (n x p), `Z` (n) from a ChaCha8 stream seeded with
/// `config.seed`, so output is bitwise reproducible.
pub fn simulate(config: &LatentFactorConfig) -> Result<SimulatedInstance> {
    let v = config.loadings()?;
    let (n, p, g, k) = (config.n, config.p, config.factors(), config.response_factors);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };

    let mut u = DMatrix::zeros(n, g);
    for i in 0..n {
        for f in 0..g {
            u[(i, f)] = draw();
        }
    }
    let mut e = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            e[(i, j)] = draw();
        }
    }
    let z = DVector::from_iterator(n, (0..n).map(|_| draw()));

    let sqrt_lam = DVector::from_iterator(g, config.lambdas.iter().map(|l| l.sqrt()));
    let x = &u * DMatrix::from_diagonal(&sqrt_lam) * v.transpose() + e * config.sigma0;
    let theta = DVector::from_row_slice(&config.theta);
    let y = u.columns(0, k) * theta + z * config.sigma1;

    let true_sigma_xy = population_marginal_cov(config)?;
    let true_beta = population_beta(config)?;
    Ok(SimulatedInstance {
        config: config.clone(),
        support_beta: population_support(&true_beta),
        support_sigma: population_support(&true_sigma_xy),
        x,
        y,
        true_beta,
        true_sigma_xy,
        loadings: v,
    })
}

/// `Sigma_xy = V_K Lambda_K Theta` with `Lambda_K = diag(sqrt(lambda_k))`.
pub fn population_marginal_cov(config: &LatentFactorConfig) -> Result<DVector<f64>> {
    let v = config.loadings()?;
    let k = config.response_factors;
    let w = DVector::from_fn(k, |i, _| config.lambdas[i].sqrt() * config.theta[i]);
    Ok(v.columns(0, k) * w)
}

/// `beta = V_K L_K^{-1} Lambda_K Theta` with `L_K = diag(lambda_k + sigma0^2)`.
pub fn population_beta(config: &LatentFactorConfig) -> Result<DVector<f64>> {
    let v = config.loadings()?;
    let k = config.response_factors;
    let s2 = config.sigma0 * config.sigma0;
    let w = DVector::from_fn(k, |i, _| {
        let l = config.lambdas[i];
        l.sqrt() / (l + s2) * config.theta[i]
    });
    Ok(v.columns(0, k) * w)
}

/// Returns `Theta` with `theta_K` chosen so that `(Sigma_xy)_j = 0` on every
/// target gene, given `theta_1..theta_{K-1}`.
///
/// On a target `j` this requires
/// `theta_K = -sum_{k<K} v_jk sqrt(lambda_k) theta_k / (v_jK sqrt(lambda_K))`,
/// which must agree across all targets.
pub fn solve_theta_for_zero_marginals(config: &LatentFactorConfig, targets: &[usize]) -> Result<Vec<f64>> {
    let v = config.loadings()?;
    let k = config.response_factors;
    if targets.is_empty() {
        return Err(Error::validation("no target genes given"));
    }
    if k < 2 {
        return Err(Error::Infeasible(
            "cancellation needs at least two response factors".into(),
        ));
    }
    let last = k - 1;
    let sqrt_last = config.lambdas[last].sqrt();
    let mut solved: Option<f64> = None;
    for &j in targets {
        if j >= config.p {
            return Err(Error::validation(format!("target {j} out of range")));
        }
        let earlier: f64 = (0..last)
            .map(|f| v[(j, f)] * config.lambdas[f].sqrt() * config.theta[f])
            .sum();
        let own = v[(j, last)] * sqrt_last;
        if own.abs() <= POPULATION_ZERO_TOL {
            return Err(Error::Infeasible(format!(
                "target {j} is outside the support of factor {}",
                last + 1
            )));
        }
        if earlier.abs() <= POPULATION_ZERO_TOL {
            return Err(Error::Infeasible(format!(
                "target {j} does not overlap earlier response factors; only theta_K = 0 cancels"
            )));
        }
        let theta = -earlier / own;
        match solved {
            None => solved = Some(theta),
            Some(prev) if (prev - theta).abs() <= 1e-9 * prev.abs().max(1.0) => {}
            Some(prev) => {
                return Err(Error::Infeasible(format!(
                    "targets need different values of theta_K ({prev} vs {theta})"
                )))
            }
        }
    }
    let mut theta = config.theta.clone();
    theta[last] = solved.expect("targets nonempty");
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(blocks: Vec<Vec<usize>>, lambdas: Vec<f64>, theta: Vec<f64>) -> LatentFactorConfig {
        LatentFactorConfig {
            n: 50,
            p: 20,
            response_factors: theta.len(),
            lambdas,
            theta,
            sigma0: 0.3,
            sigma1: 0.1,
            blocks,
            seed: 9,
        }
    }

    #[test]
    fn same_seed_same_draw() {
        let c = base(vec![(0..5).collect()], vec![4.0], vec![1.0]);
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        let mut c2 = c.clone();
        c2.seed += 1;
        assert_ne!(simulate(&c2).unwrap().x, a.x);
    }

    #[test]
    fn zero_theta_means_no_signal() {
        let c = base(vec![(0..5).collect(), (5..10).collect()], vec![4.0, 2.0], vec![0.0, 0.0]);
        assert!(population_marginal_cov(&c).unwrap().iter().all(|v| *v == 0.0));
        assert!(population_beta(&c).unwrap().iter().all(|v| *v == 0.0));
        let inst = simulate(&c).unwrap();
        assert!(inst.support_beta.is_empty());
    }

    #[test]
    fn single_factor_marginal_cov() {
        let c = base(vec![(0..5).collect()], vec![9.0], vec![2.0]);
        let s = population_marginal_cov(&c).unwrap();
        for j in 0..20 {
            let expect = if j < 5 { 3.0 * 2.0 / 5f64.sqrt() } else { 0.0 };
            assert!((s[j] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn single_factor_beta_matches_inverse_covariance() {
        let c = base(vec![(2..6).collect()], vec![5.0], vec![1.5]);
        let beta = population_beta(&c).unwrap();
        let oracle = c.sigma_xx().unwrap().try_inverse().unwrap() * population_marginal_cov(&c).unwrap();
        assert!((&beta - oracle).amax() < 1e-12);
        let v = c.loadings().unwrap();
        let closed = v.column(0) * (5f64.sqrt() * 1.5 / (5.0 + 0.09));
        assert!((&beta - closed).amax() < 1e-14);
    }

    #[test]
    fn vanishing_feature_noise_limit() {
        let mut c = base(vec![(0..4).collect(), (4..8).collect()], vec![3.0, 2.0], vec![1.0, -1.0]);
        c.sigma0 = 1e-9;
        let beta = population_beta(&c).unwrap();
        let v = c.loadings().unwrap();
        let limit = v.column(0) / 3f64.sqrt() - v.column(1) / 2f64.sqrt();
        assert!((beta - limit).amax() < 1e-12);
    }

    #[test]
    fn theta_solve_cancels_marginals() {
        let c = base(
            vec![(0..5).collect(), (5..15).collect(), (10..15).collect()],
            vec![10.0, 5.0, 1.0],
            vec![1.0, 1.0, 0.0],
        );
        let theta = solve_theta_for_zero_marginals(&c, &(10..15).collect::<Vec<_>>()).unwrap();
        assert!((theta[2] + 5f64.sqrt()).abs() < 1e-12);

        // Brute force: recompute Sigma_xy entry by entry from its definition.
        let solved = LatentFactorConfig { theta, ..c };
        let v = solved.loadings().unwrap();
        for j in 0..20 {
            let sxy: f64 = (0..3).map(|k| v[(j, k)] * solved.lambdas[k].sqrt() * solved.theta[k]).sum();
            if (10..15).contains(&j) {
                assert!(sxy.abs() < 1e-12);
            } else if j < 10 {
                assert!(sxy.abs() > 0.1);
            }
        }
        let beta = population_beta(&solved).unwrap();
        assert!((10..15).all(|j| beta[j].abs() > 1e-3));
        let inst = simulate(&solved).unwrap();
        assert_eq!(inst.support_beta, (0..15).collect::<Vec<_>>());
        assert_eq!(inst.support_sigma, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn theta_solve_outside_overlap_fails() {
        let c = base(
            vec![(0..5).collect(), (5..10).collect()],
            vec![10.0, 5.0],
            vec![1.0, 0.0],
        );
        assert!(matches!(
            solve_theta_for_zero_marginals(&c, &[6]),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn theta_solve_inconsistent_ratio_fails() {
        // v_j1 / v_j2 differs between genes 0 and 3.
        let c = base(vec![(0..4).collect(), vec![0, 1, 2]], vec![4.0, 1.0], vec![1.0, 0.0]);
        assert!(matches!(
            solve_theta_for_zero_marginals(&c, &[0, 3]),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn validation_errors() {
        let mut c = base(vec![(0..5).collect()], vec![4.0], vec![1.0]);
        c.lambdas = vec![-1.0];
        assert!(c.validate().is_err());
        let mut c = base(vec![(0..5).collect(), (5..9).collect()], vec![1.0, 4.0], vec![1.0, 1.0]);
        assert!(c.validate().is_err());
        c.lambdas = vec![4.0, 1.0];
        c.theta = vec![1.0];
        assert!(c.validate().is_err());
    }
}
