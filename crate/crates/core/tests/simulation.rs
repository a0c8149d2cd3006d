//! Large-sample behaviour of the latent-factor simulator.

use aimer::simulation::{population_marginal_cov, simulate, simulation_config, LatentFactorConfig};
use nalgebra::{DMatrix, DVector};

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let means = x.row_mean();
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - means[j])
}

fn sample_correlations(x: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
    let xc = centered(x);
    let yc = y.add_scalar(-y.mean());
    (0..x.ncols())
        .map(|j| {
            let col = xc.column(j);
            col.dot(&yc) / (col.norm() * yc.norm())
        })
        .collect()
}

#[test]
fn marginal_correlations_converge_to_population() {
    for seed in 0..5 {
        let mut cfg = simulation_config(1, 10.0, seed).unwrap();
        cfg.n = 10_000;
        cfg.p = 40;
        let inst = simulate(&cfg).unwrap();
        let sxy = population_marginal_cov(&cfg).unwrap();
        let v = cfg.loadings().unwrap();
        let s0 = cfg.sigma0 * cfg.sigma0;
        let var_y: f64 = cfg.theta.iter().map(|t| t * t).sum::<f64>() + cfg.sigma1 * cfg.sigma1;
        let empirical = sample_correlations(&inst.x, &inst.y);
        let worst = (0..cfg.p)
            .map(|j| {
                let var_x: f64 = (0..cfg.factors()).map(|k| cfg.lambdas[k] * v[(j, k)].powi(2)).sum::<f64>() + s0;
                (empirical[j] - sxy[j] / (var_x * var_y).sqrt()).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "seed {seed}: max deviation {worst}");
    }
}

#[test]
fn noiseless_single_factor_covariance() {
    let cfg = LatentFactorConfig {
        n: 10_000,
        p: 12,
        lambdas: vec![4.0],
        response_factors: 1,
        theta: vec![1.0],
        sigma0: 1e-6,
        sigma1: 0.1,
        blocks: vec![vec![1, 2, 3, 4, 5, 8]],
        seed: 3,
    };
    let inst = simulate(&cfg).unwrap();
    let xc = centered(&inst.x);
    let sample = xc.transpose() * &xc / cfg.n as f64;
    let v1 = inst.loadings.column(0);
    let population = v1 * v1.transpose() * cfg.lambdas[0];
    let rel = (&sample - &population).norm() / population.norm();
    assert!(rel < 0.05, "relative Frobenius error {rel}");
}
