use super::{solve_theta_for_zero_marginals, LatentFactorConfig};
use crate::error::{Error, Result};

/// Values of `lambda_1` swept in simulation 4.
pub const SIM4_LAMBDA1_GRID: [f64; 4] = [5.0, 10.0, 25.0, 50.0];

const N: usize = 200;
const P: usize = 1000;
const SIGMA1: f64 = 0.1;

fn sigma0() -> f64 {
    0.1f64.sqrt()
}

fn blank(lambdas: Vec<f64>, theta: Vec<f64>, blocks: Vec<Vec<usize>>, seed: u64) -> LatentFactorConfig {
    LatentFactorConfig {
        n: N,
        p: P,
        response_factors: theta.len(),
        lambdas,
        theta,
        sigma0: sigma0(),
        sigma1: SIGMA1,
        blocks,
        seed,
    }
}

/// Model parameters of the numbered simulation studies (1 to 5).
///
/// * 1: `K = G = 3`, `lambda = (10, 5, 1)`. Factor blocks are 0..5, 5..15
///   and {2, 3, 4} + 10..15, and `theta_3` is solved so that `Sigma_xy`
///   vanishes on genes 10..15: 15 predictive genes, 10 with signal in their
///   marginals. Factor 3 also touching genes 2 to 4 keeps the loadings of
///   those 10 genes at full rank 3.
/// * 2: `K = G = 2`, `lambda = (10, 1)`, `theta = (1, 1)`, factor 1 on
///   genes 0..10 and factor 2 splitting them in halves. All 10 predictive
///   genes have nonzero marginals.
/// * 3: as 2 with `theta_2 = 3`; genes 5..10 keep a small marginal.
/// * 4: `K = G = 2`, `lambda = (lambda1, 1)`, factor 2 on genes 5..10 and
///   `theta_2` solved to cancel the marginals there.
/// * 5: simulation 4 at `lambda1 = 10`.
///
/// `lambda1` is only read for simulation 4.
pub fn simulation_config(sim: u8, lambda1: f64, seed: u64) -> Result<LatentFactorConfig> {
    match sim {
        1 => {
            let c = blank(
                vec![10.0, 5.0, 1.0],
                vec![1.0, 1.0, 0.0],
                vec![(0..5).collect(), (5..15).collect(), [2, 3, 4].into_iter().chain(10..15).collect()],
                seed,
            );
            let theta = solve_theta_for_zero_marginals(&c, &(10..15).collect::<Vec<_>>())?;
            Ok(LatentFactorConfig { theta, ..c })
        }
        2 | 3 => {
            let theta2 = if sim == 2 { 1.0 } else { 3.0 };
            Ok(blank(
                vec![10.0, 1.0],
                vec![1.0, theta2],
                vec![(0..10).collect(), (0..5).collect()],
                seed,
            ))
        }
        4 | 5 => {
            let l1 = if sim == 5 { 10.0 } else { lambda1 };
            if !(l1 >= 1.0) {
                return Err(Error::validation(format!("lambda1 = {l1} must be at least lambda2 = 1")));
            }
            let c = blank(
                vec![l1, 1.0],
                vec![1.0, 0.0],
                vec![(0..10).collect(), (5..10).collect()],
                seed,
            );
            let theta = solve_theta_for_zero_marginals(&c, &(5..10).collect::<Vec<_>>())?;
            Ok(LatentFactorConfig { theta, ..c })
        }
        _ => Err(Error::validation(format!("simulation id {sim} is not in 1..=5"))),
    }
}
