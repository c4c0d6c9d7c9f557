//! Maximum likelihood fitting of the dof parameters by direct search.

use crate::error::Result;
use crate::optim::{nelder_mead, SimplexOptions};

use super::density::{log_likelihood, DensityEvalConfig};
use super::types::{CorrelationMatrix, DofVector, GroupConfig, PseudoSample};
use super::workspace::DensityWorkspace;

#[derive(Debug, Clone)]
pub struct MleOptions {
    pub simplex: SimplexOptions,
    pub density: DensityEvalConfig,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            simplex: SimplexOptions {
                max_iters: 400,
                x_tol: 1e-5,
                f_tol: 1e-7,
                init_step: 1.0,
            },
            density: DensityEvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub dof: DofVector,
    pub log_lik: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Maximize the copula log-likelihood over the `m` free group dof parameters
/// with a derivative-free simplex search. Returns the best point found even
/// when the iteration budget runs out (flagged via `converged`).
pub fn mle_fit(
    sample: &PseudoSample,
    config: &GroupConfig,
    corr: &CorrelationMatrix,
    init: &DofVector,
    opts: &MleOptions,
) -> Result<MleFit> {
    let init_groups = config.collapse(init)?;
    let (lo, hi) = init.bounds();
    // keep the optimizer strictly inside the open support
    let margin = 1e-6 * (hi - lo);
    let lower = vec![lo + margin; init_groups.len()];
    let upper = vec![hi - margin; init_groups.len()];

    let mut ws = DensityWorkspace::new(sample);
    let objective = |g: &[f64]| -> Result<f64> {
        let values = config.expand(g)?;
        let dof = DofVector::new(values, lo, hi)?;
        Ok(-log_likelihood(sample, &dof, corr, &mut ws, &opts.density)?)
    };

    let out = nelder_mead(objective, &init_groups, &lower, &upper, &opts.simplex)?;
    let dof = DofVector::new(config.expand(&out.x)?, lo, hi)?;
    Ok(MleFit {
        dof,
        log_lik: -out.f,
        converged: out.converged,
        evaluations: out.evaluations,
    })
}
