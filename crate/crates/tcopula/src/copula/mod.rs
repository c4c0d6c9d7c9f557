//! The t-copula family: domain types, simulation, the integral density and
//! maximum likelihood fitting of the dof parameters.

mod density;
mod mle;
mod simulate;
mod types;
mod workspace;

pub use density::{log_density, log_likelihood, standard_t_log_density, DensityEvalConfig};
pub use mle::{mle_fit, MleFit, MleOptions};
pub use simulate::simulate;
pub use types::{
    CorrelationMatrix, DofVector, GroupConfig, PseudoSample, DEFAULT_NU_MAX, DEFAULT_NU_MIN,
};
pub use workspace::DensityWorkspace;

/// Deterministic pairwise-tree summation; the result does not depend on any
/// chunking of the input, only on its order.
pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        let mut s = 0.0;
        for &x in v {
            s += x;
        }
        s
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}
