//! Calibration and Bayesian model choice for t-copula families.
//!
//! The crate covers the full pipeline for dependence modeling of financial
//! return data with standard, grouped and generalized (multi-dof) t-copulas:
//!
//! - [`pipeline`]: log-returns, GARCH(1,1) filtering, pseudo-observations and
//!   the Kendall-tau correlation matrix;
//! - [`copula`]: simulation, the integral copula density, log-likelihood and
//!   maximum likelihood fitting of the dof parameters;
//! - [`mcmc`]: single-component Metropolis-Hastings over dof vectors with
//!   proposal tuning and chain diagnostics;
//! - [`selection`]: model family enumeration, RISE evidence, DIC, posterior
//!   model probabilities and likelihood-ratio tests;
//! - [`risk`]: Monte Carlo conditional Value-at-Risk for currency portfolios.

pub mod copula;
pub mod error;
pub mod mcmc;
pub mod optim;
pub mod pipeline;
pub mod quad;
pub mod risk;
pub mod selection;
pub mod special;

pub use error::{Error, Result};
pub use quad::QuadratureResult;
