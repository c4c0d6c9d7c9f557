//! GARCH(1,1) filtering of return series by Gaussian quasi-maximum
//! likelihood.

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, SimplexOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Parameters of sigma_t^2 = omega + alpha (x_{t-1} - mu)^2 + beta sigma_{t-1}^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchParams {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Variance used to start the recursion at t = 0.
    pub sigma0_sq: f64,
}

impl GarchParams {
    pub fn new(mu: f64, omega: f64, alpha: f64, beta: f64, sigma0_sq: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::domain(format!("omega must be positive, got {omega}")));
        }
        if !(0.0..1.0).contains(&alpha) || !(0.0..1.0).contains(&beta) {
            return Err(Error::domain(format!(
                "alpha and beta must lie in [0, 1), got {alpha}, {beta}"
            )));
        }
        if alpha + beta >= 1.0 {
            return Err(Error::domain(format!(
                "stationarity requires alpha + beta < 1, got {}",
                alpha + beta
            )));
        }
        if !(sigma0_sq > 0.0) {
            return Err(Error::domain(format!(
                "initial variance must be positive, got {sigma0_sq}"
            )));
        }
        Ok(GarchParams {
            mu,
            omega,
            alpha,
            beta,
            sigma0_sq,
        })
    }
}

/// Fitted parameters plus fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GarchFit {
    pub params: GarchParams,
    pub log_lik: f64,
    pub converged: bool,
    pub evaluations: usize,
}

fn variance_path(returns: &[f64], p: &GarchParams) -> Vec<f64> {
    let mut sig = Vec::with_capacity(returns.len());
    let mut s2 = p.sigma0_sq;
    sig.push(s2);
    for t in 1..returns.len() {
        let d = returns[t - 1] - p.mu;
        s2 = p.omega + p.alpha * d * d + p.beta * s2;
        sig.push(s2);
    }
    sig
}

fn neg_log_lik(returns: &[f64], p: &GarchParams) -> f64 {
    let mut nll = 0.0;
    let mut s2 = p.sigma0_sq;
    for t in 0..returns.len() {
        if t > 0 {
            let d = returns[t - 1] - p.mu;
            s2 = p.omega + p.alpha * d * d + p.beta * s2;
        }
        if !(s2 > 0.0) || !s2.is_finite() {
            return f64::INFINITY;
        }
        let d = returns[t] - p.mu;
        nll += 0.5 * (s2.ln() + d * d / s2);
    }
    nll
}

fn sample_moments(returns: &[f64]) -> (f64, f64) {
    let k = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / k;
    let var = returns.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    (mean, var)
}

/// Fit GARCH(1,1) with jointly estimated mean by Gaussian quasi-maximum
/// likelihood; the recursion starts at the sample variance.
///
/// The search runs in scale-free coordinates (mu in units of the sample
/// standard deviation, omega in units of the sample variance) so that one
/// simplex step size suits every series.
pub fn garch_fit(returns: &[f64]) -> Result<GarchFit> {
    if returns.len() < 30 {
        return Err(Error::data(format!(
            "need at least 30 returns to fit, got {}",
            returns.len()
        )));
    }
    let (mean, var) = sample_moments(returns);
    if !(var > 0.0) {
        return Err(Error::data("returns have zero variance".to_string()));
    }
    let sd = var.sqrt();

    let unpack = |theta: &[f64]| -> GarchParams {
        GarchParams {
            mu: mean + theta[0] * sd,
            omega: theta[1] * var,
            alpha: theta[2],
            beta: theta[3],
            sigma0_sq: var,
        }
    };
    let objective = |theta: &[f64]| -> Result<f64> {
        let p = unpack(theta);
        if p.alpha + p.beta >= 0.9999 || p.omega <= 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(neg_log_lik(returns, &p))
    };

    let x0 = [0.0, 0.05, 0.05, 0.90];
    let lower = [-10.0, 1e-10, 0.0, 0.0];
    let upper = [10.0, 10.0, 0.9999, 0.9999];
    let opts = SimplexOptions {
        max_iters: 2000,
        x_tol: 1e-7,
        f_tol: 1e-10,
        init_step: 0.05,
    };
    let out = nelder_mead(objective, &x0, &lower, &upper, &opts)?;
    let params = unpack(&out.x);
    if params.alpha + params.beta >= 1.0 || !(params.omega > 0.0) {
        return Err(Error::domain(format!(
            "fitted parameters violate stationarity: alpha + beta = {}",
            params.alpha + params.beta
        )));
    }
    Ok(GarchFit {
        params,
        log_lik: -out.f,
        converged: out.converged,
        evaluations: out.evaluations,
    })
}

/// Conditional standard deviations sigma_t along the observed path.
pub fn garch_volatility(returns: &[f64], params: &GarchParams) -> Result<Vec<f64>> {
    if returns.is_empty() {
        return Err(Error::data("empty return series".to_string()));
    }
    let path = variance_path(returns, params);
    if path.iter().any(|&s2| !(s2 > 0.0) || !s2.is_finite()) {
        return Err(Error::numeric("variance recursion left (0, inf)".to_string()));
    }
    Ok(path.into_iter().map(f64::sqrt).collect())
}

/// Standardized residuals eps_t = (x_t - mu) / sigma_t.
pub fn garch_filter(returns: &[f64], params: &GarchParams) -> Result<Vec<f64>> {
    let sig = garch_volatility(returns, params)?;
    Ok(returns
        .iter()
        .zip(&sig)
        .map(|(&x, &s)| (x - params.mu) / s)
        .collect())
}

/// Simulate a GARCH(1,1) path with Gaussian innovations; useful as a test
/// oracle for parameter recovery.
pub fn garch_simulate(params: &GarchParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::data("need a positive path length".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut s2 = params.sigma0_sq;
    for t in 0..n {
        if t > 0 {
            let d = out[t - 1] - params.mu;
            s2 = params.omega + params.alpha * d * d + params.beta * s2;
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        out.push(params.mu + s2.sqrt() * z);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_validation() {
        assert!(GarchParams::new(0.0, 1e-6, 0.5, 0.6, 1e-4).is_err());
        assert!(GarchParams::new(0.0, -1.0, 0.1, 0.8, 1e-4).is_err());
        assert!(GarchParams::new(0.0, 1e-6, 0.1, 0.8, 1e-4).is_ok());
    }

    #[test]
    fn filter_then_unfilter_reconstructs_returns() {
        let p = GarchParams::new(0.0002, 2e-6, 0.08, 0.9, 1e-4).unwrap();
        let x = garch_simulate(&p, 500, 3).unwrap();
        let eps = garch_filter(&x, &p).unwrap();
        let sig = garch_volatility(&x, &p).unwrap();
        for t in 0..x.len() {
            let back = p.mu + sig[t] * eps[t];
            assert!((back - x[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_variance_when_alpha_beta_zero() {
        let p = GarchParams::new(0.0, 4e-4, 0.0, 0.0, 4e-4).unwrap();
        let x = vec![0.01, -0.02, 0.005, 0.0, 0.03];
        let sig = garch_volatility(&x, &p).unwrap();
        for s in sig {
            assert!((s - 0.02).abs() < 1e-15);
        }
    }

    #[test]
    fn recovers_simulated_parameters() {
        let truth = GarchParams::new(0.0005, 5e-6, 0.10, 0.85, 1e-4).unwrap();
        let x = garch_simulate(&truth, 6000, 42).unwrap();
        let fit = garch_fit(&x).unwrap();
        assert!(fit.converged);
        let p = fit.params;
        assert!((p.alpha - truth.alpha).abs() < 0.05, "alpha = {}", p.alpha);
        assert!((p.beta - truth.beta).abs() < 0.07, "beta = {}", p.beta);
        assert!(
            (p.alpha + p.beta) - (truth.alpha + truth.beta) < 0.05,
            "persistence = {}",
            p.alpha + p.beta
        );
        assert!((p.mu - truth.mu).abs() < 5.0 * 0.01 / (6000f64).sqrt());
    }

    #[test]
    fn fit_beats_truth_in_sample() {
        let truth = GarchParams::new(0.0, 5e-6, 0.1, 0.85, 1e-4).unwrap();
        let x = garch_simulate(&truth, 2000, 9).unwrap();
        let fit = garch_fit(&x).unwrap();
        let truth_ll = -{
            let mut p = truth;
            let (_, var) = super::sample_moments(&x);
            p.sigma0_sq = var;
            super::neg_log_lik(&x, &p)
        };
        assert!(fit.log_lik >= truth_ll - 1e-6);
    }

    #[test]
    fn residuals_are_roughly_standardized() {
        let truth = GarchParams::new(0.0, 5e-6, 0.1, 0.85, 1e-4).unwrap();
        let x = garch_simulate(&truth, 4000, 17).unwrap();
        let fit = garch_fit(&x).unwrap();
        let eps = garch_filter(&x, &fit.params).unwrap();
        let k = eps.len() as f64;
        let mean = eps.iter().sum::<f64>() / k;
        let var = eps.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / k;
        assert!(mean.abs() < 0.05, "mean = {mean}");
        assert!((var - 1.0).abs() < 0.08, "var = {var}");
    }
}
