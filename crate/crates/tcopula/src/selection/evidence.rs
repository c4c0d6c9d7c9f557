//! Evidence and information criteria computed from stored chains: reciprocal
//! importance sampling, DIC, per-sweep posterior model probabilities and the
//! likelihood-ratio test.

use crate::error::{Error, Result};
use crate::mcmc::{PosteriorSample, PriorSpec};
use crate::special::{chi2_sf, log_gamma};
use nalgebra::{Cholesky, DMatrix, DVector};
use std::f64::consts::PI;

/// log(sum(exp(x))) without overflow.
pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Importance density h for the reciprocal importance sampling estimator:
/// a normal or t density fitted to the posterior draws.
#[derive(Debug, Clone)]
pub struct ImportanceDensity {
    mean: DVector<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    log_det: f64,
    /// None is a Gaussian; Some(eta) a multivariate t with eta dof.
    t_dof: Option<f64>,
}

impl ImportanceDensity {
    /// Fit mean and covariance to the stored draws.
    pub fn fit(chain: &PosteriorSample, t_dof: Option<f64>) -> Result<Self> {
        let n = chain.n_sweeps();
        let m = chain.param_count();
        if n < m + 2 {
            return Err(Error::data(format!(
                "{n} draws are too few to fit an {m}-dimensional density"
            )));
        }
        if let Some(eta) = t_dof {
            if !(eta > 2.0) {
                return Err(Error::domain(format!(
                    "t importance density needs dof > 2 for a covariance, got {eta}"
                )));
            }
        }
        let mut mean = DVector::zeros(m);
        for t in 0..n {
            for (k, &v) in chain.draw(t).iter().enumerate() {
                mean[k] += v;
            }
        }
        mean /= n as f64;
        let mut cov = DMatrix::zeros(m, m);
        for t in 0..n {
            let d = DVector::from_row_slice(chain.draw(t)) - &mean;
            cov += &d * d.transpose();
        }
        cov /= (n - 1) as f64;
        let chol = Cholesky::new(cov).ok_or_else(|| {
            Error::numeric(
                "posterior covariance is not positive definite; the chain may be \
                 degenerate, consider the t family or a longer run"
                    .to_string(),
            )
        })?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(ImportanceDensity {
            mean,
            chol,
            log_det,
            t_dof,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Log density at theta.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        let m = self.dim();
        if theta.len() != m {
            return Err(Error::shape(format!(
                "point has {} components, density has {m}",
                theta.len()
            )));
        }
        let d = DVector::from_row_slice(theta) - &self.mean;
        let q = d.dot(&self.chol.solve(&d));
        match self.t_dof {
            None => Ok(-0.5 * (m as f64) * (2.0 * PI).ln() - 0.5 * self.log_det - 0.5 * q),
            Some(eta) => {
                let md = m as f64;
                Ok(log_gamma(0.5 * (eta + md))?
                    - log_gamma(0.5 * eta)?
                    - 0.5 * md * (eta * PI).ln()
                    - 0.5 * self.log_det
                    - 0.5 * (eta + md) * (q / eta).ln_1p())
            }
        }
    }
}

/// How h is chosen in the reciprocal importance sampling estimator.
#[derive(Debug, Clone)]
pub enum EvidenceMode {
    /// Fitted importance density; the default.
    Importance(ImportanceDensity),
    /// h identically one, the classical harmonic mean estimator.
    HarmonicMean,
}

/// Log marginal likelihood log p(y|M) by reciprocal importance sampling:
///
///   1 / p(y|M) ~ (1/N) sum_t h(theta_t) / (L(theta_t) pi(theta_t)),
///
/// evaluated entirely in log space so likelihoods of order e^2000 survive.
pub fn rise_log_evidence(
    chain: &PosteriorSample,
    prior: &PriorSpec,
    mode: &EvidenceMode,
) -> Result<f64> {
    let n = chain.n_sweeps();
    if n == 0 {
        return Err(Error::data("empty chain".to_string()));
    }
    let mut terms = Vec::with_capacity(n);
    for t in 0..n {
        let theta = chain.draw(t);
        let log_h = match mode {
            EvidenceMode::Importance(h) => h.log_density(theta)?,
            EvidenceMode::HarmonicMean => 0.0,
        };
        let log_prior = prior.log_density(theta);
        if !log_prior.is_finite() {
            return Err(Error::domain(format!(
                "draw {t} lies outside the prior support"
            )));
        }
        terms.push(log_h - chain.log_lik()[t] - log_prior);
    }
    Ok(-(logsumexp(&terms) - (n as f64).ln()))
}

/// Deviance information criterion and effective parameter count:
/// DIC = 2 mean[D] - D(mean theta) with D = -2 log L.
///
/// The evaluator supplies the log likelihood at the posterior mean; the
/// per-draw values come from the chain itself.
pub fn dic<F>(chain: &PosteriorSample, mut loglik_at: F) -> Result<(f64, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = chain.n_sweeps();
    if n == 0 {
        return Err(Error::data("empty chain".to_string()));
    }
    let mean_dev = -2.0 * chain.log_lik().iter().sum::<f64>() / n as f64;
    let m = chain.param_count();
    let mut mean_theta = vec![0.0f64; m];
    for t in 0..n {
        for (acc, &v) in mean_theta.iter_mut().zip(chain.draw(t)) {
            *acc += v;
        }
    }
    for v in &mut mean_theta {
        *v /= n as f64;
    }
    let dev_at_mean = -2.0 * loglik_at(&mean_theta)?;
    let p_eff = mean_dev - dev_at_mean;
    Ok((mean_dev + p_eff, p_eff))
}

/// Posterior model probabilities from per-sweep likelihood values under
/// equal model priors: each sweep contributes a normalized likelihood share
/// and the shares are averaged. Chains are truncated to the shortest.
pub fn posterior_model_probs(logliks: &[Vec<f64>]) -> Result<Vec<f64>> {
    if logliks.is_empty() {
        return Err(Error::shape("no models".to_string()));
    }
    let n = logliks.iter().map(Vec::len).min().unwrap();
    if n == 0 {
        return Err(Error::data("a model has an empty chain".to_string()));
    }
    let h = logliks.len();
    let mut probs = vec![0.0f64; h];
    let mut row = vec![0.0f64; h];
    for t in 0..n {
        for (l, ll) in logliks.iter().enumerate() {
            row[l] = ll[t];
        }
        let lse = logsumexp(&row);
        for l in 0..h {
            probs[l] += (row[l] - lse).exp();
        }
    }
    for p in &mut probs {
        *p /= n as f64;
    }
    Ok(probs)
}

/// Likelihood-ratio test of a nested null against an alternative with `df`
/// extra free parameters.
pub fn lr_test(loglik_null: f64, loglik_alt: f64, df: usize) -> Result<(f64, f64)> {
    if df == 0 {
        return Err(Error::domain(
            "likelihood-ratio test needs at least one extra parameter".to_string(),
        ));
    }
    if loglik_alt < loglik_null - 1e-9 {
        return Err(Error::domain(format!(
            "alternative log likelihood {loglik_alt} below null {loglik_null}; models are \
             not nested or fits did not converge"
        )));
    }
    let stat = (-2.0 * (loglik_null - loglik_alt)).max(0.0);
    let pvalue = chi2_sf(stat, df as f64)?;
    Ok((stat, pvalue))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::{run_chain, ChainConfig, ProposalSpec};

    fn gaussian_chain(obs_mean: f64, k: usize, seed: u64, n_sample: usize) -> (PosteriorSample, PriorSpec) {
        // Likelihood of k unit-variance observations with sample mean
        // obs_mean, as a function of the location parameter.
        let prior = PriorSpec::uniform(vec![-10.0], vec![10.0]).unwrap();
        let proposal = ProposalSpec::new(vec![1.0]).unwrap();
        let config = ChainConfig {
            n_tune: 500,
            n_burn: 500,
            n_sample,
            seed,
            target_acceptance: 0.234,
        };
        let kf = k as f64;
        let loglik = move |theta: &[f64]| -> Result<f64> {
            let d: f64 = theta[0] - obs_mean;
            Ok(-0.5 * kf * d * d)
        };
        let chain = run_chain(
            |theta| Ok(loglik(theta)? + prior.log_density(theta)),
            &prior,
            &[0.0],
            &proposal,
            &config,
        )
        .unwrap();
        (chain, prior)
    }

    /// Evidence of the toy model up to the obs-dependent constant dropped
    /// from the likelihood: integral of exp(-k(theta-m)^2/2)/20 over the
    /// prior box.
    fn toy_log_evidence(k: usize) -> f64 {
        let kf = k as f64;
        (2.0 * PI / kf).sqrt().ln() - 20.0f64.ln()
    }

    #[test]
    fn rise_matches_conjugate_evidence() {
        let (chain, prior) = gaussian_chain(1.3, 25, 4, 20_000);
        let h = ImportanceDensity::fit(&chain, None).unwrap();
        let log_ev = rise_log_evidence(&chain, &prior, &EvidenceMode::Importance(h)).unwrap();
        let exact = toy_log_evidence(25);
        assert!((log_ev - exact).abs() < 0.05, "{log_ev} vs {exact}");
    }

    #[test]
    fn harmonic_mean_agrees_roughly() {
        let (chain, prior) = gaussian_chain(1.3, 25, 5, 20_000);
        let hm = rise_log_evidence(&chain, &prior, &EvidenceMode::HarmonicMean).unwrap();
        let exact = toy_log_evidence(25);
        // The harmonic mean estimator is noisier; a loose band is expected.
        assert!((hm - exact).abs() < 0.5, "{hm} vs {exact}");
    }

    #[test]
    fn t_importance_density_is_close_to_normal_one() {
        let (chain, prior) = gaussian_chain(0.0, 25, 6, 20_000);
        let hn = ImportanceDensity::fit(&chain, None).unwrap();
        let ht = ImportanceDensity::fit(&chain, Some(5.0)).unwrap();
        let en = rise_log_evidence(&chain, &prior, &EvidenceMode::Importance(hn)).unwrap();
        let et = rise_log_evidence(&chain, &prior, &EvidenceMode::Importance(ht)).unwrap();
        assert!((en - et).abs() < 0.1, "{en} vs {et}");
    }

    #[test]
    fn dic_p_eff_counts_one_parameter() {
        let (chain, _) = gaussian_chain(1.3, 25, 7, 20_000);
        let kf = 25.0;
        let (_, p_eff) = dic(&chain, |theta| {
            let d: f64 = theta[0] - 1.3;
            Ok(-0.5 * kf * d * d)
        })
        .unwrap();
        assert!((p_eff - 1.0).abs() < 0.1, "p_eff = {p_eff}");
    }

    #[test]
    fn dic_constant_likelihood_has_zero_p_eff() {
        let chain = PosteriorSample::from_parts(
            1,
            vec![1.0, 2.0, 3.0, 4.0],
            vec![-7.0; 4],
            vec![0.3],
            ProposalSpec::new(vec![1.0]).unwrap(),
        )
        .unwrap();
        let (d, p_eff) = dic(&chain, |_| Ok(-7.0)).unwrap();
        assert!(p_eff.abs() < 1e-12);
        // With zero p_eff the DIC collapses to the constant deviance.
        assert!((d - 14.0).abs() < 1e-12);
    }

    #[test]
    fn identical_models_split_probability() {
        let ll = vec![-5.0, -4.0, -6.0];
        let p = posterior_model_probs(&[ll.clone(), ll]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-14 && (p[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dominating_model_saturates() {
        let strong = vec![0.0; 50];
        let weak = vec![-25.0; 50];
        let p = posterior_model_probs(&[strong, weak]).unwrap();
        assert!(p[0] > 1.0 - 1e-8);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let a = vec![-2.0, -1.0, -3.0, -2.5];
        let b = vec![-1.5, -2.0, -2.0, -2.0];
        let c = vec![-4.0, -0.5, -1.0, -5.0];
        let p = posterior_model_probs(&[a, b, c]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shifting_all_logliks_preserves_probabilities() {
        let a = vec![-2.0, -1.0, -3.0];
        let b = vec![-1.5, -2.0, -2.0];
        let p1 = posterior_model_probs(&[a.clone(), b.clone()]).unwrap();
        let shift = 1234.5;
        let a2: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let b2: Vec<f64> = b.iter().map(|x| x + shift).collect();
        let p2 = posterior_model_probs(&[a2, b2]).unwrap();
        assert!((p1[0] - p2[0]).abs() < 1e-12);
    }

    #[test]
    fn lr_test_edge_cases() {
        let (stat, p) = lr_test(-100.0, -100.0, 4).unwrap();
        assert_eq!(stat, 0.0);
        assert_eq!(p, 1.0);
        assert!(lr_test(-100.0, -101.0, 4).is_err());
        assert!(lr_test(-100.0, -99.0, 0).is_err());
    }

    #[test]
    fn lr_test_known_quantile() {
        // Chi-square(1) upper 5% point is 3.841.
        let (stat, p) = lr_test(-10.0, -10.0 + 3.841459 / 2.0, 1).unwrap();
        assert!((stat - 3.841459).abs() < 1e-6);
        assert!((p - 0.05).abs() < 1e-4);
    }
}
