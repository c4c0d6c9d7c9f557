//! Random-walk Metropolis-Hastings within Gibbs for the copula degrees of
//! freedom, with a truncated-Gaussian proposal, acceptance-rate tuning and
//! chain diagnostics.

mod diagnostics;
mod persist;

pub use diagnostics::{
    autocorrelation, batch_means_se, diagnostics, integrated_autocorr, ChainDiagnostics,
};
pub use persist::{load_chain, save_chain, ChainMetadata};

use crate::copula::{
    log_likelihood, CorrelationMatrix, DensityEvalConfig, DensityWorkspace, DofVector,
    GroupConfig, PseudoSample, DEFAULT_NU_MAX, DEFAULT_NU_MIN,
};
use crate::error::{Error, Result};
use crate::special::{normal_cdf, normal_quantile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent uniform priors, one interval per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PriorSpec {
    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::shape("prior bounds length mismatch".to_string()));
        }
        for (&lo, &hi) in lower.iter().zip(&upper) {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::domain(format!("bad prior interval ({lo}, {hi})")));
            }
        }
        Ok(PriorSpec { lower, upper })
    }

    /// Uniform(1, 100) on every component, matching the dof bounds.
    pub fn default_dof(m: usize) -> Self {
        PriorSpec {
            lower: vec![DEFAULT_NU_MIN; m],
            upper: vec![DEFAULT_NU_MAX; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self, k: usize) -> f64 {
        self.lower[k]
    }

    pub fn upper(&self, k: usize) -> f64 {
        self.upper[k]
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&t, (&lo, &hi))| t > lo && t < hi)
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if !self.contains(theta) {
            return f64::NEG_INFINITY;
        }
        -self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| (hi - lo).ln())
            .sum::<f64>()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| 0.5 * (lo + hi))
            .collect()
    }
}

/// Per-component scales of the truncated-Gaussian random walk.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSpec {
    pub sigmas: Vec<f64>,
}

impl ProposalSpec {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::domain("proposal scales must be positive".to_string()));
        }
        Ok(ProposalSpec { sigmas })
    }

    /// A tenth of each prior interval, a serviceable pre-tuning default.
    pub fn default_for(prior: &PriorSpec) -> Self {
        ProposalSpec {
            sigmas: prior
                .lower
                .iter()
                .zip(&prior.upper)
                .map(|(&lo, &hi)| 0.1 * (hi - lo))
                .collect(),
        }
    }
}

/// Stage lengths and seed of one chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Sweeps spent adapting proposal scales before they are frozen.
    pub n_tune: usize,
    /// Discarded sweeps after tuning.
    pub n_burn: usize,
    /// Stored sweeps.
    pub n_sample: usize,
    pub seed: u64,
    pub target_acceptance: f64,
}

impl ChainConfig {
    pub fn new(seed: u64) -> Self {
        ChainConfig {
            n_tune: 10_000,
            n_burn: 20_000,
            n_sample: 100_000,
            seed,
            target_acceptance: 0.234,
        }
    }
}

/// Stored draws of one chain together with the likelihood at each draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    param_count: usize,
    /// Row-major n_sweeps x param_count.
    draws: Vec<f64>,
    log_lik: Vec<f64>,
    /// Sampling-stage acceptance rate per component.
    pub acceptance: Vec<f64>,
    /// Proposal scales after tuning.
    pub proposal: ProposalSpec,
}

impl PosteriorSample {
    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn n_sweeps(&self) -> usize {
        self.log_lik.len()
    }

    pub fn draw(&self, t: usize) -> &[f64] {
        &self.draws[t * self.param_count..(t + 1) * self.param_count]
    }

    pub fn log_lik(&self) -> &[f64] {
        &self.log_lik
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.n_sweeps())
            .map(|t| self.draws[t * self.param_count + k])
            .collect()
    }

    pub(crate) fn from_parts(
        param_count: usize,
        draws: Vec<f64>,
        log_lik: Vec<f64>,
        acceptance: Vec<f64>,
        proposal: ProposalSpec,
    ) -> Result<Self> {
        if draws.len() != log_lik.len() * param_count {
            return Err(Error::shape("draws do not match likelihood count".to_string()));
        }
        Ok(PosteriorSample {
            param_count,
            draws,
            log_lik,
            acceptance,
            proposal,
        })
    }
}

/// Posterior mean and highest-likelihood draw of a stored chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimates {
    pub mmse: Vec<f64>,
    pub map: Vec<f64>,
    pub map_log_lik: f64,
    pub map_index: usize,
}

pub fn point_estimates(sample: &PosteriorSample) -> Result<PointEstimates> {
    let n = sample.n_sweeps();
    if n == 0 {
        return Err(Error::data("empty chain".to_string()));
    }
    let m = sample.param_count();
    let mut mmse = vec![0.0f64; m];
    for t in 0..n {
        for (acc, &v) in mmse.iter_mut().zip(sample.draw(t)) {
            *acc += v;
        }
    }
    for v in &mut mmse {
        *v /= n as f64;
    }
    let mut best = 0usize;
    for t in 1..n {
        if sample.log_lik[t] > sample.log_lik[best] {
            best = t;
        }
    }
    Ok(PointEstimates {
        mmse,
        map: sample.draw(best).to_vec(),
        map_log_lik: sample.log_lik[best],
        map_index: best,
    })
}

/// Draw from a Gaussian centred at `theta` truncated to (lo, hi), by inverse
/// CDF, and return the draw with the log normalizing mass of the proposal.
fn truncated_normal_draw(
    rng: &mut ChaCha8Rng,
    theta: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
) -> Result<(f64, f64)> {
    let a = normal_cdf((lo - theta) / sigma);
    let b = normal_cdf((hi - theta) / sigma);
    let z = b - a;
    if !(z > 0.0) {
        return Err(Error::numeric(format!(
            "truncated proposal has no mass: theta={theta}, sigma={sigma}"
        )));
    }
    let u: f64 = rng.gen();
    let p = (a + u * z).clamp(1e-16, 1.0 - 1e-16);
    let mut x = theta + sigma * normal_quantile(p)?;
    // Inverse-CDF rounding can land exactly on a bound; nudge inside.
    let eps = (hi - lo) * 1e-12;
    x = x.clamp(lo + eps, hi - eps);
    Ok((x, z.ln()))
}

/// Log mass of the truncated proposal centred at `theta`.
fn truncated_log_mass(theta: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    (normal_cdf((hi - theta) / sigma) - normal_cdf((lo - theta) / sigma)).ln()
}

/// One single-component Metropolis-Hastings update. The asymmetry of the
/// truncated proposal near the bounds enters through the ratio of its
/// normalizing masses; without it the stationary law is wrong at the edges.
#[allow(clippy::too_many_arguments)]
fn mh_update<F>(
    rng: &mut ChaCha8Rng,
    log_post: &mut F,
    theta: &mut Vec<f64>,
    current_lp: &mut f64,
    k: usize,
    sigma: f64,
    lo: f64,
    hi: f64,
) -> Result<bool>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let old = theta[k];
    let (proposal, log_mass_from_old) = truncated_normal_draw(rng, old, sigma, lo, hi)?;
    theta[k] = proposal;
    let candidate_lp = log_post(theta)?;
    let log_mass_from_new = truncated_log_mass(proposal, sigma, lo, hi);
    let log_alpha = candidate_lp - *current_lp + log_mass_from_old - log_mass_from_new;
    let accept = log_alpha >= 0.0 || rng.gen::<f64>().ln() < log_alpha;
    if accept {
        *current_lp = candidate_lp;
    } else {
        theta[k] = old;
    }
    Ok(accept)
}

const TUNE_WINDOW: usize = 100;

/// Run a full chain against an arbitrary log posterior.
///
/// Stage one adapts the proposal scales in windows of one hundred sweeps with
/// shrinking steps, stage two burns in with frozen scales, stage three stores
/// every sweep.
pub fn run_chain<F>(
    mut log_post: F,
    prior: &PriorSpec,
    init: &[f64],
    proposal: &ProposalSpec,
    config: &ChainConfig,
) -> Result<PosteriorSample>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let m = prior.dim();
    if init.len() != m || proposal.sigmas.len() != m {
        return Err(Error::shape(format!(
            "dimension mismatch: prior {m}, init {}, proposal {}",
            init.len(),
            proposal.sigmas.len()
        )));
    }
    if !prior.contains(init) {
        return Err(Error::domain("initial point outside the prior support".to_string()));
    }
    if config.n_sample == 0 {
        return Err(Error::data("n_sample must be positive".to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = init.to_vec();
    let mut sigmas = proposal.sigmas.clone();
    let mut current_lp = log_post(&theta)?;
    if !current_lp.is_finite() {
        return Err(Error::numeric(format!(
            "log posterior not finite at the initial point: {current_lp}"
        )));
    }

    // Tuning stage.
    let n_windows = config.n_tune / TUNE_WINDOW;
    for w in 1..=n_windows {
        let mut accepted = vec![0usize; m];
        for _ in 0..TUNE_WINDOW {
            for k in 0..m {
                let ok = mh_update(
                    &mut rng,
                    &mut log_post,
                    &mut theta,
                    &mut current_lp,
                    k,
                    sigmas[k],
                    prior.lower(k),
                    prior.upper(k),
                )?;
                if ok {
                    accepted[k] += 1;
                }
            }
        }
        let step = 1.0 / (w as f64).sqrt();
        for k in 0..m {
            let acc = accepted[k] as f64 / TUNE_WINDOW as f64;
            sigmas[k] *= ((acc - config.target_acceptance) * 2.0 * step).exp();
            let span = prior.upper(k) - prior.lower(k);
            sigmas[k] = sigmas[k].clamp(1e-6 * span, 2.0 * span);
        }
    }

    // Burn-in with frozen scales.
    for _ in 0..config.n_burn {
        for k in 0..m {
            mh_update(
                &mut rng,
                &mut log_post,
                &mut theta,
                &mut current_lp,
                k,
                sigmas[k],
                prior.lower(k),
                prior.upper(k),
            )?;
        }
    }

    // Sampling.
    let mut draws = Vec::with_capacity(config.n_sample * m);
    let mut log_lik = Vec::with_capacity(config.n_sample);
    let mut accepted = vec![0usize; m];
    let log_prior = prior.log_density(&theta);
    for _ in 0..config.n_sample {
        for k in 0..m {
            let ok = mh_update(
                &mut rng,
                &mut log_post,
                &mut theta,
                &mut current_lp,
                k,
                sigmas[k],
                prior.lower(k),
                prior.upper(k),
            )?;
            if ok {
                accepted[k] += 1;
            }
        }
        draws.extend_from_slice(&theta);
        // The posterior is likelihood plus a constant uniform prior term, so
        // the stored likelihood is the posterior minus that constant.
        log_lik.push(current_lp - log_prior);
    }
    let acceptance: Vec<f64> = accepted
        .iter()
        .map(|&a| a as f64 / config.n_sample as f64)
        .collect();
    PosteriorSample::from_parts(m, draws, log_lik, acceptance, ProposalSpec { sigmas })
}

/// Run the chain for the copula degrees of freedom of a given grouping.
///
/// The posterior is the copula log likelihood plus the uniform prior; the
/// quantile workspace is shared across all evaluations so repeated dof values
/// are cheap.
pub fn run_copula_chain(
    sample: &PseudoSample,
    group: &GroupConfig,
    corr: &CorrelationMatrix,
    prior: &PriorSpec,
    init: &[f64],
    config: &ChainConfig,
    density: &DensityEvalConfig,
) -> Result<PosteriorSample> {
    if prior.dim() != group.group_count() {
        return Err(Error::shape(format!(
            "prior has {} components but grouping has {} groups",
            prior.dim(),
            group.group_count()
        )));
    }
    let mut ws = DensityWorkspace::new(sample);
    let lo = (0..prior.dim()).map(|k| prior.lower(k)).fold(f64::INFINITY, f64::min);
    let hi = (0..prior.dim())
        .map(|k| prior.upper(k))
        .fold(f64::NEG_INFINITY, f64::max);
    let log_post = |theta: &[f64]| -> Result<f64> {
        let lp = prior.log_density(theta);
        if !lp.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        let dof = DofVector::new(group.expand(theta)?, lo, hi)?;
        let ll = log_likelihood(sample, &dof, corr, &mut ws, density)?;
        Ok(ll + lp)
    };
    let proposal = ProposalSpec::default_for(prior);
    run_chain(log_post, prior, init, &proposal, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight_config(seed: u64) -> ChainConfig {
        ChainConfig {
            n_tune: 1000,
            n_burn: 500,
            n_sample: 4000,
            seed,
            target_acceptance: 0.234,
        }
    }

    #[test]
    fn prior_rejects_outside_support() {
        let prior = PriorSpec::default_dof(2);
        assert!(prior.log_density(&[5.0, 5.0]).is_finite());
        assert_eq!(prior.log_density(&[0.5, 5.0]), f64::NEG_INFINITY);
        assert_eq!(prior.log_density(&[5.0, 100.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn truncated_draws_stay_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let (x, _) = truncated_normal_draw(&mut rng, 1.5, 5.0, 1.0, 100.0).unwrap();
            assert!(x > 1.0 && x < 100.0);
        }
    }

    #[test]
    fn uniform_target_stays_uniform_near_bounds() {
        // With a flat likelihood the posterior is the uniform prior. A chain
        // missing the proposal-mass correction piles up near the bounds; the
        // corrected chain must keep the first and last deciles balanced.
        let prior = PriorSpec::uniform(vec![0.0], vec![1.0]).unwrap();
        let proposal = ProposalSpec::new(vec![0.5]).unwrap();
        let config = ChainConfig {
            n_tune: 0,
            n_burn: 200,
            n_sample: 40_000,
            seed: 5,
            target_acceptance: 0.234,
        };
        let out = run_chain(|_| Ok(0.0), &prior, &[0.5], &proposal, &config).unwrap();
        let xs = out.component(0);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean = {mean}");
        let low = xs.iter().filter(|&&x| x < 0.1).count() as f64 / xs.len() as f64;
        let high = xs.iter().filter(|&&x| x > 0.9).count() as f64 / xs.len() as f64;
        assert!((low - 0.1).abs() < 0.02, "low decile mass = {low}");
        assert!((high - 0.1).abs() < 0.02, "high decile mass = {high}");
    }

    #[test]
    fn recovers_gaussian_target_mean() {
        let prior = PriorSpec::uniform(vec![1.0], vec![100.0]).unwrap();
        let proposal = ProposalSpec::default_for(&prior);
        let target = |theta: &[f64]| -> Result<f64> {
            let d: f64 = theta[0] - 20.0;
            Ok(-0.5 * d * d / 4.0)
        };
        let out = run_chain(target, &prior, &[50.0], &proposal, &tight_config(2)).unwrap();
        let xs = out.component(0);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let se = batch_means_se(&xs, 50).unwrap();
        assert!((mean - 20.0).abs() < 4.0 * se.max(0.05), "mean = {mean}, se = {se}");
    }

    #[test]
    fn tuned_acceptance_is_reasonable() {
        let prior = PriorSpec::uniform(vec![1.0, 1.0], vec![100.0, 100.0]).unwrap();
        let proposal = ProposalSpec::new(vec![40.0, 0.01]).unwrap();
        let target = |theta: &[f64]| -> Result<f64> {
            let a: f64 = theta[0] - 10.0;
            let b: f64 = theta[1] - 30.0;
            Ok(-0.5 * (a * a / 1.0 + b * b / 25.0))
        };
        let mut config = tight_config(3);
        config.n_tune = 3000;
        let out = run_chain(target, &prior, &[50.0, 50.0], &proposal, &config).unwrap();
        for (k, &acc) in out.acceptance.iter().enumerate() {
            assert!(
                (0.15..=0.35).contains(&acc),
                "component {k} acceptance {acc} after tuning"
            );
        }
    }

    #[test]
    fn map_tie_breaks_to_lowest_index() {
        let proposal = ProposalSpec::new(vec![1.0]).unwrap();
        let sample = PosteriorSample::from_parts(
            1,
            vec![2.0, 3.0, 4.0],
            vec![-1.0, -0.5, -0.5],
            vec![0.2],
            proposal,
        )
        .unwrap();
        let est = point_estimates(&sample).unwrap();
        assert_eq!(est.map_index, 1);
        assert_eq!(est.map, vec![3.0]);
        assert!((est.mmse[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_chain() {
        let prior = PriorSpec::uniform(vec![1.0], vec![100.0]).unwrap();
        let proposal = ProposalSpec::default_for(&prior);
        let target = |theta: &[f64]| -> Result<f64> {
            let d: f64 = theta[0] - 20.0;
            Ok(-0.5 * d * d / 4.0)
        };
        let mut cfg = tight_config(9);
        cfg.n_sample = 500;
        let a = run_chain(target, &prior, &[50.0], &proposal, &cfg).unwrap();
        let b = run_chain(target, &prior, &[50.0], &proposal, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
