//! Autocorrelation, effective sample size and batch-means standard errors
//! for stored chains.

use crate::error::{Error, Result};
use crate::mcmc::PosteriorSample;

/// Lag-g sample autocorrelation, normalized by the lag-0 variance.
pub fn autocorrelation(series: &[f64], g: usize) -> Result<f64> {
    let n = series.len();
    if g >= n {
        return Err(Error::shape(format!("lag {g} with only {n} points")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return Err(Error::data("constant series has no autocorrelation".to_string()));
    }
    let cov: f64 = (0..n - g)
        .map(|t| (series[t] - mean) * (series[t + g] - mean))
        .sum::<f64>()
        / n as f64;
    Ok(cov / var)
}

/// Integrated autocorrelation time tau = 1 + 2 sum of rho(g) up to the first
/// lag where rho drops below 0.01; returns (tau, that lag).
pub fn integrated_autocorr(series: &[f64]) -> Result<(f64, usize)> {
    let n = series.len();
    if n < 10 {
        return Err(Error::data(format!("need at least 10 points, got {n}")));
    }
    let max_lag = (n / 10).min(1000).max(1);
    let mut tau = 1.0;
    let mut g_max = max_lag;
    for g in 1..=max_lag {
        let rho = autocorrelation(series, g)?;
        if rho < 0.01 {
            g_max = g;
            break;
        }
        tau += 2.0 * rho;
    }
    Ok((tau, g_max))
}

/// Standard error of the mean by batch means: the series is split into `q`
/// equal batches and the spread of the batch means is used in place of the
/// unknown correlation structure.
pub fn batch_means_se(series: &[f64], q: usize) -> Result<f64> {
    let n = series.len();
    if q < 2 {
        return Err(Error::domain(format!("need at least 2 batches, got {q}")));
    }
    if n < 2 * q {
        return Err(Error::data(format!(
            "series of {n} points is too short for {q} batches"
        )));
    }
    let batch_len = n / q;
    let used = batch_len * q;
    let means: Vec<f64> = (0..q)
        .map(|b| {
            series[b * batch_len..(b + 1) * batch_len].iter().sum::<f64>() / batch_len as f64
        })
        .collect();
    let grand = means.iter().sum::<f64>() / q as f64;
    let var = means
        .iter()
        .map(|&m| (m - grand) * (m - grand))
        .sum::<f64>()
        / (q as f64 - 1.0);
    let _ = used;
    Ok((var / q as f64).sqrt())
}

/// Per-component mixing summary of a stored chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub tau: Vec<f64>,
    pub g_max: Vec<usize>,
    pub ess: Vec<f64>,
    pub batch_se: Vec<f64>,
    pub acceptance: Vec<f64>,
}

/// Compute integrated autocorrelation times, effective sample sizes and
/// batch-means errors for every component, with `q` batches.
pub fn diagnostics(sample: &PosteriorSample, q: usize) -> Result<ChainDiagnostics> {
    let n = sample.n_sweeps() as f64;
    let mut tau = Vec::new();
    let mut g_max = Vec::new();
    let mut ess = Vec::new();
    let mut batch_se = Vec::new();
    for k in 0..sample.param_count() {
        let series = sample.component(k);
        let (t, g) = integrated_autocorr(&series)?;
        tau.push(t);
        g_max.push(g);
        ess.push(n / t);
        batch_se.push(batch_means_se(&series, q)?);
    }
    Ok(ChainDiagnostics {
        tau,
        g_max,
        ess,
        batch_se,
        acceptance: sample.acceptance.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn white_noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0f64;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            x = phi * x + (1.0 - phi * phi).sqrt() * e;
            out.push(x);
        }
        out
    }

    #[test]
    fn lag_zero_is_one() {
        let s = white_noise(500, 1);
        assert!((autocorrelation(&s, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn white_noise_has_tau_near_one() {
        let s = white_noise(50_000, 2);
        let (tau, _) = integrated_autocorr(&s).unwrap();
        assert!((tau - 1.0).abs() < 0.1, "tau = {tau}");
    }

    #[test]
    fn ar1_tau_matches_theory() {
        // tau for AR(1) is (1 + phi) / (1 - phi) = 19 at phi = 0.9.
        let s = ar1(200_000, 0.9, 3);
        let (tau, _) = integrated_autocorr(&s).unwrap();
        assert!((tau - 19.0).abs() / 19.0 < 0.3, "tau = {tau}");
    }

    #[test]
    fn batch_se_matches_iid_theory() {
        let s = white_noise(100_000, 4);
        let se = batch_means_se(&s, 50).unwrap();
        let expected = 1.0 / (s.len() as f64).sqrt();
        assert!((se - expected).abs() / expected < 0.25, "se = {se}");
    }

    #[test]
    fn too_short_for_batches_is_an_error() {
        let s = white_noise(80, 5);
        assert!(batch_means_se(&s, 50).is_err());
    }
}
