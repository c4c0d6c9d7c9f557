//! Scalar special functions: Student-t CDF/quantile, chi-square quantiles,
//! normal CDF/quantile and log-gamma.
//!
//! CDFs are evaluated through the regularized incomplete beta/gamma functions;
//! quantiles start from a closed-form guess and are polished by safeguarded
//! Newton iterations on the corresponding CDF, so round trips hold to near
//! machine precision for non-integer degrees of freedom as well.

use crate::error::{Error, Result};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

/// log Γ(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "normal_quantile requires p in (0,1), got {p}"
        )));
    }
    Ok(std_normal().inverse_cdf(p))
}

/// Log density of the univariate t-distribution with `nu` dof.
pub fn t_log_pdf(x: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// CDF of the Student-t distribution with `nu` dof.
pub fn t_cdf(x: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::domain(format!("t_cdf requires nu > 0, got {nu}")));
    }
    if !x.is_finite() {
        return Err(Error::domain(format!("t_cdf requires finite x, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.5);
    }
    // P(T <= -|x|) = 0.5 * I_{nu/(nu+x^2)}(nu/2, 1/2)
    let z = nu / (nu + x * x);
    let tail = 0.5 * beta_reg(0.5 * nu, 0.5, z);
    Ok(if x < 0.0 { tail } else { 1.0 - tail })
}

/// Quantile of the Student-t distribution.
pub fn t_quantile(p: f64, nu: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "t_quantile requires p in (0,1), got {p}"
        )));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::domain(format!(
            "t_quantile requires nu > 0, got {nu}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work on the lower half and mirror, so symmetry is exact.
    if p > 0.5 {
        return Ok(-t_quantile(1.0 - p, nu)?);
    }

    let x0 = t_quantile_guess(p, nu);
    // Bracket [lo, hi] with t_cdf(lo) <= p <= t_cdf(hi); p < 0.5 so x < 0.
    let mut lo = x0.min(-1e-8);
    let mut hi: f64 = 0.0;
    let mut grow = 2.0;
    while t_cdf(lo, nu)? > p {
        lo *= grow;
        grow *= 2.0;
        if lo < -1e300 {
            return Err(Error::numeric(format!(
                "t_quantile bracket failed for p={p}, nu={nu}"
            )));
        }
    }

    let mut x = x0.clamp(lo, hi);
    for _ in 0..200 {
        let f = t_cdf(x, nu)? - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dlog = f.abs().ln() - t_log_pdf(x, nu);
        // Newton step in a numerically safe form: dx = f / pdf.
        let dx = f.signum() * dlog.exp();
        let mut next = x - dx;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let scale = x.abs().max(1.0);
        if (next - x).abs() <= 1e-15 * scale {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Cornish-Fisher style starting point for the t quantile (p < 0.5).
fn t_quantile_guess(p: f64, nu: f64) -> f64 {
    if (nu - 1.0).abs() < 1e-12 {
        return (std::f64::consts::PI * (p - 0.5)).tan();
    }
    if nu > 1e7 {
        return normal_quantile(p).unwrap_or(0.0);
    }
    let z = normal_quantile(p).unwrap_or(0.0);
    let z2 = z * z;
    let g1 = (z2 + 1.0) * z / 4.0;
    let g2 = ((5.0 * z2 + 16.0) * z2 + 3.0) * z / 96.0;
    let guess = z + g1 / nu + g2 / (nu * nu);
    if guess.is_finite() {
        guess
    } else {
        z
    }
}

/// Chi-square log density.
fn chi2_log_pdf(x: f64, nu: f64) -> f64 {
    let a = 0.5 * nu;
    (a - 1.0) * x.ln() - 0.5 * x - a * std::f64::consts::LN_2 - ln_gamma(a)
}

/// Upper-tail chi-square quantile: returns x with P(X > x) = q.
///
/// Solving against the tail probability directly keeps precision when q is
/// extreme (the copula integrand evaluates this down to q ~ 1e-12).
pub fn chi2_quantile_upper(q: f64, nu: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!(
            "chi2_quantile_upper requires q in (0,1), got {q}"
        )));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::domain(format!(
            "chi2_quantile_upper requires nu > 0, got {nu}"
        )));
    }
    let a = 0.5 * nu;
    if q > 0.5 {
        // The upper tail is near 1 here, so solve the lower tail instead:
        // gamma_lr(a, x/2) = 1 - q is well conditioned for small x.
        return chi2_quantile_lower_tail(1.0 - q, nu);
    }

    // Wilson-Hilferty starting point.
    let z = -normal_quantile(q)?;
    let c = 2.0 / (9.0 * nu);
    let wh = nu * (1.0 - c + z * c.sqrt()).powi(3);
    let mut x = if wh.is_finite() && wh > 0.0 { wh } else { nu };

    // Bracket by expansion on the survival function Q(x) = gamma_ur(a, x/2),
    // which is decreasing in x.
    let mut lo = x;
    let mut hi = x;
    if gamma_ur(a, 0.5 * lo) < q {
        while gamma_ur(a, 0.5 * lo) < q {
            lo *= 0.5;
            if lo < 1e-300 {
                break;
            }
        }
    } else {
        while gamma_ur(a, 0.5 * hi) > q {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::numeric(format!(
                    "chi2_quantile_upper bracket failed for q={q}, nu={nu}"
                )));
            }
        }
    }
    x = x.clamp(lo, hi);

    for _ in 0..200 {
        let f = gamma_ur(a, 0.5 * x) - q;
        if f > 0.0 {
            // survival too large -> x too small
            lo = x;
        } else {
            hi = x;
        }
        let dlog = f.abs().ln() - chi2_log_pdf(x, nu);
        let dx = f.signum() * dlog.exp();
        let mut next = x + dx;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.abs().max(1e-300) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Regularized lower incomplete gamma P(a, y) with a power-series branch for
/// tiny y, where the backend underflows to zero.
fn gamma_p(a: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y < 1e-8 {
        let series = 1.0 + y / (a + 1.0) + y * y / ((a + 1.0) * (a + 2.0));
        return (a * y.ln() - y - ln_gamma(a + 1.0)).exp() * series;
    }
    gamma_lr(a, y)
}

/// Solve gamma_lr(nu/2, x/2) = p for small lower-tail probabilities p.
fn chi2_quantile_lower_tail(p: f64, nu: f64) -> Result<f64> {
    let a = 0.5 * nu;
    // Invert the leading term gamma_lr(a, y) ~ y^a / Gamma(a + 1) for a
    // starting point, valid when x is small.
    let start = 2.0 * ((p.ln() + log_gamma(a + 1.0)?) / a).exp();
    let mut x = if start.is_finite() && start > 0.0 { start } else { nu };

    // Bracket on the increasing lower CDF.
    let mut lo = x;
    let mut hi = x;
    if gamma_p(a, 0.5 * lo) > p {
        while gamma_p(a, 0.5 * lo) > p {
            lo *= 0.5;
            if lo < 1e-300 {
                break;
            }
        }
    } else {
        while gamma_p(a, 0.5 * hi) < p {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::numeric(format!(
                    "chi2 lower-tail bracket failed for p={p}, nu={nu}"
                )));
            }
        }
    }
    x = x.clamp(lo, hi);

    for _ in 0..200 {
        let f = gamma_p(a, 0.5 * x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dlog = f.abs().ln() - chi2_log_pdf(x, nu);
        let dx = -f.signum() * dlog.exp();
        let mut next = x + dx;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.abs().max(1e-300) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Chi-square quantile: returns x with P(X <= x) = p.
pub fn chi2_quantile(p: f64, nu: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "chi2_quantile requires p in (0,1), got {p}"
        )));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::domain(format!("chi2_quantile requires nu > 0, got {nu}")));
    }
    if p <= 0.5 {
        chi2_quantile_lower_tail(p, nu)
    } else {
        chi2_quantile_upper(1.0 - p, nu)
    }
}

/// Chi-square survival function P(X > x) for the likelihood-ratio tests.
pub fn chi2_sf(x: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::domain(format!("chi2_sf requires nu > 0, got {nu}")));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    let y = 0.5 * x;
    if y < 1e-8 {
        return Ok(1.0 - gamma_p(0.5 * nu, y));
    }
    Ok(gamma_ur(0.5 * nu, y))
}

/// Chi-square regularized lower CDF P(X <= x).
pub fn chi2_cdf(x: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::domain(format!("chi2_cdf requires nu > 0, got {nu}")));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(gamma_p(0.5 * nu, 0.5 * x))
}

/// Quantile of W = sqrt(nu / S), S ~ chi-square(nu): w = G_nu^{-1}(v).
///
/// G_nu(w) = P(sqrt(nu/S) <= w) = P(S >= nu/w^2), so the inverse is
/// w = sqrt(nu / chi2_quantile_upper(v, nu)); strictly increasing in v.
pub fn chi_w_quantile(v: f64, nu: f64) -> Result<f64> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::domain(format!(
            "chi_w_quantile requires v in (0,1), got {v}"
        )));
    }
    let s = chi2_quantile_upper(v, nu)?;
    Ok((nu / s).sqrt())
}
