//! From raw price series to pseudo-observations: log-returns, GARCH(1,1)
//! filtering, empirical-CDF transformation and the Kendall-tau correlation
//! matrix.

mod garch;
mod ingest;
mod kendall;

pub use garch::{
    garch_filter, garch_fit, garch_simulate, garch_volatility, GarchFit, GarchParams,
};
pub use ingest::{ingest_csv, CsvSchema, IngestReport};
pub use kendall::{kendall_corr, kendall_tau, nearest_correlation};

use crate::copula::PseudoSample;
use crate::error::{Error, Result};
use chrono::NaiveDate;

/// A dated price series for one asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<f64>,
    pub label: String,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, prices: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if dates.len() != prices.len() {
            return Err(Error::shape(format!(
                "{label}: {} dates vs {} prices",
                dates.len(),
                prices.len()
            )));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::data(format!(
                    "{label}: dates not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        for (d, &p) in dates.iter().zip(&prices) {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::domain(format!("{label}: non-positive price {p} on {d}")));
            }
        }
        Ok(PriceSeries {
            dates,
            prices,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// x_t = ln S_t - ln S_{t-1}.
pub fn log_returns(series: &PriceSeries) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::data(format!(
            "{}: need at least 2 prices for returns",
            series.label
        )));
    }
    Ok(series
        .prices
        .windows(2)
        .map(|w| w[1].ln() - w[0].ln())
        .collect())
}

/// Standardized residuals of several assets observed on the same dates.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    n_obs: usize,
    dim: usize,
    /// Row-major K x n.
    eps: Vec<f64>,
    pub labels: Vec<String>,
}

impl ResidualMatrix {
    pub fn from_columns(columns: &[Vec<f64>], labels: &[String]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::shape("no residual columns".to_string()));
        }
        let k = columns[0].len();
        if columns.iter().any(|c| c.len() != k) {
            return Err(Error::shape("residual columns differ in length".to_string()));
        }
        if labels.len() != columns.len() {
            return Err(Error::shape("labels do not match columns".to_string()));
        }
        let dim = columns.len();
        let mut eps = Vec::with_capacity(k * dim);
        for j in 0..k {
            for col in columns {
                eps.push(col[j]);
            }
        }
        Ok(ResidualMatrix {
            n_obs: k,
            dim,
            eps,
            labels: labels.to_vec(),
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.eps[j * self.dim + i]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.n_obs).map(|j| self.get(j, i)).collect()
    }
}

/// Average rank of each element divided by (K + 1); ties get the mean of the
/// ranks they span, so every output is strictly inside (0, 1).
pub(crate) fn average_ranks_scaled(column: &[f64]) -> Vec<f64> {
    let k = column.len();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| column[a].partial_cmp(&column[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![0.0f64; k];
    let mut pos = 0usize;
    while pos < k {
        let mut end = pos + 1;
        while end < k && column[idx[end]] == column[idx[pos]] {
            end += 1;
        }
        // ranks pos+1 ..= end averaged
        let avg_rank = (pos + 1 + end) as f64 / 2.0;
        for &i in &idx[pos..end] {
            out[i] = avg_rank / (k as f64 + 1.0);
        }
        pos = end;
    }
    out
}

/// Map residuals to pseudo-observations via scaled average ranks.
pub fn to_pseudo_obs(residuals: &ResidualMatrix) -> Result<PseudoSample> {
    if residuals.n_obs() < 2 {
        return Err(Error::data("need at least 2 observations".to_string()));
    }
    let k = residuals.n_obs();
    let n = residuals.dim();
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        cols.push(average_ranks_scaled(&residuals.column(i)));
    }
    let mut rows = Vec::with_capacity(k);
    for j in 0..k {
        rows.push((0..n).map(|i| cols[i][j]).collect::<Vec<_>>());
    }
    PseudoSample::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dates(n: usize) -> Vec<NaiveDate> {
        (0..n)
            .map(|i| NaiveDate::from_ymd_opt(2004, 1, 1).unwrap() + chrono::Days::new(i as u64))
            .collect()
    }

    #[test]
    fn log_returns_basics() {
        let s = PriceSeries::new(dates(2), vec![1.0, std::f64::consts::E], "a").unwrap();
        let r = log_returns(&s).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15);

        let flat = PriceSeries::new(dates(5), vec![2.0; 5], "b").unwrap();
        assert!(log_returns(&flat).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn log_returns_round_trip() {
        let prices = vec![1.0, 1.1, 0.95, 1.3, 1.25];
        let s = PriceSeries::new(dates(5), prices.clone(), "c").unwrap();
        let r = log_returns(&s).unwrap();
        let mut acc = prices[0].ln();
        for (i, &x) in r.iter().enumerate() {
            acc += x;
            assert!((acc.exp() - prices[i + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn price_series_validation() {
        assert!(PriceSeries::new(dates(2), vec![1.0, -1.0], "x").is_err());
        let mut d = dates(3);
        d.swap(1, 2);
        assert!(PriceSeries::new(d, vec![1.0, 1.0, 1.0], "x").is_err());
    }

    #[test]
    fn ranks_without_ties() {
        let u = average_ranks_scaled(&[3.0, 1.0, 2.0]);
        assert_eq!(u, vec![0.75, 0.25, 0.5]);
    }

    #[test]
    fn ranks_with_ties_average() {
        let u = average_ranks_scaled(&[1.0, 1.0, 2.0]);
        assert_eq!(u, vec![0.375, 0.375, 0.75]);
    }

    #[test]
    fn pseudo_obs_rank_invariance() {
        let base: Vec<f64> = vec![0.3, -1.2, 0.7, 0.1, -0.4];
        let mapped: Vec<f64> = base.iter().map(|&x| (2.0 * x).exp()).collect();
        let labels = vec!["a".to_string()];
        let r1 = ResidualMatrix::from_columns(&[base], &labels).unwrap();
        let r2 = ResidualMatrix::from_columns(&[mapped], &labels).unwrap();
        assert_eq!(to_pseudo_obs(&r1).unwrap(), to_pseudo_obs(&r2).unwrap());
    }
}
