//! Run configuration: a TOML file validated before any numeric work.

use serde::Deserialize;
use std::path::{Path, PathBuf};
use tcopula::error::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Mandatory; there is no wall-clock fallback.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub family: FamilySection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub risk: RiskSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub csv: PathBuf,
    pub date_column: String,
    pub assets: Vec<String>,
    #[serde(default)]
    pub invert: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub n_tune: usize,
    pub n_burn: usize,
    pub n_sample: usize,
    pub target_acceptance: f64,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            n_tune: 10_000,
            n_burn: 20_000,
            n_sample: 100_000,
            target_acceptance: 0.234,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilySection {
    /// "two-group" or "all".
    pub policy: String,
}

impl Default for FamilySection {
    fn default() -> Self {
        FamilySection {
            policy: "two-group".to_string(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection {
            rel_tol: 1e-9,
            max_panels: 600,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSection {
    pub nu_min: f64,
    pub nu_max: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        PriorSection {
            nu_min: 1.0,
            nu_max: 100.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskSection {
    pub alpha: Vec<f64>,
    pub n_sims: usize,
    pub portfolios: Vec<Vec<f64>>,
    /// "exact" or "linearized".
    pub loss_form: String,
}

impl Default for RiskSection {
    fn default() -> Self {
        RiskSection {
            alpha: vec![0.99],
            n_sims: 1_000_000,
            portfolios: Vec::new(),
            loss_form: "exact".to_string(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::domain(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.data.csv.exists() {
            return Err(Error::domain(format!(
                "data file {} does not exist",
                self.data.csv.display()
            )));
        }
        if self.data.assets.len() < 2 {
            return Err(Error::domain("need at least 2 assets".to_string()));
        }
        for inv in &self.data.invert {
            if !self.data.assets.contains(inv) {
                return Err(Error::domain(format!(
                    "inverted asset {inv:?} is not in the asset list"
                )));
            }
        }
        if self.chain.n_sample == 0 {
            return Err(Error::domain("chain.n_sample must be positive".to_string()));
        }
        if !(self.chain.target_acceptance > 0.0 && self.chain.target_acceptance < 1.0) {
            return Err(Error::domain("chain.target_acceptance must be in (0,1)".to_string()));
        }
        match self.family.policy.as_str() {
            "two-group" | "all" => {}
            other => {
                return Err(Error::domain(format!(
                    "family.policy must be \"two-group\" or \"all\", got {other:?}"
                )))
            }
        }
        if !(self.quadrature.rel_tol > 0.0 && self.quadrature.rel_tol < 1.0) {
            return Err(Error::domain("quadrature.rel_tol must be in (0,1)".to_string()));
        }
        if self.quadrature.max_panels < 8 {
            return Err(Error::domain("quadrature.max_panels must be at least 8".to_string()));
        }
        if !(self.prior.nu_min > 0.0 && self.prior.nu_min < self.prior.nu_max) {
            return Err(Error::domain(format!(
                "prior bounds ({}, {}) are not an interval above zero",
                self.prior.nu_min, self.prior.nu_max
            )));
        }
        for &a in &self.risk.alpha {
            if !(a > 0.5 && a < 1.0) {
                return Err(Error::domain(format!("risk.alpha {a} must be in (0.5, 1)")));
            }
        }
        for p in &self.risk.portfolios {
            if p.len() != self.data.assets.len() {
                return Err(Error::domain(format!(
                    "portfolio of {} weights does not match {} assets",
                    p.len(),
                    self.data.assets.len()
                )));
            }
        }
        match self.risk.loss_form.as_str() {
            "exact" | "linearized" => {}
            other => {
                return Err(Error::domain(format!(
                    "risk.loss_form must be \"exact\" or \"linearized\", got {other:?}"
                )))
            }
        }
        Ok(())
    }

    pub fn chain_config(&self) -> tcopula::mcmc::ChainConfig {
        tcopula::mcmc::ChainConfig {
            n_tune: self.chain.n_tune,
            n_burn: self.chain.n_burn,
            n_sample: self.chain.n_sample,
            seed: self.seed,
            target_acceptance: self.chain.target_acceptance,
        }
    }

    pub fn density_config(&self) -> tcopula::copula::DensityEvalConfig {
        let mut d = tcopula::copula::DensityEvalConfig::default();
        d.rel_tol = self.quadrature.rel_tol;
        d.max_panels = self.quadrature.max_panels;
        d
    }

    pub fn policy(&self) -> tcopula::selection::EnumerationPolicy {
        match self.family.policy.as_str() {
            "all" => tcopula::selection::EnumerationPolicy::All,
            _ => tcopula::selection::EnumerationPolicy::TwoGroup,
        }
    }

    pub fn loss_form(&self) -> tcopula::risk::LossForm {
        match self.risk.loss_form.as_str() {
            "linearized" => tcopula::risk::LossForm::Linearized,
            _ => tcopula::risk::LossForm::Exact,
        }
    }
}
