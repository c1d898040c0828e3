//! Run configuration read from TOML.
//!
//! Every table and key is optional; unknown keys are rejected. Defaults:
//!
//! ```toml
//! family = "frank"            # frank | clayton | gumbel
//! seed = 1
//!
//! [concordance]
//! weight = "unit"             # unit | dampened
//!
//! [self_consistency]
//! tol = 1e-6
//! max_iter = 200
//!
//! [mc]
//! method = "exact"            # exact | frailty_mc
//! n = 500                     # frailty draws for frailty_mc
//! seed = 1
//!
//! [optimizer]
//! tau_lower = 0.01
//! tau_upper = 0.95
//! tol = 1e-4
//! scan_points = 10
//!
//! [bootstrap]
//! replicates = 200
//!
//! [metrics]
//! # restriction = 12.0      # defaults to the largest follow-up time
//! quantile_level = 0.5
//! grid_points = 100
//! ipcw = true
//!
//! [crossval]
//! scheme = "k_fold"           # k_fold (folds, repeats) | random (test_fraction, repeats)
//! folds = 3
//! repeats = 1
//!
//! # [simulation] takes the fields of `SimulationConfig`.
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::copula::Family;
use crate::evaluation::{CvScheme, MetricConfig};
use crate::fit::FitSettings;
use crate::likelihood::{AlphaSettings, LikelihoodMethod};
use crate::marginal::{PairWeight, SelfConsistencyOptions};
use crate::simulation::SimulationConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConcordanceSection {
    pub weight: PairWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelfConsistencySection {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SelfConsistencySection {
    fn default() -> Self {
        let d = SelfConsistencyOptions::default();
        SelfConsistencySection { tol: d.tol, max_iter: d.max_iter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub method: LikelihoodMethod,
    pub n: usize,
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        let d = AlphaSettings::default();
        McSection { method: d.method, n: d.mc_draws, seed: d.mc_seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub tau_lower: f64,
    pub tau_upper: f64,
    pub tol: f64,
    pub scan_points: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = AlphaSettings::default();
        OptimizerSection { tau_lower: d.tau_lower, tau_upper: d.tau_upper, tol: d.tol, scan_points: d.scan_points }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSection {
    pub replicates: usize,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        BootstrapSection { replicates: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub family: Family,
    pub seed: u64,
    pub concordance: ConcordanceSection,
    pub self_consistency: SelfConsistencySection,
    pub mc: McSection,
    pub optimizer: OptimizerSection,
    pub bootstrap: BootstrapSection,
    pub metrics: MetricConfig,
    pub crossval: CvScheme,
    pub simulation: Option<SimulationConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: Family::Frank,
            seed: 1,
            concordance: ConcordanceSection::default(),
            self_consistency: SelfConsistencySection::default(),
            mc: McSection::default(),
            optimizer: OptimizerSection::default(),
            bootstrap: BootstrapSection::default(),
            metrics: MetricConfig::default(),
            crossval: CvScheme::KFold { folds: 3, repeats: 1 },
            simulation: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and returns it with the SHA-256 of its bytes.
    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Ok((Self::from_toml(&text)?, sha256_hex(text.as_bytes())))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let o = &self.optimizer;
        if !(0.0 < o.tau_lower && o.tau_lower < o.tau_upper && o.tau_upper < 1.0) {
            return bad(format!(
                "optimizer.tau_lower / optimizer.tau_upper: need 0 < {} < {} < 1",
                o.tau_lower, o.tau_upper
            ));
        }
        if !(o.tol > 0.0) {
            return bad("optimizer.tol: must be positive".into());
        }
        if o.scan_points < 2 {
            return bad("optimizer.scan_points: must be at least 2".into());
        }
        if self.mc.n == 0 {
            return bad("mc.n: must be positive".into());
        }
        if !(self.self_consistency.tol > 0.0) || self.self_consistency.max_iter == 0 {
            return bad("self_consistency: tol and max_iter must be positive".into());
        }
        if self.bootstrap.replicates < 2 {
            return bad("bootstrap.replicates: must be at least 2".into());
        }
        let m = &self.metrics;
        if let Some(r) = m.restriction {
            if !(r > 0.0 && r.is_finite()) {
                return bad("metrics.restriction: must be positive".into());
            }
        }
        if !(m.quantile_level > 0.0 && m.quantile_level < 1.0) {
            return bad("metrics.quantile_level: must be in (0, 1)".into());
        }
        if m.grid_points < 2 {
            return bad("metrics.grid_points: must be at least 2".into());
        }
        if let Some(sim) = &self.simulation {
            sim.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            weight: self.concordance.weight,
            self_consistency: SelfConsistencyOptions {
                tol: self.self_consistency.tol,
                max_iter: self.self_consistency.max_iter,
            },
            alpha: AlphaSettings {
                method: self.mc.method,
                mc_draws: self.mc.n,
                mc_seed: self.mc.seed,
                tau_lower: self.optimizer.tau_lower,
                tau_upper: self.optimizer.tau_upper,
                tol: self.optimizer.tol,
                scan_points: self.optimizer.scan_points,
            },
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
