//! JSON run configuration. Every section is optional and falls back to its
//! defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::LqrSpec;
use crate::dynamics::{inertia_constants, PhysicalParams};
use crate::entropy_search::{Domain, EsConfig};
use crate::error::{Error, Result};
use crate::gp::GpHyper;
use crate::simulator::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub n: usize,
    #[serde(rename = "log_uniform_kE")]
    pub log_uniform_ke: bool,
    /// Worker threads for batch evaluation; 0 picks the rayon default.
    pub threads: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { n: 10_000, log_uniform_ke: false, threads: 0, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub physical: PhysicalParams,
    pub lqr: LqrSpec,
    pub sim: SimConfig,
    pub gp: GpHyper,
    pub es: EsConfig,
    pub domain: Domain,
    pub search: SearchConfig,
}

impl AppConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Domain-level checks, reported as configuration errors.
    pub fn validate(&self) -> Result<()> {
        let as_config = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        inertia_constants(&self.physical).map_err(as_config)?;
        self.lqr.validate().map_err(as_config)?;
        self.sim.validate()?;
        self.gp.validate().map_err(as_config)?;
        self.es.validate()?;
        self.domain.validate().map_err(as_config)?;
        Ok(())
    }

    /// Compact single-line JSON for output headers.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
