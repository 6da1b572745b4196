//! Scenario files: one TOML document describing a complete experiment.
//!
//! ```toml
//! name = "desk"
//! n_agents = 5
//! n_seeds = 20
//!
//! [world]
//! area_width = 300.0
//! area_height = 200.0
//! tile_size = 25.0
//!
//! [network]
//! mean_delay = 3.2
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptation::AsaConfig;
use crate::costs::CostProfile;
use crate::meshnet::NetworkConfig;
use crate::optimizer::DEParams;
use crate::trial::{Controller, Heterogeneity, TrialSetup};
use crate::world::WorldConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "Scenario::d_n_agents")]
    pub n_agents: usize,
    #[serde(default = "Scenario::d_n_seeds")]
    pub n_seeds: usize,
    /// First trial seed; trial k of a batch uses `seed + k`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub controller: Controller,
    pub world: WorldConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub profile: CostProfile,
    #[serde(default)]
    pub de: DEParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asa: Option<AsaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heterogeneity: Option<Heterogeneity>,
}

impl Scenario {
    fn d_n_agents() -> usize {
        5
    }
    fn d_n_seeds() -> usize {
        20
    }

    /// Parses and validates a scenario. Errors name the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut key = e.path().to_string();
            let message = e.inner().message().to_string();
            if let Some(field) = missing_field(&message) {
                key = if key == "." || key.is_empty() {
                    field.to_string()
                } else {
                    format!("{key}.{field}")
                };
            }
            Error::config(key, message)
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Fully resolved TOML, defaults expanded.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<document>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            return Err(Error::config(
                "name",
                "must be non-empty and use only letters, digits, '-', '_' or '.'",
            ));
        }
        if self.n_agents == 0 {
            return Err(Error::config("n_agents", "must be at least 1"));
        }
        if self.n_seeds == 0 {
            return Err(Error::config("n_seeds", "must be at least 1"));
        }
        self.world.validate()?;
        self.network.validate()?;
        if self.network.comm_range != self.world.comm_range {
            return Err(Error::config(
                "network.comm_range",
                format!("must equal world.comm_range ({})", self.world.comm_range),
            ));
        }
        self.profile.validate()?;
        self.de.validate()?;
        if let Some(asa) = &self.asa {
            asa.validate()?;
        }
        if let Some(h) = &self.heterogeneity {
            h.validate()?;
        }
        Ok(())
    }

    pub fn setup(&self) -> TrialSetup {
        TrialSetup {
            world: self.world.clone(),
            network: self.network.clone(),
            profile: self.profile,
            de: self.de,
            n_agents: self.n_agents,
            heterogeneity: self.heterogeneity,
            controller: self.controller,
            record_tile_times: false,
        }
    }

    /// Seeds of the batch, `seed .. seed + n_seeds`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64).map(|k| self.seed.wrapping_add(k)).collect()
    }
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}
