//! TOML network definition files.
//!
//! ```toml
//! species = ["S"]
//! volume = 25.0
//!
//! [[parameters]]
//! name = "c1"
//! value = 3.0
//!
//! [[reactions]]
//! stoich = [1]
//! [reactions.propensity]
//! kind = "mass_action"
//! params = [0]
//! prefactor = 1.0
//! orders = [2]
//! volume_power = -1
//! ```

use serde::{Deserialize, Serialize};

use super::{ConservedSum, ParameterVector, Reaction, ReactionNetwork};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterEntry {
    pub name: String,
    pub value: f64,
}

/// Serialized form of a [`ReactionNetwork`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub species: Vec<String>,
    pub volume: f64,
    pub parameters: Vec<ParameterEntry>,
    pub reactions: Vec<Reaction>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conserved: Vec<ConservedSum>,
}

impl TryFrom<NetworkSpec> for ReactionNetwork {
    type Error = Error;

    fn try_from(spec: NetworkSpec) -> Result<Self> {
        let (names, values) = spec
            .parameters
            .into_iter()
            .map(|p| (p.name, p.value))
            .unzip();
        ReactionNetwork::new(
            spec.species,
            spec.reactions,
            spec.volume,
            ParameterVector::new(names, values)?,
            spec.conserved,
        )
    }
}

impl From<ReactionNetwork> for NetworkSpec {
    fn from(net: ReactionNetwork) -> Self {
        let parameters = net
            .params
            .names()
            .iter()
            .zip(net.params.values())
            .map(|(name, &value)| ParameterEntry {
                name: name.clone(),
                value,
            })
            .collect();
        NetworkSpec {
            species: net.species,
            volume: net.volume,
            parameters,
            reactions: net.reactions,
            conserved: net.conserved,
        }
    }
}

impl NetworkSpec {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Schema {
            path: String::new(),
            message: e.to_string(),
        })
    }
}

/// Parses and validates a TOML network definition.
pub fn parse_network(text: &str) -> Result<ReactionNetwork> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Schema {
        path: String::new(),
        message: e.to_string(),
    })?;
    let spec: NetworkSpec = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    ReactionNetwork::try_from(spec)
}
