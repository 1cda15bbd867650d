//! Run configuration documents.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accumulator::{Binning, Observable};
use crate::cme::StateBox;
use crate::error::{Error, Result};
use crate::model::{builtin_by_name, parse_network, BuiltinModel, ReactionNetwork, State};
use crate::parrep::{ParRepParams, RegionMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ssa,
    Parrep,
    Cme,
    Sensitivity,
    Reproduce,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Ssa,
    #[default]
    Parrep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParRepSection {
    pub decorrelation: u64,
    pub dephasing: u64,
    pub replicas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub species: String,
    pub cuts: Vec<f64>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Population {
        species: String,
        #[serde(default)]
        label: Option<String>,
    },
    Indicator {
        species: String,
        lo: i64,
        hi: i64,
        label: String,
    },
    Constant {
        value: f64,
        label: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSection {
    pub species: String,
    pub lo: i64,
    pub hi: i64,
    #[serde(default = "one")]
    pub width: i64,
}

fn one() -> i64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmeSection {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in model name or path to a network file.
    pub model: String,
    pub mode: Mode,
    pub seed: u64,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "one_traj")]
    pub n_traj: usize,
    /// Start of the recording window.
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default)]
    pub initial_state: Option<Vec<i64>>,
    #[serde(default)]
    pub parrep: Option<ParRepSection>,
    #[serde(default)]
    pub region: Option<RegionSection>,
    #[serde(default)]
    pub observables: Option<Vec<ObservableSpec>>,
    #[serde(default)]
    pub bins: Option<BinSection>,
    #[serde(default)]
    pub cme: Option<CmeSection>,
    /// Also run plain SSA with identical settings and record the speedup.
    #[serde(default)]
    pub compare_ssa: bool,
    #[serde(default)]
    pub output: OutputSection,
}

fn one_traj() -> usize {
    1
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses a configuration document, applying `key.path=value` overrides first.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| schema("", e.message().to_string()))?;
    for (key, value) in overrides {
        set_path(&mut table, key, value)?;
    }
    let cfg: RunConfig =
        serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let mut path = e.path().to_string();
            let message = e.inner().to_string();
            if let Some(field) = message
                .strip_prefix("missing field `")
                .and_then(|s| s.split('`').next())
            {
                path = if path == "." {
                    field.to_string()
                } else {
                    format!("{path}.{field}")
                };
            }
            schema(&path, message)
        })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

/// Parses `KEY=VALUE`; VALUE is read as a TOML value, or as a bare string.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    match arg.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(schema(arg, "override must look like key=value")),
    }
}

fn set_path(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| schema(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traj < 1 {
            return Err(schema("n_traj", "must be at least 1"));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(schema("burn_in", "must be finite and nonnegative"));
        }
        let needs_time = matches!(self.mode, Mode::Ssa | Mode::Parrep | Mode::Sensitivity);
        if needs_time {
            match self.t_end {
                None => return Err(schema("t_end", "required for this mode")),
                Some(t) if !(t > 0.0 && t.is_finite()) => {
                    return Err(schema("t_end", format!("must be positive, got {t}")))
                }
                Some(t) if self.burn_in >= t => {
                    return Err(schema("burn_in", "must be smaller than t_end"))
                }
                _ => {}
            }
        }
        if self.uses_parrep() && self.parrep.is_none() {
            return Err(schema("parrep", "required when ParRep runs"));
        }
        if self.mode == Mode::Cme && self.cme.is_none() {
            return Err(schema("cme", "required for cme mode"));
        }
        if self.mode == Mode::Reproduce && self.target.is_none() {
            return Err(schema("target", "required for reproduce mode"));
        }
        if self.mode == Mode::Sensitivity && self.n_traj < 2 {
            return Err(schema(
                "n_traj",
                "sensitivity estimates need at least 2 trajectories",
            ));
        }
        Ok(())
    }

    pub fn uses_parrep(&self) -> bool {
        self.mode == Mode::Parrep
            || (self.mode == Mode::Sensitivity && self.engine == Engine::Parrep)
    }

    pub fn window(&self) -> f64 {
        self.t_end.unwrap_or(0.0) - self.burn_in
    }

    pub fn parrep_params(&self) -> Option<ParRepParams> {
        let p = self.parrep.as_ref()?;
        Some(ParRepParams {
            decorrelation: p.decorrelation,
            dephasing: p.dephasing,
            replicas: p.replicas,
            t_end: self.t_end.unwrap_or(0.0),
            seed: self.seed,
        })
    }

    /// Resolves the model and every model-dependent setting.
    pub fn resolve(&self) -> Result<ResolvedModel> {
        let builtin = builtin_by_name(&self.model).ok();
        let (name, net) = match &builtin {
            Some(b) => (b.name.to_string(), b.network.clone()),
            None => {
                let path = Path::new(&self.model);
                if !path.exists() {
                    return Err(Error::UnknownModel(self.model.clone()));
                }
                let text = std::fs::read_to_string(path)?;
                (self.model.clone(), parse_network(&text)?)
            }
        };
        let species = |path: &str, s: &str| {
            net.species_index(s)
                .ok_or_else(|| schema(path, format!("unknown species `{s}`")))
        };
        let initial = match (&self.initial_state, &builtin) {
            (Some(x), _) => State(x.clone()),
            (None, Some(b)) => b.initial_state.clone(),
            (None, None) => return Err(schema("initial_state", "required for a network file")),
        };
        net.validate_state(&initial)
            .map_err(|e| schema("initial_state", e.to_string()))?;
        let regions = match (&self.region, &builtin) {
            (Some(r), _) => {
                let labels = r
                    .labels
                    .clone()
                    .unwrap_or_else(|| (0..=r.cuts.len()).map(|i| format!("W{i}")).collect());
                RegionMap::new(
                    species("region.species", &r.species)?,
                    r.cuts.clone(),
                    labels,
                )
                .map_err(|e| schema("region", e.to_string()))?
            }
            (None, Some(b)) => b.regions.clone(),
            (None, None) if self.uses_parrep() => {
                return Err(schema("region", "required for a network file"))
            }
            (None, None) => RegionMap::single(0, f64::MAX, ["all", "none"]),
        };
        let observables = match (&self.observables, &builtin) {
            (Some(list), _) => list
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    let path = format!("observables[{i}].species");
                    Ok(match o {
                        ObservableSpec::Population { species: s, label } => Observable::population(
                            label.as_deref().unwrap_or(s),
                            species(&path, s)?,
                        ),
                        ObservableSpec::Indicator {
                            species: s,
                            lo,
                            hi,
                            label,
                        } => Observable::indicator(label, species(&path, s)?, *lo, *hi),
                        ObservableSpec::Constant { value, label } => {
                            Observable::constant(label, *value)
                        }
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            (None, Some(b)) => b.observables.clone(),
            (None, None) => net
                .species()
                .iter()
                .enumerate()
                .map(|(i, s)| Observable::population(s, i))
                .collect(),
        };
        let binning = match &self.bins {
            Some(b) => {
                if b.width < 1 || b.hi < b.lo {
                    return Err(schema("bins", "need lo <= hi and width >= 1"));
                }
                Some(Binning {
                    species: species("bins.species", &b.species)?,
                    lo: b.lo,
                    width: b.width,
                    count: ((b.hi - b.lo) / b.width + 1) as usize,
                })
            }
            None => None,
        };
        let state_box = match &self.cme {
            Some(c) => Some(
                StateBox::new(c.lo.clone(), c.hi.clone())
                    .map_err(|e| schema("cme", e.to_string()))?,
            ),
            None => None,
        };
        Ok(ResolvedModel {
            name,
            network: net,
            initial,
            regions,
            observables,
            binning,
            state_box,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ResolvedModel {
    pub name: String,
    pub network: ReactionNetwork,
    pub initial: State,
    pub regions: RegionMap,
    pub observables: Vec<Observable>,
    pub binning: Option<Binning>,
    pub state_box: Option<StateBox>,
}

impl From<BuiltinModel> for ResolvedModel {
    fn from(b: BuiltinModel) -> Self {
        Self {
            name: b.name.to_string(),
            network: b.network,
            initial: b.initial_state,
            regions: b.regions,
            observables: b.observables,
            binning: None,
            state_box: None,
        }
    }
}
