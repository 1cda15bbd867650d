//! Reaction networks as data.
//!
//! A [`ReactionNetwork`] holds species, stoichiometry vectors, a named parameter
//! vector and declarative propensity kinds. Because every propensity is one of a
//! fixed set of closed forms, the parameter gradient `∂λ_j/∂c_k` is always
//! available analytically, which the path-space Fisher information needs.

mod builtin;
mod file;

pub use builtin::{builtin_by_name, genetic_switch, schlogl, BuiltinModel, BUILTIN_NAMES};
pub use file::{parse_network, NetworkSpec};

use std::fmt;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate constants and model constants, in a fixed order with unique names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    names: Vec<String>,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidNetwork("parameter vector is empty".into()));
        }
        if names.len() != values.len() {
            return Err(Error::InvalidNetwork(format!(
                "{} parameter names but {} values",
                names.len(),
                values.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate parameter name `{name}`"
                )));
            }
        }
        if let Some((name, v)) = names
            .iter()
            .zip(&values)
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidNetwork(format!(
                "parameter `{name}` must be positive and finite, got {v}"
            )));
        }
        Ok(Self { names, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Declarative propensity function of one channel.
///
/// `MassAction` evaluates to
/// `prefactor · Π_{k ∈ params} c_k · Π_i ff(x_i, orders[i]) · V^volume_power`
/// where `ff(x, n) = x (x-1) ... (x-n+1)` is zero whenever `x < n`.
///
/// The Hill kinds model a two-state gate driven by a sensor species, with
/// `h = x_s² / (x_s² + D²)`:
/// activation is `gate · (k_base + (k_max - k_base) h)` and deactivation is
/// `gate · (k_max - (k_max - k_base) h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PropensityKind {
    MassAction {
        params: Vec<usize>,
        #[serde(default = "one")]
        prefactor: f64,
        orders: Vec<u32>,
        #[serde(default)]
        volume_power: i32,
    },
    HillActivation {
        base: usize,
        max: usize,
        half_saturation: usize,
        sensor: usize,
        gate: usize,
    },
    HillDeactivation {
        base: usize,
        max: usize,
        half_saturation: usize,
        sensor: usize,
        gate: usize,
    },
}

fn one() -> f64 {
    1.0
}

impl PropensityKind {
    /// Parameter indices that can carry a nonzero gradient.
    pub fn support(&self) -> Vec<usize> {
        match self {
            PropensityKind::MassAction { params, .. } => params.clone(),
            PropensityKind::HillActivation {
                base,
                max,
                half_saturation,
                ..
            }
            | PropensityKind::HillDeactivation {
                base,
                max,
                half_saturation,
                ..
            } => vec![*base, *max, *half_saturation],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reaction {
    pub stoich: Vec<i64>,
    pub propensity: PropensityKind,
}

/// Species subset whose total population is invariant under every reaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConservedSum {
    pub species: Vec<usize>,
    pub total: i64,
}

/// Population vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(pub Vec<i64>);

impl State {
    pub fn new(populations: Vec<i64>) -> Self {
        State(populations)
    }
}

impl Deref for State {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl DerefMut for State {
    fn deref_mut(&mut self) -> &mut [i64] {
        &mut self.0
    }
}

impl From<Vec<i64>> for State {
    fn from(v: Vec<i64>) -> Self {
        State(v)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// Immutable, validated reaction network.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "NetworkSpec", into = "NetworkSpec")]
pub struct ReactionNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
    volume: f64,
    params: ParameterVector,
    conserved: Vec<ConservedSum>,
    // Parameter- and volume-dependent constant factor of each mass-action channel.
    scale: Vec<f64>,
}

impl PartialEq for ReactionNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.species == other.species
            && self.reactions == other.reactions
            && self.volume == other.volume
            && self.params == other.params
            && self.conserved == other.conserved
    }
}

impl ReactionNetwork {
    pub fn new(
        species: Vec<String>,
        reactions: Vec<Reaction>,
        volume: f64,
        params: ParameterVector,
        conserved: Vec<ConservedSum>,
    ) -> Result<Self> {
        let n = species.len();
        let l = params.len();
        let bad = |msg: String| Err(Error::InvalidNetwork(msg));
        if n == 0 {
            return bad("network has no species".into());
        }
        if reactions.is_empty() {
            return bad("network has no reactions".into());
        }
        if !(volume.is_finite() && volume > 0.0) {
            return bad(format!("volume must be positive, got {volume}"));
        }
        for (j, r) in reactions.iter().enumerate() {
            if r.stoich.len() != n {
                return bad(format!(
                    "reaction {j}: stoichiometry has length {} but there are {n} species",
                    r.stoich.len()
                ));
            }
            if r.stoich.iter().all(|&s| s == 0) {
                return bad(format!("reaction {j}: stoichiometry is the zero vector"));
            }
            match &r.propensity {
                PropensityKind::MassAction {
                    params: idx,
                    prefactor,
                    orders,
                    ..
                } => {
                    if let Some(k) = idx.iter().find(|&&k| k >= l) {
                        return bad(format!("reaction {j}: parameter index {k} out of range"));
                    }
                    if orders.len() != n {
                        return bad(format!(
                            "reaction {j}: {} reactant orders for {n} species",
                            orders.len()
                        ));
                    }
                    if !(prefactor.is_finite() && *prefactor >= 0.0) {
                        return bad(format!("reaction {j}: prefactor must be nonnegative"));
                    }
                    // Firing must never drive a consumed species negative: a channel
                    // that removes `s` copies needs at least `s` copies present.
                    for (i, (&s, &o)) in r.stoich.iter().zip(orders).enumerate() {
                        if s < 0 && (o as i64) < -s {
                            return bad(format!(
                                "reaction {j}: removes {} of species {i} but has order {o}",
                                -s
                            ));
                        }
                    }
                }
                PropensityKind::HillActivation {
                    base,
                    max,
                    half_saturation,
                    sensor,
                    gate,
                }
                | PropensityKind::HillDeactivation {
                    base,
                    max,
                    half_saturation,
                    sensor,
                    gate,
                } => {
                    if [*base, *max, *half_saturation].iter().any(|&k| k >= l) {
                        return bad(format!("reaction {j}: Hill parameter index out of range"));
                    }
                    if *sensor >= n || *gate >= n {
                        return bad(format!("reaction {j}: Hill species index out of range"));
                    }
                    if params.get(*base) > params.get(*max) {
                        return bad(format!("reaction {j}: Hill base rate exceeds max rate"));
                    }
                    for (i, &s) in r.stoich.iter().enumerate() {
                        if s < 0 && (i != *gate || s < -1) {
                            return bad(format!(
                                "reaction {j}: Hill channel may only remove one gate copy"
                            ));
                        }
                    }
                }
            }
        }
        for (c, cs) in conserved.iter().enumerate() {
            if cs.species.iter().any(|&i| i >= n) {
                return bad(format!("conserved sum {c}: species index out of range"));
            }
            for (j, r) in reactions.iter().enumerate() {
                let delta: i64 = cs.species.iter().map(|&i| r.stoich[i]).sum();
                if delta != 0 {
                    return bad(format!("reaction {j} changes conserved sum {c} by {delta}"));
                }
            }
        }
        let scale = reactions
            .iter()
            .map(|r| match &r.propensity {
                PropensityKind::MassAction {
                    params: idx,
                    prefactor,
                    volume_power,
                    ..
                } => {
                    idx.iter().map(|&k| params.get(k)).product::<f64>()
                        * prefactor
                        * volume.powi(*volume_power)
                }
                _ => 1.0,
            })
            .collect();
        Ok(Self {
            species,
            reactions,
            volume,
            params,
            conserved,
            scale,
        })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn params(&self) -> &ParameterVector {
        &self.params
    }

    pub fn conserved(&self) -> &[ConservedSum] {
        &self.conserved
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Copy of the network with parameter `k` replaced.
    pub fn with_param(&self, k: usize, value: f64) -> Result<Self> {
        let mut values = self.params.values.clone();
        values[k] = value;
        let params = ParameterVector::new(self.params.names.clone(), values)?;
        Self::new(
            self.species.clone(),
            self.reactions.clone(),
            self.volume,
            params,
            self.conserved.clone(),
        )
    }

    /// Checks nonnegativity, dimension and conserved totals.
    pub fn validate_state(&self, x: &[i64]) -> Result<()> {
        if x.len() != self.n_species() {
            return Err(Error::InvalidState(format!(
                "state has {} entries but network has {} species",
                x.len(),
                self.n_species()
            )));
        }
        if let Some(i) = x.iter().position(|&v| v < 0) {
            return Err(Error::InvalidState(format!(
                "species `{}` has negative population {}",
                self.species[i], x[i]
            )));
        }
        for cs in &self.conserved {
            let total: i64 = cs.species.iter().map(|&i| x[i]).sum();
            if total != cs.total {
                return Err(Error::InvalidState(format!(
                    "conserved sum over {:?} is {total}, expected {}",
                    cs.species, cs.total
                )));
            }
        }
        Ok(())
    }

    /// Propensity of channel `j` at `x`.
    #[inline]
    pub fn propensity(&self, j: usize, x: &[i64]) -> f64 {
        let c = self.params.values();
        match &self.reactions[j].propensity {
            PropensityKind::MassAction { orders, .. } => {
                let mut v = self.scale[j];
                for (&xi, &o) in x.iter().zip(orders) {
                    if o > 0 {
                        v *= falling_factorial(xi, o);
                    }
                }
                v
            }
            PropensityKind::HillActivation {
                base,
                max,
                half_saturation,
                sensor,
                gate,
            } => {
                let g = x[*gate] as f64;
                if g == 0.0 {
                    return 0.0;
                }
                let h = hill(x[*sensor], c[*half_saturation]);
                g * (c[*base] + (c[*max] - c[*base]) * h)
            }
            PropensityKind::HillDeactivation {
                base,
                max,
                half_saturation,
                sensor,
                gate,
            } => {
                let g = x[*gate] as f64;
                if g == 0.0 {
                    return 0.0;
                }
                let h = hill(x[*sensor], c[*half_saturation]);
                g * (c[*max] - (c[*max] - c[*base]) * h)
            }
        }
    }

    /// Writes all propensities into `out` and returns their sum.
    #[inline]
    pub fn propensities_into(&self, x: &[i64], out: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.propensity(j, x);
            total += *o;
        }
        total
    }

    pub fn evaluate_propensities(&self, x: &[i64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_reactions()];
        self.propensities_into(x, &mut out);
        out
    }

    /// Sparse gradient of channel `j`: pushes `(k, ∂λ_j/∂c_k)` for every
    /// parameter in the channel's support. `lambda` must be `propensity(j, x)`.
    #[inline]
    pub fn channel_gradient(&self, j: usize, x: &[i64], lambda: f64, grad: &mut Vec<(usize, f64)>) {
        grad.clear();
        let c = self.params.values();
        match &self.reactions[j].propensity {
            PropensityKind::MassAction { params, .. } => {
                for &k in params {
                    // Repeated indices make λ quadratic in c_k.
                    let mult = params.iter().filter(|&&q| q == k).count() as f64;
                    if grad.iter().any(|&(q, _)| q == k) {
                        continue;
                    }
                    grad.push((k, mult * lambda / c[k]));
                }
            }
            PropensityKind::HillActivation {
                base,
                max,
                half_saturation,
                sensor,
                gate,
            } => {
                let g = x[*gate] as f64;
                let (h, dh) = hill_with_derivative(x[*sensor], c[*half_saturation]);
                grad.push((*base, g * (1.0 - h)));
                grad.push((*max, g * h));
                grad.push((*half_saturation, g * (c[*max] - c[*base]) * dh));
            }
            PropensityKind::HillDeactivation {
                base,
                max,
                half_saturation,
                sensor,
                gate,
            } => {
                let g = x[*gate] as f64;
                let (h, dh) = hill_with_derivative(x[*sensor], c[*half_saturation]);
                grad.push((*base, g * h));
                grad.push((*max, g * (1.0 - h)));
                grad.push((*half_saturation, -g * (c[*max] - c[*base]) * dh));
            }
        }
    }

    /// Dense `m × l` matrix of `∂λ_j/∂c_k`.
    pub fn propensity_gradients(&self, x: &[i64]) -> Vec<Vec<f64>> {
        let l = self.n_params();
        let mut buf = Vec::with_capacity(4);
        (0..self.n_reactions())
            .map(|j| {
                let lambda = self.propensity(j, x);
                let mut row = vec![0.0; l];
                self.channel_gradient(j, x, lambda, &mut buf);
                for &(k, d) in &buf {
                    row[k] += d;
                }
                row
            })
            .collect()
    }

    /// Applies channel `j` in place.
    #[inline]
    pub fn apply(&self, j: usize, x: &mut [i64]) {
        for (xi, &s) in x.iter_mut().zip(&self.reactions[j].stoich) {
            *xi += s;
        }
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec::from(self.clone())
    }
}

#[inline]
pub(crate) fn falling_factorial(x: i64, order: u32) -> f64 {
    let order = order as i64;
    if x < order {
        return 0.0;
    }
    let mut v = 1.0;
    for i in 0..order {
        v *= (x - i) as f64;
    }
    v
}

#[inline]
fn hill(sensor: i64, d: f64) -> f64 {
    let s2 = (sensor as f64) * (sensor as f64);
    s2 / (s2 + d * d)
}

/// Returns `(h, ∂h/∂D)`.
#[inline]
fn hill_with_derivative(sensor: i64, d: f64) -> (f64, f64) {
    let s2 = (sensor as f64) * (sensor as f64);
    let den = s2 + d * d;
    (s2 / den, -2.0 * d * s2 / (den * den))
}
