use super::{ConservedSum, ParameterVector, PropensityKind, Reaction, ReactionNetwork, State};
use crate::accumulator::Observable;
use crate::error::{Error, Result};
use crate::parrep::RegionMap;

pub const BUILTIN_NAMES: [&str; 2] = ["schlogl", "genetic-switch"];

/// A shipped network together with the defaults its experiments use.
#[derive(Clone, Debug)]
pub struct BuiltinModel {
    pub name: &'static str,
    pub network: ReactionNetwork,
    pub initial_state: State,
    pub regions: RegionMap,
    pub observables: Vec<Observable>,
    /// Default decorrelation and dephasing thresholds.
    pub threshold: u64,
}

pub fn builtin_by_name(name: &str) -> Result<BuiltinModel> {
    match name {
        "schlogl" => Ok(schlogl()),
        "genetic-switch" | "genetic_switch" | "gsw" => Ok(genetic_switch()),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

fn mass_action(
    params: Vec<usize>,
    prefactor: f64,
    orders: Vec<u32>,
    volume_power: i32,
) -> PropensityKind {
    PropensityKind::MassAction {
        params,
        prefactor,
        orders,
        volume_power,
    }
}

/// Schlögl model at V = 25 with a = 1, b = 2 folded into the constant prefactors.
///
/// | channel | propensity              | η  |
/// |---------|-------------------------|----|
/// | 1       | c1 a x(x-1)/V           | +1 |
/// | 2       | c2 x(x-1)(x-2)/V²       | -1 |
/// | 3       | c3 b V                  | +1 |
/// | 4       | c4 x                    | -1 |
pub fn schlogl() -> BuiltinModel {
    let (a, b) = (1.0, 2.0);
    let params = ParameterVector::new(
        vec!["c1".into(), "c2".into(), "c3".into(), "c4".into()],
        vec![3.0, 0.6, 0.25, 2.95],
    )
    .expect("valid Schlögl parameters");
    let reactions = vec![
        Reaction {
            stoich: vec![1],
            propensity: mass_action(vec![0], a, vec![2], -1),
        },
        Reaction {
            stoich: vec![-1],
            propensity: mass_action(vec![1], 1.0, vec![3], -2),
        },
        Reaction {
            stoich: vec![1],
            propensity: mass_action(vec![2], b, vec![0], 1),
        },
        Reaction {
            stoich: vec![-1],
            propensity: mass_action(vec![3], 1.0, vec![1], 0),
        },
    ];
    let network = ReactionNetwork::new(vec!["X".into()], reactions, 25.0, params, vec![])
        .expect("valid Schlögl network");
    BuiltinModel {
        name: "schlogl",
        network,
        // upper stable point V·x̄ ≈ 93.7
        initial_state: State(vec![94]),
        regions: RegionMap::single(0, 25.9649, ["W+", "W-"]),
        observables: vec![Observable::population("X", 0)],
        threshold: 5000,
    }
}

/// Genetic switch with positive feedback and explicit mRNA.
///
/// Species are `DNA_act, DNA_in, mRNA, Protein`; the gate is the conserved pair
/// `DNA_act + DNA_in = 1`. Parameters are ordered
/// `a, b, gamma, k0_min, k0_max, k1_min, k1_max, D`.
pub fn genetic_switch() -> BuiltinModel {
    let b = 22.5;
    let a = 2400.0 / b;
    let gamma = 50.0;
    let k_min = 24.0 / b;
    let k_max = 2400.0 / b;
    let d = 1000.0;
    let params = ParameterVector::new(
        [
            "a", "b", "gamma", "k0_min", "k0_max", "k1_min", "k1_max", "D",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        vec![a, b, gamma, k_min, k_max, k_min, k_max, d],
    )
    .expect("valid genetic switch parameters");
    let (act, inact, mrna, protein) = (0, 1, 2, 3);
    let reactions = vec![
        // DNA_in -> DNA_act at rate F(x2)
        Reaction {
            stoich: vec![1, -1, 0, 0],
            propensity: PropensityKind::HillActivation {
                base: 3,
                max: 4,
                half_saturation: 7,
                sensor: protein,
                gate: inact,
            },
        },
        // DNA_act -> DNA_in at rate G(x2)
        Reaction {
            stoich: vec![-1, 1, 0, 0],
            propensity: PropensityKind::HillDeactivation {
                base: 5,
                max: 6,
                half_saturation: 7,
                sensor: protein,
                gate: act,
            },
        },
        // transcription a ξ
        Reaction {
            stoich: vec![0, 0, 1, 0],
            propensity: mass_action(vec![0], 1.0, vec![1, 0, 0, 0], 0),
        },
        // mRNA decay γ x1
        Reaction {
            stoich: vec![0, 0, -1, 0],
            propensity: mass_action(vec![2], 1.0, vec![0, 0, 1, 0], 0),
        },
        // translation γ b x1
        Reaction {
            stoich: vec![0, 0, 0, 1],
            propensity: mass_action(vec![2, 1], 1.0, vec![0, 0, 1, 0], 0),
        },
        // protein decay x2
        Reaction {
            stoich: vec![0, 0, 0, -1],
            propensity: mass_action(vec![], 1.0, vec![0, 0, 0, 1], 0),
        },
    ];
    let network = ReactionNetwork::new(
        vec![
            "DNA_act".into(),
            "DNA_in".into(),
            "mRNA".into(),
            "Protein".into(),
        ],
        reactions,
        a * b,
        params,
        vec![ConservedSum {
            species: vec![act, inact],
            total: 1,
        }],
    )
    .expect("valid genetic switch network");
    BuiltinModel {
        name: "genetic-switch",
        network,
        initial_state: State(vec![0, 1, 0, 0]),
        regions: RegionMap::single(protein, 511.2865, ["W+", "W-"]),
        observables: vec![
            Observable::population("active_DNA", act),
            Observable::population("inactive_DNA", inact),
            Observable::population("mRNA", mrna),
            Observable::population("Protein", protein),
        ],
        threshold: 20_000,
    }
}
