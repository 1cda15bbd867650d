//! Distributional checks of the direct-method kernel.

mod common;

use common::*;
use parrep_core::accumulator::Recording;
use parrep_core::model::{
    schlogl, ParameterVector, PropensityKind, Reaction, ReactionNetwork, State,
};
use parrep_core::ssa::{draw_jump, run_ssa};
use parrep_core::Error;

#[test]
fn schlogl_holding_times_and_channels() {
    let net = schlogl().network;
    let x = [25];
    let props = net.evaluate_propensities(&x);
    let expected = [72.0, 13.248, 12.5, 73.75];
    for (a, b) in props.iter().zip(expected) {
        assert!((a - b).abs() < 1e-9, "{props:?}");
    }
    let total: f64 = props.iter().sum();

    let n = 20_000;
    let mut rng = aux_stream(7, 0);
    let mut taus = Vec::with_capacity(n);
    let mut counts = [0.0; 4];
    for _ in 0..n {
        let j = draw_jump(&net, &x, &mut rng).unwrap();
        taus.push(j.tau);
        counts[j.channel] += 1.0;
    }

    taus.sort_by(f64::total_cmp);
    let d = taus
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = 1.0 - (-total * t).exp();
            (f - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < ks_critical_01(n), "KS distance {d}");

    let stat: f64 = counts
        .iter()
        .zip(&props)
        .map(|(&o, &p)| {
            let e = n as f64 * p / total;
            (o - e).powi(2) / e
        })
        .sum();
    assert!(stat < chi_square_critical(3.0, 0.01), "chi-square {stat}");
}

#[test]
fn pure_death_extinction_time() {
    let net = ReactionNetwork::new(
        vec!["X".into()],
        vec![Reaction {
            stoich: vec![-1],
            propensity: PropensityKind::MassAction {
                params: vec![0],
                prefactor: 1.0,
                orders: vec![1],
                volume_power: 0,
            },
        }],
        1.0,
        ParameterVector::new(vec!["k".into()], vec![1.0]).unwrap(),
        vec![],
    )
    .unwrap();
    let rec = Recording::default();
    let n = 10_000;
    let mut times = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = aux_stream(11, i as u32);
        match run_ssa(&net, &State(vec![5]), 1e6, &rec, &mut rng) {
            Err(e) => {
                assert!(matches!(e.error, Error::AbsorbingState { .. }));
                times.push(e.partial.clock);
            }
            Ok(_) => panic!("pure death must absorb"),
        }
    }
    // E[T] = H_5, Var[T] = Σ 1/k²
    let h5 = 1.0 + 0.5 + 1.0 / 3.0 + 0.25 + 0.2;
    let var: f64 = (1..=5).map(|k| 1.0 / (k * k) as f64).sum();
    let mean = times.iter().sum::<f64>() / n as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - h5).abs() < 4.0 * se, "mean {mean} vs {h5}");
}
