//! `run_parrep` against a direct round-by-round transcription of the algorithm.

mod common;

use common::*;
use parrep_core::accumulator::{Observable, Recording};
use parrep_core::model::{schlogl, ReactionNetwork, State};
use parrep_core::parrep::{dephase, run_parrep, ParRepParams, RegionMap};
use parrep_core::rng::{Phase, RngStream, StreamKey};
use parrep_core::ssa::select_channel;

#[derive(Debug, Default)]
struct Naive {
    clock: f64,
    integral: f64,
    jumps: Vec<u64>,
    /// `(rounds, K)` per parallel phase, including one cut at `t_end`.
    phases: Vec<(u64, usize)>,
    final_state: Vec<i64>,
}

impl Naive {
    fn charge(&mut self, x: &[i64], dt: f64, record_from: f64) {
        let lo = self.clock.max(record_from);
        let hi = self.clock + dt;
        if hi > lo {
            self.integral += x[0] as f64 * (hi - lo);
        }
        self.clock += dt;
    }
}

fn region_of(regions: &RegionMap, x: &[i64]) -> usize {
    regions.region(x)
}

/// Timed step; returns `false` when the interval was cut at `t_end`.
fn step(
    net: &ReactionNetwork,
    x: &mut Vec<i64>,
    rng: &mut RngStream,
    n: &mut Naive,
    t_end: f64,
    from: f64,
) -> bool {
    let props = net.evaluate_propensities(x);
    let total: f64 = props.iter().sum();
    let tau = rng.exponential(total);
    let j = select_channel(&props, total, rng.uniform());
    if tau >= t_end - n.clock {
        let rest = t_end - n.clock;
        n.charge(x, rest, from);
        n.clock = t_end;
        return false;
    }
    n.charge(x, tau, from);
    net.apply(j, x);
    if n.clock >= from {
        n.jumps[j] += 1;
    }
    true
}

fn naive_parrep(
    net: &ReactionNetwork,
    x0: &[i64],
    regions: &RegionMap,
    p: &ParRepParams,
    from: f64,
    traj: u32,
) -> Naive {
    let mut n = Naive {
        jumps: vec![0; net.n_reactions()],
        ..Default::default()
    };
    let mut x = x0.to_vec();
    let mut cycle = 0u64;
    while n.clock < p.t_end {
        let mut rng = RngStream::new(p.seed, StreamKey::serial(traj, cycle));
        let mut region = region_of(regions, &x);
        let mut streak = 0;
        let mut reached = false;
        while n.clock < p.t_end {
            if !step(net, &mut x, &mut rng, &mut n, p.t_end, from) {
                break;
            }
            let r = region_of(regions, &x);
            if r == region {
                streak += 1;
                if streak >= p.decorrelation {
                    reached = true;
                    break;
                }
            } else {
                streak = 0;
                region = r;
            }
        }
        if !reached {
            break;
        }

        let home = region;
        let mut states = vec![x.clone(); p.replicas];
        let mut rngs: Vec<RngStream> = (0..p.replicas)
            .map(|r| {
                RngStream::new(
                    p.seed,
                    StreamKey::replica(traj, r as u32, Phase::Dephase, cycle),
                )
            })
            .collect();
        let mut resample = RngStream::new(p.seed, StreamKey::resample(traj, cycle));
        for _ in 0..p.dephasing {
            let mut exited = Vec::new();
            for r in 0..p.replicas {
                let props = net.evaluate_propensities(&states[r]);
                let total: f64 = props.iter().sum();
                let j = select_channel(&props, total, rngs[r].uniform());
                net.apply(j, &mut states[r]);
                if region_of(regions, &states[r]) != home {
                    exited.push(r);
                }
            }
            let survivors: Vec<usize> = (0..p.replicas).filter(|r| !exited.contains(r)).collect();
            assert!(!survivors.is_empty());
            for r in exited {
                let donor = survivors[resample.index(survivors.len())];
                states[r] = states[donor].clone();
            }
        }

        let mut rngs: Vec<RngStream> = (0..p.replicas)
            .map(|r| {
                RngStream::new(
                    p.seed,
                    StreamKey::replica(traj, r as u32, Phase::Parallel, cycle),
                )
            })
            .collect();
        let mut rounds = 0;
        let (k, exited) = 'rounds: loop {
            rounds += 1;
            for r in 0..p.replicas {
                if !step(net, &mut states[r], &mut rngs[r], &mut n, p.t_end, from) {
                    break 'rounds (r, false);
                }
                if region_of(regions, &states[r]) != home {
                    break 'rounds (r, true);
                }
            }
        };
        n.phases.push((rounds, k + 1));
        if !exited {
            break;
        }
        x = states[k].clone();
        cycle += 1;
    }
    n.final_state = x;
    n
}

fn compare(net: &ReactionNetwork, x0: &[i64], regions: &RegionMap, p: &ParRepParams, from: f64) {
    let rec = Recording {
        observables: vec![Observable::population("X", 0)],
        record_from: from,
        ..Default::default()
    };
    let report = run_parrep(net, &State(x0.to_vec()), regions, p, &rec, 3).unwrap();
    let naive = naive_parrep(net, x0, regions, p, from, 3);
    let acc = &report.accumulator;
    assert_eq!(acc.jump_counts, naive.jumps);
    assert_eq!(report.final_state.0, naive.final_state);
    let phases: Vec<(u64, usize)> = report
        .cycles
        .iter()
        .filter(|c| c.reached_qsd)
        .map(|c| (c.parallel_rounds, c.exit_replica))
        .collect();
    assert_eq!(phases, naive.phases);
    assert!(!naive.phases.is_empty(), "never reached a parallel phase");
    assert!((acc.clock - naive.clock).abs() <= 1e-9 * naive.clock);
    assert!((acc.integrals[0] - naive.integral).abs() <= 1e-9 * naive.integral.abs());
}

#[test]
fn schlogl_matches_reference() {
    let m = schlogl();
    let p = ParRepParams {
        decorrelation: 40,
        dephasing: 30,
        replicas: 5,
        t_end: 400.0,
        seed: 99,
    };
    compare(&m.network, &[94], &m.regions, &p, 0.0);
    compare(&m.network, &[94], &m.regions, &p, 150.0);
}

#[test]
fn toy_chain_matches_reference() {
    let net = toy_chain();
    let p = ParRepParams {
        decorrelation: 3,
        dephasing: 4,
        replicas: 3,
        t_end: 200.0,
        seed: 5,
    };
    compare(&net, &[3, 3], &toy_regions(), &p, 20.0);
}

#[test]
fn independent_of_worker_count() {
    let m = schlogl();
    let p = ParRepParams {
        decorrelation: 200,
        dephasing: 200,
        replicas: 6,
        t_end: 2000.0,
        seed: 17,
    };
    let rec = Recording {
        observables: vec![Observable::population("X", 0)],
        fim: true,
        record_from: 500.0,
        ..Default::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_parrep(&m.network, &m.initial_state, &m.regions, &p, &rec, 0).unwrap())
    };
    let a = run(1);
    for t in [3, 8] {
        let b = run(t);
        assert_eq!(a.accumulator.clock.to_bits(), b.accumulator.clock.to_bits());
        assert_eq!(a.accumulator.integrals, b.accumulator.integrals);
        assert_eq!(a.accumulator.fim, b.accumulator.fim);
        assert_eq!(a.final_state, b.final_state);
    }
}

/// Fleming–Viot replicas approach the quasi-stationary law of the jump chain.
#[test]
fn dephasing_reaches_qsd() {
    let net = toy_chain_aperiodic();
    let regions = toy_regions();
    let (_, qsd) = perron_left(&toy_substochastic(&net));
    let replicas = 4000;
    let rngs = (0..replicas)
        .map(|r| RngStream::new(8, StreamKey::replica(0, r, Phase::Dephase, 0)))
        .collect();
    let mut resample = RngStream::new(8, StreamKey::resample(0, 0));
    let out = dephase(&net, &toy_state(3), &regions, 200, rngs, &mut resample).unwrap();
    let mut freq = [0.0; 5];
    for s in &out.states {
        freq[(s.0[0] - 1) as usize] += 1.0 / replicas as f64;
    }
    let tv: f64 = 0.5
        * freq
            .iter()
            .zip(&qsd)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    assert!(tv < 0.05, "TV {tv}, empirical {freq:?}, qsd {qsd:?}");
    assert!(out.restarts > 0);
}
