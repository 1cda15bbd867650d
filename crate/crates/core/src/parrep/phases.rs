//! The three ParRep phases.
//!
//! Dephasing and the parallel phase advance replicas in lockstep rounds. To run
//! replicas on different workers without a barrier after every jump, each worker
//! advances its replica speculatively for a chunk of rounds. If some replica
//! leaves the region inside the chunk, every replica is restored to the chunk
//! start and replayed up to the exit round. Each replica only ever reads its own
//! stream, so the result equals round-by-round execution regardless of chunk
//! size or worker count.

use rayon::prelude::*;

use super::RegionMap;
use crate::accumulator::TrajectoryAccumulator;
use crate::error::{Error, Result};
use crate::model::{ReactionNetwork, State};
use crate::rng::RngStream;
use crate::ssa::{absorbing, draw_with, select_channel, timed_step, Step};

const DEPHASE_CHUNK: u64 = 512;
const PARALLEL_CHUNK: u64 = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct DecorrelationOutcome {
    pub state: State,
    /// `true` when `n_c` consecutive jumps stayed in one region.
    pub reached_qsd: bool,
    pub region: usize,
    pub jumps: u64,
    pub region_changes: u64,
}

/// Serial exact SSA until `n_c` consecutive jumps stay inside the current region,
/// or until `acc.clock` reaches `t_end`. A region change resets the counter and
/// rebinds the current region.
pub fn decorrelate(
    net: &ReactionNetwork,
    x: State,
    regions: &RegionMap,
    n_c: u64,
    acc: &mut TrajectoryAccumulator,
    t_end: f64,
    rng: &mut RngStream,
) -> Result<DecorrelationOutcome> {
    let mut x = x;
    let mut region = regions.region(&x);
    let mut props = vec![0.0; net.n_reactions()];
    let mut streak = 0u64;
    let mut jumps = 0u64;
    let mut region_changes = 0u64;
    while acc.clock < t_end {
        match timed_step(net, &mut x, &mut props, rng, acc, t_end)? {
            Step::Truncated => break,
            Step::Jumped(_) => {
                jumps += 1;
                let r = regions.region(&x);
                if r == region {
                    streak += 1;
                    if streak >= n_c {
                        return Ok(DecorrelationOutcome {
                            state: x,
                            reached_qsd: true,
                            region,
                            jumps,
                            region_changes,
                        });
                    }
                } else {
                    streak = 0;
                    region = r;
                    region_changes += 1;
                }
            }
        }
    }
    Ok(DecorrelationOutcome {
        state: x,
        reached_qsd: false,
        region,
        jumps,
        region_changes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DephaseOutcome {
    pub states: Vec<State>,
    pub restarts: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stop {
    /// Reached the requested number of steps.
    Done,
    /// Left the region on step `n` (1-based, counted from phase start).
    Exited(u64),
    /// Could not take step `n`: total propensity is zero.
    Absorbed(u64),
}

impl Stop {
    fn exit_round(self) -> Option<u64> {
        match self {
            Stop::Exited(n) => Some(n),
            _ => None,
        }
    }

    fn absorb_round(self) -> Option<u64> {
        match self {
            Stop::Absorbed(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Clone)]
struct Walker {
    x: Vec<i64>,
    rng: RngStream,
    props: Vec<f64>,
    steps: u64,
}

impl Walker {
    fn embedded_until(
        &mut self,
        net: &ReactionNetwork,
        regions: &RegionMap,
        home: usize,
        target: u64,
    ) -> Stop {
        while self.steps < target {
            let total = net.propensities_into(&self.x, &mut self.props);
            if total <= 0.0 {
                return Stop::Absorbed(self.steps + 1);
            }
            let j = select_channel(&self.props, total, self.rng.uniform());
            net.apply(j, &mut self.x);
            self.steps += 1;
            if regions.region(&self.x) != home {
                return Stop::Exited(self.steps);
            }
        }
        Stop::Done
    }
}

/// Fleming–Viot preparation of `R = rngs.len()` replicas started at `anchor`.
///
/// Each round every replica takes one embedded-chain jump. A replica that leaves
/// the anchor's region is restarted from the current state of a survivor of that
/// round, chosen uniformly with `resample`; simultaneous exits are reassigned in
/// increasing replica index. Adds nothing to any accumulator.
pub fn dephase(
    net: &ReactionNetwork,
    anchor: &State,
    regions: &RegionMap,
    n_p: u64,
    rngs: Vec<RngStream>,
    resample: &mut RngStream,
) -> Result<DephaseOutcome> {
    let home = regions.region(anchor);
    let mut walkers: Vec<Walker> = rngs
        .into_iter()
        .map(|rng| Walker {
            x: anchor.0.clone(),
            rng,
            props: vec![0.0; net.n_reactions()],
            steps: 0,
        })
        .collect();
    let replicas = walkers.len();
    let mut restarts = 0u64;
    let mut round = 0u64;
    while round < n_p {
        let target = (round + DEPHASE_CHUNK).min(n_p);
        let snapshot = walkers.clone();
        let stops: Vec<Stop> = walkers
            .par_iter_mut()
            .map(|w| w.embedded_until(net, regions, home, target))
            .collect();
        let exit = stops.iter().filter_map(|s| s.exit_round()).min();
        let absorb = stops.iter().filter_map(|s| s.absorb_round()).min();
        if let Some(a) = absorb {
            if exit.is_none_or(|e| a <= e) {
                let r = stops.iter().position(|s| *s == Stop::Absorbed(a)).unwrap();
                return Err(absorbing(&walkers[r].x, f64::NAN));
            }
        }
        let Some(e) = exit else {
            round = target;
            continue;
        };
        walkers = snapshot;
        let replay: Vec<Stop> = walkers
            .par_iter_mut()
            .map(|w| w.embedded_until(net, regions, home, e))
            .collect();
        let exited: Vec<usize> = (0..replicas)
            .filter(|&r| replay[r] == Stop::Exited(e))
            .collect();
        let survivors: Vec<usize> = (0..replicas).filter(|&r| replay[r] == Stop::Done).collect();
        debug_assert_eq!(exited.len() + survivors.len(), replicas);
        if survivors.is_empty() {
            return Err(Error::AllReplicasExited { replicas });
        }
        for r in exited {
            let donor = survivors[resample.index(survivors.len())];
            let state = walkers[donor].x.clone();
            walkers[r].x = state;
            restarts += 1;
        }
        round = e;
    }
    Ok(DephaseOutcome {
        states: walkers.into_iter().map(|w| State(w.x)).collect(),
        restarts,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParallelOutcome {
    /// Post-jump state of replica `K`; `None` when the phase was cut at `t_end`.
    pub exit_state: Option<State>,
    /// `N*`, the number of lockstep rounds.
    pub rounds: u64,
    /// `K`, 1-based index of the first replica that exited in the last round
    /// (or the replica whose interval was cut at `t_end`).
    pub exit_replica: usize,
    pub simulated_time: f64,
    /// `true` when the ordered round-by-round path was used (the phase touched
    /// `t_end` or the start of the recording window).
    pub ordered: bool,
}

impl ParallelOutcome {
    /// `R (N* - 1) + K`: the serial-equivalent exit jump count.
    pub fn serial_equivalent_jumps(&self, replicas: usize) -> u64 {
        replicas as u64 * (self.rounds - 1) + self.exit_replica as u64
    }
}

#[derive(Clone)]
struct Replica {
    walker: Walker,
    delta: TrajectoryAccumulator,
}

impl Replica {
    fn timed_until(
        &mut self,
        net: &ReactionNetwork,
        regions: &RegionMap,
        home: usize,
        target: u64,
    ) -> Stop {
        let w = &mut self.walker;
        while w.steps < target {
            let total = net.propensities_into(&w.x, &mut w.props);
            let Some(jump) = draw_with(&w.props, total, &mut w.rng) else {
                return Stop::Absorbed(w.steps + 1);
            };
            self.delta.hold(net, &w.x, &w.props, jump.tau);
            net.apply(jump.channel, &mut w.x);
            self.delta.record_jump(jump.channel);
            w.steps += 1;
            if regions.region(&w.x) != home {
                return Stop::Exited(w.steps);
            }
        }
        Stop::Done
    }
}

/// Lockstep exploration of `R` replicas until the first region exit.
///
/// Per round every replica draws `(τ, J)` from its own stream. With `K` the
/// smallest index that exits in round `N*` (or `R` if none does), the clock and
/// integrals receive the holding times of replicas `1..=K` at their pre-jump
/// states, and only those replicas jump. Returns the post-jump state of replica
/// `K`. If the clock reaches `t_end` the phase stops there, charging replicas in
/// round order and then index order.
pub fn parallel_phase(
    net: &ReactionNetwork,
    initial: Vec<State>,
    regions: &RegionMap,
    acc: &mut TrajectoryAccumulator,
    t_end: f64,
    rngs: Vec<RngStream>,
) -> Result<ParallelOutcome> {
    assert_eq!(initial.len(), rngs.len(), "one stream per replica");
    assert!(!initial.is_empty(), "need at least one replica");
    let home = regions.region(&initial[0]);
    if let Some(r) = initial.iter().position(|x| regions.region(x) != home) {
        return Err(Error::InvalidState(format!(
            "replica {} starts outside region {}",
            r + 1,
            regions.label(home)
        )));
    }
    let start_states = initial.clone();
    let start_rngs = rngs.clone();
    let clock0 = acc.clock;
    let mut replicas: Vec<Replica> = initial
        .into_iter()
        .zip(rngs)
        .map(|(x, rng)| Replica {
            walker: Walker {
                x: x.0,
                rng,
                props: vec![0.0; net.n_reactions()],
                steps: 0,
            },
            delta: acc.empty_like(),
        })
        .collect();
    let mut done = 0u64;
    loop {
        let target = done + PARALLEL_CHUNK;
        let snapshot = replicas.clone();
        let stops: Vec<Stop> = replicas
            .par_iter_mut()
            .map(|r| r.timed_until(net, regions, home, target))
            .collect();
        let exit = stops.iter().filter_map(|s| s.exit_round()).min();
        let absorb = stops.iter().filter_map(|s| s.absorb_round()).min();
        if let Some(a) = absorb {
            if exit.is_none_or(|e| a <= e) {
                // Absorption happens at a round every replica reaches, so the
                // ordered path reproduces it with the accumulator charged.
                return parallel_ordered(net, start_states, regions, home, acc, t_end, start_rngs);
            }
        }
        let (rounds, k) = match exit {
            None => {
                if crosses(acc, &replicas, t_end) {
                    return parallel_ordered(
                        net,
                        start_states,
                        regions,
                        home,
                        acc,
                        t_end,
                        start_rngs,
                    );
                }
                done = target;
                continue;
            }
            Some(n) => {
                let k = stops.iter().position(|s| *s == Stop::Exited(n)).unwrap();
                (n, k)
            }
        };
        replicas = snapshot;
        replicas.par_iter_mut().enumerate().for_each(|(r, rep)| {
            let limit = if r <= k { rounds } else { rounds - 1 };
            let stop = rep.timed_until(net, regions, home, limit);
            debug_assert!(
                (r == k && stop == Stop::Exited(rounds)) || (r != k && stop == Stop::Done),
                "replay diverged"
            );
        });
        if crosses(acc, &replicas, t_end) {
            return parallel_ordered(net, start_states, regions, home, acc, t_end, start_rngs);
        }
        for rep in &replicas {
            acc.merge(&rep.delta);
        }
        return Ok(ParallelOutcome {
            exit_state: Some(State(replicas[k].walker.x.clone())),
            rounds,
            exit_replica: k + 1,
            simulated_time: acc.clock - clock0,
            ordered: false,
        });
    }
}

/// Whether merging the replica deltas would reach `t_end` or straddle the start
/// of the recording window.
fn crosses(acc: &TrajectoryAccumulator, replicas: &[Replica], t_end: f64) -> bool {
    let mut projected = acc.clock;
    for rep in replicas {
        projected += rep.delta.clock;
    }
    projected >= t_end || (acc.clock < acc.record_from && projected > acc.record_from)
}

/// Round-by-round execution charging `acc` directly; this is the reference order.
fn parallel_ordered(
    net: &ReactionNetwork,
    initial: Vec<State>,
    regions: &RegionMap,
    home: usize,
    acc: &mut TrajectoryAccumulator,
    t_end: f64,
    mut rngs: Vec<RngStream>,
) -> Result<ParallelOutcome> {
    let clock0 = acc.clock;
    let mut states: Vec<Vec<i64>> = initial.into_iter().map(|s| s.0).collect();
    let mut props = vec![0.0; net.n_reactions()];
    let mut rounds = 0u64;
    loop {
        rounds += 1;
        for (r, (x, rng)) in states.iter_mut().zip(rngs.iter_mut()).enumerate() {
            match timed_step(net, x, &mut props, rng, acc, t_end)? {
                Step::Truncated => {
                    return Ok(ParallelOutcome {
                        exit_state: None,
                        rounds,
                        exit_replica: r + 1,
                        simulated_time: acc.clock - clock0,
                        ordered: true,
                    })
                }
                Step::Jumped(_) => {
                    if regions.region(x) != home {
                        return Ok(ParallelOutcome {
                            exit_state: Some(State(x.clone())),
                            rounds,
                            exit_replica: r + 1,
                            simulated_time: acc.clock - clock0,
                            ordered: true,
                        });
                    }
                }
            }
        }
    }
}
