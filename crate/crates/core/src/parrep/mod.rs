//! Parallel replica dynamics for CTMCs: decorrelation, Fleming–Viot dephasing
//! and lockstep parallel exploration, cycled until the target simulated time.

mod phases;

pub use phases::{
    decorrelate, dephase, parallel_phase, DecorrelationOutcome, DephaseOutcome, ParallelOutcome,
};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::accumulator::{Recording, TrajectoryAccumulator};
use crate::error::{Error, Interrupted, Result};
use crate::model::{ReactionNetwork, State};
use crate::rng::{Phase, RngStream, StreamKey};

/// Partition of the state space by cut points along one species coordinate.
///
/// Region `i` holds states whose coordinate exceeds exactly `i` cut points, so a
/// single cut `θ` gives `{x ≤ θ}` as region 0 and `{x > θ}` as region 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub species: usize,
    pub cuts: Vec<f64>,
    pub labels: Vec<String>,
}

impl RegionMap {
    pub fn new(species: usize, cuts: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(Error::InvalidParams(
                "region map needs at least one cut".into(),
            ));
        }
        if cuts.windows(2).any(|w| !(w[0] < w[1])) || cuts.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams(
                "region cuts must be finite and increasing".into(),
            ));
        }
        if labels.len() != cuts.len() + 1 {
            return Err(Error::InvalidParams(format!(
                "{} cuts need {} labels, got {}",
                cuts.len(),
                cuts.len() + 1,
                labels.len()
            )));
        }
        Ok(Self {
            species,
            cuts,
            labels,
        })
    }

    /// Two regions split at `threshold`: `labels[0]` below or on it, `labels[1]` above.
    pub fn single(species: usize, threshold: f64, labels: [&str; 2]) -> Self {
        Self::new(
            species,
            vec![threshold],
            labels.iter().map(|s| s.to_string()).collect(),
        )
        .expect("valid single-cut region map")
    }

    #[inline]
    pub fn region(&self, x: &[i64]) -> usize {
        let v = x[self.species] as f64;
        self.cuts.iter().take_while(|&&c| v > c).count()
    }

    pub fn n_regions(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, region: usize) -> &str {
        &self.labels[region]
    }

    pub fn validate(&self, net: &ReactionNetwork) -> Result<()> {
        if self.species >= net.n_species() {
            return Err(Error::InvalidParams(format!(
                "region coordinate {} out of range",
                self.species
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParRepParams {
    /// `n_c`: consecutive in-region jumps that end decorrelation.
    pub decorrelation: u64,
    /// `n_p`: embedded-chain rounds of dephasing.
    pub dephasing: u64,
    pub replicas: usize,
    pub t_end: f64,
    pub seed: u64,
}

impl ParRepParams {
    pub fn validate(&self) -> Result<()> {
        if self.decorrelation < 1 || self.dephasing < 1 {
            return Err(Error::InvalidParams(
                "decorrelation and dephasing thresholds must be at least 1".into(),
            ));
        }
        if self.replicas < 1 {
            return Err(Error::InvalidParams("need at least one replica".into()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        Ok(())
    }
}

/// One decorrelation phase and, if it reached the QSD, the dephasing and
/// parallel phases that followed it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: u64,
    /// Region label at the end of decorrelation.
    pub region: String,
    pub decorrelation_jumps: u64,
    pub decorrelation_time: f64,
    pub region_changes: u64,
    pub reached_qsd: bool,
    pub dephasing_restarts: u64,
    /// `N*`; zero when no parallel phase ran.
    pub parallel_rounds: u64,
    /// `K`; zero when no parallel phase ran.
    pub exit_replica: usize,
    pub parallel_time: f64,
    pub wall_decorrelation: f64,
    pub wall_dephasing: f64,
    pub wall_parallel: f64,
}

#[derive(Clone, Debug)]
pub struct ParRepReport {
    pub accumulator: TrajectoryAccumulator,
    pub cycles: Vec<CycleRecord>,
    pub final_state: State,
    pub replicas: usize,
}

impl ParRepReport {
    pub fn parallel_phases(&self) -> usize {
        self.cycles.iter().filter(|c| c.parallel_rounds > 0).count()
    }

    pub fn wall_time(&self) -> f64 {
        self.cycles
            .iter()
            .map(|c| c.wall_decorrelation + c.wall_dephasing + c.wall_parallel)
            .sum()
    }
}

/// Runs ParRep cycles from `x0` until the clock reaches `params.t_end`.
///
/// Streams are keyed by `(params.seed, trajectory, replica, phase, cycle)`. The
/// decorrelation stream of cycle 0 is the plain SSA stream of the same
/// trajectory, so a run that never leaves decorrelation equals [`run_ssa`].
///
/// Replica work runs on the current rayon pool; results do not depend on its size.
///
/// [`run_ssa`]: crate::ssa::run_ssa
pub fn run_parrep(
    net: &ReactionNetwork,
    x0: &State,
    regions: &RegionMap,
    params: &ParRepParams,
    rec: &Recording,
    trajectory: u32,
) -> Result<ParRepReport, Interrupted<ParRepReport>> {
    let mut report = ParRepReport {
        accumulator: TrajectoryAccumulator::new(net, rec),
        cycles: Vec::new(),
        final_state: x0.clone(),
        replicas: params.replicas,
    };
    let checks = params
        .validate()
        .and_then(|_| regions.validate(net))
        .and_then(|_| net.validate_state(x0));
    if let Err(error) = checks {
        return Err(Interrupted {
            error,
            partial: report,
        });
    }
    match cycle_loop(net, regions, params, trajectory, &mut report) {
        Ok(()) => Ok(report),
        Err(error) => Err(Interrupted {
            error,
            partial: report,
        }),
    }
}

fn cycle_loop(
    net: &ReactionNetwork,
    regions: &RegionMap,
    params: &ParRepParams,
    trajectory: u32,
    report: &mut ParRepReport,
) -> Result<()> {
    let t_end = params.t_end;
    let seed = params.seed;
    let acc = &mut report.accumulator;
    let mut x = report.final_state.clone();
    let mut cycle = 0u64;
    while acc.clock < t_end {
        let mut rec = CycleRecord {
            cycle,
            region: String::new(),
            decorrelation_jumps: 0,
            decorrelation_time: 0.0,
            region_changes: 0,
            reached_qsd: false,
            dephasing_restarts: 0,
            parallel_rounds: 0,
            exit_replica: 0,
            parallel_time: 0.0,
            wall_decorrelation: 0.0,
            wall_dephasing: 0.0,
            wall_parallel: 0.0,
        };

        let wall = Instant::now();
        let t0 = acc.clock;
        let mut rng = RngStream::new(seed, StreamKey::serial(trajectory, cycle));
        let dec = decorrelate(
            net,
            x.clone(),
            regions,
            params.decorrelation,
            acc,
            t_end,
            &mut rng,
        );
        rec.wall_decorrelation = wall.elapsed().as_secs_f64();
        rec.decorrelation_time = acc.clock - t0;
        let dec = match dec {
            Ok(d) => d,
            Err(e) => {
                report.cycles.push(rec);
                return Err(e);
            }
        };
        rec.region = regions.label(dec.region).to_string();
        rec.decorrelation_jumps = dec.jumps;
        rec.region_changes = dec.region_changes;
        rec.reached_qsd = dec.reached_qsd;
        x = dec.state;
        report.final_state = x.clone();
        if !dec.reached_qsd {
            report.cycles.push(rec);
            break;
        }

        let wall = Instant::now();
        let streams = |phase| {
            (0..params.replicas)
                .map(|r| {
                    RngStream::new(seed, StreamKey::replica(trajectory, r as u32, phase, cycle))
                })
                .collect::<Vec<_>>()
        };
        let mut resample = RngStream::new(seed, StreamKey::resample(trajectory, cycle));
        let deph = dephase(
            net,
            &x,
            regions,
            params.dephasing,
            streams(Phase::Dephase),
            &mut resample,
        );
        rec.wall_dephasing = wall.elapsed().as_secs_f64();
        let deph = match deph {
            Ok(d) => d,
            Err(e) => {
                report.cycles.push(rec);
                return Err(e);
            }
        };
        rec.dephasing_restarts = deph.restarts;

        let wall = Instant::now();
        let par = parallel_phase(
            net,
            deph.states,
            regions,
            acc,
            t_end,
            streams(Phase::Parallel),
        );
        rec.wall_parallel = wall.elapsed().as_secs_f64();
        let par = match par {
            Ok(p) => p,
            Err(e) => {
                report.cycles.push(rec);
                return Err(e);
            }
        };
        rec.parallel_rounds = par.rounds;
        rec.exit_replica = par.exit_replica;
        rec.parallel_time = par.simulated_time;
        report.cycles.push(rec);
        match par.exit_state {
            Some(s) => {
                x = s;
                report.final_state = x.clone();
            }
            None => break,
        }
        cycle += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accumulator::Observable;
    use crate::model::schlogl;
    use crate::ssa::run_ssa;

    #[test]
    fn region_map_partitions() {
        let m = RegionMap::new(
            0,
            vec![0.5, 5.5],
            vec!["lo".into(), "mid".into(), "hi".into()],
        )
        .unwrap();
        assert_eq!(m.region(&[0]), 0);
        assert_eq!(m.region(&[1]), 1);
        assert_eq!(m.region(&[5]), 1);
        assert_eq!(m.region(&[6]), 2);
        let s = schlogl();
        assert_eq!(s.regions.region(&[25]), 0);
        assert_eq!(s.regions.region(&[26]), 1);
    }

    #[test]
    fn region_map_rejects_bad_cuts() {
        assert!(
            RegionMap::new(0, vec![2.0, 1.0], vec!["a".into(), "b".into(), "c".into()]).is_err()
        );
        assert!(RegionMap::new(0, vec![1.0], vec!["a".into()]).is_err());
        assert!(RegionMap::new(0, vec![], vec!["a".into()]).is_err());
    }

    #[test]
    fn params_validation() {
        let ok = ParRepParams {
            decorrelation: 1,
            dephasing: 1,
            replicas: 2,
            t_end: 1.0,
            seed: 0,
        };
        assert!(ok.validate().is_ok());
        assert!(ParRepParams {
            t_end: 0.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ParRepParams {
            decorrelation: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ParRepParams { replicas: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn short_run_equals_ssa() {
        let m = schlogl();
        let rec = Recording {
            observables: vec![Observable::population("X", 0)],
            binning: Some(crate::accumulator::Binning::unit(0, 0, 149)),
            fim: true,
            record_from: 0.0,
        };
        let params = ParRepParams {
            decorrelation: 1_000_000,
            dephasing: 10,
            replicas: 4,
            t_end: 5.0,
            seed: 77,
        };
        let report =
            run_parrep(&m.network, &m.initial_state, &m.regions, &params, &rec, 3).unwrap();
        assert_eq!(report.parallel_phases(), 0);
        let mut rng = RngStream::new(77, StreamKey::serial(3, 0));
        let ssa = run_ssa(&m.network, &m.initial_state, 5.0, &rec, &mut rng).unwrap();
        assert_eq!(report.accumulator.clock, ssa.clock);
        assert_eq!(report.accumulator.integrals, ssa.integrals);
        assert_eq!(report.accumulator.jump_counts, ssa.jump_counts);
        assert_eq!(report.accumulator.fim, ssa.fim);
        assert_eq!(
            report.accumulator.histogram.as_ref().unwrap().mass,
            ssa.histogram.as_ref().unwrap().mass
        );
    }
}
