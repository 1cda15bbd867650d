//! Time-integral bookkeeping shared by plain SSA and every ParRep phase.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::ReactionNetwork;

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableRule {
    Population {
        species: usize,
    },
    /// 1 when `lo <= x[species] <= hi`, else 0.
    Indicator {
        species: usize,
        lo: i64,
        hi: i64,
    },
    Constant {
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub label: String,
    pub rule: ObservableRule,
}

impl Observable {
    pub fn population(label: &str, species: usize) -> Self {
        Self {
            label: label.into(),
            rule: ObservableRule::Population { species },
        }
    }

    pub fn indicator(label: &str, species: usize, lo: i64, hi: i64) -> Self {
        Self {
            label: label.into(),
            rule: ObservableRule::Indicator { species, lo, hi },
        }
    }

    pub fn constant(label: &str, value: f64) -> Self {
        Self {
            label: label.into(),
            rule: ObservableRule::Constant { value },
        }
    }

    #[inline]
    pub fn eval(&self, x: &[i64]) -> f64 {
        match self.rule {
            ObservableRule::Population { species } => x[species] as f64,
            ObservableRule::Indicator { species, lo, hi } => {
                let v = x[species];
                if v >= lo && v <= hi {
                    1.0
                } else {
                    0.0
                }
            }
            ObservableRule::Constant { value } => value,
        }
    }
}

/// Equal-width integer bins `[lo + i·width, lo + (i+1)·width)` along one species.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binning {
    pub species: usize,
    pub lo: i64,
    pub width: i64,
    pub count: usize,
}

impl Binning {
    /// One bin per population value in `lo..=hi`.
    pub fn unit(species: usize, lo: i64, hi: i64) -> Self {
        Self {
            species,
            lo,
            width: 1,
            count: (hi - lo + 1) as usize,
        }
    }

    pub fn bin_lower(&self, i: usize) -> i64 {
        self.lo + i as i64 * self.width
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub binning: Binning,
    pub mass: Vec<f64>,
    pub underflow: f64,
    pub overflow: f64,
}

impl Histogram {
    fn new(binning: Binning) -> Self {
        Self {
            mass: vec![0.0; binning.count],
            binning,
            underflow: 0.0,
            overflow: 0.0,
        }
    }

    #[inline]
    fn add(&mut self, x: &[i64], w: f64) {
        let v = x[self.binning.species] - self.binning.lo;
        if v < 0 {
            self.underflow += w;
            return;
        }
        let i = (v / self.binning.width) as usize;
        match self.mass.get_mut(i) {
            Some(m) => *m += w,
            None => self.overflow += w,
        }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.underflow + self.overflow
    }

    /// Occupancy fractions of the in-range bins.
    pub fn normalized(&self) -> Vec<f64> {
        let t = self.total();
        self.mass.iter().map(|m| m / t).collect()
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
    }
}

/// What a trajectory records besides its clock.
#[derive(Clone, Debug, Default)]
pub struct Recording {
    pub observables: Vec<Observable>,
    pub binning: Option<Binning>,
    /// Accumulate the Fisher-information integrand `Σ_j ∇λ_j ∇λ_jᵀ / λ_j`.
    pub fim: bool,
    /// Only time after this instant is integrated (burn-in).
    pub record_from: f64,
}

/// Running time integrals of one logical trajectory.
///
/// `hold` charges the holding time of the pre-jump state; only the part of each
/// interval after `record_from` enters the integrals, histogram and FIM.
#[derive(Clone, Debug)]
pub struct TrajectoryAccumulator {
    pub clock: f64,
    pub record_from: f64,
    pub sampled_time: f64,
    pub integrals: Vec<f64>,
    pub histogram: Option<Histogram>,
    pub jump_counts: Vec<u64>,
    /// Row-major `l × l` integral of the FIM integrand, when enabled.
    pub fim: Option<Vec<f64>>,
    n_params: usize,
    observables: Arc<[Observable]>,
    grad: Vec<(usize, f64)>,
}

impl TrajectoryAccumulator {
    pub fn new(net: &ReactionNetwork, rec: &Recording) -> Self {
        let l = net.n_params();
        Self {
            clock: 0.0,
            record_from: rec.record_from,
            sampled_time: 0.0,
            integrals: vec![0.0; rec.observables.len()],
            histogram: rec.binning.clone().map(Histogram::new),
            jump_counts: vec![0; net.n_reactions()],
            fim: rec.fim.then(|| vec![0.0; l * l]),
            n_params: l,
            observables: rec.observables.clone().into(),
            grad: Vec::with_capacity(4),
        }
    }

    /// Zeroed accumulator with the same layout that records from time 0.
    pub fn empty_like(&self) -> Self {
        Self {
            clock: 0.0,
            record_from: 0.0,
            sampled_time: 0.0,
            integrals: vec![0.0; self.integrals.len()],
            histogram: self
                .histogram
                .as_ref()
                .map(|h| Histogram::new(h.binning.clone())),
            jump_counts: vec![0; self.jump_counts.len()],
            fim: self.fim.as_ref().map(|f| vec![0.0; f.len()]),
            n_params: self.n_params,
            observables: self.observables.clone(),
            grad: Vec::with_capacity(4),
        }
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Charges `dt` of holding time to state `x` whose propensities are `props`.
    #[inline]
    pub fn hold(&mut self, net: &ReactionNetwork, x: &[i64], props: &[f64], dt: f64) {
        let start = self.clock;
        self.clock += dt;
        let w = if start >= self.record_from {
            dt
        } else if self.clock > self.record_from {
            self.clock - self.record_from
        } else {
            return;
        };
        self.sampled_time += w;
        for (acc, f) in self.integrals.iter_mut().zip(self.observables.iter()) {
            *acc += f.eval(x) * w;
        }
        if let Some(h) = &mut self.histogram {
            h.add(x, w);
        }
        if let Some(fim) = &mut self.fim {
            let l = self.n_params;
            for (j, &lambda) in props.iter().enumerate() {
                if lambda <= 0.0 {
                    continue;
                }
                net.channel_gradient(j, x, lambda, &mut self.grad);
                let scale = w / lambda;
                for &(ka, ga) in &self.grad {
                    for &(kb, gb) in &self.grad {
                        fim[ka * l + kb] += ga * gb * scale;
                    }
                }
            }
        }
    }

    #[inline]
    pub fn record_jump(&mut self, j: usize) {
        if self.clock >= self.record_from {
            self.jump_counts[j] += 1;
        }
    }

    /// Adds a delta produced by [`empty_like`](Self::empty_like) that covers a
    /// stretch of time lying entirely before or entirely after `record_from`.
    pub fn merge(&mut self, delta: &TrajectoryAccumulator) {
        if self.clock < self.record_from {
            debug_assert!(self.clock + delta.clock <= self.record_from * (1.0 + 1e-12));
            self.clock += delta.clock;
            return;
        }
        self.clock += delta.clock;
        self.sampled_time += delta.sampled_time;
        for (a, b) in self.integrals.iter_mut().zip(&delta.integrals) {
            *a += b;
        }
        if let (Some(h), Some(d)) = (&mut self.histogram, &delta.histogram) {
            h.merge(d);
        }
        for (a, b) in self.jump_counts.iter_mut().zip(&delta.jump_counts) {
            *a += b;
        }
        if let (Some(f), Some(d)) = (&mut self.fim, &delta.fim) {
            for (a, b) in f.iter_mut().zip(d) {
                *a += b;
            }
        }
    }

    /// Time average of observable `i` over the sampled time.
    pub fn average(&self, i: usize) -> f64 {
        self.integrals[i] / self.sampled_time
    }

    /// Time-averaged FIM integrand as an `l × l` matrix.
    pub fn fim_rate(&self) -> Option<Vec<Vec<f64>>> {
        let l = self.n_params;
        self.fim.as_ref().map(|f| {
            (0..l)
                .map(|a| (0..l).map(|b| f[a * l + b] / self.sampled_time).collect())
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::schlogl;

    fn rec() -> Recording {
        Recording {
            observables: vec![
                Observable::population("X", 0),
                Observable::constant("one", 1.0),
            ],
            binning: Some(Binning::unit(0, 0, 9)),
            fim: true,
            record_from: 0.0,
        }
    }

    #[test]
    fn window_splits_interval() {
        let net = schlogl().network;
        let mut r = rec();
        r.record_from = 1.0;
        let mut acc = TrajectoryAccumulator::new(&net, &r);
        let x = [3];
        let p = net.evaluate_propensities(&x);
        acc.hold(&net, &x, &p, 0.75);
        assert_eq!(acc.sampled_time, 0.0);
        acc.hold(&net, &x, &p, 0.5);
        assert!((acc.sampled_time - 0.25).abs() < 1e-15);
        assert!((acc.integrals[0] - 0.75).abs() < 1e-15);
        assert!((acc.histogram.as_ref().unwrap().mass[3] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn overflow_keeps_mass() {
        let net = schlogl().network;
        let mut acc = TrajectoryAccumulator::new(&net, &rec());
        for (x, dt) in [(2, 0.5), (40, 1.5), (7, 0.25)] {
            let p = net.evaluate_propensities(&[x]);
            acc.hold(&net, &[x], &p, dt);
        }
        let h = acc.histogram.as_ref().unwrap();
        assert_eq!(h.overflow, 1.5);
        assert_eq!(h.total(), acc.clock);
        assert_eq!(acc.integrals[1], acc.clock);
    }

    #[test]
    fn merge_matches_direct_accumulation() {
        let net = schlogl().network;
        let mut direct = TrajectoryAccumulator::new(&net, &rec());
        let mut merged = TrajectoryAccumulator::new(&net, &rec());
        let mut delta = merged.empty_like();
        for (x, dt) in [(4, 0.5), (5, 0.25), (6, 0.125)] {
            let p = net.evaluate_propensities(&[x]);
            direct.hold(&net, &[x], &p, dt);
            delta.hold(&net, &[x], &p, dt);
        }
        merged.merge(&delta);
        assert_eq!(direct.clock, merged.clock);
        assert_eq!(direct.integrals, merged.integrals);
        assert_eq!(direct.fim, merged.fim);
    }
}
