//! Gillespie direct-method kernel.

use crate::accumulator::{Recording, TrajectoryAccumulator};
use crate::error::{Error, Interrupted, Result};
use crate::model::{ReactionNetwork, State};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    pub tau: f64,
    pub channel: usize,
}

/// Picks channel `j` with probability `props[j] / total` from a uniform `u ∈ [0,1)`.
#[inline]
pub fn select_channel(props: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut cum = 0.0;
    let mut last = 0;
    for (j, &p) in props.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last = j;
            if target < cum {
                return j;
            }
        }
    }
    // target landed on the rounding gap past the final partial sum
    last
}

pub(crate) fn absorbing(x: &[i64], time: f64) -> Error {
    Error::AbsorbingState {
        state: State(x.to_vec()).to_string(),
        time,
    }
}

/// Holding time and channel for the next jump from `x`. Consumes two draws.
pub fn draw_jump(net: &ReactionNetwork, x: &[i64], rng: &mut RngStream) -> Result<Jump> {
    let mut props = vec![0.0; net.n_reactions()];
    let total = net.propensities_into(x, &mut props);
    draw_with(&props, total, rng).ok_or_else(|| absorbing(x, f64::NAN))
}

#[inline]
pub(crate) fn draw_with(props: &[f64], total: f64, rng: &mut RngStream) -> Option<Jump> {
    if total <= 0.0 {
        return None;
    }
    let tau = rng.exponential(total);
    let channel = select_channel(props, total, rng.uniform());
    Some(Jump { tau, channel })
}

/// Channel of the next jump of the embedded chain. Consumes one draw.
pub fn embedded_step(net: &ReactionNetwork, x: &[i64], rng: &mut RngStream) -> Result<usize> {
    let mut props = vec![0.0; net.n_reactions()];
    let total = net.propensities_into(x, &mut props);
    if total <= 0.0 {
        return Err(absorbing(x, f64::NAN));
    }
    Ok(select_channel(&props, total, rng.uniform()))
}

/// Outcome of one attempted timed step bounded by `t_end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Step {
    Jumped(usize),
    /// The holding interval was cut at `t_end`; the state did not change.
    Truncated,
}

/// Timed SSA step: draws `(τ, J)`, charges the pre-jump state, applies the jump.
/// If the holding interval would pass `t_end` it is truncated there instead.
#[inline]
pub(crate) fn timed_step(
    net: &ReactionNetwork,
    x: &mut [i64],
    props: &mut [f64],
    rng: &mut RngStream,
    acc: &mut TrajectoryAccumulator,
    t_end: f64,
) -> Result<Step> {
    let total = net.propensities_into(x, props);
    let Some(jump) = draw_with(props, total, rng) else {
        return Err(absorbing(x, acc.clock));
    };
    let remaining = t_end - acc.clock;
    if jump.tau >= remaining {
        acc.hold(net, x, props, remaining);
        acc.clock = t_end;
        return Ok(Step::Truncated);
    }
    acc.hold(net, x, props, jump.tau);
    net.apply(jump.channel, x);
    acc.record_jump(jump.channel);
    Ok(Step::Jumped(jump.channel))
}

/// Exact simulation on `[0, t_end]`; the last holding interval is cut at `t_end`.
pub fn run_ssa(
    net: &ReactionNetwork,
    x0: &State,
    t_end: f64,
    rec: &Recording,
    rng: &mut RngStream,
) -> Result<TrajectoryAccumulator, Interrupted<TrajectoryAccumulator>> {
    let mut acc = TrajectoryAccumulator::new(net, rec);
    let precheck = net.validate_state(x0).and_then(|_| {
        if t_end > 0.0 && t_end.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "t_end must be positive, got {t_end}"
            )))
        }
    });
    if let Err(error) = precheck {
        return Err(Interrupted {
            error,
            partial: acc,
        });
    }
    let mut x = x0.0.clone();
    let mut props = vec![0.0; net.n_reactions()];
    while acc.clock < t_end {
        match timed_step(net, &mut x, &mut props, rng, &mut acc, t_end) {
            Ok(_) => {}
            Err(error) => {
                return Err(Interrupted {
                    error,
                    partial: acc,
                })
            }
        }
    }
    Ok(acc)
}

/// Thinned path: the state at times `0, stride, 2·stride, … ≤ t_end`.
pub fn sample_path(
    net: &ReactionNetwork,
    x0: &State,
    t_end: f64,
    stride: f64,
    rng: &mut RngStream,
) -> Result<Vec<(f64, State)>> {
    net.validate_state(x0)?;
    if !(stride > 0.0) {
        return Err(Error::InvalidParams("path stride must be positive".into()));
    }
    let mut x = x0.0.clone();
    let mut props = vec![0.0; net.n_reactions()];
    let mut t = 0.0;
    let mut next = 0.0;
    let mut out = Vec::new();
    while next <= t_end {
        let total = net.propensities_into(&x, &mut props);
        let jump = draw_with(&props, total, rng);
        let t_jump = jump.map_or(f64::INFINITY, |j| t + j.tau);
        while next <= t_end && next < t_jump {
            out.push((next, State(x.clone())));
            next = out.len() as f64 * stride;
        }
        match jump {
            Some(j) => {
                t = t_jump;
                net.apply(j.channel, &mut x);
            }
            None => break,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accumulator::Observable;
    use crate::model::{schlogl, ParameterVector, PropensityKind, Reaction};
    use crate::rng::StreamKey;

    fn single_channel() -> ReactionNetwork {
        ReactionNetwork::new(
            vec!["A".into()],
            vec![Reaction {
                stoich: vec![1],
                propensity: PropensityKind::MassAction {
                    params: vec![0],
                    prefactor: 1.0,
                    orders: vec![0],
                    volume_power: 0,
                },
            }],
            1.0,
            ParameterVector::new(vec!["k".into()], vec![1.0]).unwrap(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn select_channel_skips_zero_channels() {
        let props = [0.0, 0.0, 12.5, 0.0];
        for u in [0.0, 0.3, 0.999_999_999] {
            assert_eq!(select_channel(&props, 12.5, u), 2);
        }
    }

    #[test]
    fn schlogl_at_zero_always_channel_three() {
        let net = schlogl().network;
        let mut rng = RngStream::new(3, StreamKey::serial(0, 0));
        let mut sum = 0.0;
        let n = 20_000;
        for _ in 0..n {
            let j = draw_jump(&net, &[0], &mut rng).unwrap();
            assert_eq!(j.channel, 2);
            sum += j.tau;
            assert_eq!(embedded_step(&net, &[0], &mut rng).unwrap(), 2);
        }
        // E[τ] = 1/12.5 = 0.08, sd of the mean 0.08/sqrt(n)
        assert!((sum / n as f64 - 0.08).abs() < 4.0 * 0.08 / (n as f64).sqrt());
    }

    #[test]
    fn single_channel_degenerate() {
        let net = single_channel();
        let mut rng = RngStream::new(9, StreamKey::serial(0, 0));
        for _ in 0..100 {
            let j = draw_jump(&net, &[5], &mut rng).unwrap();
            assert_eq!(j.channel, 0);
            assert!(j.tau > 0.0);
        }
    }

    #[test]
    fn draw_consumes_exactly_two_uniforms() {
        let net = schlogl().network;
        let mut a = RngStream::new(4, StreamKey::serial(0, 0));
        let mut b = a.clone();
        draw_jump(&net, &[25], &mut a).unwrap();
        b.uniform();
        b.uniform();
        assert_eq!(a.next_u64(), b.next_u64());
        embedded_step(&net, &[25], &mut a).unwrap();
        b.uniform();
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn constant_observable_integrates_to_t_end() {
        let net = schlogl().network;
        let rec = Recording {
            observables: vec![
                Observable::constant("one", 1.0),
                Observable::population("X", 0),
            ],
            binning: Some(crate::accumulator::Binning::unit(0, 0, 149)),
            fim: false,
            record_from: 0.0,
        };
        for t_end in [0.01, 1.0, 37.5] {
            let mut rng = RngStream::new(1, StreamKey::serial(0, 0));
            let acc = run_ssa(&net, &State(vec![94]), t_end, &rec, &mut rng).unwrap();
            assert_eq!(acc.clock, t_end);
            assert_eq!(acc.integrals[0], t_end);
            let h = acc.histogram.as_ref().unwrap();
            assert!((h.total() - acc.clock).abs() <= 1e-9 * t_end);
            // unit bins resolve single states
            let from_hist: f64 = h.mass.iter().enumerate().map(|(i, m)| i as f64 * m).sum();
            assert!((from_hist - acc.integrals[1]).abs() <= 1e-9 * acc.integrals[1]);
        }
    }

    #[test]
    fn rejects_nonpositive_t_end() {
        let net = schlogl().network;
        let mut rng = RngStream::new(1, StreamKey::serial(0, 0));
        let err = run_ssa(&net, &State(vec![3]), 0.0, &Recording::default(), &mut rng).unwrap_err();
        assert!(matches!(err.error, Error::InvalidParams(_)));
    }

    #[test]
    fn sample_path_grid() {
        let net = schlogl().network;
        let mut rng = RngStream::new(1, StreamKey::serial(0, 0));
        let path = sample_path(&net, &State(vec![0]), 10.0, 0.5, &mut rng).unwrap();
        assert_eq!(path.len(), 21);
        assert_eq!(path[0].1, State(vec![0]));
        assert_eq!(path[20].0, 10.0);
    }
}
