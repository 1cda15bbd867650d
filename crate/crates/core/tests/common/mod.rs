#![allow(dead_code)]

use parrep_core::model::{
    ConservedSum, ParameterVector, PropensityKind, Reaction, ReactionNetwork, State,
};
use parrep_core::parrep::RegionMap;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn ma(param: usize, orders: [u32; 2]) -> PropensityKind {
    PropensityKind::MassAction {
        params: vec![param],
        prefactor: 1.0,
        orders: orders.to_vec(),
        volume_power: 0,
    }
}

/// `X + Y = 6`, `Y -> X` at rate `y` and `X -> Y` at rate `x`: total rate 6
/// everywhere, so the jump chain and the CTMC share their QSD.
pub fn toy_chain() -> ReactionNetwork {
    ReactionNetwork::new(
        vec!["X".into(), "Y".into()],
        vec![
            Reaction {
                stoich: vec![1, -1],
                propensity: ma(0, [0, 1]),
            },
            Reaction {
                stoich: vec![-1, 1],
                propensity: ma(1, [1, 0]),
            },
        ],
        1.0,
        ParameterVector::new(vec!["kb".into(), "kd".into()], vec![1.0, 1.0]).unwrap(),
        vec![ConservedSum {
            species: vec![0, 1],
            total: 6,
        }],
    )
    .unwrap()
}

/// Toy chain plus pair moves `2Y -> 2X`, `2X -> 2Y`; the jump chain is aperiodic.
pub fn toy_chain_aperiodic() -> ReactionNetwork {
    let base = toy_chain();
    let mut reactions = base.reactions().to_vec();
    reactions.push(Reaction {
        stoich: vec![2, -2],
        propensity: ma(2, [0, 2]),
    });
    reactions.push(Reaction {
        stoich: vec![-2, 2],
        propensity: ma(3, [2, 0]),
    });
    ReactionNetwork::new(
        vec!["X".into(), "Y".into()],
        reactions,
        1.0,
        ParameterVector::new(
            vec!["kb".into(), "kd".into(), "kb2".into(), "kd2".into()],
            vec![1.0, 1.0, 0.3, 0.3],
        )
        .unwrap(),
        base.conserved().to_vec(),
    )
    .unwrap()
}

/// `{0}`, `{1..5}`, `{6}` along X.
pub fn toy_regions() -> RegionMap {
    RegionMap::new(
        0,
        vec![0.5, 5.5],
        vec!["low".into(), "mid".into(), "high".into()],
    )
    .unwrap()
}

pub fn toy_state(x: i64) -> State {
    State(vec![x, 6 - x])
}

/// Jump-chain transition matrix restricted to X in `1..=5` (substochastic),
/// indexed by `x - 1`.
pub fn toy_substochastic(net: &ReactionNetwork) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; 5]; 5];
    for x in 1..=5i64 {
        let s = toy_state(x);
        let props = net.evaluate_propensities(&s);
        let total: f64 = props.iter().sum();
        for (j, &l) in props.iter().enumerate() {
            let mut y = s.0.clone();
            net.apply(j, &mut y);
            if (1..=5).contains(&y[0]) {
                p[(x - 1) as usize][(y[0] - 1) as usize] += l / total;
            }
        }
    }
    p
}

/// Perron eigenpair `(ρ, ν)` of a substochastic matrix: `ν P = ρ ν`, `Σν = 1`.
/// Power iteration on the lazy matrix `(P + I) / 2`, which has the same
/// eigenvectors and a strictly dominant eigenvalue even when `P` is periodic.
pub fn perron_left(p: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = p.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..200_000 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                w[j] += v[i] * 0.5 * (p[i][j] + if i == j { 1.0 } else { 0.0 });
            }
        }
        let s: f64 = w.iter().sum();
        for x in &mut w {
            *x /= s;
        }
        let diff = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = w;
        if diff < 1e-16 {
            break;
        }
    }
    let mut vp = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            vp[j] += v[i] * p[i][j];
        }
    }
    (vp.iter().sum::<f64>(), v)
}

/// Index drawn from a discrete distribution with a uniform `u`.
pub fn sample_discrete(p: &[f64], u: f64) -> usize {
    let mut c = 0.0;
    for (i, &q) in p.iter().enumerate() {
        c += q;
        if u < c {
            return i;
        }
    }
    p.len() - 1
}

/// One-sample Kolmogorov–Smirnov distance to a CDF on the positive integers.
pub fn ks_distance_discrete(samples: &[u64], cdf: impl Fn(u64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_unstable();
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < s.len() {
        let v = s[i];
        let below = i as f64 / n;
        while i < s.len() && s[i] == v {
            i += 1;
        }
        let at = i as f64 / n;
        let f = cdf(v);
        let f_below = if v == 0 { 0.0 } else { cdf(v - 1) };
        d = d.max((at - f).abs()).max((below - f_below).abs());
    }
    d
}

/// Asymptotic KS critical value at α = 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Pearson chi-square for an `r × c` contingency table; columns with a zero
/// total are dropped. Returns `(statistic, degrees of freedom)`.
pub fn chi_square_table(table: &[Vec<f64>]) -> (f64, f64) {
    let cols: Vec<usize> = (0..table[0].len())
        .filter(|&j| table.iter().map(|r| r[j]).sum::<f64>() > 0.0)
        .collect();
    let rows: Vec<f64> = table
        .iter()
        .map(|r| cols.iter().map(|&j| r[j]).sum())
        .collect();
    let total: f64 = rows.iter().sum();
    let mut stat = 0.0;
    for &j in &cols {
        let cj: f64 = table.iter().map(|r| r[j]).sum();
        for (i, r) in table.iter().enumerate() {
            let e = rows[i] * cj / total;
            stat += (r[j] - e).powi(2) / e;
        }
    }
    (stat, ((rows.len() - 1) * (cols.len() - 1)) as f64)
}

pub fn chi_square_critical(dof: f64, alpha: f64) -> f64 {
    ChiSquared::new(dof).unwrap().inverse_cdf(1.0 - alpha)
}

/// Bin edges over positive integers so every bin expects at least `min` counts
/// under `pmf` with `n` samples; the last bin is open.
pub fn bins_for(pmf: impl Fn(u64) -> f64, n: usize, min: f64) -> Vec<u64> {
    let mut edges = vec![1u64];
    let mut mass = 0.0;
    let mut tail = 1.0;
    let mut k = 1u64;
    while tail * n as f64 >= 2.0 * min {
        let p = pmf(k);
        mass += p;
        tail -= p;
        k += 1;
        if mass * n as f64 >= min && tail * n as f64 >= min {
            edges.push(k);
            mass = 0.0;
        }
    }
    edges
}

pub fn bin_of(edges: &[u64], v: u64) -> usize {
    edges.iter().rposition(|&e| v >= e).unwrap_or(0)
}

/// Largest relative error between `propensity_gradients` and a five-point
/// central difference with step `1e-2 · c_k`. Rate constants enter linearly, so
/// the stencil is exact for them; for a Hill constant `D` the truncation error is
/// about `12 (h/D)⁴ ≈ 1e-7` relative. The wide step keeps rounding noise below
/// tiny gradients such as `∂λ/∂D` at protein counts near zero.
pub fn gradient_error(net: &ReactionNetwork, x: &[i64]) -> f64 {
    let analytic = net.propensity_gradients(x);
    let mut worst: f64 = 0.0;
    for k in 0..net.n_params() {
        let c = net.params().get(k);
        let h = 1e-2 * c.abs().max(1e-3);
        let at = |d: f64| net.with_param(k, c + d).unwrap();
        let (p2, p1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
        for (j, row) in analytic.iter().enumerate() {
            let near = p1.propensity(j, x) - m1.propensity(j, x);
            let far = p2.propensity(j, x) - m2.propensity(j, x);
            let fd = (8.0 * near - far) / (12.0 * h);
            let scale = row[k].abs().max(fd.abs());
            if scale > 0.0 {
                worst = worst.max((row[k] - fd).abs() / scale);
            }
        }
    }
    worst
}

/// Uniform state of a built-in model inside a generous box.
pub fn random_state(model: &str, rng: &mut parrep_core::rng::RngStream) -> Vec<i64> {
    let mut draw = |lo: i64, hi: i64| lo + rng.index((hi - lo + 1) as usize) as i64;
    match model {
        "schlogl" => vec![draw(0, 400)],
        "genetic-switch" => {
            let act = draw(0, 1);
            vec![act, 1 - act, draw(0, 200), draw(0, 3000)]
        }
        other => panic!("no sampler for {other}"),
    }
}

pub fn aux_stream(seed: u64, id: u32) -> parrep_core::rng::RngStream {
    use parrep_core::rng::{Phase, Purpose, RngStream, StreamKey};
    RngStream::new(
        seed,
        StreamKey {
            trajectory: id,
            replica: 0,
            phase: Phase::Auxiliary,
            cycle: 0,
            purpose: Purpose::Step,
        },
    )
}
