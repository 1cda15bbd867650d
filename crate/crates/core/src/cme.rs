//! Truncated chemical master equation: stationary distribution, moments and
//! parametric sensitivities on a finite box of states.
//!
//! Transitions that would leave the box are dropped together with their
//! diagonal contribution, so the truncated matrix is still a generator.

use std::collections::HashMap;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ReactionNetwork, State};

/// Inclusive per-species bounds, enumerated lexicographically with the last
/// species varying fastest. States violating a conservation law are skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

const MAX_STATES: usize = 2_000_000;

impl StateBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidParams(
                "box bounds must be nonempty and equally long".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b || *a < 0) {
            return Err(Error::InvalidParams(
                "box needs 0 <= lo <= hi per species".into(),
            ));
        }
        let size = lo
            .iter()
            .zip(&hi)
            .try_fold(1usize, |acc, (a, b)| acc.checked_mul((b - a + 1) as usize));
        match size {
            Some(s) if s <= MAX_STATES => Ok(Self { lo, hi }),
            _ => Err(Error::InvalidParams(format!(
                "box exceeds {MAX_STATES} states"
            ))),
        }
    }

    /// One-species box `[lo, hi]`.
    pub fn interval(lo: i64, hi: i64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.lo.len()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| a <= v && v <= b)
    }

    fn enumerate(&self, net: &ReactionNetwork) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let mut x = self.lo.clone();
        loop {
            if net.validate_state(&x).is_ok() {
                out.push(x.clone());
            }
            let mut i = x.len();
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if x[i] < self.hi[i] {
                    x[i] += 1;
                    break;
                }
                x[i] = self.lo[i];
            }
        }
    }
}

/// Sparse truncated generator over the enumerated states of a box.
#[derive(Clone, Debug)]
pub struct TruncatedGenerator {
    pub states: Vec<State>,
    /// `(from, to, channel, rate)` for every transition kept inside the box.
    pub transitions: Vec<(usize, usize, usize, f64)>,
    /// Total propensity dropped at each state by the truncation.
    pub dropped: Vec<f64>,
    index: HashMap<Vec<i64>, usize>,
}

impl TruncatedGenerator {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, x: &[i64]) -> Result<usize> {
        self.index
            .get(x)
            .copied()
            .ok_or_else(|| Error::BoxTooSmall(State(x.to_vec()).to_string()))
    }

    /// Diagonal entry `Q_{x,x}`, minus the sum of the kept outflow.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.len()];
        for &(from, _, _, rate) in &self.transitions {
            d[from] -= rate;
        }
        d
    }

    /// `Q_{x,y}` as dense rows; for tests and tiny boxes.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut q = vec![vec![0.0; n]; n];
        for &(from, to, _, rate) in &self.transitions {
            q[from][to] += rate;
            q[from][from] -= rate;
        }
        q
    }

    /// `‖πᵀQ‖_∞`.
    pub fn left_residual(&self, pi: &[f64]) -> f64 {
        let mut r = vec![0.0; self.len()];
        for &(from, to, _, rate) in &self.transitions {
            r[to] += pi[from] * rate;
            r[from] -= pi[from] * rate;
        }
        r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Number of closed communicating classes.
    pub fn closed_classes(&self) -> usize {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for &(from, to, _, _) in &self.transitions {
            if from != to {
                adj[from].push(to);
            }
        }
        let comp = strongly_connected(&adj);
        let n_comp = comp.iter().copied().max().map_or(0, |c| c + 1);
        let mut open = vec![false; n_comp];
        for (u, nbrs) in adj.iter().enumerate() {
            for &v in nbrs {
                if comp[u] != comp[v] {
                    open[comp[u]] = true;
                }
            }
        }
        open.iter().filter(|o| !**o).count()
    }
}

/// Component id per vertex (iterative Tarjan).
fn strongly_connected(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut n_comp = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < adj[v].len() {
                let w = adj[v][*i];
                *i += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = n_comp;
                        if w == v {
                            break;
                        }
                    }
                    n_comp += 1;
                }
            }
        }
    }
    comp
}

pub fn build_truncated_generator(
    net: &ReactionNetwork,
    bx: &StateBox,
) -> Result<TruncatedGenerator> {
    if bx.lo.len() != net.n_species() {
        return Err(Error::InvalidParams(format!(
            "box has {} species, network has {}",
            bx.lo.len(),
            net.n_species()
        )));
    }
    let states = bx.enumerate(net);
    if states.is_empty() {
        return Err(Error::InvalidParams(
            "box contains no admissible state".into(),
        ));
    }
    let index: HashMap<Vec<i64>, usize> = states
        .iter()
        .enumerate()
        .map(|(i, x)| (x.clone(), i))
        .collect();
    let mut transitions = Vec::new();
    let mut dropped = vec![0.0; states.len()];
    let mut props = vec![0.0; net.n_reactions()];
    let mut y = Vec::with_capacity(net.n_species());
    for (i, x) in states.iter().enumerate() {
        net.propensities_into(x, &mut props);
        for (j, &rate) in props.iter().enumerate() {
            if rate <= 0.0 {
                continue;
            }
            y.clear();
            y.extend_from_slice(x);
            net.apply(j, &mut y);
            match index.get(&y) {
                Some(&t) if t != i => transitions.push((i, t, j, rate)),
                Some(_) => {}
                None => dropped[i] += rate,
            }
        }
    }
    Ok(TruncatedGenerator {
        states: states.into_iter().map(State).collect(),
        transitions,
        dropped,
        index,
    })
}

/// Stationary vector of a truncated generator, with the factorization of the
/// bordered system `[Qᵀ with its last row replaced by ones]` kept for reuse.
pub struct StationarySolution {
    pub pi: Vec<f64>,
    pub residual: f64,
    factor: Lu<usize, f64>,
}

impl std::fmt::Debug for StationarySolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StationarySolution")
            .field("n", &self.pi.len())
            .field("residual", &self.residual)
            .finish()
    }
}

fn lu_of(n: usize, entries: HashMap<(usize, usize), f64>) -> Result<Lu<usize, f64>> {
    let mut triplets: Vec<Triplet<usize, usize, f64>> = entries
        .into_iter()
        .map(|((row, col), val)| Triplet { row, col, val })
        .collect();
    triplets.sort_by_key(|t| (t.col, t.row));
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
    a.sp_lu()
        .map_err(|e| Error::SingularSystem(format!("{e:?}")))
}

fn solve(lu: &Lu<usize, f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    lu.solve_in_place(b.as_mut());
    let x: Vec<f64> = (0..rhs.len()).map(|i| b[(i, 0)]).collect();
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularSystem(
            "factorization produced non-finite values".into(),
        ))
    }
}

pub fn stationary_solve(q: &TruncatedGenerator) -> Result<StationarySolution> {
    let n = q.len();
    let classes = q.closed_classes();
    if classes != 1 {
        return Err(Error::Reducible { classes });
    }
    let last = n - 1;
    let mut entries: HashMap<(usize, usize), f64> = HashMap::new();
    for &(from, to, _, rate) in &q.transitions {
        // row `to` of Qᵀ gains Q[from][to]; row `from` gains the diagonal
        if to != last {
            *entries.entry((to, from)).or_default() += rate;
        }
        if from != last {
            *entries.entry((from, from)).or_default() -= rate;
        }
    }
    for col in 0..n {
        entries.insert((last, col), 1.0);
    }
    let factor = lu_of(n, entries)?;
    let mut rhs = vec![0.0; n];
    rhs[last] = 1.0;
    let mut pi = solve(&factor, &rhs)?;
    // round-off can leave entries at -1e-20 in regions of negligible mass
    for p in &mut pi {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let s: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= s;
    }
    let residual = q.left_residual(&pi);
    Ok(StationarySolution {
        pi,
        residual,
        factor,
    })
}

pub fn stationary_moments(
    q: &TruncatedGenerator,
    sol: &StationarySolution,
    f: impl Fn(&[i64]) -> f64,
) -> f64 {
    q.states.iter().zip(&sol.pi).map(|(x, p)| f(x) * p).sum()
}

/// `∂π/∂c_k` for every parameter, from `Qᵀ ∂π = −(∂Q/∂c_k)ᵀ π` with `Σ ∂π = 0`.
pub fn stationary_derivatives(
    net: &ReactionNetwork,
    q: &TruncatedGenerator,
    sol: &StationarySolution,
) -> Result<Vec<Vec<f64>>> {
    let n = q.len();
    let l = net.n_params();
    let mut rhs = vec![vec![0.0; n]; l];
    let mut grad = Vec::new();
    for &(from, to, j, rate) in &q.transitions {
        net.channel_gradient(j, &q.states[from], rate, &mut grad);
        let w = sol.pi[from];
        for &(k, g) in &grad {
            rhs[k][to] -= g * w;
            rhs[k][from] += g * w;
        }
    }
    rhs.iter_mut()
        .map(|b| {
            b[n - 1] = 0.0;
            solve(&sol.factor, b)
        })
        .collect()
}

/// `∂π(f)/∂c_k` for every parameter.
pub fn stationary_sensitivity(
    net: &ReactionNetwork,
    q: &TruncatedGenerator,
    sol: &StationarySolution,
    f: impl Fn(&[i64]) -> f64,
) -> Result<Vec<f64>> {
    let fx: Vec<f64> = q.states.iter().map(|x| f(x)).collect();
    Ok(stationary_derivatives(net, q, sol)?
        .iter()
        .map(|d| d.iter().zip(&fx).map(|(a, b)| a * b).sum())
        .collect())
}

/// `Σ_x π(x) Σ_j ∇λ_j ∇λ_jᵀ / λ_j` over every channel, including those whose
/// target lies outside the box.
pub fn stationary_fim(
    net: &ReactionNetwork,
    q: &TruncatedGenerator,
    sol: &StationarySolution,
) -> Vec<Vec<f64>> {
    let l = net.n_params();
    let mut fim = vec![vec![0.0; l]; l];
    let mut props = vec![0.0; net.n_reactions()];
    let mut grad = Vec::new();
    for (x, &p) in q.states.iter().zip(&sol.pi) {
        net.propensities_into(x, &mut props);
        for (j, &lambda) in props.iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            net.channel_gradient(j, x, lambda, &mut grad);
            for &(a, ga) in &grad {
                for &(b, gb) in &grad {
                    fim[a][b] += p * ga * gb / lambda;
                }
            }
        }
    }
    fim
}

/// Stationary mass on states whose outflow was truncated.
pub fn boundary_mass(q: &TruncatedGenerator, sol: &StationarySolution) -> f64 {
    q.dropped
        .iter()
        .zip(&sol.pi)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, p)| p)
        .sum()
}

/// Asymptotic variance `lim T⁻¹ Var ∫_0^T f` from the Poisson equation
/// `Q g = −(f − π(f))`, equal to `2 Σ π (f − π(f)) g`.
pub fn stationary_iaf(
    q: &TruncatedGenerator,
    sol: &StationarySolution,
    f: impl Fn(&[i64]) -> f64,
) -> Result<f64> {
    let n = q.len();
    let mean = stationary_moments(q, sol, &f);
    let centered: Vec<f64> = q.states.iter().map(|x| f(x) - mean).collect();
    let last = n - 1;
    let mut entries: HashMap<(usize, usize), f64> = HashMap::new();
    for &(from, to, _, rate) in &q.transitions {
        if from != last {
            *entries.entry((from, to)).or_default() += rate;
            *entries.entry((from, from)).or_default() -= rate;
        }
    }
    entries.insert((last, last), 1.0);
    let lu = lu_of(n, entries)?;
    let mut rhs: Vec<f64> = centered.iter().map(|c| -c).collect();
    rhs[last] = 0.0;
    let g = solve(&lu, &rhs)?;
    Ok(2.0
        * sol
            .pi
            .iter()
            .zip(&centered)
            .zip(&g)
            .map(|((p, c), g)| p * c * g)
            .sum::<f64>())
}

/// Stationary CME summary of one network on one box.
#[derive(Debug)]
pub struct CmeOracle {
    pub generator: TruncatedGenerator,
    pub solution: StationarySolution,
}

impl CmeOracle {
    pub fn new(net: &ReactionNetwork, bx: &StateBox) -> Result<Self> {
        let generator = build_truncated_generator(net, bx)?;
        let solution = stationary_solve(&generator)?;
        Ok(Self {
            generator,
            solution,
        })
    }

    pub fn pi(&self) -> &[f64] {
        &self.solution.pi
    }

    pub fn states(&self) -> &[State] {
        &self.generator.states
    }

    pub fn mean(&self, species: usize) -> f64 {
        stationary_moments(&self.generator, &self.solution, |x| x[species] as f64)
    }

    pub fn variance(&self, species: usize) -> f64 {
        let m = self.mean(species);
        stationary_moments(&self.generator, &self.solution, |x| {
            (x[species] as f64 - m).powi(2)
        })
    }

    pub fn boundary_mass(&self) -> f64 {
        boundary_mass(&self.generator, &self.solution)
    }

    /// Marginal distribution of one species over `lo..=hi`.
    pub fn marginal(&self, species: usize, lo: i64, hi: i64) -> Vec<f64> {
        let mut m = vec![0.0; (hi - lo + 1).max(0) as usize];
        for (x, p) in self.generator.states.iter().zip(&self.solution.pi) {
            let v = x[species];
            if v >= lo && v <= hi {
                m[(v - lo) as usize] += p;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{schlogl, ParameterVector, PropensityKind, Reaction};

    fn two_state() -> ReactionNetwork {
        // A flips 0 -> 1 at rate a = 1 and back at rate b = 2
        let ma = |k, order| PropensityKind::MassAction {
            params: vec![k],
            prefactor: 1.0,
            orders: vec![order, 1 - order],
            volume_power: 0,
        };
        ReactionNetwork::new(
            vec!["A".into(), "B".into()],
            vec![
                Reaction {
                    stoich: vec![1, -1],
                    propensity: ma(0, 0),
                },
                Reaction {
                    stoich: vec![-1, 1],
                    propensity: ma(1, 1),
                },
            ],
            1.0,
            ParameterVector::new(
                vec!["a".into(), "b".into(), "unused".into()],
                vec![1.0, 2.0, 5.0],
            )
            .unwrap(),
            vec![crate::model::ConservedSum {
                species: vec![0, 1],
                total: 1,
            }],
        )
        .unwrap()
    }

    #[test]
    fn two_state_chain() {
        let net = two_state();
        let bx = StateBox::new(vec![0, 0], vec![1, 1]).unwrap();
        let o = CmeOracle::new(&net, &bx).unwrap();
        assert_eq!(o.states().len(), 2);
        let p1 = o.generator.index_of(&[1, 0]).unwrap();
        assert!((o.pi()[p1] - 1.0 / 3.0).abs() < 1e-14);
        assert!((o.mean(0) - 1.0 / 3.0).abs() < 1e-14);
        let s = stationary_sensitivity(&net, &o.generator, &o.solution, |x| x[0] as f64).unwrap();
        // π(A=1) = a / (a + b): derivatives b/(a+b)² and −a/(a+b)²
        assert!((s[0] - 2.0 / 9.0).abs() < 1e-13);
        assert!((s[1] + 1.0 / 9.0).abs() < 1e-13);
        assert_eq!(s[2], 0.0);
        // two-state IAF: 2 p q / (a + b)
        let iaf = stationary_iaf(&o.generator, &o.solution, |x| x[0] as f64).unwrap();
        assert!((iaf - 2.0 * (1.0 / 3.0) * (2.0 / 3.0) / 3.0).abs() < 1e-13);
    }

    #[test]
    fn single_state_box() {
        let net = schlogl().network;
        let g = build_truncated_generator(&net, &StateBox::interval(7, 7).unwrap()).unwrap();
        assert_eq!(g.dense(), vec![vec![0.0]]);
        let sol = stationary_solve(&g).unwrap();
        assert_eq!(sol.pi, vec![1.0]);
    }

    #[test]
    fn schlogl_generator_structure() {
        let net = schlogl().network;
        let g = build_truncated_generator(&net, &StateBox::interval(0, 149).unwrap()).unwrap();
        assert_eq!(g.len(), 150);
        let out0: Vec<_> = g.transitions.iter().filter(|t| t.0 == 0).collect();
        assert_eq!(out0.len(), 1);
        assert_eq!(out0[0].2, 2);
        assert!((out0[0].3 - 12.5).abs() < 1e-12);
        for row in g.dense() {
            assert!(row.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn reducible_box_rejected() {
        // pure degradation: every state drains to 0
        let net = ReactionNetwork::new(
            vec!["A".into()],
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
        let g = build_truncated_generator(&net, &StateBox::interval(0, 5).unwrap()).unwrap();
        assert_eq!(g.closed_classes(), 1);
        let g = build_truncated_generator(&net, &StateBox::interval(1, 5).unwrap()).unwrap();
        assert_eq!(g.closed_classes(), 1);
        let both = ReactionNetwork::new(
            vec!["A".into(), "B".into()],
            net.reactions()
                .iter()
                .map(|r| Reaction {
                    stoich: vec![r.stoich[0], 0],
                    propensity: PropensityKind::MassAction {
                        params: vec![0],
                        prefactor: 1.0,
                        orders: vec![1, 0],
                        volume_power: 0,
                    },
                })
                .collect(),
            1.0,
            ParameterVector::new(vec!["k".into()], vec![1.0]).unwrap(),
            vec![],
        )
        .unwrap();
        let g = build_truncated_generator(&both, &StateBox::new(vec![0, 0], vec![2, 1]).unwrap())
            .unwrap();
        assert!(matches!(
            stationary_solve(&g),
            Err(Error::Reducible { classes: 2 })
        ));
    }

    #[test]
    fn box_too_small() {
        let net = schlogl().network;
        let g = build_truncated_generator(&net, &StateBox::interval(0, 10).unwrap()).unwrap();
        assert!(matches!(g.index_of(&[94]), Err(Error::BoxTooSmall(_))));
    }
}
