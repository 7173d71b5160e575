//! Exact transition probabilities for tiny instances.
//!
//! Enumerates every (network, behavior) state, assembles the generator of the
//! chain the simulator samples from, and solves it by uniformization. Only
//! meant for a handful of actors; the state space grows as
//! `2^(N(N-1)/2) · L^N`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::effects::{
    evaluate_behavior_objective, evaluate_network_objective, period_statistics, EffectContext, EffectSpec,
    BehaviorEffect, NetworkEffect, PeriodStatistics,
};
use crate::network::Adjacency;
use crate::panel::{classify_activity, ActivityCutoffs, ActivityLabel, CovariateTable};
use crate::rng::stream_rng;
use crate::simulator::{logit_probabilities, simulate_period, ParameterVector, SimOptions};

pub const DEFAULT_STATE_CAP: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("state space of {size} states exceeds the cap of {cap}")]
    TooLarge { size: u128, cap: usize },
    #[error("state does not belong to this space: {0}")]
    Foreign(String),
}

/// All joint states for `N` actors and `L` levels. Index is
/// `net_mask · L^N + Σ_i (p_i − 1) · L^i`, where bit `k` of `net_mask` is the
/// `k`-th unordered pair in lexicographic order.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n_actors: usize,
    n_levels: u32,
    pairs: Vec<(usize, usize)>,
    n_behaviors: usize,
}

impl StateSpace {
    pub fn new(n_actors: usize, n_levels: u32, cap: usize) -> Result<Self, OracleError> {
        let pairs: Vec<(usize, usize)> = (0..n_actors)
            .flat_map(|i| (i + 1..n_actors).map(move |j| (i, j)))
            .collect();
        let size = (n_levels as u128)
            .checked_pow(n_actors as u32)
            .and_then(|b| b.checked_mul(1u128.checked_shl(pairs.len() as u32)?))
            .unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(OracleError::TooLarge { size, cap });
        }
        Ok(Self {
            n_actors,
            n_levels,
            n_behaviors: (n_levels as usize).pow(n_actors as u32),
            pairs,
        })
    }

    pub fn len(&self) -> usize {
        self.n_behaviors << self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_actors(&self) -> usize {
        self.n_actors
    }

    pub fn n_levels(&self) -> u32 {
        self.n_levels
    }

    pub fn index(&self, network: &Adjacency, behavior: &[u32]) -> Result<usize, OracleError> {
        if network.n_actors() != self.n_actors || behavior.len() != self.n_actors {
            return Err(OracleError::Foreign("actor count".into()));
        }
        let mut mask = 0usize;
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            if network.has_tie(i, j) {
                mask |= 1 << k;
            }
        }
        let mut code = 0usize;
        for &p in behavior.iter().rev() {
            if p < 1 || p > self.n_levels {
                return Err(OracleError::Foreign(format!("level {p}")));
            }
            code = code * self.n_levels as usize + (p - 1) as usize;
        }
        Ok(mask * self.n_behaviors + code)
    }

    pub fn state(&self, index: usize) -> (Adjacency, Vec<u32>) {
        let mask = index / self.n_behaviors;
        let mut code = index % self.n_behaviors;
        let network = Adjacency::from_edges(
            self.n_actors,
            self.pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &p)| p),
        );
        let l = self.n_levels as usize;
        let behavior = (0..self.n_actors)
            .map(|_| {
                let p = (code % l) as u32 + 1;
                code /= l;
                p
            })
            .collect();
        (network, behavior)
    }
}

/// Sparse generator: off-diagonal entries per row plus the diagonal.
#[derive(Debug, Clone)]
pub struct IntensityMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl IntensityMatrix {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Off-diagonal entries of row `i`, ascending by column.
    pub fn off_diagonal(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.diag[i] + self.rows[i].iter().map(|e| e.1).sum::<f64>()
    }
}

/// Generator of one period's chain. Every entry is recomputed from scratch
/// with the full-state evaluation functions.
pub fn build_intensity_matrix(
    space: &StateSpace,
    params: &ParameterVector,
    period: usize,
    spec: &EffectSpec,
    ctx: &EffectContext<'_>,
) -> IntensityMatrix {
    let n = space.n_actors();
    let (rho_net, rho_beh) = (params.rho_net[period], params.rho_beh[period]);
    let mut rows = Vec::with_capacity(space.len());
    let mut diag = Vec::with_capacity(space.len());
    for s in 0..space.len() {
        let (network, behavior) = space.state(s);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            if rho_net > 0.0 {
                let mut targets = vec![None];
                let mut utilities = vec![evaluate_network_objective(
                    i,
                    &network,
                    &behavior,
                    spec.network(),
                    &params.beta_net,
                    ctx,
                )];
                for j in (0..n).filter(|&j| j != i && !network.has_tie(i, j)) {
                    let mut next = network.clone();
                    next.add_tie(i, j);
                    targets.push(Some(next));
                    utilities.push(evaluate_network_objective(
                        i,
                        targets.last().unwrap().as_ref().unwrap(),
                        &behavior,
                        spec.network(),
                        &params.beta_net,
                        ctx,
                    ));
                }
                for (t, p) in targets.iter().zip(logit_probabilities(&utilities)) {
                    if let Some(next) = t {
                        let j = space.index(next, &behavior).expect("same space");
                        row.push((j, rho_net * p));
                    }
                }
            }
            if rho_beh > 0.0 {
                let mut shifts = Vec::new();
                let mut utilities = Vec::new();
                for d in [-1i64, 0, 1] {
                    let level = behavior[i] as i64 + d;
                    if level < 1 || level > space.n_levels() as i64 {
                        continue;
                    }
                    let mut next = behavior.clone();
                    next[i] = level as u32;
                    utilities.push(evaluate_behavior_objective(
                        i,
                        &network,
                        &next,
                        spec.behavior(),
                        &params.beta_beh,
                        ctx,
                    ));
                    shifts.push((d, next));
                }
                for ((d, next), p) in shifts.iter().zip(logit_probabilities(&utilities)) {
                    if *d != 0 {
                        let j = space.index(&network, next).expect("same space");
                        row.push((j, rho_beh * p));
                    }
                }
            }
        }
        row.sort_by_key(|e| e.0);
        row.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        diag.push(-row.iter().map(|e| e.1).sum::<f64>());
        rows.push(row);
    }
    IntensityMatrix { rows, diag }
}

/// Distribution after time `horizon` starting from a point mass, by
/// uniformization with the Poisson series cut once its tail is below 1e-12.
pub fn transition_distribution(q: &IntensityMatrix, initial: usize, horizon: f64) -> Vec<f64> {
    let n = q.len();
    let mut pi = vec![0.0; n];
    pi[initial] = 1.0;
    let lambda = q.diag.iter().fold(0.0f64, |m, d| m.max(-d));
    if lambda == 0.0 || horizon == 0.0 {
        return pi;
    }
    let lt = lambda * horizon;
    let mut out = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut log_w = -lt;
    let mut mass = 0.0;
    let mut k = 0u64;
    loop {
        let w = log_w.exp();
        mass += w;
        for (o, p) in out.iter_mut().zip(&pi) {
            *o += w * p;
        }
        if 1.0 - mass < 1e-12 && k as f64 > lt {
            break;
        }
        // pi ← pi · (I + Q/Λ)
        for (x, (p, d)) in next.iter_mut().zip(pi.iter().zip(&q.diag)) {
            *x = p * (1.0 + d / lambda);
        }
        for (i, row) in q.rows.iter().enumerate() {
            let p = pi[i];
            if p != 0.0 {
                for &(j, r) in row {
                    next[j] += p * r / lambda;
                }
            }
        }
        std::mem::swap(&mut pi, &mut next);
        k += 1;
        log_w += lt.ln() - (k as f64).ln();
    }
    out
}

/// Expected period statistics over a distribution of end states, with rates
/// measured against the given start state.
pub fn exact_expected_statistics(
    space: &StateSpace,
    distribution: &[f64],
    start_network: &Adjacency,
    start_behavior: &[u32],
    ctx: &EffectContext<'_>,
    spec: &EffectSpec,
) -> PeriodStatistics {
    let mut acc = PeriodStatistics {
        net_rate: 0.0,
        beh_rate: 0.0,
        net_effects: vec![0.0; spec.network().len()],
        beh_effects: vec![0.0; spec.behavior().len()],
    };
    for (s, &p) in distribution.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let (network, behavior) = space.state(s);
        let st = period_statistics(start_network, start_behavior, &network, &behavior, ctx, spec);
        acc.net_rate += p * st.net_rate;
        acc.beh_rate += p * st.beh_rate;
        acc.net_effects.iter_mut().zip(&st.net_effects).for_each(|(a, v)| *a += p * v);
        acc.beh_effects.iter_mut().zip(&st.beh_effects).for_each(|(a, v)| *a += p * v);
    }
    acc
}

/// End-state distribution of one period from a given start.
pub fn period_distribution(
    start_network: &Adjacency,
    start_behavior: &[u32],
    params: &ParameterVector,
    period: usize,
    spec: &EffectSpec,
    ctx: &EffectContext<'_>,
    cap: usize,
) -> Result<(StateSpace, Vec<f64>), OracleError> {
    let space = StateSpace::new(start_network.n_actors(), ctx.n_levels, cap)?;
    let q = build_intensity_matrix(&space, params, period, spec, ctx);
    let start = space.index(start_network, start_behavior)?;
    let dist = transition_distribution(&q, start, 1.0);
    Ok((space, dist))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateComparison {
    pub state: usize,
    pub exact: f64,
    pub empirical: f64,
    /// Binomial standard error of the empirical frequency under `exact`.
    pub se: f64,
}

impl StateComparison {
    /// Standardized gap; infinite when an impossible state was visited.
    pub fn z(&self) -> f64 {
        let gap = self.empirical - self.exact;
        if self.se > 0.0 {
            gap / self.se
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub replications: u64,
    pub states: Vec<StateComparison>,
    pub exact_statistics: Vec<f64>,
    pub simulated_statistics: Vec<f64>,
}

impl OracleComparison {
    pub fn max_abs_z(&self) -> f64 {
        self.states.iter().fold(0.0f64, |m, s| m.max(s.z().abs()))
    }

    /// Largest relative gap between simulated and exact expected statistics.
    pub fn max_relative_statistic_error(&self) -> f64 {
        self.exact_statistics
            .iter()
            .zip(&self.simulated_statistics)
            .fold(0.0f64, |m, (e, s)| {
                let gap = (s - e).abs();
                m.max(if *e == 0.0 { gap } else { gap / e.abs() })
            })
    }
}

fn flatten(p: &PeriodStatistics) -> Vec<f64> {
    let mut v = vec![p.net_rate];
    v.extend(&p.net_effects);
    v.push(p.beh_rate);
    v.extend(&p.beh_effects);
    v
}

/// Runs `replications` independent periods from the start state and sets
/// the end-state frequencies and mean statistics against the exact solution.
#[allow(clippy::too_many_arguments)]
pub fn compare_with_simulation(
    start_network: &Adjacency,
    start_behavior: &[u32],
    params: &ParameterVector,
    period: usize,
    spec: &EffectSpec,
    ctx: &EffectContext<'_>,
    replications: u64,
    seed: u64,
) -> Result<OracleComparison, OracleError> {
    let (space, dist) = period_distribution(start_network, start_behavior, params, period, spec, ctx, DEFAULT_STATE_CAP)?;
    let exact = exact_expected_statistics(&space, &dist, start_network, start_behavior, ctx, spec);
    let outcomes: Vec<(usize, Vec<f64>)> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            let out = simulate_period(start_network, start_behavior, params, period, spec, ctx, &mut rng, SimOptions::default())
                .expect("valid parameters");
            let st = period_statistics(start_network, start_behavior, &out.network, &out.behavior, ctx, spec);
            (space.index(&out.network, &out.behavior).expect("same space"), flatten(&st))
        })
        .collect();
    let mut counts = vec![0u64; space.len()];
    let mut sums = vec![0.0; flatten(&exact).len()];
    for (s, st) in &outcomes {
        counts[*s] += 1;
        sums.iter_mut().zip(st).for_each(|(a, v)| *a += v);
    }
    let n = replications as f64;
    let states = dist
        .iter()
        .zip(&counts)
        .enumerate()
        .filter(|(_, (&p, &c))| p > 0.0 || c > 0)
        .map(|(state, (&p, &c))| StateComparison {
            state,
            exact: p,
            empirical: c as f64 / n,
            se: (p * (1.0 - p) / n).sqrt(),
        })
        .collect();
    Ok(OracleComparison {
        replications,
        states,
        exact_statistics: flatten(&exact),
        simulated_statistics: sums.into_iter().map(|s| s / n).collect(),
    })
}

/// Three actors, two levels, the four-effect co-evolution model and a
/// random start state and parameter draw.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub network: Adjacency,
    pub behavior: Vec<u32>,
    pub params: ParameterVector,
    pub spec: EffectSpec,
    pub covariates: CovariateTable,
    pub labels: Vec<ActivityLabel>,
    pub n_levels: u32,
}

impl OracleInstance {
    pub fn random(seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0);
        let n = 3;
        let n_levels = 2;
        let mut network = Adjacency::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < 0.3 {
                    network.add_tie(i, j);
                }
            }
        }
        let behavior: Vec<u32> = (0..n).map(|_| rng.random_range(1..=n_levels)).collect();
        let spec = EffectSpec::new(
            vec![NetworkEffect::OutDegree, NetworkEffect::BehaviorSimilarity],
            vec![BehaviorEffect::LinearTendency, BehaviorEffect::InfluenceSimilarity],
        )
        .expect("valid spec");
        let params = ParameterVector {
            rho_net: vec![rng.random_range(0.5..2.0)],
            rho_beh: vec![rng.random_range(0.5..2.0)],
            beta_net: (0..2).map(|_| rng.random_range(-1.0..1.0)).collect(),
            beta_beh: (0..2).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let labels = classify_activity(&behavior, ActivityCutoffs::default());
        Self {
            network,
            behavior,
            params,
            spec,
            covariates: CovariateTable::zeros(n),
            labels,
            n_levels,
        }
    }

    pub fn context(&self) -> EffectContext<'_> {
        EffectContext::new(&self.covariates, &self.labels, self.n_levels)
    }

    pub fn compare(&self, replications: u64, seed: u64) -> Result<OracleComparison, OracleError> {
        compare_with_simulation(&self.network, &self.behavior, &self.params, 0, &self.spec, &self.context(), replications, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> EffectSpec {
        EffectSpec::new(
            vec![NetworkEffect::OutDegree, NetworkEffect::BehaviorSimilarity],
            vec![BehaviorEffect::LinearTendency, BehaviorEffect::InfluenceSimilarity],
        )
        .unwrap()
    }

    fn params(rn: f64, rb: f64) -> ParameterVector {
        ParameterVector {
            rho_net: vec![rn],
            rho_beh: vec![rb],
            beta_net: vec![-0.7, 1.1],
            beta_beh: vec![0.3, 0.9],
        }
    }

    #[test]
    fn index_round_trip_and_size() {
        let space = StateSpace::new(3, 2, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(space.len(), 8 * 8);
        for s in 0..space.len() {
            let (net, beh) = space.state(s);
            assert_eq!(space.index(&net, &beh).unwrap(), s);
        }
        assert!(matches!(StateSpace::new(8, 3, DEFAULT_STATE_CAP), Err(OracleError::TooLarge { .. })));
    }

    #[test]
    fn generator_rows_and_support() {
        let covs = CovariateTable::zeros(3);
        let labels = vec![ActivityLabel::MoAp; 3];
        let ctx = EffectContext::new(&covs, &labels, 2);
        let space = StateSpace::new(3, 2, DEFAULT_STATE_CAP).unwrap();
        let q = build_intensity_matrix(&space, &params(1.3, 0.8), 0, &spec(), &ctx);
        for s in 0..q.len() {
            assert!(q.row_sum(s).abs() < 1e-12);
            let (net, beh) = space.state(s);
            for &(t, r) in q.off_diagonal(s) {
                assert!(r > 0.0);
                let (net2, beh2) = space.state(t);
                assert!(net.is_subset_of(&net2));
                let dn = net.ties_added_by(&net2);
                let db: u32 = beh.iter().zip(&beh2).map(|(a, b)| a.abs_diff(*b)).sum();
                assert_eq!(dn + db as usize, 1);
            }
        }
        let zero = build_intensity_matrix(&space, &params(0.0, 0.0), 0, &spec(), &ctx);
        assert!((0..zero.len()).all(|s| zero.off_diagonal(s).is_empty() && zero.diagonal(s) == 0.0));
    }

    #[test]
    fn zero_generator_keeps_point_mass() {
        let covs = CovariateTable::zeros(3);
        let labels = vec![ActivityLabel::MoAp; 3];
        let ctx = EffectContext::new(&covs, &labels, 2);
        let start = Adjacency::from_edges(3, [(0, 1)]);
        let (space, d) = period_distribution(&start, &[1, 2, 1], &params(0.0, 0.0), 0, &spec(), &ctx, 1000).unwrap();
        let s0 = space.index(&start, &[1, 2, 1]).unwrap();
        assert_eq!(d[s0], 1.0);
        let e = exact_expected_statistics(&space, &d, &start, &[1, 2, 1], &ctx, &spec());
        assert_eq!((e.net_rate, e.beh_rate), (0.0, 0.0));
    }

    #[test]
    fn two_state_chain_closed_form() {
        // One actor, two levels, no effects: the level flips at rate ρ/2.
        let spec = EffectSpec::new(vec![], vec![]).unwrap();
        let covs = CovariateTable::zeros(1);
        let labels = vec![ActivityLabel::MoAp];
        let ctx = EffectContext::new(&covs, &labels, 2);
        let rho = 3.7;
        let p = ParameterVector {
            rho_net: vec![0.0],
            rho_beh: vec![rho],
            beta_net: vec![],
            beta_beh: vec![],
        };
        let (space, d) = period_distribution(&Adjacency::empty(1), &[1], &p, 0, &spec, &ctx, 10).unwrap();
        let stay = 0.5 * (1.0 + (-rho).exp());
        assert!((d[space.index(&Adjacency::empty(1), &[1]).unwrap()] - stay).abs() < 1e-8);
        assert!((d[space.index(&Adjacency::empty(1), &[2]).unwrap()] - (1.0 - stay)).abs() < 1e-8);
    }

    #[test]
    fn distribution_is_a_probability_vector_on_reachable_states() {
        let covs = CovariateTable::zeros(3);
        let labels = vec![ActivityLabel::MoAp, ActivityLabel::Map, ActivityLabel::Lap];
        let ctx = EffectContext::new(&covs, &labels, 2);
        let start = Adjacency::from_edges(3, [(1, 2)]);
        let beh = [2, 1, 1];
        let (space, d) = period_distribution(&start, &beh, &params(6.0, 9.0), 0, &spec(), &ctx, 1000).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(d.iter().all(|&p| p >= 0.0));
        for (s, &p) in d.iter().enumerate() {
            if !start.is_subset_of(&space.state(s).0) {
                assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn expectation_of_one_tie_mixture() {
        let covs = CovariateTable::zeros(2);
        let labels = vec![ActivityLabel::MoAp; 2];
        let ctx = EffectContext::new(&covs, &labels, 2);
        let space = StateSpace::new(2, 2, 100).unwrap();
        let empty = Adjacency::empty(2);
        let tied = Adjacency::from_edges(2, [(0, 1)]);
        let mut d = vec![0.0; space.len()];
        d[space.index(&empty, &[1, 1]).unwrap()] = 0.5;
        d[space.index(&tied, &[1, 1]).unwrap()] = 0.5;
        let e = exact_expected_statistics(&space, &d, &empty, &[1, 1], &ctx, &spec());
        assert!((e.net_rate - 1.0).abs() < 1e-15);
        assert!((e.net_effects[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn simulation_agrees_with_exact_solution() {
        let covs = CovariateTable::zeros(3);
        let labels = vec![ActivityLabel::MoAp, ActivityLabel::Map, ActivityLabel::Lap];
        let ctx = EffectContext::new(&covs, &labels, 2);
        let start = Adjacency::from_edges(3, [(0, 1)]);
        let c = compare_with_simulation(&start, &[1, 2, 1], &params(1.5, 1.0), 0, &spec(), &ctx, 20_000, 3).unwrap();
        assert!(c.max_abs_z() < 4.5, "{}", c.max_abs_z());
        assert!(c.max_relative_statistic_error() < 0.03);
    }
}
