use super::{BehaviorEffect, EffectContext, NetworkEffect};
use crate::network::Adjacency;
use crate::panel::Covariate;

/// Mean over friends of `1 - |d| / range`, written as `1 - Σ|d| / (range · degree)`.
/// Isolates score 0; a zero range means everyone is identical.
#[inline]
fn similarity_mean(distance_sum: i64, degree: u32, range: i64) -> f64 {
    if degree == 0 {
        0.0
    } else if range == 0 {
        1.0
    } else {
        1.0 - distance_sum as f64 / (range as f64 * degree as f64)
    }
}

#[inline]
fn covariate_term(c: Covariate, xi: i64, xj: i64) -> i64 {
    if c.is_categorical() {
        (xi == xj) as i64
    } else {
        (xi - xj).abs()
    }
}

/// Integer accumulators behind every network statistic of one actor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkTerms {
    pub degree: u32,
    /// `Σ_{j,h} a_ij a_jh a_ih`: twice the triangles through the actor.
    pub two_paths: u64,
    /// `Σ_j a_ij |p_i - p_j|`.
    pub behavior_distance: i64,
    /// Per covariate: match count for categorical, `Σ_j a_ij |x_i - x_j|` otherwise.
    pub covariate_acc: [i64; 3],
}

impl NetworkTerms {
    pub fn compute(i: usize, network: &Adjacency, behavior: &[u32], ctx: &EffectContext<'_>) -> Self {
        let pi = behavior[i] as i64;
        let mut t = NetworkTerms {
            degree: network.degree(i),
            two_paths: 0,
            behavior_distance: 0,
            covariate_acc: [0; 3],
        };
        for j in network.neighbors(i) {
            t.two_paths += network.common_neighbors(i, j) as u64;
            t.behavior_distance += (pi - behavior[j] as i64).abs();
            for c in Covariate::ALL {
                t.covariate_acc[c as usize] +=
                    covariate_term(c, ctx.covariates.value(c, i), ctx.covariates.value(c, j));
            }
        }
        t
    }

    /// Terms after adding the absent tie `i -- j`, without touching the network.
    #[inline]
    pub fn with_added_tie(
        &self,
        i: usize,
        j: usize,
        network: &Adjacency,
        behavior: &[u32],
        ctx: &EffectContext<'_>,
    ) -> Self {
        debug_assert!(!network.has_tie(i, j));
        let mut t = *self;
        t.degree += 1;
        t.two_paths += 2 * network.common_neighbors(i, j) as u64;
        t.behavior_distance += (behavior[i] as i64 - behavior[j] as i64).abs();
        for c in Covariate::ALL {
            t.covariate_acc[c as usize] += covariate_term(c, ctx.covariates.value(c, i), ctx.covariates.value(c, j));
        }
        t
    }

    fn similarity(&self, ctx: &EffectContext<'_>) -> f64 {
        similarity_mean(self.behavior_distance, self.degree, ctx.behavior_range())
    }

    pub fn statistic(&self, effect: NetworkEffect, i: usize, ctx: &EffectContext<'_>) -> f64 {
        match effect {
            NetworkEffect::OutDegree => self.degree as f64,
            NetworkEffect::Transitivity => self.two_paths as f64,
            NetworkEffect::BehaviorSimilarity => self.similarity(ctx),
            NetworkEffect::CovariateSimilarity(c) => {
                let acc = self.covariate_acc[c as usize];
                if c.is_categorical() {
                    if self.degree == 0 {
                        0.0
                    } else {
                        acc as f64 / self.degree as f64
                    }
                } else {
                    similarity_mean(acc, self.degree, ctx.covariate_range(c))
                }
            }
            NetworkEffect::CovariateEgo(c) => self.degree as f64 * ctx.covariates.value(c, i) as f64,
            NetworkEffect::MapSimilarity => gate(ctx.labels[i].is_map(), self.similarity(ctx)),
            NetworkEffect::LapSimilarity => gate(ctx.labels[i].is_lap(), self.similarity(ctx)),
        }
    }

    /// `Σ_k β_k s_k` in effect order.
    pub fn objective(&self, effects: &[NetworkEffect], beta: &[f64], i: usize, ctx: &EffectContext<'_>) -> f64 {
        effects
            .iter()
            .zip(beta)
            .fold(0.0, |acc, (&e, &b)| acc + b * self.statistic(e, i, ctx))
    }
}

#[inline]
fn gate(on: bool, value: f64) -> f64 {
    if on {
        value
    } else {
        0.0
    }
}

/// Integer accumulators behind every behavior statistic of one actor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BehaviorTerms {
    pub level: u32,
    pub degree: u32,
    /// `Σ_j a_ij |p_i - p_j|` at `level`.
    pub distance: i64,
}

impl BehaviorTerms {
    pub fn compute(i: usize, network: &Adjacency, behavior: &[u32]) -> Self {
        Self::at_level(i, behavior[i], network, behavior)
    }

    /// Terms as if actor `i` were at `level`, friends unchanged.
    pub fn at_level(i: usize, level: u32, network: &Adjacency, behavior: &[u32]) -> Self {
        let p = level as i64;
        let distance = network.neighbors(i).map(|j| (p - behavior[j] as i64).abs()).sum();
        Self {
            level,
            degree: network.degree(i),
            distance,
        }
    }

    /// Terms for levels `p - 1`, `p`, `p + 1` in one pass over friends; entries
    /// outside `[1, L]` are `None`.
    pub fn neighborhood(i: usize, network: &Adjacency, behavior: &[u32], n_levels: u32) -> [Option<Self>; 3] {
        let p = behavior[i] as i64;
        let mut dist = [0i64; 3];
        for j in network.neighbors(i) {
            let q = behavior[j] as i64;
            dist[0] += (p - 1 - q).abs();
            dist[1] += (p - q).abs();
            dist[2] += (p + 1 - q).abs();
        }
        let degree = network.degree(i);
        let mut out = [None; 3];
        for (k, d) in dist.into_iter().enumerate() {
            let level = p + k as i64 - 1;
            if level >= 1 && level <= n_levels as i64 {
                out[k] = Some(Self {
                    level: level as u32,
                    degree,
                    distance: d,
                });
            }
        }
        out
    }

    fn similarity(&self, ctx: &EffectContext<'_>) -> f64 {
        similarity_mean(self.distance, self.degree, ctx.behavior_range())
    }

    pub fn statistic(&self, effect: BehaviorEffect, i: usize, ctx: &EffectContext<'_>) -> f64 {
        match effect {
            BehaviorEffect::LinearTendency => self.level as f64,
            BehaviorEffect::InfluenceSimilarity => self.similarity(ctx),
            BehaviorEffect::CovariateOnBehavior(c) => self.level as f64 * ctx.covariates.value(c, i) as f64,
            BehaviorEffect::MapInfluence => gate(ctx.labels[i].is_map(), self.similarity(ctx)),
            BehaviorEffect::LapInfluence => gate(ctx.labels[i].is_lap(), self.similarity(ctx)),
        }
    }

    pub fn objective(&self, effects: &[BehaviorEffect], beta: &[f64], i: usize, ctx: &EffectContext<'_>) -> f64 {
        effects
            .iter()
            .zip(beta)
            .fold(0.0, |acc, (&e, &b)| acc + b * self.statistic(e, i, ctx))
    }
}

/// Network statistics of actor `i`, in `effects` order.
pub fn actor_network_stats(
    i: usize,
    network: &Adjacency,
    behavior: &[u32],
    ctx: &EffectContext<'_>,
    effects: &[NetworkEffect],
) -> Vec<f64> {
    let t = NetworkTerms::compute(i, network, behavior, ctx);
    effects.iter().map(|&e| t.statistic(e, i, ctx)).collect()
}

/// Behavior statistics of actor `i`, in `effects` order.
pub fn actor_behavior_stats(
    i: usize,
    network: &Adjacency,
    behavior: &[u32],
    ctx: &EffectContext<'_>,
    effects: &[BehaviorEffect],
) -> Vec<f64> {
    let t = BehaviorTerms::compute(i, network, behavior);
    effects.iter().map(|&e| t.statistic(e, i, ctx)).collect()
}

/// Network evaluation function of actor `i` on a (candidate) state.
pub fn evaluate_network_objective(
    i: usize,
    network: &Adjacency,
    behavior: &[u32],
    effects: &[NetworkEffect],
    beta: &[f64],
    ctx: &EffectContext<'_>,
) -> f64 {
    NetworkTerms::compute(i, network, behavior, ctx).objective(effects, beta, i, ctx)
}

/// Behavior evaluation function of actor `i` on a (candidate) state.
pub fn evaluate_behavior_objective(
    i: usize,
    network: &Adjacency,
    behavior: &[u32],
    effects: &[BehaviorEffect],
    beta: &[f64],
    ctx: &EffectContext<'_>,
) -> f64 {
    BehaviorTerms::compute(i, network, behavior).objective(effects, beta, i, ctx)
}
