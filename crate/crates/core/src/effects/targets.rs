use serde::{Deserialize, Serialize};

use super::{BehaviorTerms, EffectContext, EffectSpec, NetworkTerms};
use crate::network::Adjacency;
use crate::panel::PanelDataset;

/// Moment statistics of a single period, evaluated on its end state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodStatistics {
    /// Changed tie variables over ordered pairs: twice the new undirected ties.
    pub net_rate: f64,
    /// `Σ_i |p_i(end) - p_i(start)|`.
    pub beh_rate: f64,
    /// `½ Σ_i s_ik`: each undirected tie counted once.
    pub net_effects: Vec<f64>,
    /// `Σ_i s_ik`.
    pub beh_effects: Vec<f64>,
}

/// Computes one period's statistics. `ctx.labels` must be the labels of the
/// start wave, the same ones the simulator freezes for the period.
pub fn period_statistics(
    start_network: &Adjacency,
    start_behavior: &[u32],
    end_network: &Adjacency,
    end_behavior: &[u32],
    ctx: &EffectContext<'_>,
    spec: &EffectSpec,
) -> PeriodStatistics {
    let n = end_network.n_actors();
    let added = start_network.ties_added_by(end_network);
    let removed = end_network.ties_added_by(start_network);
    let beh_rate: u64 = start_behavior
        .iter()
        .zip(end_behavior)
        .map(|(&a, &b)| (a as i64 - b as i64).unsigned_abs())
        .sum();

    let mut net_effects = vec![0.0; spec.network().len()];
    let mut beh_effects = vec![0.0; spec.behavior().len()];
    for i in 0..n {
        if !spec.network().is_empty() {
            let t = NetworkTerms::compute(i, end_network, end_behavior, ctx);
            for (acc, &e) in net_effects.iter_mut().zip(spec.network()) {
                *acc += t.statistic(e, i, ctx);
            }
        }
        if !spec.behavior().is_empty() {
            let t = BehaviorTerms::compute(i, end_network, end_behavior);
            for (acc, &e) in beh_effects.iter_mut().zip(spec.behavior()) {
                *acc += t.statistic(e, i, ctx);
            }
        }
    }
    net_effects.iter_mut().for_each(|v| *v *= 0.5);
    PeriodStatistics {
        net_rate: 2.0 * (added + removed) as f64,
        beh_rate: beh_rate as f64,
        net_effects,
        beh_effects,
    }
}

/// Method-of-moments targets: per-period rate statistics and effect
/// statistics summed over waves `2..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStatistics {
    pub net_rate: Vec<f64>,
    pub beh_rate: Vec<f64>,
    pub net_effects: Vec<f64>,
    pub beh_effects: Vec<f64>,
}

impl TargetStatistics {
    pub fn from_periods(periods: &[PeriodStatistics]) -> Self {
        let k_net = periods.first().map_or(0, |p| p.net_effects.len());
        let k_beh = periods.first().map_or(0, |p| p.beh_effects.len());
        let mut net_effects = vec![0.0; k_net];
        let mut beh_effects = vec![0.0; k_beh];
        for p in periods {
            net_effects.iter_mut().zip(&p.net_effects).for_each(|(a, b)| *a += b);
            beh_effects.iter_mut().zip(&p.beh_effects).for_each(|(a, b)| *a += b);
        }
        Self {
            net_rate: periods.iter().map(|p| p.net_rate).collect(),
            beh_rate: periods.iter().map(|p| p.beh_rate).collect(),
            net_effects,
            beh_effects,
        }
    }

    pub fn n_periods(&self) -> usize {
        self.net_rate.len()
    }

    /// Flattened in parameter order: network rates, network effects,
    /// behavior rates, behavior effects.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(&self.net_rate);
        v.extend(&self.net_effects);
        v.extend(&self.beh_rate);
        v.extend(&self.beh_effects);
        v
    }

    pub fn len(&self) -> usize {
        2 * self.net_rate.len() + self.net_effects.len() + self.beh_effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn target_statistics(dataset: &PanelDataset, spec: &EffectSpec) -> TargetStatistics {
    let periods: Vec<PeriodStatistics> = (0..dataset.n_periods())
        .map(|m| {
            let labels = dataset.activity_labels(m);
            let ctx = EffectContext::new(dataset.covariates(), &labels, dataset.n_levels());
            period_statistics(
                dataset.network(m),
                dataset.behavior(m),
                dataset.network(m + 1),
                dataset.behavior(m + 1),
                &ctx,
                spec,
            )
        })
        .collect();
    TargetStatistics::from_periods(&periods)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::{BehaviorEffect, NetworkEffect};
    use crate::panel::CovariateTable;

    fn spec() -> EffectSpec {
        EffectSpec::new(
            vec![NetworkEffect::OutDegree, NetworkEffect::Transitivity],
            vec![BehaviorEffect::LinearTendency, BehaviorEffect::InfluenceSimilarity],
        )
        .unwrap()
    }

    fn panel() -> PanelDataset {
        let w1 = Adjacency::from_edges(5, [(0, 1)]);
        let w2 = Adjacency::from_edges(5, [(0, 1), (1, 2), (0, 2)]);
        let w3 = Adjacency::from_edges(5, [(0, 1), (1, 2), (0, 2), (3, 4)]);
        PanelDataset::new(
            vec![w1, w2, w3],
            vec![vec![1, 2, 3, 1, 1], vec![2, 2, 2, 1, 3], vec![2, 2, 2, 1, 3]],
            3,
            CovariateTable::zeros(5),
        )
        .unwrap()
    }

    #[test]
    fn rates_and_sums() {
        let t = target_statistics(&panel(), &spec());
        assert_eq!(t.net_rate, vec![4.0, 2.0]);
        assert_eq!(t.beh_rate, vec![4.0, 0.0]);
        // ties at waves 2 and 3: 3 + 4
        assert_eq!(t.net_effects[0], 7.0);
        // triangle 0-1-2 present at both waves: ½ · (3 actors · 2) per wave
        assert_eq!(t.net_effects[1], 6.0);
        assert_eq!(t.beh_effects[0], 10.0 + 10.0);
        assert_eq!(t.to_vec().len(), t.len());
    }

    #[test]
    fn additive_over_periods() {
        let d = panel();
        let whole = target_statistics(&d, &spec());
        let mut parts = Vec::new();
        for m in 0..d.n_periods() {
            let sub = PanelDataset::new(
                d.networks()[m..m + 2].to_vec(),
                d.behaviors()[m..m + 2].to_vec(),
                d.n_levels(),
                d.covariates().clone(),
            )
            .unwrap();
            parts.push(target_statistics(&sub, &spec()));
        }
        for k in 0..whole.net_effects.len() {
            assert_eq!(whole.net_effects[k], parts.iter().map(|p| p.net_effects[k]).sum::<f64>());
        }
        for k in 0..whole.beh_effects.len() {
            assert_eq!(whole.beh_effects[k], parts.iter().map(|p| p.beh_effects[k]).sum::<f64>());
        }
        let rates: Vec<f64> = parts.iter().map(|p| p.net_rate[0]).collect();
        assert_eq!(whole.net_rate, rates);
    }

    #[test]
    fn identical_waves_have_zero_rates() {
        let w = Adjacency::from_edges(3, [(0, 1)]);
        let d = PanelDataset::new(vec![w.clone(), w], vec![vec![1, 2, 1]; 2], 2, CovariateTable::zeros(3)).unwrap();
        let t = target_statistics(&d, &spec());
        assert_eq!((t.net_rate[0], t.beh_rate[0]), (0.0, 0.0));
    }
}
