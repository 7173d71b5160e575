use serde::Serialize;

use super::PanelDataset;
use crate::network::Adjacency;

/// Density, average degree and tie count of one wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub density: f64,
    pub average_degree: f64,
    pub tie_count: usize,
}

impl NetworkSummary {
    pub fn from_counts(n_actors: usize, tie_count: usize) -> Self {
        let pairs = n_actors * n_actors.saturating_sub(1) / 2;
        Self {
            density: if pairs == 0 { 0.0 } else { tie_count as f64 / pairs as f64 },
            average_degree: if n_actors == 0 {
                0.0
            } else {
                2.0 * tie_count as f64 / n_actors as f64
            },
            tie_count,
        }
    }

    pub fn of(network: &Adjacency) -> Self {
        Self::from_counts(network.n_actors(), network.tie_count())
    }
}

pub fn describe_network(dataset: &PanelDataset) -> Vec<NetworkSummary> {
    dataset.networks().iter().map(NetworkSummary::of).collect()
}

/// Tie-variable transitions between two consecutive waves, over unordered pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkChange {
    pub n00: usize,
    pub n01: usize,
    pub n10: usize,
    pub n11: usize,
    /// `n11 / (n01 + n10 + n11)`; `None` when the union is empty.
    pub jaccard: Option<f64>,
}

impl NetworkChange {
    pub fn from_counts(n00: usize, n01: usize, n10: usize, n11: usize) -> Self {
        let union = n01 + n10 + n11;
        Self {
            n00,
            n01,
            n10,
            n11,
            jaccard: (union > 0).then(|| n11 as f64 / union as f64),
        }
    }

    pub fn between(before: &Adjacency, after: &Adjacency) -> Self {
        let n = before.n_actors();
        let pairs = n * n.saturating_sub(1) / 2;
        let n11 = before.shared_ties(after);
        let n01 = after.tie_count() - n11;
        let n10 = before.tie_count() - n11;
        Self::from_counts(pairs - n01 - n10 - n11, n01, n10, n11)
    }
}

pub fn network_change_table(dataset: &PanelDataset) -> Vec<NetworkChange> {
    dataset
        .networks()
        .windows(2)
        .map(|w| NetworkChange::between(&w[0], &w[1]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BehaviorChange {
    pub decrease: usize,
    pub increase: usize,
    pub constant: usize,
}

impl BehaviorChange {
    pub fn between(before: &[u32], after: &[u32]) -> Self {
        let mut c = BehaviorChange {
            decrease: 0,
            increase: 0,
            constant: 0,
        };
        for (a, b) in before.iter().zip(after) {
            match b.cmp(a) {
                std::cmp::Ordering::Less => c.decrease += 1,
                std::cmp::Ordering::Greater => c.increase += 1,
                std::cmp::Ordering::Equal => c.constant += 1,
            }
        }
        c
    }
}

/// Per-period counts of actors whose level decreased, increased or stayed,
/// together with the per-wave level histogram (`[wave][level - 1]`).
pub fn behavior_change_table(dataset: &PanelDataset) -> (Vec<BehaviorChange>, Vec<Vec<usize>>) {
    let changes = dataset
        .behaviors()
        .windows(2)
        .map(|w| BehaviorChange::between(&w[0], &w[1]))
        .collect();
    let hist = dataset
        .behaviors()
        .iter()
        .map(|w| level_histogram(w, dataset.n_levels()))
        .collect();
    (changes, hist)
}

pub fn level_histogram(levels: &[u32], n_levels: u32) -> Vec<usize> {
    let mut h = vec![0; n_levels as usize];
    for &p in levels {
        h[p as usize - 1] += 1;
    }
    h
}
