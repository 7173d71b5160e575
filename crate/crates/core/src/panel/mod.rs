//! Longitudinal network–behavior panels: types, loading, discretization and
//! descriptive tables.

mod activity;
mod binning;
mod describe;
mod load;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Adjacency;

pub use activity::{classify_activity, ActivityCutoffs, ActivityLabel};
pub use binning::{bin_counts_to_levels, Binning, BinningMode};
pub use describe::{
    behavior_change_table, describe_network, level_histogram, network_change_table, BehaviorChange,
    NetworkChange, NetworkSummary,
};
pub use load::{dataset_text, load_dataset, BehaviorValues, DataConfig, DatasetFiles, DatasetText};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("self-loop on actor {actor} at wave {wave}")]
    SelfLoop { wave: usize, actor: usize },
    #[error("duplicate edge ({src}, {dst}) at wave {wave}")]
    DuplicateEdge { wave: usize, src: usize, dst: usize },
    #[error("unknown actor id {actor} in {file} line {line}")]
    UnknownActor {
        file: String,
        line: u64,
        actor: usize,
    },
    #[error("tie dissolution: ({src}, {dst}) present at wave {wave} but absent at wave {next}", next = wave + 1)]
    TieDissolution { wave: usize, src: usize, dst: usize },
    #[error("behavior level {value} of actor {actor} at wave {wave} outside [1, {n_levels}]")]
    LevelOutOfRange {
        wave: usize,
        actor: usize,
        value: u64,
        n_levels: u32,
    },
    #[error("missing behavior value for actor {actor} at wave {wave}")]
    MissingBehavior { wave: usize, actor: usize },
    #[error("duplicate behavior record for actor {actor} at wave {wave}")]
    DuplicateBehavior { wave: usize, actor: usize },
    #[error("only {distinct} distinct count values for {n_levels} levels; use n_levels <= {distinct}")]
    TooFewDistinctCounts { distinct: usize, n_levels: u32 },
    #[error("invalid panel: {0}")]
    Invalid(String),
}

/// Actor attributes used by covariate effects and the baseline regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    Gender,
    Age,
    Tenure,
}

impl Covariate {
    pub const ALL: [Covariate; 3] = [Covariate::Gender, Covariate::Age, Covariate::Tenure];

    pub fn name(self) -> &'static str {
        match self {
            Covariate::Gender => "gender",
            Covariate::Age => "age",
            Covariate::Tenure => "tenure",
        }
    }

    /// Gender is a category code; the others are ordered quantities.
    pub fn is_categorical(self) -> bool {
        matches!(self, Covariate::Gender)
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Covariate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "gender" => Ok(Covariate::Gender),
            "age" => Ok(Covariate::Age),
            "tenure" | "tenure_days" | "sns_tenure" => Ok(Covariate::Tenure),
            other => Err(format!("unknown covariate `{other}`")),
        }
    }
}

/// One row per actor; values are constant across waves.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CovariateTable {
    pub gender: Vec<i64>,
    /// Whole years.
    pub age: Vec<i64>,
    /// Whole days on the platform.
    pub tenure_days: Vec<i64>,
}

impl CovariateTable {
    pub fn zeros(n: usize) -> Self {
        Self {
            gender: vec![0; n],
            age: vec![0; n],
            tenure_days: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.gender.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gender.is_empty()
    }

    pub fn column(&self, c: Covariate) -> &[i64] {
        match c {
            Covariate::Gender => &self.gender,
            Covariate::Age => &self.age,
            Covariate::Tenure => &self.tenure_days,
        }
    }

    #[inline]
    pub fn value(&self, c: Covariate, i: usize) -> i64 {
        self.column(c)[i]
    }

    /// Observed range `max - min`, 0 for an empty or constant column.
    pub fn range(&self, c: Covariate) -> i64 {
        let col = self.column(c);
        match (col.iter().min(), col.iter().max()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0,
        }
    }

    /// Distinct gender codes in increasing order.
    pub fn gender_codes(&self) -> Vec<i64> {
        let mut codes = self.gender.clone();
        codes.sort_unstable();
        codes.dedup();
        codes
    }
}

/// N actors observed over T waves.
#[derive(Debug, Clone)]
pub struct PanelDataset {
    n_levels: u32,
    networks: Vec<Adjacency>,
    behaviors: Vec<Vec<u32>>,
    covariates: CovariateTable,
    cutoffs: ActivityCutoffs,
    raw_counts: Option<Vec<Vec<u64>>>,
    binning: Option<Binning>,
}

impl PanelDataset {
    /// Validates every panel invariant: symmetric loop-free networks over a
    /// common actor set, monotone ties, levels in `[1, n_levels]`.
    pub fn new(
        networks: Vec<Adjacency>,
        behaviors: Vec<Vec<u32>>,
        n_levels: u32,
        covariates: CovariateTable,
    ) -> Result<Self, DataError> {
        if n_levels < 2 {
            return Err(DataError::Invalid(format!("n_levels must be >= 2, got {n_levels}")));
        }
        if networks.len() < 2 {
            return Err(DataError::Invalid(format!(
                "need at least 2 waves, got {}",
                networks.len()
            )));
        }
        if behaviors.len() != networks.len() {
            return Err(DataError::Invalid(format!(
                "{} network waves but {} behavior waves",
                networks.len(),
                behaviors.len()
            )));
        }
        let n = covariates.len();
        if n == 0 {
            return Err(DataError::Invalid("no actors".into()));
        }
        if covariates.age.len() != n || covariates.tenure_days.len() != n {
            return Err(DataError::Invalid("ragged covariate table".into()));
        }
        for (w, (net, beh)) in networks.iter().zip(&behaviors).enumerate() {
            if net.n_actors() != n || beh.len() != n {
                return Err(DataError::Invalid(format!(
                    "wave {} has a different actor set than the covariate table ({n} actors)",
                    w + 1
                )));
            }
            if let Some((actor, &value)) = beh.iter().enumerate().find(|(_, &v)| v < 1 || v > n_levels) {
                return Err(DataError::LevelOutOfRange {
                    wave: w + 1,
                    actor,
                    value: value as u64,
                    n_levels,
                });
            }
        }
        for (w, pair) in networks.windows(2).enumerate() {
            if !pair[0].is_subset_of(&pair[1]) {
                let (src, dst) = pair[0]
                    .edges()
                    .find(|&(i, j)| !pair[1].has_tie(i, j))
                    .expect("non-subset implies a missing tie");
                return Err(DataError::TieDissolution { wave: w + 1, src, dst });
            }
        }
        Ok(Self {
            n_levels,
            networks,
            behaviors,
            covariates,
            cutoffs: ActivityCutoffs::default(),
            raw_counts: None,
            binning: None,
        })
    }

    pub fn with_cutoffs(mut self, cutoffs: ActivityCutoffs) -> Self {
        self.cutoffs = cutoffs;
        self
    }

    /// Attaches the raw per-wave counts the levels were binned from.
    pub fn with_raw_counts(mut self, counts: Vec<Vec<u64>>, binning: Option<Binning>) -> Self {
        self.raw_counts = Some(counts);
        self.binning = binning;
        self
    }

    pub fn n_actors(&self) -> usize {
        self.covariates.len()
    }

    pub fn n_waves(&self) -> usize {
        self.networks.len()
    }

    pub fn n_periods(&self) -> usize {
        self.networks.len() - 1
    }

    pub fn n_levels(&self) -> u32 {
        self.n_levels
    }

    pub fn network(&self, wave: usize) -> &Adjacency {
        &self.networks[wave]
    }

    pub fn networks(&self) -> &[Adjacency] {
        &self.networks
    }

    pub fn behavior(&self, wave: usize) -> &[u32] {
        &self.behaviors[wave]
    }

    pub fn behaviors(&self) -> &[Vec<u32>] {
        &self.behaviors
    }

    pub fn covariates(&self) -> &CovariateTable {
        &self.covariates
    }

    pub fn cutoffs(&self) -> ActivityCutoffs {
        self.cutoffs
    }

    pub fn raw_counts(&self) -> Option<&[Vec<u64>]> {
        self.raw_counts.as_deref()
    }

    pub fn binning(&self) -> Option<&Binning> {
        self.binning.as_ref()
    }

    /// Activity labels of every actor at `wave` (0-based).
    pub fn activity_labels(&self, wave: usize) -> Vec<ActivityLabel> {
        classify_activity(&self.behaviors[wave], self.cutoffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn covs(n: usize) -> CovariateTable {
        CovariateTable::zeros(n)
    }

    #[test]
    fn rejects_dissolution() {
        let w1 = Adjacency::from_edges(3, [(0, 1)]);
        let w2 = Adjacency::from_edges(3, [(1, 2)]);
        let err = PanelDataset::new(vec![w1, w2], vec![vec![1; 3]; 2], 2, covs(3)).unwrap_err();
        assert!(matches!(err, DataError::TieDissolution { wave: 1, src: 0, dst: 1 }));
        assert!(err.to_string().contains("tie dissolution"));
    }

    #[test]
    fn rejects_level_out_of_range() {
        let w = Adjacency::empty(2);
        let err = PanelDataset::new(vec![w.clone(), w], vec![vec![1, 3], vec![1, 1]], 2, covs(2)).unwrap_err();
        assert!(matches!(err, DataError::LevelOutOfRange { wave: 1, actor: 1, value: 3, .. }));
    }

    #[test]
    fn rejects_single_wave_and_mismatched_actors() {
        let w = Adjacency::empty(2);
        assert!(PanelDataset::new(vec![w.clone()], vec![vec![1, 1]], 2, covs(2)).is_err());
        let w3 = Adjacency::empty(3);
        assert!(PanelDataset::new(vec![w, w3], vec![vec![1, 1], vec![1, 1, 1]], 2, covs(2)).is_err());
    }

    #[test]
    fn covariate_range_and_codes() {
        let c = CovariateTable {
            gender: vec![2, 1, 4, 1],
            age: vec![19, 22, 25, 20],
            tenure_days: vec![100, 100, 100, 100],
        };
        assert_eq!(c.range(Covariate::Age), 6);
        assert_eq!(c.range(Covariate::Tenure), 0);
        assert_eq!(c.gender_codes(), vec![1, 2, 4]);
        assert_eq!("tenure_days".parse::<Covariate>().unwrap(), Covariate::Tenure);
    }
}
