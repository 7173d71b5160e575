//! Effect statistics, evaluation functions and method-of-moments targets.
//!
//! Every per-actor statistic is assembled from integer accumulators
//! ([`NetworkTerms`], [`BehaviorTerms`]) and one closing formula. The
//! simulator updates the accumulators incrementally; full recomputation builds
//! them from scratch. Both paths then agree bit for bit.

mod stats;
mod targets;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{ActivityLabel, Covariate, CovariateTable};

pub use stats::{
    actor_behavior_stats, actor_network_stats, evaluate_behavior_objective, evaluate_network_objective,
    BehaviorTerms, NetworkTerms,
};
pub use targets::{period_statistics, target_statistics, PeriodStatistics, TargetStatistics};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("unknown {side} effect `{name}`")]
    UnknownEffect { side: &'static str, name: String },
    #[error("duplicate {side} effect `{name}`")]
    Duplicate { side: &'static str, name: String },
    #[error("`{name}` requires `{base}` in the same side of the model")]
    MissingBase { name: String, base: &'static str },
}

/// Network-side (friendship) effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetworkEffect {
    OutDegree,
    Transitivity,
    BehaviorSimilarity,
    CovariateSimilarity(Covariate),
    CovariateEgo(Covariate),
    MapSimilarity,
    LapSimilarity,
}

/// Behavior-side (posting) effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BehaviorEffect {
    LinearTendency,
    InfluenceSimilarity,
    CovariateOnBehavior(Covariate),
    MapInfluence,
    LapInfluence,
}

fn split_call(s: &str) -> (&str, Option<&str>) {
    match s.split_once('(') {
        Some((head, rest)) => (head.trim(), rest.strip_suffix(')').map(str::trim)),
        None => (s.trim(), None),
    }
}

impl NetworkEffect {
    /// Row label used in estimate and convergence tables.
    pub fn label(&self) -> String {
        match self {
            NetworkEffect::OutDegree => "Out-Degree".into(),
            NetworkEffect::Transitivity => "Transitivity".into(),
            NetworkEffect::BehaviorSimilarity => "Posting homophily".into(),
            NetworkEffect::CovariateSimilarity(c) => format!("{} homophily", capitalize(c.name())),
            NetworkEffect::CovariateEgo(c) => format!("{} on degree", capitalize(c.name())),
            NetworkEffect::MapSimilarity => "MAP x Posting homophily".into(),
            NetworkEffect::LapSimilarity => "LAP x Posting homophily".into(),
        }
    }
}

impl BehaviorEffect {
    pub fn label(&self) -> String {
        match self {
            BehaviorEffect::LinearTendency => "Posting Tendency (Linear Shape)".into(),
            BehaviorEffect::InfluenceSimilarity => "Influence".into(),
            BehaviorEffect::CovariateOnBehavior(c) => format!("{} on Posting", capitalize(c.name())),
            BehaviorEffect::MapInfluence => "MAP x Influence".into(),
            BehaviorEffect::LapInfluence => "LAP x Influence".into(),
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

impl fmt::Display for NetworkEffect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkEffect::OutDegree => f.write_str("out_degree"),
            NetworkEffect::Transitivity => f.write_str("transitivity"),
            NetworkEffect::BehaviorSimilarity => f.write_str("behavior_similarity"),
            NetworkEffect::CovariateSimilarity(c) => write!(f, "covariate_similarity({c})"),
            NetworkEffect::CovariateEgo(c) => write!(f, "covariate_ego({c})"),
            NetworkEffect::MapSimilarity => f.write_str("map_x_similarity"),
            NetworkEffect::LapSimilarity => f.write_str("lap_x_similarity"),
        }
    }
}

impl fmt::Display for BehaviorEffect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BehaviorEffect::LinearTendency => f.write_str("linear_tendency"),
            BehaviorEffect::InfluenceSimilarity => f.write_str("influence_similarity"),
            BehaviorEffect::CovariateOnBehavior(c) => write!(f, "covariate_on_behavior({c})"),
            BehaviorEffect::MapInfluence => f.write_str("map_x_influence"),
            BehaviorEffect::LapInfluence => f.write_str("lap_x_influence"),
        }
    }
}

impl FromStr for NetworkEffect {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || SpecError::UnknownEffect {
            side: "network",
            name: s.to_string(),
        };
        let (head, arg) = split_call(s);
        let cov = || arg.ok_or_else(unknown)?.parse::<Covariate>().map_err(|_| unknown());
        Ok(match (head, arg) {
            ("out_degree", None) => NetworkEffect::OutDegree,
            ("transitivity", None) => NetworkEffect::Transitivity,
            ("behavior_similarity", None) => NetworkEffect::BehaviorSimilarity,
            ("covariate_similarity", Some(_)) => NetworkEffect::CovariateSimilarity(cov()?),
            ("covariate_ego", Some(_)) => NetworkEffect::CovariateEgo(cov()?),
            ("map_x_similarity", None) => NetworkEffect::MapSimilarity,
            ("lap_x_similarity", None) => NetworkEffect::LapSimilarity,
            _ => return Err(unknown()),
        })
    }
}

impl FromStr for BehaviorEffect {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || SpecError::UnknownEffect {
            side: "behavior",
            name: s.to_string(),
        };
        let (head, arg) = split_call(s);
        Ok(match (head, arg) {
            ("linear_tendency", None) => BehaviorEffect::LinearTendency,
            ("influence_similarity", None) => BehaviorEffect::InfluenceSimilarity,
            ("covariate_on_behavior", Some(a)) => {
                BehaviorEffect::CovariateOnBehavior(a.parse().map_err(|_| unknown())?)
            }
            ("map_x_influence", None) => BehaviorEffect::MapInfluence,
            ("lap_x_influence", None) => BehaviorEffect::LapInfluence,
            _ => return Err(unknown()),
        })
    }
}

/// Ordered effect lists of both sides of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct EffectSpec {
    network: Vec<NetworkEffect>,
    behavior: Vec<BehaviorEffect>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    network: Vec<String>,
    #[serde(default)]
    behavior: Vec<String>,
}

impl TryFrom<RawSpec> for EffectSpec {
    type Error = SpecError;

    fn try_from(raw: RawSpec) -> Result<Self, Self::Error> {
        let network = raw.network.iter().map(|s| s.parse()).collect::<Result<Vec<_>, _>>()?;
        let behavior = raw.behavior.iter().map(|s| s.parse()).collect::<Result<Vec<_>, _>>()?;
        EffectSpec::new(network, behavior)
    }
}

impl From<EffectSpec> for RawSpec {
    fn from(spec: EffectSpec) -> Self {
        RawSpec {
            network: spec.network.iter().map(|e| e.to_string()).collect(),
            behavior: spec.behavior.iter().map(|e| e.to_string()).collect(),
        }
    }
}

impl EffectSpec {
    pub fn new(network: Vec<NetworkEffect>, behavior: Vec<BehaviorEffect>) -> Result<Self, SpecError> {
        for (k, e) in network.iter().enumerate() {
            if network[..k].contains(e) {
                return Err(SpecError::Duplicate {
                    side: "network",
                    name: e.to_string(),
                });
            }
            if matches!(e, NetworkEffect::MapSimilarity | NetworkEffect::LapSimilarity)
                && !network.contains(&NetworkEffect::BehaviorSimilarity)
            {
                return Err(SpecError::MissingBase {
                    name: e.to_string(),
                    base: "behavior_similarity",
                });
            }
        }
        for (k, e) in behavior.iter().enumerate() {
            if behavior[..k].contains(e) {
                return Err(SpecError::Duplicate {
                    side: "behavior",
                    name: e.to_string(),
                });
            }
            if matches!(e, BehaviorEffect::MapInfluence | BehaviorEffect::LapInfluence)
                && !behavior.contains(&BehaviorEffect::InfluenceSimilarity)
            {
                return Err(SpecError::MissingBase {
                    name: e.to_string(),
                    base: "influence_similarity",
                });
            }
        }
        Ok(Self { network, behavior })
    }

    pub fn network(&self) -> &[NetworkEffect] {
        &self.network
    }

    pub fn behavior(&self) -> &[BehaviorEffect] {
        &self.behavior
    }

    /// True when any effect depends on MAP/LAP labels.
    pub fn uses_labels(&self) -> bool {
        self.network
            .iter()
            .any(|e| matches!(e, NetworkEffect::MapSimilarity | NetworkEffect::LapSimilarity))
            || self
                .behavior
                .iter()
                .any(|e| matches!(e, BehaviorEffect::MapInfluence | BehaviorEffect::LapInfluence))
    }
}

/// Read-only inputs every statistic may consult besides the chain state.
#[derive(Debug, Clone, Copy)]
pub struct EffectContext<'a> {
    pub covariates: &'a CovariateTable,
    /// Labels frozen at the start of the period.
    pub labels: &'a [ActivityLabel],
    pub n_levels: u32,
    cov_ranges: [i64; 3],
}

impl<'a> EffectContext<'a> {
    pub fn new(covariates: &'a CovariateTable, labels: &'a [ActivityLabel], n_levels: u32) -> Self {
        Self {
            covariates,
            labels,
            n_levels,
            cov_ranges: Covariate::ALL.map(|c| covariates.range(c)),
        }
    }

    /// Range of the behavior scale used by similarity statistics.
    #[inline]
    pub fn behavior_range(&self) -> i64 {
        behavior_range(self.n_levels) as i64
    }

    #[inline]
    pub fn covariate_range(&self, c: Covariate) -> i64 {
        self.cov_ranges[c as usize]
    }
}

/// Fixed theoretical range `L - 1` of levels `1..=L`.
pub fn behavior_range(n_levels: u32) -> f64 {
    (n_levels - 1) as f64
}
