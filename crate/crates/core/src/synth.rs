//! Synthetic panels: a random first wave simulated forward under known
//! parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::effects::{EffectContext, EffectSpec};
use crate::network::Adjacency;
use crate::panel::{classify_activity, ActivityCutoffs, CovariateTable, DataError, PanelDataset};
use crate::rng::{stream_rng, SimRng};
use crate::simulator::{simulate_period, ParameterVector, SimError, SimOptions};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible generator config: {0}")]
    Config(String),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_actors: usize,
    pub n_waves: usize,
    pub n_levels: u32,
    /// Tie probability of the first wave.
    pub density: f64,
    pub effects: EffectSpec,
    pub params: ParameterVector,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.n_actors < 2 {
            return bad(format!("need at least 2 actors, got {}", self.n_actors));
        }
        if self.n_waves < 2 {
            return bad(format!("need at least 2 waves, got {}", self.n_waves));
        }
        if self.n_levels < 2 {
            return bad(format!("need at least 2 levels, got {}", self.n_levels));
        }
        if !(0.0..1.0).contains(&self.density) {
            return bad(format!("density must lie in [0, 1), got {}", self.density));
        }
        self.params
            .check_shape(&self.effects, self.n_waves - 1)
            .map_err(SynthError::Config)
    }

    pub fn from_toml_str(s: &str) -> Result<Self, SynthError> {
        let c: Self = toml::from_str(s).map_err(|e| SynthError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Independent covariates: gender codes 1–2, age 18–25, tenure 30–2000 days.
pub fn random_covariates<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CovariateTable {
    CovariateTable {
        gender: (0..n).map(|_| rng.random_range(1..=2)).collect(),
        age: (0..n).map(|_| rng.random_range(18..=25)).collect(),
        tenure_days: (0..n).map(|_| rng.random_range(30..=2000)).collect(),
    }
}

/// Bernoulli(`density`) ties over unordered pairs.
pub fn random_network<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Adjacency {
    let mut net = Adjacency::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                net.add_tie(i, j);
            }
        }
    }
    net
}

/// Draws wave 1 and covariates, then simulates each later wave from the
/// previous simulated one.
pub fn synthesize(config: &SynthConfig, seed: u64) -> Result<PanelDataset, SynthError> {
    config.validate()?;
    let n = config.n_actors;
    let mut rng: SimRng = stream_rng(seed, 0);
    let covariates = random_covariates(n, &mut rng);
    let mut networks = vec![random_network(n, config.density, &mut rng)];
    let mut behaviors: Vec<Vec<u32>> = vec![(0..n).map(|_| rng.random_range(1..=config.n_levels)).collect()];
    let cutoffs = ActivityCutoffs::default();
    for m in 0..config.n_waves - 1 {
        let labels = classify_activity(&behaviors[m], cutoffs);
        let ctx = EffectContext::new(&covariates, &labels, config.n_levels);
        let mut period_rng = stream_rng(seed, 1 + m as u64);
        let out = simulate_period(
            &networks[m],
            &behaviors[m],
            &config.params,
            m,
            &config.effects,
            &ctx,
            &mut period_rng,
            SimOptions::default(),
        )?;
        networks.push(out.network);
        behaviors.push(out.behavior);
    }
    Ok(PanelDataset::new(networks, behaviors, config.n_levels, covariates)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::{BehaviorEffect, NetworkEffect};

    fn config(rho: f64) -> SynthConfig {
        let effects = EffectSpec::new(
            vec![NetworkEffect::OutDegree, NetworkEffect::BehaviorSimilarity],
            vec![BehaviorEffect::LinearTendency],
        )
        .unwrap();
        SynthConfig {
            n_actors: 30,
            n_waves: 4,
            n_levels: 5,
            density: 0.05,
            params: ParameterVector {
                rho_net: vec![rho; 3],
                rho_beh: vec![rho; 3],
                beta_net: vec![-1.0, 0.5],
                beta_beh: vec![-0.1],
            },
            effects,
        }
    }

    #[test]
    fn zero_rates_repeat_wave_one() {
        let d = synthesize(&config(0.0), 4).unwrap();
        assert!(d.networks().windows(2).all(|w| w[0] == w[1]));
        assert!(d.behaviors().windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn ties_grow_and_runs_repeat() {
        let a = synthesize(&config(3.0), 4).unwrap();
        let counts: Vec<usize> = a.networks().iter().map(|n| n.tie_count()).collect();
        assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
        let b = synthesize(&config(3.0), 4).unwrap();
        assert_eq!(a.networks(), b.networks());
        assert_eq!(a.behaviors(), b.behaviors());
    }

    #[test]
    fn rejects_full_density() {
        let mut c = config(1.0);
        c.density = 1.0;
        assert!(matches!(synthesize(&c, 1), Err(SynthError::Config(_))));
        let c = SynthConfig::from_toml_str(&config(1.0).to_toml_string()).unwrap();
        assert_eq!(c, config(1.0));
    }
}
