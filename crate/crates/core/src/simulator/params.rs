use serde::{Deserialize, Serialize};

use crate::effects::EffectSpec;

/// Per-period rates and evaluation weights of both sides of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterVector {
    pub rho_net: Vec<f64>,
    pub rho_beh: Vec<f64>,
    pub beta_net: Vec<f64>,
    pub beta_beh: Vec<f64>,
}

impl ParameterVector {
    /// Rates at `rho_net` / `rho_beh` in every period, all weights zero.
    pub fn uniform(spec: &EffectSpec, n_periods: usize, rho_net: f64, rho_beh: f64) -> Self {
        Self {
            rho_net: vec![rho_net; n_periods],
            rho_beh: vec![rho_beh; n_periods],
            beta_net: vec![0.0; spec.network().len()],
            beta_beh: vec![0.0; spec.behavior().len()],
        }
    }

    pub fn n_periods(&self) -> usize {
        self.rho_net.len()
    }

    pub fn len(&self) -> usize {
        self.rho_net.len() + self.rho_beh.len() + self.beta_net.len() + self.beta_beh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks vector lengths against the spec and the period count.
    pub fn check_shape(&self, spec: &EffectSpec, n_periods: usize) -> Result<(), String> {
        if self.rho_net.len() != n_periods || self.rho_beh.len() != n_periods {
            return Err(format!(
                "expected {n_periods} rates per side, got {} network / {} behavior",
                self.rho_net.len(),
                self.rho_beh.len()
            ));
        }
        if self.beta_net.len() != spec.network().len() || self.beta_beh.len() != spec.behavior().len() {
            return Err(format!(
                "expected {} network / {} behavior weights, got {} / {}",
                spec.network().len(),
                spec.behavior().len(),
                self.beta_net.len(),
                self.beta_beh.len()
            ));
        }
        if let Some(r) = self.rho_net.iter().chain(&self.rho_beh).find(|r| !r.is_finite() || **r < 0.0) {
            return Err(format!("rates must be finite and non-negative, got {r}"));
        }
        if let Some(b) = self.beta_net.iter().chain(&self.beta_beh).find(|b| !b.is_finite()) {
            return Err(format!("weights must be finite, got {b}"));
        }
        Ok(())
    }

    /// Flattened in table order: network rates, network weights, behavior
    /// rates, behavior weights.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(&self.rho_net);
        v.extend(&self.beta_net);
        v.extend(&self.rho_beh);
        v.extend(&self.beta_beh);
        v
    }

    /// Inverse of [`to_vec`](Self::to_vec) for the given shape.
    pub fn from_slice(values: &[f64], n_periods: usize, k_net: usize, k_beh: usize) -> Self {
        assert_eq!(values.len(), 2 * n_periods + k_net + k_beh);
        let (rho_net, rest) = values.split_at(n_periods);
        let (beta_net, rest) = rest.split_at(k_net);
        let (rho_beh, beta_beh) = rest.split_at(n_periods);
        Self {
            rho_net: rho_net.to_vec(),
            rho_beh: rho_beh.to_vec(),
            beta_net: beta_net.to_vec(),
            beta_beh: beta_beh.to_vec(),
        }
    }

    /// Positions in [`to_vec`](Self::to_vec) order that hold rates.
    pub fn rate_mask(&self) -> Vec<bool> {
        let mut m = Vec::with_capacity(self.len());
        m.extend(std::iter::repeat_n(true, self.rho_net.len()));
        m.extend(std::iter::repeat_n(false, self.beta_net.len()));
        m.extend(std::iter::repeat_n(true, self.rho_beh.len()));
        m.extend(std::iter::repeat_n(false, self.beta_beh.len()));
        m
    }

    pub fn from_toml_str(s: &str) -> Result<Self, String> {
        toml::from_str(s).map_err(|e| e.to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("parameters serialize")
    }
}

/// Row labels matching [`ParameterVector::to_vec`] and
/// [`TargetStatistics::to_vec`](crate::effects::TargetStatistics::to_vec).
pub fn parameter_names(spec: &EffectSpec, n_periods: usize) -> Vec<String> {
    let mut names = Vec::new();
    names.extend((1..=n_periods).map(|m| format!("Friendship rate (Period {m})")));
    names.extend(spec.network().iter().map(|e| e.label()));
    names.extend((1..=n_periods).map(|m| format!("Posting rate (Period {m})")));
    names.extend(spec.behavior().iter().map(|e| e.label()));
    names
}
