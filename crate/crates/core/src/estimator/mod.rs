//! Method-of-moments estimation by Robbins–Monro stochastic approximation.
//!
//! Pipeline: [`initial_parameters`] → pilot simulations for deviation scales
//! → [`robbins_monro`] → [`convergence_check`] → [`standard_errors`].
//! Every simulation draws from its own `(seed, stream)` generator and
//! parallel results are reduced in stream order, so estimates do not depend
//! on the number of worker threads.

mod report;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::effects::{target_statistics, EffectSpec, TargetStatistics};
use crate::panel::PanelDataset;
use crate::rng::stream_id;
use crate::simulator::{parameter_names, PanelModel, ParameterVector, SimError};

pub use report::{render_convergence_table, render_estimate_table, significance_stars};

const PHASE_PILOT: u8 = 1;
const PHASE_MAIN: u8 = 2;
const PHASE_CHECK: u8 = 3;
const PHASE_JACOBIAN: u8 = 4;

/// Relative singular-value threshold below which the Jacobian is treated as
/// singular.
const SINGULAR_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("invalid estimation config: {0}")]
    Config(String),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("diverged at iteration {iteration}: {parameter} = {value}")]
    Diverged {
        iteration: usize,
        parameter: String,
        value: f64,
    },
    #[error("singular Jacobian; collinear statistics: {}", statistics.join(", "))]
    Singular { statistics: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    /// Gain numerator `a` in `σ_t = a / (b + t)`.
    pub gain_a: f64,
    pub gain_b: f64,
    pub n_pilot: usize,
    pub n_main: usize,
    pub n_check: usize,
    /// Panel simulations averaged per Robbins–Monro iteration.
    pub replications: usize,
    /// Simulations for the finite-difference Jacobian.
    pub n_jacobian: usize,
    pub seed: u64,
    /// Convergence threshold on `max |t-ratio|`.
    pub tau: f64,
    /// Abort when any parameter exceeds this in absolute value.
    pub divergence_bound: f64,
    pub fd_relative: f64,
    pub fd_floor: f64,
    pub rate_floor: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            gain_a: 1.0,
            gain_b: 9.0,
            n_pilot: 50,
            n_main: 500,
            n_check: 1000,
            replications: 1,
            n_jacobian: 500,
            seed: 0,
            tau: 0.1,
            divergence_bound: 1e3,
            fd_relative: 0.05,
            fd_floor: 0.05,
            rate_floor: 1e-4,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad = |m: &str| Err(EstimationError::Config(m.to_string()));
        if !(self.gain_a > 0.0) {
            return bad("gain_a must be positive");
        }
        if !(self.gain_b >= 0.0) {
            return bad("gain_b must be non-negative");
        }
        if self.n_pilot < 2 || self.n_check < 2 {
            return bad("n_pilot and n_check must be at least 2");
        }
        if self.n_main == 0 || self.replications == 0 || self.n_jacobian == 0 {
            return bad("n_main, replications and n_jacobian must be at least 1");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.fd_relative > 0.0 && self.fd_floor > 0.0 && self.rate_floor > 0.0 && self.divergence_bound > 0.0) {
            return bad("perturbation sizes, rate floor and divergence bound must be positive");
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, EstimationError> {
        let c: Self = toml::from_str(s).map_err(|e| EstimationError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Step size at iteration `t` (1-based).
    pub fn gain(&self, t: usize) -> f64 {
        gain(self.gain_a, self.gain_b, t)
    }
}

pub fn gain(a: f64, b: f64, t: usize) -> f64 {
    a / (b + t as f64)
}

/// Start values: observed changes per actor for the rates, floored, and zero
/// for all weights.
pub fn initial_parameters(dataset: &PanelDataset, spec: &EffectSpec, rate_floor: f64) -> ParameterVector {
    let targets = target_statistics(dataset, spec);
    let n = dataset.n_actors() as f64;
    ParameterVector {
        rho_net: targets.net_rate.iter().map(|r| (r / n).max(rate_floor)).collect(),
        rho_beh: targets.beh_rate.iter().map(|r| (r / n).max(rate_floor)).collect(),
        beta_net: vec![0.0; spec.network().len()],
        beta_beh: vec![0.0; spec.behavior().len()],
    }
}

/// One Robbins–Monro update on the free coordinates, rates clamped at `floor`.
pub fn rm_step(theta: &[f64], gain: f64, scaled_deviation: &[f64], rate_mask: &[bool], free: &[bool], floor: f64) -> Vec<f64> {
    theta
        .iter()
        .zip(scaled_deviation)
        .zip(rate_mask.iter().zip(free))
        .map(|((&t, &d), (&is_rate, &is_free))| {
            if !is_free {
                return t;
            }
            let next = t - gain * d;
            if is_rate {
                next.max(floor)
            } else {
                next
            }
        })
        .collect()
}

/// Mean over the last quarter (at least one) of the iterates.
pub fn tail_average(iterates: &[Vec<f64>]) -> Vec<f64> {
    let k = iterates.len().div_ceil(4).max(1);
    let tail = &iterates[iterates.len() - k..];
    let mut mean = vec![0.0; tail[0].len()];
    for it in tail {
        mean.iter_mut().zip(it).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= k as f64);
    mean
}

/// Shared state of one estimation problem.
pub struct Problem<'a> {
    model: PanelModel<'a>,
    targets: Vec<f64>,
    names: Vec<String>,
    n_periods: usize,
    k_net: usize,
    k_beh: usize,
}

impl<'a> Problem<'a> {
    pub fn new(dataset: &'a PanelDataset, spec: &'a EffectSpec) -> Self {
        Self {
            model: PanelModel::new(dataset, spec),
            targets: target_statistics(dataset, spec).to_vec(),
            names: parameter_names(spec, dataset.n_periods()),
            n_periods: dataset.n_periods(),
            k_net: spec.network().len(),
            k_beh: spec.behavior().len(),
        }
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self, theta: &[f64]) -> ParameterVector {
        ParameterVector::from_slice(theta, self.n_periods, self.k_net, self.k_beh)
    }

    /// Statistics of simulations on streams `(phase, iteration, 0..reps)`,
    /// in stream order.
    pub fn simulate_many(
        &self,
        theta: &[f64],
        seed: u64,
        phase: u8,
        iteration: u64,
        reps: usize,
    ) -> Result<Vec<Vec<f64>>, SimError> {
        let params = self.params(theta);
        (0..reps as u64)
            .into_par_iter()
            .map(|r| self.model.simulated_statistics(&params, seed, stream_id(phase, iteration, r)))
            .collect()
    }

    /// Parameters whose statistics carry no information: weights of a side
    /// with no observed change in any period.
    pub fn inestimable(&self) -> Vec<bool> {
        let p = self.n_periods;
        let net_static = self.targets[..p].iter().all(|&v| v == 0.0);
        let beh_off = p + self.k_net;
        let beh_static = self.targets[beh_off..beh_off + p].iter().all(|&v| v == 0.0);
        let mut m = vec![false; self.targets.len()];
        if net_static {
            m[p..p + self.k_net].iter_mut().for_each(|x| *x = true);
        }
        if beh_static {
            m[beh_off + p..].iter_mut().for_each(|x| *x = true);
        }
        m
    }
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut mean = vec![0.0; rows[0].len()];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
    mean
}

fn sd_rows(rows: &[Vec<f64>], mean: &[f64]) -> Vec<f64> {
    let mut ss = vec![0.0; mean.len()];
    for r in rows {
        ss.iter_mut().zip(r.iter().zip(mean)).for_each(|(s, (v, m))| *s += (v - m) * (v - m));
    }
    let denom = (rows.len().max(2) - 1) as f64;
    ss.into_iter().map(|s| (s / denom).sqrt()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub gain: f64,
    pub theta: Vec<f64>,
    /// Largest scaled deviation driving this step.
    pub max_abs_scaled_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RmPath {
    pub start: Vec<f64>,
    /// Pilot SD of each statistic; 1 where the pilot SD was zero.
    pub scales: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub theta_hat: Vec<f64>,
}

/// Pilot simulations at `theta0` to fix per-statistic deviation scales.
pub fn pilot_scales(problem: &Problem<'_>, theta0: &[f64], config: &EstimationConfig) -> Result<Vec<f64>, SimError> {
    let sims = problem.simulate_many(theta0, config.seed, PHASE_PILOT, 0, config.n_pilot)?;
    let mean = mean_rows(&sims);
    Ok(sd_rows(&sims, &mean)
        .into_iter()
        .map(|s| if s > 0.0 { s } else { 1.0 })
        .collect())
}

/// Robbins–Monro iterations from `theta0`; `free` masks the updated
/// coordinates.
pub fn robbins_monro(
    problem: &Problem<'_>,
    theta0: &[f64],
    free: &[bool],
    config: &EstimationConfig,
) -> Result<RmPath, EstimationError> {
    config.validate()?;
    let scales = pilot_scales(problem, theta0, config)?;
    let rate_mask = problem.params(theta0).rate_mask();
    let mut theta = theta0.to_vec();
    let mut iterations = Vec::with_capacity(config.n_main);
    for t in 1..=config.n_main {
        let sims = problem.simulate_many(&theta, config.seed, PHASE_MAIN, t as u64, config.replications)?;
        let mean = mean_rows(&sims);
        let scaled: Vec<f64> = mean
            .iter()
            .zip(problem.targets())
            .zip(&scales)
            .map(|((s, target), sd)| (s - target) / sd)
            .collect();
        let g = config.gain(t);
        theta = rm_step(&theta, g, &scaled, &rate_mask, free, config.rate_floor);
        if let Some((k, &v)) = theta
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > config.divergence_bound)
        {
            return Err(EstimationError::Diverged {
                iteration: t,
                parameter: problem.names()[k].clone(),
                value: v,
            });
        }
        iterations.push(IterationRecord {
            iteration: t,
            gain: g,
            theta: theta.clone(),
            max_abs_scaled_deviation: scaled
                .iter()
                .zip(free)
                .filter(|(_, &f)| f)
                .fold(0.0f64, |m, (d, _)| m.max(d.abs())),
        });
    }
    let iterates: Vec<Vec<f64>> = iterations.iter().map(|r| r.theta.clone()).collect();
    Ok(RmPath {
        start: theta0.to_vec(),
        scales,
        theta_hat: tail_average(&iterates),
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticDiagnostics {
    pub name: String,
    pub target: f64,
    pub mean_deviation: f64,
    pub sd_deviation: f64,
    /// `None` when the statistic did not vary across simulations.
    pub t_ratio: Option<f64>,
    /// Zero spread but a non-zero mean deviation: the target is unreachable.
    pub non_stochastic: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub statistics: Vec<StatisticDiagnostics>,
    pub max_abs_t: f64,
    pub converged: bool,
    #[serde(skip)]
    pub simulations: Vec<Vec<f64>>,
}

/// Deviation summary of simulated statistics against targets.
pub fn deviation_summary(names: &[String], targets: &[f64], sims: &[Vec<f64>], tau: f64) -> ConvergenceReport {
    let mean = mean_rows(sims);
    let sd = sd_rows(sims, &mean);
    let statistics: Vec<StatisticDiagnostics> = (0..targets.len())
        .map(|k| {
            let dev = mean[k] - targets[k];
            let (t_ratio, non_stochastic) = if sd[k] > 0.0 {
                (Some(dev / sd[k]), false)
            } else if dev == 0.0 {
                (Some(0.0), false)
            } else {
                (None, true)
            };
            StatisticDiagnostics {
                name: names[k].clone(),
                target: targets[k],
                mean_deviation: dev,
                sd_deviation: sd[k],
                t_ratio,
                non_stochastic,
            }
        })
        .collect();
    let max_abs_t = statistics
        .iter()
        .filter_map(|s| s.t_ratio)
        .fold(0.0f64, |m, t| m.max(t.abs()));
    let converged = max_abs_t <= tau && !statistics.iter().any(|s| s.non_stochastic);
    ConvergenceReport {
        statistics,
        max_abs_t,
        converged,
        simulations: sims.to_vec(),
    }
}

/// `n_check` independent panel simulations at `theta_hat`.
pub fn convergence_check(
    problem: &Problem<'_>,
    theta_hat: &[f64],
    n_check: usize,
    seed: u64,
    tau: f64,
) -> Result<ConvergenceReport, EstimationError> {
    if n_check < 2 {
        return Err(EstimationError::Config("n_check must be at least 2".into()));
    }
    let sims = problem.simulate_many(theta_hat, seed, PHASE_CHECK, 0, n_check)?;
    Ok(deviation_summary(problem.names(), problem.targets(), &sims, tau))
}

/// Sample covariance of simulated statistics.
pub fn covariance(sims: &[Vec<f64>]) -> DMatrix<f64> {
    let mean = mean_rows(sims);
    let k = mean.len();
    let mut c = DMatrix::zeros(k, k);
    for s in sims {
        let d = DVector::from_iterator(k, s.iter().zip(&mean).map(|(a, m)| a - m));
        c += &d * d.transpose();
    }
    c / (sims.len().max(2) - 1) as f64
}

/// Forward-difference Jacobian `∂E[S]/∂θ` with common random numbers: the
/// base and every perturbed point reuse the same streams.
pub fn jacobian(problem: &Problem<'_>, theta: &[f64], config: &EstimationConfig) -> Result<DMatrix<f64>, EstimationError> {
    let p = theta.len();
    let base = problem.simulate_many(theta, config.seed, PHASE_JACOBIAN, 0, config.n_jacobian)?;
    let base_mean = mean_rows(&base);
    let mut d = DMatrix::zeros(problem.targets().len(), p);
    for k in 0..p {
        let h = (config.fd_relative * theta[k].abs()).max(config.fd_floor);
        let mut shifted = theta.to_vec();
        shifted[k] += h;
        let sims = problem.simulate_many(&shifted, config.seed, PHASE_JACOBIAN, 0, config.n_jacobian)?;
        let mean = mean_rows(&sims);
        for (row, (a, b)) in mean.iter().zip(&base_mean).enumerate() {
            d[(row, k)] = (a - b) / h;
        }
    }
    Ok(d)
}

/// `sqrt(diag(D⁻¹ Σ D⁻ᵀ))`; `names` label the rows of `d` for the
/// singularity diagnostic.
pub fn delta_method_se(d: &DMatrix<f64>, sigma: &DMatrix<f64>, names: &[String]) -> Result<Vec<f64>, EstimationError> {
    let svd = d.clone().svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    let (imin, min) = sv.argmin();
    if !(max > 0.0) || min <= SINGULAR_TOL * max {
        let u = svd.u.as_ref().expect("requested");
        let col = u.column(imin);
        let big = col.amax();
        let statistics = if max > 0.0 {
            col.iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > 1e-6 * big)
                .map(|(i, _)| names[i].clone())
                .collect()
        } else {
            names.to_vec()
        };
        return Err(EstimationError::Singular { statistics });
    }
    let inv = d.clone().try_inverse().ok_or_else(|| EstimationError::Singular {
        statistics: names.to_vec(),
    })?;
    let v = &inv * sigma * inv.transpose();
    Ok((0..v.nrows()).map(|i| v[(i, i)].max(0.0).sqrt()).collect())
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Delta-method standard errors at `theta_hat` for the free parameters;
/// `None` for fixed ones. `check` supplies the simulations for `Σ̂`.
pub fn standard_errors(
    problem: &Problem<'_>,
    theta_hat: &[f64],
    free: &[bool],
    check: &ConvergenceReport,
    config: &EstimationConfig,
) -> Result<Vec<Option<f64>>, EstimationError> {
    let idx: Vec<usize> = (0..theta_hat.len()).filter(|&k| free[k]).collect();
    let d = jacobian(problem, theta_hat, config)?;
    let sigma = covariance(&check.simulations);
    let names: Vec<String> = idx.iter().map(|&k| problem.names()[k].clone()).collect();
    let se = delta_method_se(&submatrix(&d, &idx, &idx), &submatrix(&sigma, &idx, &idx), &names)?;
    let mut out = vec![None; theta_hat.len()];
    for (&k, s) in idx.iter().zip(se) {
        out[k] = Some(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationResult {
    pub parameter_names: Vec<String>,
    pub theta_hat: ParameterVector,
    /// Per parameter in table order; `None` where not estimated.
    pub standard_errors: Option<Vec<Option<f64>>>,
    /// Why standard errors are unavailable, if they are.
    pub standard_error_failure: Option<String>,
    /// Parameters held at their start value for lack of information.
    pub inestimable: Vec<bool>,
    pub targets: TargetStatistics,
    pub convergence: ConvergenceReport,
    pub converged: bool,
    pub path: RmPath,
}

impl EstimationResult {
    pub fn theta_vec(&self) -> Vec<f64> {
        self.theta_hat.to_vec()
    }
}

/// Full estimation. Non-convergence and unavailable standard errors are
/// reported in the result, never silently dropped.
pub fn estimate(dataset: &PanelDataset, spec: &EffectSpec, config: &EstimationConfig) -> Result<EstimationResult, EstimationError> {
    config.validate()?;
    let problem = Problem::new(dataset, spec);
    let theta0 = initial_parameters(dataset, spec, config.rate_floor).to_vec();
    let inestimable = problem.inestimable();
    let free: Vec<bool> = inestimable.iter().map(|&x| !x).collect();
    let path = robbins_monro(&problem, &theta0, &free, config)?;
    let check = convergence_check(&problem, &path.theta_hat, config.n_check, config.seed, config.tau)?;
    let (standard_errors, standard_error_failure) =
        match standard_errors(&problem, &path.theta_hat, &free, &check, config) {
            Ok(se) => (Some(se), None),
            Err(e @ EstimationError::Singular { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
    Ok(EstimationResult {
        parameter_names: problem.names().to_vec(),
        theta_hat: problem.params(&path.theta_hat),
        standard_errors,
        standard_error_failure,
        inestimable,
        targets: target_statistics(dataset, spec),
        converged: check.converged,
        convergence: check,
        path,
    })
}

#[cfg(test)]
mod tests;
