//! Continuous-time micro-step simulation of network and behavior change.
//!
//! Within a period of unit length, change opportunities arrive as a Poisson
//! process with per-actor rates; at each opportunity one actor either adds
//! one tie or shifts its behavior by one level, choosing by multinomial logit
//! over the evaluation function of each resulting state.

mod params;

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::effects::{
    period_statistics, BehaviorEffect, BehaviorTerms, EffectContext, EffectSpec, NetworkEffect, NetworkTerms,
    PeriodStatistics, TargetStatistics,
};
use crate::network::Adjacency;
use crate::panel::{ActivityLabel, PanelDataset};
use crate::rng::{stream_rng, SimRng};

pub use params::{parameter_names, ParameterVector};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("total event rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("parameter shape: {0}")]
    Shape(String),
    #[error("period {period} out of range for {n_periods} periods")]
    Period { period: usize, n_periods: usize },
    #[error("incremental statistics diverged from recomputation for actor {actor}")]
    IncrementalMismatch { actor: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Network,
    Behavior,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Network => "network",
            Domain::Behavior => "behavior",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    NoChange,
    AddTie(usize),
    Shift(i8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub actor: usize,
    pub domain: Domain,
    pub choice: Choice,
}

impl fmt::Display for TraceEvent {
    /// `t,actor,domain,choice`; the choice is the new friend's id, `none`, or
    /// a signed level shift.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9},{},{},", self.time, self.actor, self.domain)?;
        match self.choice {
            Choice::NoChange if self.domain == Domain::Network => f.write_str("none"),
            Choice::NoChange => f.write_str("0"),
            Choice::AddTie(j) => write!(f, "{j}"),
            Choice::Shift(d) => write!(f, "{d:+}"),
        }
    }
}

/// Joint network/behavior state inside a period.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub network: Adjacency,
    pub behavior: Vec<u32>,
    /// Time elapsed in the current period, in `[0, 1]`.
    pub clock: f64,
}

impl ChainState {
    pub fn new(network: Adjacency, behavior: Vec<u32>) -> Self {
        Self {
            network,
            behavior,
            clock: 0.0,
        }
    }
}

/// Per-actor change-opportunity rates of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorRates {
    pub network: Vec<f64>,
    pub behavior: Vec<f64>,
    cum_network: Vec<f64>,
    cum_behavior: Vec<f64>,
}

impl ActorRates {
    fn from_rates(network: Vec<f64>, behavior: Vec<f64>) -> Self {
        let cum = |v: &[f64]| {
            v.iter()
                .scan(0.0, |acc, r| {
                    *acc += r;
                    Some(*acc)
                })
                .collect::<Vec<f64>>()
        };
        Self {
            cum_network: cum(&network),
            cum_behavior: cum(&behavior),
            network,
            behavior,
        }
    }

    pub fn total_network(&self) -> f64 {
        self.cum_network.last().copied().unwrap_or(0.0)
    }

    pub fn total_behavior(&self) -> f64 {
        self.cum_behavior.last().copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.total_network() + self.total_behavior()
    }
}

/// Rates `λ_i = ρ_m · exp(h_i)` with `h_i ≡ 0`: constant over actors and
/// over the state within a period.
pub fn actor_rates(state: &ChainState, params: &ParameterVector, period: usize) -> ActorRates {
    let n = state.behavior.len();
    // Actor-dependent rate modulation is held at zero.
    let h = 0.0f64;
    ActorRates::from_rates(
        vec![params.rho_net[period] * h.exp(); n],
        vec![params.rho_beh[period] * h.exp(); n],
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub dt: f64,
    pub actor: usize,
    pub domain: Domain,
}

/// Draws the waiting time to the next opportunity and who gets it. Returns
/// `None` when the waiting time runs past the end of the period.
pub fn next_event<R: Rng + ?Sized>(clock: f64, rates: &ActorRates, rng: &mut R) -> Result<Option<Event>, SimError> {
    let total = rates.total();
    if !(total > 0.0) {
        return Err(SimError::NonPositiveRate(total));
    }
    let u: f64 = rng.random();
    let dt = -(1.0 - u).ln() / total;
    if clock + dt > 1.0 {
        return Ok(None);
    }
    let v = rng.random::<f64>() * total;
    let net_total = rates.total_network();
    let (cum, v, domain) = if v < net_total {
        (&rates.cum_network, v, Domain::Network)
    } else {
        (&rates.cum_behavior, v - net_total, Domain::Behavior)
    };
    let actor = cum.partition_point(|&c| c <= v).min(cum.len() - 1);
    Ok(Some(Event { dt, actor, domain }))
}

/// Multinomial-logit probabilities of a set of utilities.
pub fn logit_probabilities(utilities: &[f64]) -> Vec<f64> {
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = utilities.iter().map(|u| (u - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Inverse-CDF draw from the logit over `utilities` using one uniform.
fn sample_logit(utilities: &[f64], weights: &mut Vec<f64>, u: f64) -> usize {
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    weights.clear();
    weights.extend(utilities.iter().map(|x| (x - max).exp()));
    let total: f64 = weights.iter().sum();
    let mut target = u * total;
    for (k, w) in weights.iter().enumerate() {
        if target < *w {
            return k;
        }
        target -= w;
    }
    weights.len() - 1
}

/// Alternatives of a network micro-step: `None` is "no change", `Some(j)`
/// adds the tie to `j`. Utilities are the actor's evaluation function on
/// each resulting network.
#[derive(Debug, Clone, Default)]
pub struct NetworkOptions {
    pub targets: Vec<Option<usize>>,
    pub utilities: Vec<f64>,
    terms: Vec<NetworkTerms>,
}

impl NetworkOptions {
    pub fn probabilities(&self) -> Vec<f64> {
        logit_probabilities(&self.utilities)
    }

    fn fill(
        &mut self,
        actor: usize,
        network: &Adjacency,
        behavior: &[u32],
        effects: &[NetworkEffect],
        beta: &[f64],
        ctx: &EffectContext<'_>,
    ) {
        self.targets.clear();
        self.utilities.clear();
        self.terms.clear();
        let base = NetworkTerms::compute(actor, network, behavior, ctx);
        self.targets.push(None);
        self.utilities.push(base.objective(effects, beta, actor, ctx));
        self.terms.push(base);
        for j in network.non_neighbors(actor) {
            let t = base.with_added_tie(actor, j, network, behavior, ctx);
            self.targets.push(Some(j));
            self.utilities.push(t.objective(effects, beta, actor, ctx));
            self.terms.push(t);
        }
    }
}

pub fn network_options(
    actor: usize,
    state: &ChainState,
    effects: &[NetworkEffect],
    beta: &[f64],
    ctx: &EffectContext<'_>,
) -> NetworkOptions {
    let mut o = NetworkOptions::default();
    o.fill(actor, &state.network, &state.behavior, effects, beta, ctx);
    o
}

/// Alternatives of a behavior micro-step: level shifts that stay in `[1, L]`.
#[derive(Debug, Clone, Default)]
pub struct BehaviorOptions {
    pub shifts: Vec<i8>,
    pub utilities: Vec<f64>,
    terms: Vec<BehaviorTerms>,
}

impl BehaviorOptions {
    pub fn probabilities(&self) -> Vec<f64> {
        logit_probabilities(&self.utilities)
    }

    fn fill(
        &mut self,
        actor: usize,
        network: &Adjacency,
        behavior: &[u32],
        effects: &[BehaviorEffect],
        beta: &[f64],
        ctx: &EffectContext<'_>,
    ) {
        self.shifts.clear();
        self.utilities.clear();
        self.terms.clear();
        for (k, t) in BehaviorTerms::neighborhood(actor, network, behavior, ctx.n_levels)
            .into_iter()
            .enumerate()
        {
            if let Some(t) = t {
                self.shifts.push(k as i8 - 1);
                self.utilities.push(t.objective(effects, beta, actor, ctx));
                self.terms.push(t);
            }
        }
    }
}

pub fn behavior_options(
    actor: usize,
    state: &ChainState,
    effects: &[BehaviorEffect],
    beta: &[f64],
    ctx: &EffectContext<'_>,
) -> BehaviorOptions {
    let mut o = BehaviorOptions::default();
    o.fill(actor, &state.network, &state.behavior, effects, beta, ctx);
    o
}

/// Reusable buffers for the event loop.
#[derive(Debug, Default)]
struct Scratch {
    net: NetworkOptions,
    beh: BehaviorOptions,
    weights: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn network_step<R: Rng + ?Sized>(
    actor: usize,
    state: &mut ChainState,
    effects: &[NetworkEffect],
    beta: &[f64],
    ctx: &EffectContext<'_>,
    rng: &mut R,
    scratch: &mut Scratch,
    verify: bool,
) -> Result<Choice, SimError> {
    scratch
        .net
        .fill(actor, &state.network, &state.behavior, effects, beta, ctx);
    let k = sample_logit(&scratch.net.utilities, &mut scratch.weights, rng.random());
    let choice = match scratch.net.targets[k] {
        None => Choice::NoChange,
        Some(j) => {
            state.network.add_tie(actor, j);
            Choice::AddTie(j)
        }
    };
    if verify && NetworkTerms::compute(actor, &state.network, &state.behavior, ctx) != scratch.net.terms[k] {
        return Err(SimError::IncrementalMismatch { actor });
    }
    Ok(choice)
}

#[allow(clippy::too_many_arguments)]
fn behavior_step<R: Rng + ?Sized>(
    actor: usize,
    state: &mut ChainState,
    effects: &[BehaviorEffect],
    beta: &[f64],
    ctx: &EffectContext<'_>,
    rng: &mut R,
    scratch: &mut Scratch,
    verify: bool,
) -> Result<Choice, SimError> {
    scratch
        .beh
        .fill(actor, &state.network, &state.behavior, effects, beta, ctx);
    let k = sample_logit(&scratch.beh.utilities, &mut scratch.weights, rng.random());
    let delta = scratch.beh.shifts[k];
    state.behavior[actor] = (state.behavior[actor] as i64 + delta as i64) as u32;
    if verify && BehaviorTerms::compute(actor, &state.network, &state.behavior) != scratch.beh.terms[k] {
        return Err(SimError::IncrementalMismatch { actor });
    }
    Ok(if delta == 0 { Choice::NoChange } else { Choice::Shift(delta) })
}

/// One network decision of `actor`: no change or one new tie.
pub fn network_micro_step<R: Rng + ?Sized>(
    actor: usize,
    state: &mut ChainState,
    effects: &[NetworkEffect],
    beta: &[f64],
    ctx: &EffectContext<'_>,
    rng: &mut R,
) -> Choice {
    network_step(actor, state, effects, beta, ctx, rng, &mut Scratch::default(), false)
        .expect("verification disabled")
}

/// One behavior decision of `actor`: a shift in `{-1, 0, +1}` within bounds.
pub fn behavior_micro_step<R: Rng + ?Sized>(
    actor: usize,
    state: &mut ChainState,
    effects: &[BehaviorEffect],
    beta: &[f64],
    ctx: &EffectContext<'_>,
    rng: &mut R,
) -> Choice {
    behavior_step(actor, state, effects, beta, ctx, rng, &mut Scratch::default(), false)
        .expect("verification disabled")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    /// Record every opportunity.
    pub trace: bool,
    /// Recompute the mover's statistics after each step and compare them
    /// with the incrementally derived ones.
    pub verify_incremental: bool,
}

#[derive(Debug, Clone)]
pub struct PeriodOutcome {
    pub network: Adjacency,
    pub behavior: Vec<u32>,
    pub trace: Option<Vec<TraceEvent>>,
    pub network_events: u64,
    pub behavior_events: u64,
}

/// Runs one period forward from the given start state.
#[allow(clippy::too_many_arguments)]
pub fn simulate_period<R: Rng + ?Sized>(
    network: &Adjacency,
    behavior: &[u32],
    params: &ParameterVector,
    period: usize,
    spec: &EffectSpec,
    ctx: &EffectContext<'_>,
    rng: &mut R,
    opts: SimOptions,
) -> Result<PeriodOutcome, SimError> {
    if period >= params.n_periods() {
        return Err(SimError::Period {
            period,
            n_periods: params.n_periods(),
        });
    }
    let mut state = ChainState::new(network.clone(), behavior.to_vec());
    let rates = actor_rates(&state, params, period);
    let mut out = PeriodOutcome {
        network: Adjacency::empty(0),
        behavior: Vec::new(),
        trace: opts.trace.then(Vec::new),
        network_events: 0,
        behavior_events: 0,
    };
    if rates.total() > 0.0 {
        let mut scratch = Scratch::default();
        while let Some(ev) = next_event(state.clock, &rates, rng)? {
            state.clock += ev.dt;
            let choice = match ev.domain {
                Domain::Network => {
                    out.network_events += 1;
                    network_step(
                        ev.actor,
                        &mut state,
                        spec.network(),
                        &params.beta_net,
                        ctx,
                        rng,
                        &mut scratch,
                        opts.verify_incremental,
                    )?
                }
                Domain::Behavior => {
                    out.behavior_events += 1;
                    behavior_step(
                        ev.actor,
                        &mut state,
                        spec.behavior(),
                        &params.beta_beh,
                        ctx,
                        rng,
                        &mut scratch,
                        opts.verify_incremental,
                    )?
                }
            };
            if let Some(trace) = out.trace.as_mut() {
                trace.push(TraceEvent {
                    time: state.clock,
                    actor: ev.actor,
                    domain: ev.domain,
                    choice,
                });
            }
        }
    }
    out.network = state.network;
    out.behavior = state.behavior;
    Ok(out)
}

/// A dataset bound to an effect spec, with the per-wave activity labels the
/// simulation freezes at the start of each period.
#[derive(Debug, Clone)]
pub struct PanelModel<'a> {
    dataset: &'a PanelDataset,
    spec: &'a EffectSpec,
    labels: Vec<Vec<ActivityLabel>>,
}

impl<'a> PanelModel<'a> {
    pub fn new(dataset: &'a PanelDataset, spec: &'a EffectSpec) -> Self {
        let labels = (0..dataset.n_waves()).map(|w| dataset.activity_labels(w)).collect();
        Self { dataset, spec, labels }
    }

    pub fn dataset(&self) -> &PanelDataset {
        self.dataset
    }

    pub fn spec(&self) -> &EffectSpec {
        self.spec
    }

    pub fn context(&self, wave: usize) -> EffectContext<'_> {
        EffectContext::new(self.dataset.covariates(), &self.labels[wave], self.dataset.n_levels())
    }

    /// Simulates every period from its observed start wave.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        params: &ParameterVector,
        rng: &mut R,
        opts: SimOptions,
    ) -> Result<Vec<PeriodOutcome>, SimError> {
        params
            .check_shape(self.spec, self.dataset.n_periods())
            .map_err(SimError::Shape)?;
        (0..self.dataset.n_periods())
            .map(|m| {
                simulate_period(
                    self.dataset.network(m),
                    self.dataset.behavior(m),
                    params,
                    m,
                    self.spec,
                    &self.context(m),
                    rng,
                    opts,
                )
            })
            .collect()
    }

    /// Moment statistics of simulated end states against their observed starts.
    pub fn statistics(&self, outcomes: &[PeriodOutcome]) -> TargetStatistics {
        let periods: Vec<PeriodStatistics> = outcomes
            .iter()
            .enumerate()
            .map(|(m, o)| {
                period_statistics(
                    self.dataset.network(m),
                    self.dataset.behavior(m),
                    &o.network,
                    &o.behavior,
                    &self.context(m),
                    self.spec,
                )
            })
            .collect();
        TargetStatistics::from_periods(&periods)
    }

    /// Flattened statistics of one panel simulation on stream `(seed, stream)`.
    pub fn simulated_statistics(&self, params: &ParameterVector, seed: u64, stream: u64) -> Result<Vec<f64>, SimError> {
        let mut rng: SimRng = stream_rng(seed, stream);
        let outcomes = self.simulate(params, &mut rng, SimOptions::default())?;
        Ok(self.statistics(&outcomes).to_vec())
    }
}

/// Conditional simulation of waves `2..=T`, each from its observed predecessor.
pub fn simulate_panel(
    dataset: &PanelDataset,
    params: &ParameterVector,
    spec: &EffectSpec,
    seed: u64,
) -> Result<Vec<PeriodOutcome>, SimError> {
    PanelModel::new(dataset, spec).simulate(params, &mut stream_rng(seed, 0), SimOptions::default())
}
