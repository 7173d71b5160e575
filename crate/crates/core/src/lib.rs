//! Simulation and method-of-moments estimation of stochastic actor-oriented
//! models for the joint evolution of an undirected friendship network and an
//! ordinal actor behavior.
//!
//! Data enter through [`panel`], model terms live in [`effects`], the
//! continuous-time chain in [`simulator`], and Robbins–Monro estimation in
//! [`estimator`]. [`oracle`] solves tiny instances exactly, and [`baselines`]
//! holds the discrete-time fixed-effects regressions used for comparison.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod effects;
pub mod estimator;
pub mod network;
pub mod oracle;
pub mod panel;
pub mod rng;
pub mod simulator;
pub mod synth;

pub use effects::{BehaviorEffect, EffectContext, EffectSpec, NetworkEffect, TargetStatistics};
pub use network::Adjacency;
pub use panel::{CovariateTable, PanelDataset};
pub use simulator::ParameterVector;
