use super::*;
use crate::effects::{BehaviorEffect, NetworkEffect};
use crate::network::Adjacency;
use crate::panel::CovariateTable;
use crate::synth::{synthesize, SynthConfig};

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("s{i}")).collect()
}

#[test]
fn gain_sequence_by_hand() {
    assert!((gain(1.0, 9.0, 1) - 0.1).abs() < 1e-15);
    assert!((gain(1.0, 9.0, 11) - 0.05).abs() < 1e-15);
    // a/(b+t) is decreasing towards zero and its partial sums grow like ln t
    let partial: f64 = (1..=100_000).map(|t| gain(1.0, 9.0, t)).sum();
    assert!(partial > (100_009.0f64 / 10.0).ln() - 0.1);
    assert!(gain(1.0, 9.0, 1_000_000) < 1e-5);
}

#[test]
fn rm_step_identities() {
    let theta = [0.5, 2.0, -1.0];
    let rate = [false, true, false];
    let free = [true; 3];
    assert_eq!(rm_step(&theta, 0.3, &[0.0; 3], &rate, &free, 1e-4), theta.to_vec());
    let next = rm_step(&theta, 0.1, &[2.0, 0.0, 0.0], &rate, &free, 1e-4);
    assert!((next[0] - 0.3).abs() < 1e-15);
    let clamped = rm_step(&theta, 1.0, &[0.0, 50.0, 0.0], &rate, &free, 1e-4);
    assert_eq!(clamped[1], 1e-4);
    let fixed = rm_step(&theta, 1.0, &[1.0, 1.0, 1.0], &rate, &[true, true, false], 1e-4);
    assert_eq!(fixed[2], -1.0);
}

#[test]
fn tail_average_uses_last_quarter() {
    let it: Vec<Vec<f64>> = (1..=8).map(|i| vec![i as f64]).collect();
    assert_eq!(tail_average(&it), vec![7.5]);
    assert_eq!(tail_average(&it[..1]), vec![1.0]);
}

#[test]
fn initial_rates_from_observed_change() {
    let w1 = Adjacency::from_edges(4, [(0, 1)]);
    let w2 = Adjacency::from_edges(4, [(0, 1), (2, 3), (1, 2)]);
    let d = PanelDataset::new(
        vec![w1.clone(), w2],
        vec![vec![1, 2, 2, 1], vec![2, 2, 1, 1]],
        2,
        CovariateTable::zeros(4),
    )
    .unwrap();
    let spec = EffectSpec::new(vec![NetworkEffect::OutDegree], vec![BehaviorEffect::LinearTendency]).unwrap();
    let p = initial_parameters(&d, &spec, 1e-4);
    assert_eq!(p.rho_net, vec![4.0 / 4.0]);
    assert_eq!(p.rho_beh, vec![2.0 / 4.0]);
    assert_eq!(p.beta_net, vec![0.0]);

    let still = PanelDataset::new(vec![w1.clone(), w1], vec![vec![1; 4]; 2], 2, CovariateTable::zeros(4)).unwrap();
    let p = initial_parameters(&still, &spec, 1e-4);
    assert_eq!((p.rho_net[0], p.rho_beh[0]), (1e-4, 1e-4));
    assert_eq!(Problem::new(&still, &spec).inestimable(), vec![false, true, false, true]);
}

#[test]
fn deviation_summary_cases() {
    // mean −370.044, SD 139.914: two draws at mean ± SD/√2
    let half = 139.914 / 2f64.sqrt();
    let sims = vec![vec![-370.044 - half], vec![-370.044 + half]];
    let r = deviation_summary(&names(1), &[0.0], &sims, 0.1);
    assert!((r.statistics[0].sd_deviation - 139.914).abs() < 1e-9);
    assert!((r.statistics[0].t_ratio.unwrap() - (-2.645)).abs() < 5e-4);
    assert!(!r.converged);

    let exact = deviation_summary(&names(2), &[3.0, 1.0], &[vec![3.0, 1.0], vec![3.0, 1.0]], 0.1);
    assert!(exact.converged);
    assert_eq!(exact.max_abs_t, 0.0);

    let stuck = deviation_summary(&names(1), &[3.0], &[vec![2.0], vec![2.0]], 0.1);
    assert!(stuck.statistics[0].non_stochastic);
    assert!(stuck.statistics[0].t_ratio.is_none());
    assert!(!stuck.converged);
}

#[test]
fn delta_method_identities() {
    let d = DMatrix::from_element(1, 1, 2.0);
    let se = delta_method_se(&d, &DMatrix::from_element(1, 1, 4.0), &names(1)).unwrap();
    assert!((se[0] - 1.0).abs() < 1e-15);
    let se = delta_method_se(&d, &DMatrix::zeros(1, 1), &names(1)).unwrap();
    assert_eq!(se[0], 0.0);

    // Third statistic is the sum of the first two.
    let d = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.2, 2.0, 0.1, 1.2, 2.5, 0.1]);
    let err = delta_method_se(&d, &DMatrix::identity(3, 3), &names(3)).unwrap_err();
    match err {
        EstimationError::Singular { statistics } => assert_eq!(statistics, names(3)),
        e => panic!("{e}"),
    }
    let d = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0]);
    match delta_method_se(&d, &DMatrix::identity(3, 3), &names(3)).unwrap_err() {
        EstimationError::Singular { statistics } => assert_eq!(statistics, vec!["s1".to_string(), "s2".to_string()]),
        e => panic!("{e}"),
    }
}

#[test]
fn delta_method_matches_closed_form_2x2() {
    let d = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 4.0]);
    let s = DMatrix::from_row_slice(2, 2, &[9.0, 1.0, 1.0, 16.0]);
    // D⁻¹ = [[1/2, −1/8], [0, 1/4]]
    let v00: f64 = 0.25 * 9.0 - 2.0 * 0.5 * 0.125 * 1.0 + 0.125 * 0.125 * 16.0;
    let v11: f64 = 0.0625 * 16.0;
    let se = delta_method_se(&d, &s, &names(2)).unwrap();
    assert!((se[0] - v00.sqrt()).abs() < 1e-12);
    assert!((se[1] - v11.sqrt()).abs() < 1e-12);
}

#[test]
fn config_validation_and_toml() {
    assert!(EstimationConfig::default().validate().is_ok());
    let c = EstimationConfig::from_toml_str("gain_a = 0.5\nseed = 3\n").unwrap();
    assert_eq!((c.gain_a, c.seed, c.n_main), (0.5, 3, 500));
    assert!(EstimationConfig::from_toml_str("gain_a = -1.0").is_err());
    assert!(EstimationConfig::from_toml_str("typo = 1").is_err());
    assert!(EstimationConfig::from_toml_str("n_check = 1").is_err());
}

fn small_problem() -> (PanelDataset, EffectSpec) {
    let spec = EffectSpec::new(
        vec![NetworkEffect::OutDegree, NetworkEffect::BehaviorSimilarity],
        vec![BehaviorEffect::LinearTendency],
    )
    .unwrap();
    let cfg = SynthConfig {
        n_actors: 20,
        n_waves: 3,
        n_levels: 4,
        density: 0.1,
        params: ParameterVector {
            rho_net: vec![2.0; 2],
            rho_beh: vec![2.0; 2],
            beta_net: vec![-1.5, 0.5],
            beta_beh: vec![-0.2],
        },
        effects: spec.clone(),
    };
    (synthesize(&cfg, 17).unwrap(), spec)
}

#[test]
fn robbins_monro_is_deterministic_and_thread_invariant() {
    let (d, spec) = small_problem();
    let config = EstimationConfig {
        n_pilot: 10,
        n_main: 40,
        replications: 3,
        seed: 5,
        ..Default::default()
    };
    let problem = Problem::new(&d, &spec);
    let theta0 = initial_parameters(&d, &spec, config.rate_floor).to_vec();
    let free = vec![true; theta0.len()];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| robbins_monro(&problem, &theta0, &free, &config).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.theta_hat, b.theta_hat);
    assert_eq!(a.scales, b.scales);
    assert_eq!(a.iterations.len(), 40);
    let mask = problem.params(&theta0).rate_mask();
    for it in &a.iterations {
        for (v, &r) in it.theta.iter().zip(&mask) {
            assert!(!r || *v > 0.0);
        }
    }
}

#[test]
fn divergence_guard_trips() {
    let (d, spec) = small_problem();
    let config = EstimationConfig {
        n_pilot: 5,
        n_main: 20,
        gain_a: 50.0,
        divergence_bound: 0.5,
        ..Default::default()
    };
    let problem = Problem::new(&d, &spec);
    let theta0 = initial_parameters(&d, &spec, config.rate_floor).to_vec();
    let free = vec![true; theta0.len()];
    assert!(matches!(
        robbins_monro(&problem, &theta0, &free, &config),
        Err(EstimationError::Diverged { .. })
    ));
}
