use coevo::baselines::fe_ols_design;
use coevo::effects::{target_statistics, BehaviorEffect, EffectContext, EffectSpec, NetworkEffect};
use coevo::oracle::{period_distribution, StateSpace, DEFAULT_STATE_CAP};
use coevo::panel::{classify_activity, ActivityCutoffs, Covariate};
use coevo::rng::stream_rng;
use coevo::simulator::{simulate_period, SimOptions};
use coevo::synth::{random_covariates, random_network, synthesize, SynthConfig};
use coevo::ParameterVector;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spec() -> EffectSpec {
    EffectSpec::new(
        vec![
            NetworkEffect::OutDegree,
            NetworkEffect::Transitivity,
            NetworkEffect::BehaviorSimilarity,
            NetworkEffect::CovariateSimilarity(Covariate::Gender),
            NetworkEffect::MapSimilarity,
        ],
        vec![
            BehaviorEffect::LinearTendency,
            BehaviorEffect::InfluenceSimilarity,
            BehaviorEffect::LapInfluence,
        ],
    )
    .unwrap()
}

fn params(rates: (f64, f64), beta: &[f64]) -> ParameterVector {
    ParameterVector {
        rho_net: vec![rates.0],
        rho_beh: vec![rates.1],
        beta_net: beta[..5].to_vec(),
        beta_beh: beta[5..].to_vec(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn periods_keep_ties_and_levels_in_range(
        seed in 0u64..10_000,
        n in 2usize..15,
        n_levels in 2u32..8,
        rates in (0.0f64..4.0, 0.0f64..4.0),
        beta in prop::collection::vec(-2.0f64..2.0, 8),
    ) {
        let mut rng = stream_rng(seed, 0);
        let net = random_network(n, 0.2, &mut rng);
        let beh: Vec<u32> = (0..n).map(|i| 1 + (i as u32 * 7 + seed as u32) % n_levels).collect();
        let covs = random_covariates(n, &mut rng);
        let labels = classify_activity(&beh, ActivityCutoffs::default());
        let ctx = EffectContext::new(&covs, &labels, n_levels);
        let opts = SimOptions { trace: false, verify_incremental: true };
        let out = simulate_period(&net, &beh, &params(rates, &beta), 0, &spec(), &ctx, &mut rng, opts).unwrap();
        prop_assert!(net.is_subset_of(&out.network));
        prop_assert!(out.behavior.iter().all(|&p| (1..=n_levels).contains(&p)));
        prop_assert!(net.ties_added_by(&out.network) as u64 <= out.network_events);
    }

    #[test]
    fn out_degree_and_rate_targets_count_ties(seed in 0u64..500, rho in 0.2f64..3.0) {
        let spec = EffectSpec::new(vec![NetworkEffect::OutDegree], vec![BehaviorEffect::LinearTendency]).unwrap();
        let cfg = SynthConfig {
            n_actors: 12,
            n_waves: 4,
            n_levels: 3,
            density: 0.1,
            effects: spec.clone(),
            params: ParameterVector { rho_net: vec![rho; 3], rho_beh: vec![1.0; 3], beta_net: vec![-0.5], beta_beh: vec![0.0] },
        };
        let d = synthesize(&cfg, seed).unwrap();
        let t = target_statistics(&d, &spec);
        let later: usize = d.networks()[1..].iter().map(|n| n.tie_count()).sum();
        prop_assert_eq!(t.net_effects[0], later as f64);
        for m in 0..3 {
            prop_assert_eq!(t.net_rate[m], 2.0 * d.network(m).ties_added_by(d.network(m + 1)) as f64);
            let moved: f64 = d.behavior(m).iter().zip(d.behavior(m + 1)).map(|(a, b)| (*a as f64 - *b as f64).abs()).sum();
            prop_assert_eq!(t.beh_rate[m], moved);
        }
    }

    #[test]
    fn oracle_distribution_is_a_probability_vector(
        seed in 0u64..1000,
        rates in (0.1f64..3.0, 0.1f64..3.0),
        beta in prop::collection::vec(-1.5f64..1.5, 8),
    ) {
        let mut rng = stream_rng(seed, 0);
        let net = random_network(3, 0.3, &mut rng);
        let beh = vec![1, 2, 1];
        let covs = random_covariates(3, &mut rng);
        let labels = classify_activity(&beh, ActivityCutoffs::default());
        let ctx = EffectContext::new(&covs, &labels, 2);
        let (space, dist) = period_distribution(&net, &beh, &params(rates, &beta), 0, &spec(), &ctx, DEFAULT_STATE_CAP).unwrap();
        prop_assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(dist.iter().all(|&p| p >= -1e-15));
        for (s, &p) in dist.iter().enumerate() {
            if p > 1e-15 {
                prop_assert!(net.is_subset_of(&space.state(s).0));
            }
        }
    }

    #[test]
    fn state_index_round_trips(n in 1usize..5, n_levels in 2u32..4, pick in any::<prop::sample::Index>()) {
        let space = StateSpace::new(n, n_levels, DEFAULT_STATE_CAP).unwrap();
        let s = pick.index(space.len());
        let (net, beh) = space.state(s);
        prop_assert_eq!(space.index(&net, &beh).unwrap(), s);
    }

    #[test]
    fn within_estimator_ignores_actor_shifts(
        xs in prop::collection::vec(-3.0f64..3.0, 24),
        noise in prop::collection::vec(-1.0f64..1.0, 24),
        shifts in prop::collection::vec(-100.0f64..100.0, 6),
    ) {
        let groups: Vec<usize> = (0..24).map(|r| r / 4).collect();
        let y: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| 0.7 * x + e).collect();
        let shifted: Vec<f64> = y.iter().zip(&groups).map(|(v, &g)| v + shifts[g]).collect();
        let names = vec!["x".to_string()];
        let x = DMatrix::from_column_slice(24, 1, &xs);
        let a = fe_ols_design(&names, &x, &DVector::from_vec(y), &groups).unwrap();
        let b = fe_ols_design(&names, &x, &DVector::from_vec(shifted), &groups).unwrap();
        let (ea, eb) = (a.coefficients[0].estimate.unwrap(), b.coefficients[0].estimate.unwrap());
        prop_assert!((ea - eb).abs() < 1e-9 * (1.0 + ea.abs()));
    }
}
