use std::sync::Arc;

use super::*;
use crate::dataset::{
    prepare_all, synthesize, Assignment, ConsumptionArchetype, PreparedCenter, SynthCenter, SynthConfig,
};
use crate::model::{IrradianceEmbedding, ModelConfig, NamedTensor, ParamSet, SplitPolicy};
use crate::numeric::ParamTensor;
use crate::Error;

fn scalar_set(v: f64) -> ParamSet {
    ParamSet {
        entries: vec![NamedTensor {
            name: "w".into(),
            tensor: ParamTensor::vector(vec![v]),
        }],
    }
}

fn emb(v: &[f64]) -> IrradianceEmbedding {
    IrradianceEmbedding(v.to_vec())
}

fn small_model() -> ModelConfig {
    ModelConfig {
        blocks: 1,
        d_emb: 8,
        d_k: 8,
        d_ff: 16,
        window_days: 2,
        learning_rate: 0.05,
        epochs_per_round: 1,
        batch_size: 8,
    }
}

fn centers(specs: &[(&str, usize, ConsumptionArchetype, f64)], days: usize, seed: u64) -> Vec<Arc<PreparedCenter>> {
    let config = SynthConfig {
        days,
        start_date: chrono::NaiveDate::from_ymd_opt(2012, 7, 1).unwrap(),
        centers: specs
            .iter()
            .map(|&(id, n, a, amp)| SynthCenter {
                irradiance_amplitude: amp,
                cloudiness: 0.2,
                ..SynthCenter::new(id, n, a)
            })
            .collect(),
    };
    let series = synthesize(&config, seed).unwrap();
    prepare_all(&series, &Assignment::from_series(&series), 2, 0.8)
        .unwrap()
        .into_iter()
        .map(Arc::new)
        .collect()
}

fn two_centers() -> Vec<Arc<PreparedCenter>> {
    centers(
        &[
            ("a", 2, ConsumptionArchetype::EveningPeak, 0.8),
            ("b", 2, ConsumptionArchetype::DaytimeHome, 1.2),
        ],
        12,
        3,
    )
}

fn params_bits(fed: &Federation) -> Vec<Vec<u64>> {
    fed.clients
        .iter()
        .map(|c| c.params.flatten().iter().map(|v| v.to_bits()).collect())
        .collect()
}

#[test]
fn base_aggregation_examples() {
    let (a, b) = (scalar_set(1.0), scalar_set(3.0));
    assert_eq!(
        aggregate_base(&[("a", &a), ("b", &b)], &[5, 5]).unwrap(),
        scalar_set(2.0)
    );
    let (z, f) = (scalar_set(0.0), scalar_set(4.0));
    assert_eq!(
        aggregate_base(&[("a", &z), ("b", &f)], &[3, 1]).unwrap(),
        scalar_set(1.0)
    );
    assert_eq!(aggregate_base(&[("a", &f)], &[7]).unwrap(), f);
}

#[test]
fn base_aggregation_names_mismatched_center() {
    let a = scalar_set(1.0);
    let mut b = scalar_set(1.0);
    b.entries[0].tensor = ParamTensor::vector(vec![1.0, 2.0]);
    match aggregate_base(&[("a", &a), ("bad", &b)], &[1, 1]) {
        Err(Error::Aggregation { center, .. }) => assert_eq!(center, "bad"),
        other => panic!("{other:?}"),
    }
    assert!(aggregate_base(&[("a", &a)], &[0]).is_err());
    assert!(aggregate_base(&[], &[]).is_err());
}

#[test]
fn weights_sum_to_one_and_match_volumes() {
    let w = aggregation_weights(&[3, 1, 46, 50]).unwrap();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert_eq!(w[0], 0.03);
    assert_eq!(w[2], 0.46);
}

#[test]
fn embedding_aggregation_examples() {
    let e = emb(&[0.3, -1.0, 2.0]);
    assert_eq!(aggregate_embedding(&[("a", &e), ("b", &e)], &[2, 9]).unwrap(), e);

    let (x, y) = (emb(&[1.0, 0.0]), emb(&[0.0, 1.0]));
    assert_eq!(
        aggregate_embedding(&[("a", &x), ("b", &y)], &[4, 4]).unwrap(),
        emb(&[0.5, 0.5])
    );

    let small = aggregate_embedding(&[("a", &x), ("b", &y)], &[1, 3]).unwrap();
    let large = aggregate_embedding(&[("a", &x), ("b", &y)], &[100, 300]).unwrap();
    assert_eq!(small, large);

    assert!(matches!(
        aggregate_embedding(&[("a", &x), ("c", &e)], &[1, 1]),
        Err(Error::Aggregation { center, .. }) if center == "c"
    ));
}

#[test]
fn lambda_examples() {
    let e = emb(&[1.0, 2.0, -0.5]);
    let neg = emb(&[-1.0, -2.0, 0.5]);
    let perp = emb(&[2.0, -1.0, 0.0]);
    assert!((compute_lambda(&e, &e).unwrap() - 1.0).abs() <= 1e-12);
    assert!(compute_lambda(&e, &neg).unwrap().abs() <= 1e-12);
    assert!((compute_lambda(&e, &perp).unwrap() - 0.5).abs() <= 1e-12);
}

#[test]
fn lambda_zero_norm_falls_back() {
    let z = emb(&[0.0; 3]);
    assert_eq!(compute_lambda(&z, &emb(&[1.0, 0.0, 0.0])).unwrap(), 0.5);
    assert_eq!(compute_lambda(&emb(&[1.0, 0.0, 0.0]), &z).unwrap(), 0.5);
    assert!(compute_lambda(&emb(&[f64::NAN]), &emb(&[1.0])).is_err());
    assert!(compute_lambda(&emb(&[1.0]), &emb(&[1.0, 2.0])).is_err());
}

#[test]
fn local_aggregate_examples() {
    let (l, g) = (scalar_set(2.0), scalar_set(4.0));
    assert_eq!(local_aggregate(&l, &g, 0.0).unwrap(), l);
    assert_eq!(local_aggregate(&l, &g, 1.0).unwrap(), g);
    assert_eq!(local_aggregate(&l, &g, 0.5).unwrap(), scalar_set(3.0));
    assert!(matches!(local_aggregate(&l, &g, 1.5), Err(Error::Contract(_))));
    assert!(matches!(local_aggregate(&l, &g, -0.1), Err(Error::Contract(_))));
}

#[test]
fn server_requires_consistent_embeddings() {
    let up = |id: &str, e: Option<IrradianceEmbedding>| ClientUpload {
        center_id: id.into(),
        base: scalar_set(1.0),
        embedding: e,
        volume: 1,
    };
    let g = server_aggregate(1, &[up("a", None), up("b", None)]).unwrap();
    assert!(g.embedding.is_none());
    match server_aggregate(1, &[up("a", Some(emb(&[1.0]))), up("b", None)]) {
        Err(Error::Aggregation { center, .. }) => assert_eq!(center, "b"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn strategy_names_round_trip() {
    for s in Strategy::ALL {
        assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
    }
    assert!("ditto".parse::<Strategy>().is_err());
}

#[test]
fn round_one_uses_initial_lambda_and_records_every_round() {
    let fed = run_pfl(
        &small_model(),
        FederationConfig::new(Strategy::Pfl, 1),
        two_centers(),
        3,
    )
    .unwrap();
    assert_eq!(fed.records.len(), 3);
    for c in &fed.records[0].centers {
        assert_eq!(c.lambda, Some(0.5));
    }
    for r in &fed.records[1..] {
        for c in &r.centers {
            let l = c.lambda.unwrap();
            assert!((0.0..=1.0).contains(&l));
        }
    }
    let g = fed.global.as_ref().unwrap();
    assert_eq!(g.embedding.as_ref().unwrap().len(), 3 * small_model().d_emb);
    assert!(g.base.names().all(|n| !n.starts_with("head.")));
}

#[test]
fn runs_are_deterministic_and_independent_of_scheduling() {
    let mut cfg = FederationConfig::new(Strategy::Pfl, 5);
    let a = run_pfl(&small_model(), cfg.clone(), two_centers(), 2).unwrap();
    let b = run_pfl(&small_model(), cfg.clone(), two_centers(), 2).unwrap();
    cfg.parallel = false;
    let c = run_pfl(&small_model(), cfg, two_centers(), 2).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.records, c.records);
    assert_eq!(params_bits(&a), params_bits(&c));
}

#[test]
fn single_client_degenerates_to_local_training() {
    let one = vec![two_centers().remove(0)];
    let pfl = run_pfl(&small_model(), FederationConfig::new(Strategy::Pfl, 2), one.clone(), 3).unwrap();
    let fedavg = run_fedavg(
        &small_model(),
        FederationConfig::new(Strategy::FedAvg, 2),
        one.clone(),
        3,
    )
    .unwrap();
    let local = run_local_only(&small_model(), FederationConfig::new(Strategy::LocalOnly, 2), one, 3).unwrap();
    assert_eq!(params_bits(&fedavg), params_bits(&local));
    // Own base is the global base, so λ = 1 and blending is exact.
    assert_eq!(params_bits(&pfl), params_bits(&local));
}

#[test]
fn fixed_zero_lambda_reduces_to_local_only() {
    let mut cfg = FederationConfig::new(Strategy::Pfl, 11);
    cfg.lambda = LambdaMode::Fixed(0.0);
    let pfl = run_pfl(&small_model(), cfg.clone(), two_centers(), 3).unwrap();
    let local = run_local_only(&small_model(), cfg, two_centers(), 3).unwrap();
    assert_eq!(params_bits(&pfl), params_bits(&local));
}

#[test]
fn fixed_one_lambda_with_empty_head_reduces_to_fedavg() {
    let mut cfg = FederationConfig::new(Strategy::Pfl, 11);
    cfg.lambda = LambdaMode::Fixed(1.0);
    cfg.split = SplitPolicy::EmptyHead;
    let pfl = run_pfl(&small_model(), cfg.clone(), two_centers(), 3).unwrap();
    let fedavg = run_fedavg(&small_model(), cfg, two_centers(), 3).unwrap();
    assert_eq!(params_bits(&pfl), params_bits(&fedavg));
    assert_eq!(pfl.global.unwrap().base, fedavg.global.unwrap().base);
}

#[test]
fn fedavg_clients_start_each_round_from_the_global_model() {
    let mut fed = Federation::new(
        &small_model(),
        FederationConfig::new(Strategy::FedAvg, 4),
        two_centers(),
    )
    .unwrap();
    fed.run(1).unwrap();
    let global = fed.global_model().unwrap().unwrap();
    for c in &fed.clients {
        assert_eq!(fed.evaluation_model(&c.center_id).unwrap(), global);
    }
}

#[test]
fn local_only_has_no_cross_center_flow() {
    let base = two_centers();
    let other = centers(&[("b", 3, ConsumptionArchetype::NightHeavy, 0.6)], 12, 9);
    let cfg = FederationConfig::new(Strategy::LocalOnly, 6);
    let x = run_local_only(&small_model(), cfg.clone(), base.clone(), 2).unwrap();
    let y = run_local_only(&small_model(), cfg, vec![base[0].clone(), other[0].clone()], 2).unwrap();
    assert_eq!(x.clients[0].params, y.clients[0].params);
    assert!(x.global.is_none());
}

#[test]
fn onboarding_starts_from_global_base() {
    let all = centers(
        &[
            ("a", 2, ConsumptionArchetype::EveningPeak, 0.8),
            ("b", 2, ConsumptionArchetype::DaytimeHome, 1.2),
            ("new", 1, ConsumptionArchetype::Flat, 1.0),
        ],
        12,
        3,
    );
    let mut fed = run_pfl(
        &small_model(),
        FederationConfig::new(Strategy::Pfl, 8),
        all[..2].to_vec(),
        2,
    )
    .unwrap();
    let before = params_bits(&fed);

    fed.add_center(all[2].clone()).unwrap();
    assert_eq!(params_bits(&fed)[..2], before[..]);
    let global = fed.global.clone().unwrap();
    let newcomer = fed.client("new").unwrap();
    assert_eq!(newcomer.params.split(SplitPolicy::OutputHead).0, global.base);
    assert_eq!(newcomer.lambda, 0.5);
    assert_ne!(newcomer.params.head, fed.clients[0].params.head);

    let shares = fed.volume_shares().unwrap();
    let total: usize = all.iter().map(|c| c.volume()).sum();
    assert_eq!(shares[2].1, all[2].volume() as f64 / total as f64);

    fed.run(1).unwrap();
    let rec = fed.records.last().unwrap();
    assert_eq!(rec.centers.len(), 3);
    assert_eq!(rec.center("new").unwrap().lambda, Some(0.5));
    assert!(fed.add_center(all[2].clone()).is_err());
}

#[test]
fn onboarding_needs_a_global_model() {
    let all = two_centers();
    let mut fed = Federation::new(
        &small_model(),
        FederationConfig::new(Strategy::Pfl, 1),
        all[..1].to_vec(),
    )
    .unwrap();
    assert!(matches!(fed.add_center(all[1].clone()), Err(Error::State(_))));
}

#[test]
fn snapshot_restore_continues_identically() {
    let data = two_centers();
    let cfg = FederationConfig::new(Strategy::Pfl, 13);
    let straight = run_pfl(&small_model(), cfg.clone(), data.clone(), 3).unwrap();

    let first = run_pfl(&small_model(), cfg, data.clone(), 2).unwrap();
    let text = serde_json::to_string(&first.snapshot()).unwrap();
    let mut resumed = Federation::restore(serde_json::from_str(&text).unwrap(), &data).unwrap();
    resumed.run(1).unwrap();
    assert_eq!(params_bits(&straight), params_bits(&resumed));
    assert_eq!(straight.records[2], resumed.records[0]);
}

#[test]
fn client_failures_name_the_center() {
    let mut cfg = small_model();
    cfg.learning_rate = 1e200;
    match run_local_only(&cfg, FederationConfig::new(Strategy::LocalOnly, 1), two_centers(), 1) {
        Err(Error::Client { center, source }) => {
            assert_eq!(center, "a");
            assert!(matches!(*source, Error::Divergence { .. }));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn config_validation() {
    let mut cfg = FederationConfig::new(Strategy::Pfl, 1);
    cfg.lambda = LambdaMode::Fixed(2.0);
    assert!(run_pfl(&small_model(), cfg, two_centers(), 1).is_err());
    assert!(run_pfl(
        &small_model(),
        FederationConfig::new(Strategy::Pfl, 1),
        two_centers(),
        0
    )
    .is_err());
    assert!(Federation::new(&small_model(), FederationConfig::new(Strategy::Pfl, 1), vec![]).is_err());
    let dup = two_centers();
    assert!(Federation::new(
        &small_model(),
        FederationConfig::new(Strategy::Pfl, 1),
        vec![dup[0].clone(), dup[0].clone()]
    )
    .is_err());
}
