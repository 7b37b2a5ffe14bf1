use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sif_core::adversary::{
    csif_collusion_probe, hbc_uniformity_report, homogeneity_test, pooled_state_audit, sif_collusion_attack,
    sif_collusion_attack_from_query, chi_square_uniform, CollusionCoalition, CollusionOutcome, Provenance,
    Transcript, SIGNIFICANCE,
};
use sif_core::message::Blinded;
use sif_core::sif::chain_from_ids;
use sif_core::transport::sim::SimNetwork;
use sif_core::{
    create_archive, Error, FieldElement, FieldParams, GroupParams, NonceMode, QueryOptions, Scheme, SharingPolicy,
};

fn sim(field: FieldParams, n: usize, k: usize, elements: &[u64], seed: u64, group: Option<std::sync::Arc<GroupParams>>) -> SimNetwork {
    let policy = SharingPolicy::new(n, k, field).unwrap();
    let els: Vec<_> = elements.iter().map(|&e| field.reduce(e)).collect();
    let archive = create_archive(&policy, &els, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
    let mut net = SimNetwork::new(archive, group, seed);
    net.enable_tap();
    net
}

fn retain() -> QueryOptions {
    QueryOptions {
        erase_nonces: false,
        ..QueryOptions::default()
    }
}

fn last_txn(net: &SimNetwork) -> sif_core::TxnId {
    net.tap().last().unwrap().message.txn()
}

fn values(v: &[FieldElement]) -> Vec<u64> {
    v.iter().map(|x| x.value()).collect()
}

#[test]
fn collusion_recovers_christine() {
    let f = FieldParams::default();
    let mut net = sim(f, 5, 3, &[854], 1, None);
    net.set_options(retain());
    let chain = chain_from_ids(net.policy(), &[1, 2, 3]).unwrap();
    net.run_query(f.reduce(5), &chain, Scheme::Sif).unwrap();
    let coalition = CollusionCoalition::pool(&net, [1, 3]).unwrap();
    let out = sif_collusion_attack(&coalition, last_txn(&net)).unwrap();
    assert_eq!(values(out.recovered()), [854]);
}

#[test]
fn collusion_recovers_a_random_archive() {
    let f = FieldParams::default();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let elements: Vec<u64> = (0..100).map(|_| rng.gen_range(0..f.modulus())).collect();
    let mut net = sim(f, 6, 4, &elements, 3, None);
    net.set_options(retain());
    let chain = chain_from_ids(net.policy(), &[2, 5, 1, 6]).unwrap();
    net.run_query(f.reduce(1), &chain, Scheme::Sif).unwrap();
    let coalition = CollusionCoalition::pool(&net, [2, 6]).unwrap();
    let out = sif_collusion_attack(&coalition, last_txn(&net)).unwrap();
    assert_eq!(values(out.recovered()), elements);
}

#[test]
fn erased_nonces_defeat_the_retention_attack_but_not_the_query_term() {
    let f = FieldParams::default();
    let elements = [854, 1000, 7];
    let mut net = sim(f, 5, 3, &elements, 4, None);
    let chain = chain_from_ids(net.policy(), &[1, 2, 3]).unwrap();
    let z = f.reduce(1000);
    net.run_query(z, &chain, Scheme::Sif).unwrap();
    let coalition = CollusionCoalition::pool(&net, [1, 3]).unwrap();
    let txn = last_txn(&net);
    assert!(matches!(sif_collusion_attack(&coalition, txn), Err(Error::AttackPrecondition(_))));
    // the initiator still knows what it asked, and R_k holds Q = Z + nu
    let out = sif_collusion_attack_from_query(&coalition, txn, z).unwrap();
    assert_eq!(values(out.recovered()), elements);
}

#[test]
fn without_the_last_hop_only_blinded_partials() {
    let f = FieldParams::new(11).unwrap();
    let mut net = sim(f, 4, 3, &[3, 5], 5, None);
    net.set_options(retain());
    let chain = chain_from_ids(net.policy(), &[1, 2, 3]).unwrap();
    net.run_query(f.reduce(3), &chain, Scheme::Sif).unwrap();
    let coalition = CollusionCoalition::pool(&net, [1, 2]).unwrap();
    match sif_collusion_attack(&coalition, last_txn(&net)).unwrap() {
        CollusionOutcome::BlindedPartials(p) => assert_eq!(p.len(), 2),
        other => panic!("{other:?}"),
    }
}

/// Across fresh archives for the same element, `gamma_2 - nu` seen by
/// `{R_1, R_2}` is uniform and does not depend on the element.
#[test]
fn partials_without_last_hop_carry_no_information() {
    let f = FieldParams::new(11).unwrap();
    let chain_ids = [1, 2, 3];
    let sample = |d: u64, seeds: std::ops::Range<u64>| -> Vec<u64> {
        seeds
            .map(|seed| {
                let mut net = sim(f, 4, 3, &[d], seed, None);
                net.set_options(retain());
                let chain = chain_from_ids(net.policy(), &chain_ids).unwrap();
                net.run_query(f.reduce(0), &chain, Scheme::Sif).unwrap();
                let txn = last_txn(&net);
                let nu = net.node(1).unwrap().retained_nonces(&txn).unwrap()[0];
                let gamma2 = net
                    .tap()
                    .iter()
                    .find_map(|e| match &e.message {
                        sif_core::Message::Chain(m) if e.from == 2 => match &m.gamma {
                            Blinded::Field(v) => Some(v[0]),
                            _ => None,
                        },
                        _ => None,
                    })
                    .unwrap();
                (gamma2 - nu).value()
            })
            .collect()
    };
    let a = sample(3, 0..3000);
    let b = sample(7, 10_000..13_000);
    let mut counts = vec![0u64; 11];
    for &v in &a {
        counts[v as usize] += 1;
    }
    assert!(chi_square_uniform(&counts).2 > SIGNIFICANCE);
    assert!(homogeneity_test(&a, &b, 11).unwrap().p_value > SIGNIFICANCE);
}

fn hbc_run(mode: NonceMode, queries: usize) -> Transcript {
    let f = FieldParams::new(11).unwrap();
    let mut net = sim(f, 4, 3, &[2, 9, 4], 6, None);
    net.set_options(QueryOptions {
        nonce_mode: mode,
        ..QueryOptions::default()
    });
    let chain = chain_from_ids(net.policy(), &[1, 2, 3]).unwrap();
    for _ in 0..queries {
        net.run_query(f.reduce(9), &chain, Scheme::Sif).unwrap();
    }
    Transcript::from_tap(net.tap())
}

#[test]
fn honest_traffic_is_uniform_and_zero_nonces_are_not() {
    let f = FieldParams::new(11).unwrap();
    let honest = hbc_uniformity_report(&hbc_run(NonceMode::Uniform, 10_000), f).unwrap();
    // two chain hops and one query term, three components each
    assert_eq!(honest.positions.len(), 9);
    assert_eq!(honest.flagged().count(), 0, "{}", honest.to_text());
    let broken = hbc_uniformity_report(&hbc_run(NonceMode::Zero, 10_000), f).unwrap();
    assert_eq!(broken.flagged().count(), broken.positions.len());
    assert!(broken.to_csv().lines().count() == 10);
}

#[test]
fn uniformity_report_refuses_small_samples() {
    let f = FieldParams::new(11).unwrap();
    assert!(matches!(
        hbc_uniformity_report(&hbc_run(NonceMode::Uniform, 100), f),
        Err(Error::InsufficientSamples { needed: 10_000, got: 100 })
    ));
}

#[test]
fn first_hop_output_does_not_distinguish_neighbouring_archives() {
    let f = FieldParams::new(11).unwrap();
    let observe = |elements: &[u64]| {
        let mut net = sim(f, 4, 3, elements, 7, None);
        let chain = chain_from_ids(net.policy(), &[1, 2, 3]).unwrap();
        for _ in 0..5000 {
            net.run_query(f.reduce(1), &chain, Scheme::Sif).unwrap();
        }
        Transcript::from_tap(net.tap()).field_samples(1, 2, 1, 1)
    };
    let a = observe(&[4, 5, 6]);
    let b = observe(&[4, 8, 6]);
    assert_eq!(a.len(), 5000);
    let t = homogeneity_test(&a, &b, 11).unwrap();
    assert!(t.p_value > SIGNIFICANCE, "{t:?}");
}

#[test]
fn dictionary_probe_on_the_toy_group() {
    let group = GroupParams::toy();
    let f = group.field();
    let mut net = sim(f, 3, 2, &[3], 8, Some(group.clone()));
    net.set_options(retain());
    let chain = chain_from_ids(net.policy(), &[1, 2]).unwrap();
    net.run_query(f.reduce(5), &chain, Scheme::Csif).unwrap();
    let coalition = CollusionCoalition::pool(&net, [1, 2]).unwrap();
    let txn = last_txn(&net);
    let domain: Vec<_> = (0..11).map(|c| f.reduce(c)).collect();
    let hits = csif_collusion_probe(&coalition, &group, txn, &domain).unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!((hits[0].index, hits[0].candidate.value()), (0, 3));
    let without: Vec<_> = domain.iter().copied().filter(|c| c.value() != 3).collect();
    assert!(csif_collusion_probe(&coalition, &group, txn, &without).unwrap().is_empty());
}

#[test]
fn csif_coalition_holds_no_foreign_field_values() {
    let group = GroupParams::default_2048();
    let f = group.field();
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let elements: Vec<u64> = (0..20).map(|_| rng.gen()).collect();
    let mut net = sim(f, 5, 3, &elements, 9, Some(group));
    net.set_options(retain());
    let chain = chain_from_ids(net.policy(), &[1, 2, 3]).unwrap();
    net.run_query(f.reduce(elements[4]), &chain, Scheme::Csif).unwrap();
    let coalition = CollusionCoalition::pool(&net, [1, 3]).unwrap();
    let states: Vec<_> = net.nodes().map(|n| n.state().clone()).collect();
    let report = pooled_state_audit(&coalition, &states).unwrap();
    assert!(report.is_clean(), "{report:?}");
    assert!(report.group_items > 0);
}

#[test]
fn sif_coalition_around_a_hop_reads_its_shares() {
    let f = FieldParams::default();
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let elements: Vec<u64> = (0..20).map(|_| rng.gen_range(0..f.modulus())).collect();
    let mut net = sim(f, 5, 3, &elements, 10, None);
    let chain = chain_from_ids(net.policy(), &[1, 2, 3]).unwrap();
    net.run_query(f.reduce(1), &chain, Scheme::Sif).unwrap();
    let coalition = CollusionCoalition::pool(&net, [1, 3]).unwrap();
    let states: Vec<_> = net.nodes().map(|n| n.state().clone()).collect();
    let report = pooled_state_audit(&coalition, &states).unwrap();
    assert_eq!(report.exposed_shares.len(), 20);
    assert!(report
        .exposed_shares
        .iter()
        .all(|e| e.repository == 2 && e.provenance == Provenance::Derived(2)));
}

#[test]
fn audit_refuses_toy_fields() {
    let f = FieldParams::new(11).unwrap();
    let net = sim(f, 3, 2, &[1], 0, None);
    let coalition = CollusionCoalition::pool(&net, [1]).unwrap();
    let states: Vec<_> = net.nodes().map(|n| n.state().clone()).collect();
    assert!(pooled_state_audit(&coalition, &states).is_err());
}
