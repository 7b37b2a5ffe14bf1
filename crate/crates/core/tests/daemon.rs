use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sif_core::message::{ErrorCode, Message};
use sif_core::sif::chain_from_ids;
use sif_core::transport::daemon::{DaemonOptions, Envelope, Kind, LocalCluster};
use sif_core::transport::sim::SimNetwork;
use sif_core::transport::state_file;
use sif_core::transport::wire::{self, WireContext};
use sif_core::{create_archive, Archive, Error, FieldParams, GroupParams, Scheme, SharingPolicy};

fn archive(field: FieldParams, n: usize, k: usize, elements: &[u64], seed: u64) -> Archive {
    let policy = SharingPolicy::new(n, k, field).unwrap();
    let els: Vec<_> = elements.iter().map(|&e| field.reduce(e)).collect();
    create_archive(&policy, &els, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
}

fn options(ms: u64) -> DaemonOptions {
    DaemonOptions {
        timeout: Duration::from_millis(ms),
        state_path: None,
        record: true,
    }
}

#[test]
fn five_daemons_match_the_simulator() {
    let f = FieldParams::default();
    let elements = [854, 0x0a000001, 0xc0a80101, 17, 99];
    let mut sim = SimNetwork::new(archive(f, 5, 3, &elements, 1), None, 42);
    sim.enable_tap();
    let cluster = LocalCluster::spawn(archive(f, 5, 3, &elements, 1), None, 42, options(5000)).unwrap();
    let chains = [[1, 2, 3], [1, 4, 5], [1, 3, 5]];
    for (i, z) in [854u64, 855, 17, 4].into_iter().enumerate() {
        let chain = chain_from_ids(&cluster.policy, &chains[i % 3]).unwrap();
        let a = sim.run_query(f.reduce(z), &chain, Scheme::Sif).unwrap();
        let b = cluster.client.query(f.reduce(z), &chain, Scheme::Sif).unwrap();
        assert_eq!(a, b, "z = {z}");
        assert_eq!(a, elements.contains(&z));
    }
    let mut from_sim: Vec<_> = sim.take_tap().into_iter().map(|e| (e.from, e.to, e.bytes)).collect();
    let mut from_daemons: Vec<_> = cluster
        .daemons
        .iter()
        .flat_map(|d| d.transcript())
        .map(|r| (r.from, r.to, r.bytes))
        .collect();
    from_sim.sort();
    from_daemons.sort();
    assert_eq!(from_sim, from_daemons);
}

#[test]
fn csif_over_daemons() {
    let group = GroupParams::toy();
    let mut cluster = LocalCluster::spawn(archive(group.field(), 3, 2, &[3], 0), Some(group), 7, options(5000)).unwrap();
    let f = cluster.policy.field();
    let chain = chain_from_ids(&cluster.policy, &[1, 2]).unwrap();
    assert!(cluster.client.query(f.reduce(3), &chain, Scheme::Csif).unwrap());
    assert!(!cluster.client.query(f.reduce(4), &chain, Scheme::Csif).unwrap());
    // k = 2: the result travels back over the same pair of daemons
    let chain = chain_from_ids(&cluster.policy, &[3, 1]).unwrap();
    assert!(cluster.client.query(f.reduce(3), &chain, Scheme::Sif).unwrap());
    cluster.shutdown();
}

#[test]
fn wrong_modulus_is_answered_with_an_error_frame() {
    let f = FieldParams::default();
    let cluster = LocalCluster::spawn(archive(f, 3, 2, &[1], 0), None, 1, options(2000)).unwrap();
    let env = Envelope::new(Kind::StatusRequest, 4_294_967_291, 0, vec![]);
    let reply = cluster.client.request(1, &env).unwrap();
    assert_eq!(reply.kind, Kind::Protocol);
    assert_eq!(reply.payload[8], 5, "message type byte");
    match wire::decode(&reply.payload, &WireContext::new(f, None)).unwrap() {
        Message::Error(e) => assert_eq!(e.code, ErrorCode::ParamsMismatch),
        other => panic!("{other:?}"),
    }
}

#[test]
fn dead_mid_chain_daemon_times_out() {
    let f = FieldParams::default();
    let mut cluster = LocalCluster::spawn(archive(f, 5, 3, &[5, 6], 3), None, 1, options(400)).unwrap();
    let chain = chain_from_ids(&cluster.policy, &[1, 2, 3]).unwrap();
    assert!(cluster.client.query(f.reduce(6), &chain, Scheme::Sif).unwrap());
    cluster.daemon_mut(2).unwrap().shutdown();
    match cluster.client.query(f.reduce(6), &chain, Scheme::Sif) {
        Err(Error::Timeout(_)) => {}
        other => panic!("expected timeout, got {other:?}"),
    }
    // R_3 still holds the orphaned query term until its own timeout
    let chain = chain_from_ids(&cluster.policy, &[1, 4, 5]).unwrap();
    assert!(cluster.client.query(f.reduce(5), &chain, Scheme::Sif).unwrap());
}

#[test]
fn insert_then_query_and_alignment_abort() {
    let f = FieldParams::default();
    let mut cluster = LocalCluster::spawn(archive(f, 5, 3, &[1, 2], 4), None, 2, options(2000)).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let policy = cluster.policy.clone();
    cluster.client.insert(&policy, f.reduce(77), &mut rng).unwrap();
    cluster.client.insert(&policy, f.reduce(77), &mut rng).unwrap();
    for id in 1..=5 {
        assert_eq!(cluster.client.status(id).unwrap().element_count, 4);
    }
    let chain = chain_from_ids(&policy, &[2, 3, 4]).unwrap();
    assert!(cluster.client.query(f.reduce(77), &chain, Scheme::Sif).unwrap());

    cluster.daemon_mut(5).unwrap().shutdown();
    match cluster.client.insert(&policy, f.reduce(78), &mut rng) {
        Err(Error::Alignment(msg)) => assert!(msg.contains("repository 5"), "{msg}"),
        other => panic!("expected alignment abort, got {other:?}"),
    }
    for id in 1..=4 {
        assert_eq!(cluster.client.status(id).unwrap().element_count, 4);
    }
}

#[test]
fn daemon_persists_inserts() {
    let f = FieldParams::default();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r1.state");
    let states = archive(f, 3, 2, &[1], 5).into_repositories();
    let policy = states[0].policy().clone();
    let b = sif_core::transport::daemon::BoundDaemon::bind("127.0.0.1:0".parse().unwrap()).unwrap();
    let endpoint = b.local_addr().unwrap();
    let node = sif_core::RepositoryNode::new(states[0].clone(), None, 0, Default::default());
    let mut opts = options(2000);
    opts.state_path = Some(path.clone());
    let mut handle = b.start(node, [(1, endpoint)].into(), opts).unwrap();
    let client = sif_core::transport::daemon::Client::new([(1, endpoint)].into(), f, Duration::from_secs(2));
    let msgs = sif_core::archive::prepare_insert(&policy, 1, f.reduce(9), &mut ChaCha20Rng::seed_from_u64(0)).unwrap();
    let env = Envelope::protocol(f.modulus(), 0, &Message::Insert(msgs[0].1));
    assert_eq!(client.request(1, &env).unwrap().kind, Kind::Ack);
    handle.shutdown();
    let saved = state_file::load(&path).unwrap();
    assert_eq!(saved.element_count(), 2);
    assert_eq!(saved.shares().entries()[1], msgs[0].1.share);
}
