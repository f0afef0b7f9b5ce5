mod common;

use adhocsim::metrics::{deliveries, Ledger};
use adhocsim::{simulate, NodeId, Protocol, SimConfig, SimTime};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn protocol() -> impl Strategy<Value = Protocol> {
    prop_oneof![Just(Protocol::Aodv), Just(Protocol::Dsdv)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn packets_are_conserved(scenario in any::<u64>(), seed in any::<u64>(), protocol in protocol()) {
        let spec = common::random_mobile(&mut ChaCha8Rng::seed_from_u64(scenario));
        let out = simulate(&spec, &SimConfig::new(protocol, seed)).unwrap();
        let l = &out.ledger;
        prop_assert_eq!(l.sent(), l.received() + l.dropped() + out.unresolved());
        prop_assert!(out.loop_violations.is_empty(), "{:?}", out.loop_violations);
    }

    #[test]
    fn deliveries_respect_geometry(scenario in any::<u64>(), protocol in protocol()) {
        let spec = common::random_mobile(&mut ChaCha8Rng::seed_from_u64(scenario));
        let out = simulate(&spec, &SimConfig::new(protocol, 7)).unwrap();
        let hop = spec.radio.hop_latency.as_secs();
        for d in deliveries(&out.ledger) {
            prop_assert!(d.path.first() == Some(&d.src) && d.path.last() == Some(&d.dst));
            // Every hop was a real link when it was taken: the transmitter
            // sent at departure and the frame spent one hop latency in the air.
            let ledger_tx: Vec<_> = out.ledger.events().iter()
                .filter(|e| e.uid == d.uid && e.kind == adhocsim::metrics::EventKind::DataTx)
                .collect();
            for (tx, next) in ledger_tx.iter().zip(d.path.iter().skip(1)) {
                let t = tx.t.as_secs();
                let adj = common::adjacency(&spec, t);
                prop_assert!(adj[tx.node.index()][next.index()], "uid {} hop {}->{} at {}", d.uid, tx.node, next, t);
            }
            prop_assert!(d.delay().as_secs() + 1e-9 >= d.hops() as f64 * hop);
        }
    }

    #[test]
    fn trace_round_trips(scenario in any::<u64>(), protocol in protocol()) {
        let spec = common::random_mobile(&mut ChaCha8Rng::seed_from_u64(scenario));
        let out = simulate(&spec, &SimConfig::new(protocol, 1)).unwrap();
        let text = out.ledger.to_trace();
        let back = Ledger::from_trace(&text).unwrap();
        prop_assert_eq!(back.to_trace(), text);
    }
}

/// Once DSDV has converged on a static topology every packet takes a
/// shortest path.
#[test]
fn dsdv_converges_to_shortest_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..40u64 {
        let n = 3 + (i as usize % 8);
        let (spec, src, dst) = common::random_static_connected(&mut rng, n, 300.0 + 80.0 * n as f64, 12.0);
        let want = common::bfs_dist(&common::adjacency(&spec, 0.0), src, dst).unwrap() as usize;
        let out = simulate(&spec, &SimConfig::new(Protocol::Dsdv, i)).unwrap();
        let late: Vec<_> =
            deliveries(&out.ledger).into_iter().filter(|d| d.sent_at >= SimTime::from_secs(10.0)).collect();
        assert!(!late.is_empty(), "topology #{i}: nothing delivered late in the run");
        for d in late {
            assert_eq!(d.hops(), want, "topology #{i}: {:?}", d.path);
        }
    }
}

/// A static connected network delivers everything once the route is up.
#[test]
fn static_networks_lose_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..40u64 {
        let n = 2 + (i as usize % 9);
        let (spec, src, dst) = common::random_static_connected(&mut rng, n, 300.0 + 80.0 * n as f64, 4.0);
        for protocol in [Protocol::Aodv, Protocol::Dsdv] {
            let out = simulate(&spec, &SimConfig::new(protocol, i)).unwrap();
            let l = &out.ledger;
            assert_eq!(l.dropped(), 0, "topology #{i} {protocol}");
            assert_eq!(l.received() + out.unresolved(), l.sent(), "topology #{i} {protocol}");
            assert!(deliveries(l).iter().all(|d| d.src == NodeId(src as u16) && d.dst == NodeId(dst as u16)));
        }
    }
}
