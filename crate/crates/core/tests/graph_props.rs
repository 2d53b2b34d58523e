mod common;

use std::collections::BTreeMap;

use common::{info, random_info};
use geri_core::graph::NodeKind;
use geri_core::{seed, HeteroNetwork, InfoNetwork, NodeId};
use proptest::prelude::*;

fn kinds(net: &HeteroNetwork, a: NodeId, b: NodeId) -> (NodeKind, NodeKind) {
    (net.kind(a), net.kind(b))
}

#[test]
fn bridges_never_touch_bridges() {
    let mut rng = seed::rng(11, &[]);
    for _ in 0..200 {
        let net = HeteroNetwork::build(&random_info(&mut rng, 9, 5));
        for v in 0..net.node_count() as u32 {
            for (x, _) in net.neighbors(NodeId(v)).unwrap() {
                assert_ne!(kinds(&net, NodeId(v), x), (NodeKind::Bridge, NodeKind::Bridge));
            }
        }
    }
}

#[test]
fn adjacency_is_symmetric_and_positive() {
    let mut rng = seed::rng(12, &[]);
    for _ in 0..200 {
        let net = HeteroNetwork::build(&random_info(&mut rng, 9, 5));
        for v in 0..net.node_count() as u32 {
            for (x, w) in net.neighbors(NodeId(v)).unwrap() {
                assert!(w > 0.0);
                assert_eq!(net.weight(x, NodeId(v)), Some(w));
            }
        }
    }
}

/// Weight bookkeeping recomputed from the raw lists.
#[test]
fn weight_is_conserved() {
    let mut rng = seed::rng(13, &[]);
    for _ in 0..200 {
        let info = random_info(&mut rng, 9, 5);
        let net = HeteroNetwork::build(&info);
        let expected: f64 = info.edges().iter().map(|e| e.weight).sum::<f64>()
            + info.node_text().iter().map(|t| t.value).sum::<f64>()
            + 2.0 * info.edge_text().iter().map(|t| t.value).sum::<f64>();
        assert!((net.total_weight() - expected).abs() < 1e-9 * expected.max(1.0));
    }
}

/// Every (target, bridge) weight equals the independent sum over both rules.
#[test]
fn bridge_weights_match_rule_sums() {
    let mut rng = seed::rng(14, &[]);
    for _ in 0..100 {
        let info = random_info(&mut rng, 8, 4);
        let net = HeteroNetwork::build(&info);
        let mut oracle: BTreeMap<(u32, String), f64> = BTreeMap::new();
        for t in info.node_text() {
            let word = info.vocabulary().word(t.word).to_string();
            *oracle.entry((t.node.0, word)).or_default() += t.value;
        }
        for t in info.edge_text() {
            let word = info.vocabulary().word(t.word).to_string();
            *oracle.entry((t.node_i.0, word.clone())).or_default() += t.value;
            *oracle.entry((t.node_j.0, word)).or_default() += t.value;
        }
        let words: std::collections::BTreeSet<&String> = oracle.keys().map(|(_, w)| w).collect();
        assert_eq!(net.bridge_count(), words.len());
        let mut seen = 0;
        for b in net.target_count()..net.node_count() {
            let b = NodeId(b as u32);
            let word = net.bridge_word(b).unwrap().to_string();
            for (v, w) in net.neighbors(b).unwrap() {
                let want = oracle[&(v.0, word.clone())];
                assert!((w - want).abs() < 1e-12);
                seen += 1;
            }
        }
        assert_eq!(seen, oracle.len());
    }
}

#[test]
fn merged_rules_sum() {
    let info = info(2, &[(0, 1, 1.0)], &[(0, "w0", 1.0)], &[(0, 1, "w0", 1.0)]);
    let net = HeteroNetwork::build(&info);
    assert_eq!(net.weight(NodeId(0), NodeId(2)), Some(2.0));
    assert_eq!(net.weight(NodeId(1), NodeId(2)), Some(1.0));
}

/// Edges keyed by node labels, so that word-id order does not matter.
fn labelled_edges(net: &HeteroNetwork) -> Vec<(String, String, u64)> {
    let mut out: Vec<_> = (0..net.node_count() as u32)
        .flat_map(|v| {
            net.neighbors(NodeId(v))
                .unwrap()
                .into_iter()
                .map(move |(x, w)| (net.label(NodeId(v)), net.label(x), (w * 1e9).round() as u64))
        })
        .collect();
    out.sort();
    out
}

fn roundtrip(info: &InfoNetwork) -> InfoNetwork {
    let dir = tempfile::tempdir().unwrap();
    let (e, nt, et) = (dir.path().join("e"), dir.path().join("nt"), dir.path().join("et"));
    info.write(&e, &nt, &et).unwrap();
    InfoNetwork::parse(&e, &nt, Some(&et)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_serialize_parse_is_identity(seed_value in any::<u64>()) {
        let mut rng = seed::rng(seed_value, &[]);
        let original = random_info(&mut rng, 8, 4);
        let once = roundtrip(&original);
        let twice = roundtrip(&once);
        prop_assert_eq!(&once, &twice);
        let (a, b) = (HeteroNetwork::build(&original), HeteroNetwork::build(&once));
        prop_assert_eq!(a.node_count(), b.node_count());
        prop_assert_eq!(labelled_edges(&a), labelled_edges(&b));
    }

    #[test]
    fn hetero_save_load_roundtrip(seed_value in any::<u64>()) {
        let mut rng = seed::rng(seed_value, &[]);
        let net = HeteroNetwork::build(&random_info(&mut rng, 8, 4));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h");
        net.save(&path).unwrap();
        prop_assert!(HeteroNetwork::is_serialized(&path).unwrap());
        let loaded = HeteroNetwork::load(&path).unwrap();
        let again = dir.path().join("h2");
        loaded.save(&again).unwrap();
        prop_assert_eq!(std::fs::read_to_string(&path).unwrap(), std::fs::read_to_string(&again).unwrap());
        prop_assert_eq!(loaded.node_count(), net.node_count());
        prop_assert_eq!(loaded.target_count(), net.target_count());
    }
}
