#![allow(dead_code)]

use geri_core::graph::{Edge, EdgeText, NodeText, Vocabulary};
use geri_core::{HeteroNetwork, InfoNetwork, NodeId};
use rand::Rng;

/// Network from `(a, b, weight)` edges and `(node, word, value)` text.
pub fn network(n: usize, edges: &[(u32, u32, f64)], text: &[(u32, &str, f64)]) -> HeteroNetwork {
    HeteroNetwork::build(&info(n, edges, text, &[]))
}

pub fn info(
    n: usize,
    edges: &[(u32, u32, f64)],
    text: &[(u32, &str, f64)],
    edge_text: &[(u32, u32, &str, f64)],
) -> InfoNetwork {
    let mut vocab = Vocabulary::new();
    let node_text = text
        .iter()
        .map(|&(v, w, value)| NodeText {
            node: NodeId(v),
            word: vocab.intern(w),
            value,
        })
        .collect();
    let edge_text = edge_text
        .iter()
        .map(|&(i, j, w, value)| EdgeText {
            node_i: NodeId(i),
            node_j: NodeId(j),
            word: vocab.intern(w),
            value,
        })
        .collect();
    let edges = edges
        .iter()
        .map(|&(a, b, weight)| Edge {
            source: NodeId(a),
            dest: NodeId(b),
            weight,
        })
        .collect();
    InfoNetwork::new(n, edges, node_text, edge_text, vocab).unwrap()
}

/// Random small network with real-valued weights, node text and edge text.
pub fn random_info<R: Rng>(rng: &mut R, max_targets: usize, max_words: usize) -> InfoNetwork {
    let n = rng.random_range(3..=max_targets);
    let words = rng.random_range(1..=max_words);
    let mut vocab = Vocabulary::new();
    let ids: Vec<_> = (0..words).map(|w| vocab.intern(&format!("w{w}"))).collect();
    let mut edges = Vec::new();
    for a in 0..n as u32 {
        for b in a + 1..n as u32 {
            if rng.random_bool(0.45) {
                edges.push(Edge {
                    source: NodeId(a),
                    dest: NodeId(b),
                    weight: rng.random_range(0.25..3.0),
                });
            }
        }
    }
    // keep the last node mentioned so re-parsing sees the same target count
    if !edges.iter().any(|e| e.dest.index() == n - 1) {
        edges.push(Edge {
            source: NodeId(0),
            dest: NodeId(n as u32 - 1),
            weight: 1.0,
        });
    }
    let mut node_text = Vec::new();
    for v in 0..n as u32 {
        for &w in &ids {
            if rng.random_bool(0.35) {
                node_text.push(NodeText {
                    node: NodeId(v),
                    word: w,
                    value: rng.random_range(0.25..2.0),
                });
            }
        }
    }
    let mut edge_text = Vec::new();
    for e in &edges {
        if rng.random_bool(0.2) {
            edge_text.push(EdgeText {
                node_i: e.source,
                node_j: e.dest,
                word: ids[rng.random_range(0..words)],
                value: rng.random_range(0.25..2.0),
            });
        }
    }
    InfoNetwork::new(n, edges, node_text, edge_text, vocab).unwrap()
}

pub fn random_network<R: Rng>(rng: &mut R, max_targets: usize, max_words: usize) -> HeteroNetwork {
    HeteroNetwork::build(&random_info(rng, max_targets, max_words))
}

/// Case-3 fixture: bridge t (id 5) -> target v (0). v's neighbors are
/// t (e=1), x1 target adjacent to t (e=1), x2 target not adjacent to t
/// (e=2), and x3 bridge not adjacent to t (e=1).
pub fn case3_fixture() -> (HeteroNetwork, NodeId, NodeId) {
    let net = network(
        5,
        &[(0, 1, 1.0), (0, 2, 2.0)],
        &[(0, "t", 1.0), (1, "t", 1.0), (0, "x3", 1.0), (3, "x3", 1.0), (4, "t", 1.0)],
    );
    (net, NodeId(5), NodeId(0))
}

/// All directed edges `(t, v)` of `net`.
pub fn directed_edges(net: &HeteroNetwork) -> Vec<(NodeId, NodeId)> {
    (0..net.node_count() as u32)
        .flat_map(|t| {
            net.neighbors(NodeId(t))
                .unwrap()
                .into_iter()
                .map(move |(v, _)| (NodeId(t), v))
        })
        .collect()
}
