//! Synthetic inputs for scalability runs: Erdős–Rényi graphs with random
//! word attachments.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Edge, InfoNetwork, NodeId, NodeText, Vocabulary};
use crate::seed;

/// Distinct words attached to each synthetic node.
pub const WORDS_PER_NODE: usize = 5;

/// Edges of `G(n, prob)` by geometric skipping (Batagelj and Brandes), in
/// `O(n + m)` expected time. Pairs are `(larger, smaller)`.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, prob: f64, rng: &mut R) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    if n < 2 || prob <= 0.0 {
        return edges;
    }
    if prob >= 1.0 {
        for v in 1..n as u32 {
            edges.extend((0..v).map(|w| (v, w)));
        }
        return edges;
    }
    let log_q = (1.0 - prob).ln();
    let (mut v, mut w) = (1usize, -1i64);
    while v < n {
        let r: f64 = rng.random();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((v as u32, w as u32));
        }
    }
    edges
}

/// Vocabulary size used for an `n`-node synthetic graph.
pub fn vocabulary_size(n: usize) -> usize {
    (n / 100).max(100)
}

/// `G(n, degree / (n - 1))` where every node carries
/// [`WORDS_PER_NODE`] distinct words of weight 1.
pub fn synthetic_network(n: usize, degree: f64, seed_value: u64) -> Result<InfoNetwork> {
    if n < 2 {
        return Err(Error::Config(format!("synthetic graphs need at least 2 nodes, got {n}")));
    }
    let prob = degree / (n - 1) as f64;
    let mut rng = seed::rng(seed_value, &[seed::stream::GRAPH, n as u64]);
    let edges = erdos_renyi(n, prob, &mut rng)
        .into_iter()
        .map(|(a, b)| Edge {
            source: NodeId(b),
            dest: NodeId(a),
            weight: 1.0,
        })
        .collect();
    let vocab_size = vocabulary_size(n);
    let mut vocab = Vocabulary::new();
    for w in 0..vocab_size {
        vocab.intern(&format!("s{w}"));
    }
    let mut rng = seed::rng(seed_value, &[seed::stream::TEXT, n as u64]);
    let words = WORDS_PER_NODE.min(vocab_size);
    let mut text = Vec::with_capacity(n * words);
    for v in 0..n as u32 {
        let mut picked: Vec<usize> = index::sample(&mut rng, vocab_size, words).into_vec();
        picked.sort_unstable();
        text.extend(picked.into_iter().map(|w| NodeText {
            node: NodeId(v),
            word: crate::graph::WordId(w as u32),
            value: 1.0,
        }));
    }
    InfoNetwork::new(n, edges, text, vec![], vocab)
}
